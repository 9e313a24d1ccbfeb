"""Testing whether an allocation is an epsilon-Walrasian allocation.

The tester builds each consumer's bounded trade set at the utility of the
allocated bundle, and asks whether ``-delta * 1`` (``delta = eps / h``) lies
in the convex hull of their union.  If it does not, the normalised
projection direction is a supporting price vector, which is then checked
directly against the two conditions of the definition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import convexgeom as cg
from .economy import (
    PLC,
    Allocation,
    ConcavityProfile,
    Economy,
    ShiftedPower,
    check_allocation,
    curvature_rhs,
    lipschitz_constant,
    min_curvature_radius,
    require_nondegenerate,
    strong_concavity,
    validate_curvature,
)
from .exceptions import (
    ConsistencyError,
    DegenerateUtilityError,
    InfeasibleError,
    InputError,
    NumericalFailure,
    UnsupportedFamilyError,
)

logger = logging.getLogger(__name__)

STRONG = "strong"
PLC_MODE = "plc"
DEFAULT_CAP_FACTOR = 4.0


@dataclass(frozen=True)
class ApproxParams:
    """Derived constants for one run of the tester.

    ``gamma``/``kappa``/``profile`` are set in strongly concave mode,
    ``lambda_big`` in PLC mode.
    """

    epsilon: float
    delta: float
    mode: str
    eta: float = 0.0
    gamma: Optional[float] = None
    lambda_big: Optional[float] = None
    kappa: Optional[int] = None
    profile: Optional[ConcavityProfile] = None

    @property
    def radius(self) -> float:
        return self.gamma if self.mode == STRONG else self.lambda_big

    def to_dict(self):
        d = {"epsilon": self.epsilon, "delta": self.delta, "mode": self.mode,
             "eta": self.eta, "gamma": self.gamma, "lambda_big": self.lambda_big,
             "kappa": self.kappa}
        if self.profile is not None:
            d["alpha"] = self.profile.alpha
            d["curvature_radius"] = self.profile.radius
            d["lipschitz"] = self.profile.lipschitz
            d["curvature_valid"] = self.profile.valid
        return d


def infer_mode(economy: Economy, mode: str = "auto") -> str:
    families = economy.families()
    if mode in ("auto", None):
        if families == {"shifted_power"}:
            return STRONG
        if families == {"plc"}:
            return PLC_MODE
        raise InputError("mixed utility families: pass an explicit mode")
    if mode in (STRONG, "strongly-concave", "strongly_concave"):
        if families != {"shifted_power"}:
            raise UnsupportedFamilyError("strong mode needs shifted_power utilities")
        return STRONG
    if mode == PLC_MODE:
        if families != {"plc"}:
            raise UnsupportedFamilyError("plc mode needs PLC utilities")
        return PLC_MODE
    raise InputError(f"unknown mode {mode!r}")


def gamma_radius(alpha, lipschitz, num_goods, delta):
    return math.sqrt(2.0 * (lipschitz * num_goods * delta + 1.0) / alpha)


def kappa_bound(alpha, lipschitz, num_goods, h, eps):
    return math.ceil((16.0 / alpha) * (lipschitz * num_goods * h / eps + h * h / (eps * eps)))


def worst_case_profile(economy: Economy, eps: float, radius: float | None = None
                       ) -> ConcavityProfile:
    """Smallest modulus and largest Lipschitz bound over all consumers.

    Without an explicit ``radius`` the smallest one that passes the
    curvature condition for every consumer is used.
    """
    utils = economy.utilities
    if not all(isinstance(u, ShiftedPower) for u in utils):
        raise UnsupportedFamilyError("curvature data exists for shifted_power only")
    ell, h = economy.num_goods, economy.h
    lam = max(lipschitz_constant(u) for u in utils)
    if radius is None:
        rhs = curvature_rhs(eps, lam, ell, h)
        radius = 0.0
        for u in utils:
            # re-express the shared Lipschitz bound as this consumer's epsilon
            eps_u = (rhs - 2.0) * h / (2.0 * lipschitz_constant(u) * ell)
            radius = max(radius, min_curvature_radius(u, eps_u, ell, h))
    alpha = min(strong_concavity(u, radius).alpha for u in utils)
    profile = ConcavityProfile(alpha=alpha, radius=radius, lipschitz=lam)
    ok = validate_curvature(profile, eps, ell, h).ok
    return ConcavityProfile(alpha=alpha, radius=radius, lipschitz=lam, valid=ok)


def lambda_big_bound(economy: Economy, cap_factor: float = DEFAULT_CAP_FACTOR) -> float:
    """Radius bounding every relevant trade in a PLC economy.

    Per consumer, the box corner ``b`` has ``b_a = u(total) / min nonzero U[:, a]``,
    or ``cap_factor * total_a`` when good ``a`` never enters the utility.
    """
    wbar = economy.total_endowment
    best = 0.0
    for i, c in enumerate(economy.consumers):
        u = c.utility
        if not isinstance(u, PLC):
            raise UnsupportedFamilyError("lambda_big_bound needs PLC utilities")
        if not np.any(u.U > 0) and not np.any(u.T > 0):
            raise DegenerateUtilityError(f"consumer {i}: PLC utility is identically zero")
        top = u.value(wbar)
        b = np.empty(economy.num_goods)
        for a in range(economy.num_goods):
            col = u.U[:, a]
            nz = col[col > 0]
            b[a] = top / nz.min() if nz.size else cap_factor * wbar[a]
        best = max(best, float(np.linalg.norm(b - c.endowment)))
    return best


def compute_params(economy: Economy, eps: float, mode: str = "auto", eta: float = 0.0,
                   radius: float | None = None,
                   cap_factor: float = DEFAULT_CAP_FACTOR) -> ApproxParams:
    if not eps > 0:
        raise InputError(f"epsilon must be positive, got {eps}")
    mode = infer_mode(economy, mode)
    ell, h = economy.num_goods, economy.h
    delta = eps / h
    if mode == STRONG:
        prof = worst_case_profile(economy, eps, radius)
        gamma = gamma_radius(prof.alpha, prof.lipschitz, ell, delta)
        kappa = kappa_bound(prof.alpha, prof.lipschitz, ell, h, eps)
        return ApproxParams(eps, delta, mode, eta, gamma=gamma, kappa=kappa, profile=prof)
    return ApproxParams(eps, delta, mode, eta,
                        lambda_big=lambda_big_bound(economy, cap_factor))


def build_trade_sets(economy: Economy, allocation: Allocation, radius: float,
                     eta: float = 0.0) -> list:
    """One trade set per consumer at threshold ``u_i(x_i) + eta``.

    Radii are enlarged to ``max(radius, 2||x_i - w_i||, 2||x_i||)`` so each set
    has interior and, at ``eta = 0``, contains the allocated trade.
    """
    sets = []
    for i, c in enumerate(economy.consumers):
        x = allocation.bundles[i]
        r = max(radius, 2.0 * float(np.linalg.norm(x - c.endowment)),
                2.0 * float(np.linalg.norm(x)))
        sets.append(cg.TradeSet(i, c.utility, c.utility.value(x) + eta, c.endowment, r, eta))
    return sets


@dataclass
class VerificationReport:
    price: np.ndarray
    epsilon: float
    budget_gaps: np.ndarray
    incomes: np.ndarray
    min_expenditures: np.ndarray
    condition_i: np.ndarray
    condition_ii: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.condition_i) and np.all(self.condition_ii))

    def to_dict(self):
        return {
            "price": self.price.tolist(),
            "epsilon": self.epsilon,
            "budget_gaps": self.budget_gaps.tolist(),
            "incomes": self.incomes.tolist(),
            "min_expenditures": self.min_expenditures.tolist(),
            "condition_i": [bool(v) for v in self.condition_i],
            "condition_ii": [bool(v) for v in self.condition_ii],
            "tol": self.tol,
            "passed": self.passed,
        }


@dataclass
class Verdict:
    """Outcome of :func:`test_walrasian`.

    A ``yes`` carries ``price`` and ``verification``; a ``no`` carries the
    hull ``witness`` (and optionally a blocking ``coalition``).
    """

    is_walrasian: bool
    params: ApproxParams
    price: Optional[np.ndarray] = None
    verification: Optional[VerificationReport] = None
    witness: object = None
    coalition: object = None
    hull_distance: float = 0.0

    @property
    def verdict(self) -> str:
        return "yes" if self.is_walrasian else "no"

    def to_dict(self):
        d = {"verdict": self.verdict, "params": self.params.to_dict(),
             "hull_distance": self.hull_distance}
        if self.is_walrasian:
            d["price"] = self.price.tolist()
            d["report"] = self.verification.to_dict()
        else:
            w = self.witness
            d["witness"] = {
                "indices": [int(i) for i in w.indices],
                "points": [np.asarray(p).tolist() for p in w.points],
                "weights": np.asarray(w.weights).tolist(),
                "residual": w.residual,
            }
            if self.coalition is not None:
                d["coalition"] = self.coalition.to_dict()
        return d


def _default_tol(economy):
    return 1e-7 * (1.0 + float(np.max(economy.total_endowment)))


def default_search_radius(economy: Economy) -> float:
    return 2.0 * float(np.max(economy.total_endowment))


def _box_oracle(R):
    def orc(y):
        lo = np.flatnonzero(y < 0)
        if lo.size:
            e = np.zeros_like(y)
            e[lo[0]] = 1.0
            return e
        hi = np.flatnonzero(y > R)
        if hi.size:
            e = np.zeros_like(y)
            e[hi[0]] = -1.0
            return e
        return None
    return orc


@dataclass
class ExpenditureResult:
    value: float
    lower_bound: float
    bundle: np.ndarray


def min_expenditure(utility, price, threshold: float, search_radius: float,
                    tol: float = 1e-9) -> ExpenditureResult:
    """Cheapest bundle in ``[0, R]^l`` reaching ``threshold``.

    ``value`` is attained by ``bundle``; ``lower_bound`` is the ellipsoid's
    certified lower bound on the true minimum over the box.
    """
    p = np.asarray(price, dtype=float).reshape(-1)
    n = p.shape[0]
    R = float(search_radius)
    corner = np.full(n, R)
    if utility.value(corner) < threshold:
        raise InfeasibleError(
            f"threshold {threshold:.6g} is not attainable inside the box [0, {R:.6g}]^{n}")
    if utility.value(np.zeros(n)) >= threshold:
        return ExpenditureResult(0.0, 0.0, np.zeros(n))
    box = _box_oracle(R)

    def oracle(y):
        pi = box(y)
        if pi is not None:
            return pi
        if utility.value(y) < threshold:
            g = utility.gradient(y)
            if not np.any(g > 0):
                raise DegenerateUtilityError("zero supergradient below the threshold")
            return g
        return None

    center = np.full(n, R / 2.0)
    res = _solve(oracle, -p, R * math.sqrt(n) / 2.0 * (1 + 1e-9), tol, center)
    return ExpenditureResult(-res.value, -res.upper_bound, res.point)


def _solve(oracle, c, radius, tol, center):
    try:
        return cg.ellipsoid_max(oracle, c, radius, tol, center=center)
    except InfeasibleError:
        raise
    except NumericalFailure as exc:
        if exc.incumbent is None:
            raise
        logger.warning("ellipsoid stopped early: %s", exc)
        return exc.incumbent


def verify_eps_walrasian(economy: Economy, allocation, price, eps: float,
                         tol: float | None = None,
                         search_radius: float | None = None) -> VerificationReport:
    """Check both conditions of the epsilon-Walrasian definition for ``price``.

    (i) ``|p.x_i - p.w_i| <= eps`` and (ii) every bundle at least as good as
    ``x_i`` costs at least ``p.w_i - eps/h``; (ii) uses the certified lower
    bound of the minimum expenditure.
    """
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    p = np.asarray(price, dtype=float).reshape(-1)
    if p.shape[0] != economy.num_goods:
        raise InputError("price vector has the wrong length")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InputError("price must lie on the simplex")
    if tol is None:
        tol = _default_tol(economy)
    if search_radius is None:
        search_radius = default_search_radius(economy)
    h = economy.h
    W = economy.endowments
    X = allocation.bundles
    incomes = W @ p
    gaps = np.abs(X @ p - incomes)
    mins = np.empty(h)
    for i, c in enumerate(economy.consumers):
        thr = c.utility.value(X[i])
        mins[i] = min_expenditure(c.utility, p, thr, search_radius, tol=tol * 1e-2).lower_bound
    cond_i = gaps <= eps + tol
    cond_ii = mins >= incomes - eps / h - tol
    return VerificationReport(p, eps, gaps, incomes, mins, cond_i, cond_ii, tol)


def extract_price(witness) -> np.ndarray:
    """Price vector from a :class:`~walrasian.convexgeom.Separated` witness."""
    if getattr(witness, "contained", True):
        raise InputError("only a separated witness carries a price")
    return cg.normalize_price(witness.price_direction)


def test_walrasian(economy: Economy, allocation, eps: float, mode: str = "auto",
                   tol: float | None = None, max_iters: int = cg.DEFAULT_MAX_ITERS,
                   search_radius: float | None = None,
                   params: ApproxParams | None = None) -> Verdict:
    """Decide whether ``allocation`` is an ``eps``-Walrasian allocation.

    Raises :class:`ConsistencyError` if the hull test separates but the
    extracted price then fails direct verification.
    """
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    if params is None:
        params = compute_params(economy, eps, mode)
    for c in economy.consumers:
        require_nondegenerate(c.utility)
    sets = build_trade_sets(economy, allocation, params.radius)
    nu = np.full(economy.num_goods, -params.delta)
    witness = cg.hull_membership(sets, nu, tol, max_iters)
    if witness.contained:
        return Verdict(False, params, witness=witness, hull_distance=witness.residual)
    price = extract_price(witness)
    report = verify_eps_walrasian(economy, allocation, price, eps, search_radius=search_radius)
    if not report.passed:
        raise ConsistencyError(
            f"hull test separated (distance {witness.distance:.3e}) but price "
            f"{price.tolist()} fails verification: {report.to_dict()}")
    return Verdict(True, params, price=price, verification=report, witness=witness,
                   hull_distance=witness.distance)


test_walrasian.__test__ = False


@dataclass
class ConversionReport:
    eps_hat: float
    max_utilities: np.ndarray
    utilities: np.ndarray
    budget_gaps: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.c1) and np.all(self.c2))

    def to_dict(self):
        return {"eps_hat": self.eps_hat, "max_utilities": self.max_utilities.tolist(),
                "utilities": self.utilities.tolist(), "budget_gaps": self.budget_gaps.tolist(),
                "c1": [bool(v) for v in self.c1], "c2": [bool(v) for v in self.c2],
                "passed": self.passed}


def utility_lipschitz(u) -> float:
    if isinstance(u, ShiftedPower):
        return lipschitz_constant(u)
    return float(np.max(u.U))


def eps_hat(eps, lipschitz, num_goods, h) -> float:
    return max(eps * lipschitz * math.sqrt(num_goods) / h, eps)


def max_budget_utility(utility, price, income, search_radius, tol=1e-9):
    """``max u(y)`` over ``{y >= 0 : p.y <= income, ||y||_inf <= R}``; returns the
    ellipsoid result (``value`` attained, ``upper_bound`` certified)."""
    p = np.asarray(price, dtype=float)
    n = p.shape[0]
    R = float(search_radius)
    box = _box_oracle(R)

    def oracle(y):
        pi = box(y)
        if pi is not None:
            return pi
        if p @ y > income:
            return -p
        return None

    if income <= 0:
        # only zero-priced goods are affordable
        y = np.where(p > 0, 0.0, R)
        v = utility.value(y)
        return cg.EllipsoidResult(y, v, v, 0, True)
    center = np.full(n, min(R, income) / 2.0 / max(n, 1))
    try:
        return cg.ellipsoid_max_concave(oracle, lambda y: (utility.value(y), utility.gradient(y)),
                                        n, R * math.sqrt(n) * (1 + 1e-9), tol, center=center)
    except NumericalFailure as exc:
        if exc.incumbent is None:
            raise
        return exc.incumbent


def convert_notion(economy: Economy, price, allocation, eps: float,
                   tol: float | None = None, search_radius: float | None = None):
    """Check the utility-approximation notion (budget feasibility and
    near-optimality) at
    ``eps_hat = max(eps * lambda * sqrt(l) / h, eps)``.

    Returns ``(eps_hat, ConversionReport)``.
    """
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    p = np.asarray(price, dtype=float).reshape(-1)
    if tol is None:
        tol = _default_tol(economy)
    if search_radius is None:
        search_radius = default_search_radius(economy)
    ell, h = economy.num_goods, economy.h
    lam = max(utility_lipschitz(c.utility) for c in economy.consumers)
    e_hat = eps_hat(eps, lam, ell, h)
    X = allocation.bundles
    W = economy.endowments
    utils = np.array([c.utility.value(X[i]) for i, c in enumerate(economy.consumers)])
    maxes = np.array([
        max_budget_utility(c.utility, p, float(p @ W[i]), search_radius, tol * 1e-2).upper_bound
        for i, c in enumerate(economy.consumers)])
    gaps = np.abs(X @ p - W @ p)
    c1 = maxes <= utils + e_hat + tol
    c2 = gaps <= e_hat + tol
    return e_hat, ConversionReport(e_hat, maxes, utils, gaps, c1, c2)
