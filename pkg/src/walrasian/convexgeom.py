"""Oracle-driven convex geometry over consumers' trade sets.

Everything here only talks to a trade set through :func:`separate`; the
linear optimisation oracle (:func:`lmo_hull`) is an ellipsoid method on top
of it and the hull projection is a fully corrective conditional-gradient
(Wolfe minimum-norm-point) loop on top of the LMO.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .economy import UtilitySpec
from .exceptions import (
    DegenerateUtilityError,
    InfeasibleError,
    InputError,
    NumericalFailure,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 50_000
CARATHEODORY_RESTARTS = 64


@dataclass(frozen=True, eq=False)
class TradeSet:
    """Net trades ``z`` with ``z + endowment >= 0``, ``u(z + endowment) >= threshold``
    and ``||z|| <= radius``."""

    consumer_index: int
    utility: UtilitySpec
    threshold: float
    endowment: np.ndarray
    radius: float
    margin: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.endowment, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "endowment", w)
        if not self.radius > 0:
            raise InputError(f"trade set radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.endowment.shape[0]


def _check_query(T: TradeSet, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != T.dim:
        raise InputError(f"query has length {q.shape[0]}, expected {T.dim}")
    return q


def trade_set_contains(T: TradeSet, q, tol: float = 0.0) -> bool:
    q = _check_query(T, q)
    x = q + T.endowment
    if np.any(x < -tol):
        return False
    if T.utility.value(np.maximum(x, 0.0)) < T.threshold - tol:
        return False
    return bool(np.linalg.norm(q) <= T.radius * (1.0 + tol))


def separate(T: TradeSet, q) -> Optional[np.ndarray]:
    """Return ``None`` if ``q`` lies in ``T``, else a nonzero ``pi`` with
    ``pi @ q < pi @ z`` for every ``z`` in ``T``.

    Violations are checked in a fixed order: nonnegativity of ``q + endowment``,
    then the utility threshold, then the norm bound.
    """
    q = _check_query(T, q)
    x = q + T.endowment
    neg = np.flatnonzero(x < 0)
    if neg.size:
        pi = np.zeros_like(q)
        pi[neg[0]] = 1.0
        return pi
    if T.utility.value(x) < T.threshold:
        pi = T.utility.gradient(x)
        if not np.any(pi > 0):
            raise DegenerateUtilityError(
                f"consumer {T.consumer_index}: active PLC piece has an all-zero row")
        return pi
    nq = float(np.linalg.norm(q))
    if nq > T.radius:
        return -q / (T.radius * nq)
    return None


@dataclass
class EllipsoidResult:
    point: np.ndarray
    value: float
    upper_bound: float
    iterations: int
    converged: bool


def _cut(x, P, a, depth, Pa=None):
    """Shrink ``E(x, P)`` to the minimum-volume ellipsoid containing
    ``E ∩ {z : a @ z >= a @ x + depth * sqrt(a' P a)}``, ``0 <= depth < 1``."""
    n = x.shape[0]
    if Pa is None:
        Pa = P @ a
    s = math.sqrt(float(a @ Pa))
    b = Pa / s
    if n == 1:
        x = x + 0.5 * (1.0 + depth) * b
        P = P * (0.25 * (1.0 - depth) ** 2)
        return x, P
    x = x + (1.0 + n * depth) / (n + 1.0) * b
    P = (n * n * (1.0 - depth * depth) / (n * n - 1.0)) * (
        P - (2.0 * (1.0 + n * depth) / ((n + 1.0) * (1.0 + depth))) * np.outer(b, b))
    return x, 0.5 * (P + P.T)


def ellipsoid_iteration_cap(n: int, outer_radius: float, tol_vol: float) -> int:
    return int(math.ceil(2 * n * (n + 1) * math.log(max(outer_radius / tol_vol, math.e))))


def ellipsoid_max(oracle: Callable[[np.ndarray], Optional[np.ndarray]], c, outer_radius: float,
                  tol: float, center=None, max_iter: int | None = None) -> EllipsoidResult:
    """Maximise ``c @ z`` over a convex body given by a separation oracle.

    The body must lie inside the ball of ``outer_radius`` around ``center``
    (origin by default) and have nonempty interior.  Feasible centres produce
    deep objective cuts at the incumbent value; ``upper_bound`` is the
    smallest ``max_E c @ z`` seen, so ``upper_bound - value`` certifies the
    optimality gap.

    Raises :class:`InfeasibleError` if the ellipsoid collapses before any
    feasible point is seen, and :class:`NumericalFailure` (carrying the
    incumbent) if the iteration cap is hit with the gap still above ``tol``.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    return _ellipsoid(oracle, lambda x: (float(c @ x), c), c.shape[0], outer_radius, tol,
                      center, max_iter, linear=True, scale=float(np.linalg.norm(c)))


def ellipsoid_max_concave(oracle, objective, n: int, outer_radius: float, tol: float,
                          center=None, max_iter: int | None = None) -> EllipsoidResult:
    """Like :func:`ellipsoid_max` for a concave objective.

    ``objective(x)`` returns ``(value, supergradient)`` and is only called at
    points the oracle accepts.
    """
    return _ellipsoid(oracle, objective, n, outer_radius, tol, center, max_iter,
                      linear=False, scale=1.0)


def _ellipsoid(oracle, objective, n, outer_radius, tol, center, max_iter, linear, scale):
    x = np.zeros(n) if center is None else np.array(center, dtype=float)
    R = float(outer_radius)
    P = np.eye(n) * R * R
    # floor keeps the cap finite when the objective (and so tol) is tiny
    tol_vol = max(tol / max(scale, 1.0) * 1e-3, 1e-15 * max(R, 1.0))
    if max_iter is None:
        max_iter = ellipsoid_iteration_cap(n, R, tol_vol)
    best, best_val, ub = None, -math.inf, math.inf
    shrink_floor = (1e-3 * tol_vol) ** 2
    zero_objective = linear and scale == 0.0

    for it in range(1, max_iter + 1):
        pi = oracle(x)
        if pi is None:
            val, g = objective(x)
            g = np.asarray(g, dtype=float)
            if val > best_val:
                best, best_val = x.copy(), val
            if zero_objective:
                return EllipsoidResult(best, 0.0, 0.0, it, True)
            # concavity: f(z) >= best  implies  g @ (z - x) >= best - f(x)
            a, depth_target = g, best_val - val + float(g @ x)
            ub = min(ub, val + math.sqrt(max(float(g @ P @ g), 0.0)))
        else:
            a, depth_target = np.asarray(pi, dtype=float), None
            if linear and not zero_objective:
                val, g = objective(x)
                ub = min(ub, val + math.sqrt(max(float(g @ P @ g), 0.0)))
        if best is not None and ub - best_val <= tol:
            return EllipsoidResult(best, best_val, ub, it, True)

        Pa = P @ a
        aPa = float(a @ Pa)
        if best is None and aPa <= shrink_floor * float(a @ a):
            # width along the cut is below resolution: no interior left
            raise InfeasibleError("ellipsoid collapsed without finding a feasible point")
        if not aPa > 0:
            if pi is None and not np.any(a):
                # zero supergradient at a feasible point: it is a global maximiser
                return EllipsoidResult(best, best_val, best_val, it, True)
            break
        depth = 0.0
        if depth_target is not None:
            depth = (depth_target - float(a @ x)) / math.sqrt(aPa)
            if depth >= 1.0:
                # nothing in E improves on the incumbent
                return EllipsoidResult(best, best_val, best_val, it, True)
            depth = max(depth, 0.0)
        x, P = _cut(x, P, a, depth, Pa)
        if best is None and np.max(np.diag(P)) < shrink_floor:
            raise InfeasibleError("ellipsoid collapsed without finding a feasible point")

    if best is None:
        raise InfeasibleError(f"no feasible point found in {max_iter} ellipsoid iterations")
    if ub - best_val <= tol:
        return EllipsoidResult(best, best_val, ub, max_iter, True)
    raise NumericalFailure(
        f"ellipsoid stopped with gap {ub - best_val:.3e} > tol {tol:.3e}",
        incumbent=EllipsoidResult(best, best_val, ub, max_iter, False), value=best_val)


class LMOResult(NamedTuple):
    index: int
    point: np.ndarray
    value: float
    upper_bound: float


def _lmo_tol(trade_sets, c):
    R = max(T.radius for T in trade_sets)
    return 1e-10 * (1.0 + R) * max(float(np.linalg.norm(c)), 1e-300)


def lmo_max(T: TradeSet, c, tol: float | None = None) -> EllipsoidResult:
    c = np.asarray(c, dtype=float)
    if tol is None:
        tol = _lmo_tol([T], c)
    try:
        return ellipsoid_max(lambda q: separate(T, q), c, T.radius * (1 + 1e-9), tol)
    except InfeasibleError:
        raise
    except NumericalFailure as exc:
        if exc.incumbent is None:
            raise
        logger.debug("ellipsoid for consumer %d stopped early: %s", T.consumer_index, exc)
        return exc.incumbent


def lmo_hull(trade_sets: Sequence[TradeSet], c, tol: float | None = None) -> LMOResult:
    """Maximise ``c @ z`` over the convex hull of the union of ``trade_sets``.

    The maximum over a hull of a union is the largest per-set maximum, so each
    set is solved separately; ties go to the lowest index.  Empty sets are
    skipped with a warning.
    """
    if not trade_sets:
        raise InputError("lmo_hull needs at least one trade set")
    c = np.asarray(c, dtype=float)
    if tol is None:
        tol = _lmo_tol(trade_sets, c)
    best = None
    ub = -math.inf
    for i, T in enumerate(trade_sets):
        try:
            res = lmo_max(T, c, tol)
        except InfeasibleError:
            warnings.warn(f"trade set of consumer {T.consumer_index} appears empty; skipped",
                          RuntimeWarning, stacklevel=2)
            continue
        ub = max(ub, res.upper_bound)
        if best is None or res.value > best[2]:
            best = (i, res.point, res.value)
    if best is None:
        raise InfeasibleError("every trade set is empty")
    return LMOResult(best[0], best[1], best[2], ub)


@dataclass
class HullProjection:
    """Result of projecting ``query`` onto the hull of the trade sets.

    ``points``/``weights``/``indices`` are the active atoms; their weighted
    sum is ``point``.  ``margin`` is a certified lower bound on
    ``min_z d @ (z - query)`` over the hull for ``d = point - query``; a
    positive value proves strict separation.
    """

    query: np.ndarray
    point: np.ndarray
    distance: float
    gap: float
    points: list
    weights: np.ndarray
    indices: list
    iterations: int
    status: str
    margin: float = -math.inf


def _affine_minimizer(A):
    """Weights ``a`` with ``sum(a) = 1`` minimising ``||a @ A||``."""
    m = A.shape[0]
    if m == 1:
        return np.ones(1)
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = A @ A.T
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    a = sol[:m]
    return a / a.sum()


def project_hull(trade_sets: Sequence[TradeSet], nu, tol: float | None = None,
                 max_iters: int = DEFAULT_MAX_ITERS, lmo_tol: float | None = None,
                 stop_on_separation: bool = True) -> HullProjection:
    """Euclidean projection of ``nu`` onto ``cvh(union of trade_sets)``.

    Runs Wolfe's minimum-norm-point iteration (a fully corrective conditional
    gradient method) on the shifted atoms ``z - nu`` with :func:`lmo_hull` as
    the linear minimisation oracle.  Stops when the iterate is within ``tol``
    of ``nu``, when the duality gap drops to ``tol**2``, or, if
    ``stop_on_separation``, as soon as a strictly separating direction is
    certified.
    """
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if tol is None:
        tol = 1e-6 * (1.0 + float(np.linalg.norm(nu)))
    eps_w = 1e-12

    first = lmo_hull(trade_sets, nu, lmo_tol)
    S = [first.point - nu]
    idx = [first.index]
    lam = np.ones(1)
    x = S[0].copy()
    gap = math.inf
    margin = -math.inf
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        dist = float(np.linalg.norm(x))
        if dist <= tol:
            status = "contained"
            break
        res = lmo_hull(trade_sets, -x, lmo_tol)
        s = res.point - nu
        # min over hull of x @ (z - nu) is at least -upper_bound - x @ nu
        margin = -res.upper_bound - float(x @ nu)
        gap = float(x @ x - x @ s)
        logger.debug("hull iter %d: dist=%.3e gap=%.3e margin=%.3e atoms=%d",
                     it, dist, gap, margin, len(S))
        if stop_on_separation and margin > 0:
            status = "separated"
            break
        if gap <= tol * tol:
            status = "converged"
            break
        if any(np.allclose(s, a, rtol=1e-12, atol=1e-14) for a in S):
            status = "stalled"
            break

        S.append(s)
        idx.append(res.index)
        lam = np.append(lam, 0.0)
        old_norm = dist
        while True:
            A = np.array(S)
            alpha = _affine_minimizer(A)
            if np.all(alpha > eps_w):
                lam = alpha
                break
            mask = (alpha <= eps_w) & (lam > alpha)
            if not np.any(mask):
                lam = np.clip(alpha, 0.0, None)
                lam /= lam.sum()
                break
            theta = float(np.min(lam[mask] / (lam[mask] - alpha[mask])))
            theta = min(max(theta, 0.0), 1.0)
            lam = theta * alpha + (1.0 - theta) * lam
            keep = lam > eps_w
            if np.all(keep):
                keep[np.argmin(lam)] = False
            S = [a for a, k in zip(S, keep) if k]
            idx = [j for j, k in zip(idx, keep) if k]
            lam = lam[keep]
            lam /= lam.sum()
        x = lam @ np.array(S)
        if float(np.linalg.norm(x)) >= old_norm * (1.0 - 1e-15):
            status = "stalled"
            break

    points = [a + nu for a in S]
    return HullProjection(query=nu, point=x + nu, distance=float(np.linalg.norm(x)), gap=gap,
                          points=points, weights=lam, indices=idx, iterations=it,
                          status=status, margin=margin)


@dataclass
class Contained:
    """``query`` is (within tolerance) a convex combination of trade-set points."""

    indices: list
    points: list
    weights: np.ndarray
    residual: float

    contained = True


@dataclass
class Separated:
    """``query`` is strictly outside the hull; ``price_direction`` lies on the simplex."""

    price_direction: np.ndarray
    distance: float
    margin: float
    projection: np.ndarray

    contained = False


def hull_membership(trade_sets: Sequence[TradeSet], nu, tol: float | None = None,
                    max_iters: int = DEFAULT_MAX_ITERS, lmo_tol: float | None = None):
    """Decide whether ``nu`` lies in the hull; returns :class:`Contained` or :class:`Separated`."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if tol is None:
        tol = 1e-6 * (1.0 + float(np.linalg.norm(nu)))
    if not tol > 0:
        raise InputError("hull tolerance must be positive")
    # run to convergence: an early stop gives a valid but imprecise price
    proj = project_hull(trade_sets, nu, tol, max_iters, lmo_tol, stop_on_separation=False)
    if proj.distance <= tol:
        return Contained(indices=list(proj.indices), points=list(proj.points),
                         weights=np.asarray(proj.weights), residual=proj.distance)
    if proj.status != "converged" and not proj.margin > 0:
        raise NumericalFailure(
            f"hull projection ended ({proj.status}) at distance {proj.distance:.3e} "
            f"without certifying separation (gap {proj.gap:.3e})",
            incumbent=proj, value=proj.distance)
    d = proj.point - nu
    p = normalize_price(d)
    # certified lower bound of min_z p @ (z - nu), rescaled from d to p
    margin = proj.margin / float(np.sum(np.abs(d)))
    return Separated(price_direction=p, distance=proj.distance, margin=margin,
                     projection=proj.point)


def normalize_price(direction, tol: float = 1e-8) -> np.ndarray:
    """l1-normalise a direction onto the simplex, clamping tiny negatives."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    l1 = float(np.sum(np.abs(d)))
    if not l1 > 0:
        raise NumericalFailure("zero separating direction; treat the query as contained")
    p = d / l1
    if np.any(p < -tol):
        logger.warning("separating direction has negative entries %s; clamping", p)
    p = np.clip(p, 0.0, None)
    if not p.sum() > 0:
        raise NumericalFailure("separating direction has no positive component")
    return p / p.sum()


class CaratheodoryResult(NamedTuple):
    multiplicities: np.ndarray
    error: float


def caratheodory_bound(points, k: int) -> float:
    Z = np.atleast_2d(np.asarray(points, dtype=float))
    return 2.0 * float(np.max(np.linalg.norm(Z, axis=1))) / math.sqrt(k)


def _greedy_rounding(Z, target, k):
    # uniform-step conditional gradient: each step adds one copy of the best atom
    beta = np.zeros(Z.shape[0], dtype=int)
    acc = np.zeros(Z.shape[1])
    for j in range(1, k + 1):
        cand = (acc[None, :] + Z) / j - target[None, :]
        t = int(np.argmin(np.einsum("ij,ij->i", cand, cand)))
        beta[t] += 1
        acc += Z[t]
    return beta


def approx_caratheodory(points, weights, k: int, rng_seed=0,
                        restarts: int = CARATHEODORY_RESTARTS) -> CaratheodoryResult:
    """Integer multiplicities ``beta`` (summing to ``k``) whose ``k``-uniform
    average approximates ``sum(weights * points)``.

    Draws ``k`` i.i.d. atoms from ``weights`` ``restarts`` times and keeps the
    closest; falls back to greedy rounding when the sampled best misses the
    ``2 max||z|| / sqrt(k)`` guarantee.
    """
    Z = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.asarray(weights, dtype=float).reshape(-1)
    if int(k) != k or k < 1:
        raise InputError(f"k must be a positive integer, got {k}")
    k = int(k)
    if lam.shape[0] != Z.shape[0]:
        raise InputError("need one weight per point")
    if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
        raise InputError("weights must be convex coefficients")
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    m = Z.shape[0]
    target = lam @ Z
    bound = caratheodory_bound(Z, k)

    rng = np.random.default_rng(rng_seed)
    draws = rng.choice(m, size=(restarts, k), p=lam)
    betas = np.stack([np.bincount(row, minlength=m) for row in draws])
    errs = np.linalg.norm(betas @ Z / k - target, axis=1)
    j = int(np.argmin(errs))
    beta, err = betas[j], float(errs[j])
    if err > bound:
        g = _greedy_rounding(Z, target, k)
        g_err = float(np.linalg.norm(g @ Z / k - target))
        if g_err < err:
            beta, err = g, g_err
    if err > bound * (1 + 1e-12) + 1e-15:
        raise NumericalFailure(
            f"approximate Caratheodory error {err:.3e} exceeds bound {bound:.3e}",
            incumbent=beta, value=err)
    return CaratheodoryResult(beta.astype(int), err)
