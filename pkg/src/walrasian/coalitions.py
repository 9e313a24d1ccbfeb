"""Blocking coalitions: equal treatment in replica economies and small
coalitions rounded from a hull witness."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import convexgeom as cg
from .economy import (
    DEFAULT_ETA_BAR,
    Allocation,
    Economy,
    ReplicaAllocation,
    check_allocation,
    utility_eval,
)
from .equilibrium import ApproxParams, build_trade_sets, compute_params
from .exceptions import ConsistencyError, InputError

logger = logging.getLogger(__name__)

DEFAULT_MAX_K = 10_000


@dataclass(frozen=True)
class BlockingCoalition:
    """Coalition in type-multiplicity form.

    ``members[j] = (type, multiplicity)`` and ``bundles[j]`` is the bundle each
    of those copies receives; ``reference[j]`` is the bundle they held under
    the blocked allocation.  ``surplus = sum beta * (w - y)`` over members.
    """

    members: tuple
    bundles: np.ndarray
    reference: np.ndarray
    eta: float
    surplus: np.ndarray

    @property
    def size(self) -> int:
        return int(sum(b for _, b in self.members))

    @property
    def types(self) -> list:
        return [t for t, _ in self.members]

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([b for _, b in self.members], dtype=int)

    def to_dict(self):
        return {
            "size": self.size,
            "members": [{"type": int(t), "multiplicity": int(b)} for t, b in self.members],
            "bundles": np.asarray(self.bundles).tolist(),
            "reference": np.asarray(self.reference).tolist(),
            "eta": self.eta,
            "surplus": np.asarray(self.surplus).tolist(),
        }


@dataclass(frozen=True)
class CertificateCheck:
    ok: bool
    surplus: np.ndarray
    gains: np.ndarray
    reasons: tuple = ()


def verify_coalition(economy: Economy, coalition: BlockingCoalition,
                     strict_surplus: bool = True, tol: float | None = None,
                     max_size: int | None = None) -> CertificateCheck:
    """Re-check a coalition from its raw data.

    Every member must be strictly better off, bundles must be nonnegative,
    and the weighted bundle total must not exceed the weighted endowment
    total (strictly in every good when ``strict_surplus``).
    """
    if tol is None:
        tol = economy.feasibility_tol()
    reasons = []
    beta = coalition.multiplicities
    Y = np.asarray(coalition.bundles, dtype=float)
    X = np.asarray(coalition.reference, dtype=float)
    W = economy.endowments[coalition.types]
    if np.any(beta < 1):
        reasons.append("multiplicities must be positive")
    if max_size is not None and coalition.size > max_size:
        reasons.append(f"size {coalition.size} exceeds {max_size}")
    if np.any(Y < 0):
        reasons.append("negative bundle entry")
        gains = np.full(len(beta), -np.inf)
    else:
        gains = np.array([
            utility_eval(economy.consumers[t].utility, Y[j])
            - utility_eval(economy.consumers[t].utility, X[j])
            for j, t in enumerate(coalition.types)])
        if np.any(gains <= 0):
            reasons.append(f"not every member strictly gains: {gains.tolist()}")
    surplus = beta @ (W - Y)
    if strict_surplus:
        if np.any(surplus <= 0):
            reasons.append(f"surplus not strictly positive: {surplus.tolist()}")
    elif np.any(surplus < -tol):
        reasons.append(f"coalition overspends its endowment: {surplus.tolist()}")
    return CertificateCheck(not reasons, surplus, gains, tuple(reasons))


@dataclass(frozen=True)
class EqualTreatment:
    holds: bool
    violating_type: Optional[int] = None

    def __bool__(self):
        return self.holds


def check_equal_treatment(replica: ReplicaAllocation, tol: float = 1e-9) -> EqualTreatment:
    """Whether all copies of each type hold the same bundle (within ``tol``)."""
    B = replica.bundles_by_copy
    spread = np.max(np.abs(B - B[:1]), axis=(0, 2))
    bad = np.flatnonzero(spread > tol)
    if bad.size:
        return EqualTreatment(False, int(bad[0]))
    return EqualTreatment(True)


def _top_up(utils, refs, Y, tol):
    """Move a small share of the best-off member's bundle to members with no gain."""
    gains = np.array([u.value(y) - u.value(x) for u, x, y in zip(utils, refs, Y)])
    flat = np.flatnonzero(gains <= tol)
    if flat.size == 0:
        return Y
    donor = int(np.argmax(gains))
    if gains[donor] <= tol:
        raise ConsistencyError("no member strictly gains after averaging")
    ud, xd, yd = utils[donor], refs[donor], Y[donor]
    target = ud.value(xd) + gains[donor] / 2.0

    # largest share s with u_d((1 - s) y_d) >= target, by bisection
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ud.value((1.0 - mid) * yd) >= target:
            lo = mid
        else:
            hi = mid
    s = lo
    if s <= 0:
        raise ConsistencyError("could not transfer any amount from the improving member")
    Y = Y.copy()
    Y[flat] += (s / flat.size) * yd
    Y[donor] = (1.0 - s) * yd
    return Y


def equal_treatment_block(economy: Economy, replica: ReplicaAllocation,
                          tol: float = 1e-12) -> BlockingCoalition:
    """Size-``h`` coalition blocking an allocation without equal treatment.

    Takes the worst-off copy of each type, gives it its type's average bundle,
    then shifts a small share from a strictly improved member to any member
    whose utility did not rise, so that every member gains.
    """
    if replica.h != economy.h or replica.bundles.shape[1] != economy.num_goods:
        raise InputError("replica allocation does not match the economy")
    if check_equal_treatment(replica):
        raise InputError("allocation has equal treatment; averaging cannot block it")
    B = replica.bundles_by_copy
    utils = economy.utilities
    refs = np.empty((economy.h, economy.num_goods))
    for t, u in enumerate(utils):
        vals = [u.value(B[c, t]) for c in range(replica.n)]
        refs[t] = B[int(np.argmin(vals)), t]
    Y = B.mean(axis=0)
    Y = _top_up(utils, refs, Y, tol)
    members = tuple((t, 1) for t in range(economy.h))
    surplus = economy.endowments.sum(axis=0) - Y.sum(axis=0)
    coal = BlockingCoalition(members, Y, refs, 0.0, surplus)
    check = verify_coalition(economy, coal, strict_surplus=False)
    if not check.ok:
        raise ConsistencyError(f"averaged coalition fails its certificate: {check.reasons}")
    return coal


def theoretical_k(params: ApproxParams) -> int:
    """``max(1, ceil(8 * radius**2 / delta**2))``."""
    return max(1, math.ceil(8.0 * params.radius ** 2 / params.delta ** 2))


def default_eta(eta_bar: float = DEFAULT_ETA_BAR) -> float:
    return min(0.01, eta_bar / 2.0)


@dataclass
class BlockSearch:
    """Outcome of :func:`find_blocking_coalition`; ``coalition`` is ``None`` on failure."""

    coalition: Optional[BlockingCoalition]
    diagnostic: str
    k: int
    params: ApproxParams
    rounding_error: float = math.nan
    rounded_point: Optional[np.ndarray] = None

    def to_dict(self):
        d = {"coalition": None if self.coalition is None else self.coalition.to_dict(),
             "diagnostic": self.diagnostic, "k": self.k,
             "rounding_error": None if math.isnan(self.rounding_error) else self.rounding_error}
        if self.rounded_point is not None:
            d["rounded_point"] = self.rounded_point.tolist()
        return d


def find_blocking_coalition(economy: Economy, allocation, eps: float,
                            eta: float | None = None, k: int | None = None,
                            rng_seed: int = 0, mode: str = "auto",
                            tol: float | None = None,
                            max_iters: int = cg.DEFAULT_MAX_ITERS) -> BlockSearch:
    """Try to build a blocking coalition of size at most ``k``.

    Writes ``-delta * 1`` as a convex combination of improving trades
    (threshold raised by ``eta``), rounds it to a ``k``-uniform combination,
    and keeps the result only if the rounded point is strictly negative and
    the coalition passes :func:`verify_coalition`.
    """
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    if eta is None:
        eta = default_eta()
    if not eta > 0:
        raise InputError(f"eta must be positive, got {eta}")
    params = compute_params(economy, eps, mode, eta=eta)
    if k is None:
        k = min(theoretical_k(params), DEFAULT_MAX_K)
    if int(k) != k or k < 1:
        raise InputError(f"k must be a positive integer, got {k}")
    k = int(k)

    sets = build_trade_sets(economy, allocation, params.radius, eta)
    nu = np.full(economy.num_goods, -params.delta)
    witness = cg.hull_membership(sets, nu, tol, max_iters)
    if not witness.contained:
        return BlockSearch(None, "separated: no improving combination reaches the target point",
                           k, params)

    Z = np.array(witness.points)
    rounding = cg.approx_caratheodory(Z, witness.weights, k, rng_seed=rng_seed)
    beta = rounding.multiplicities
    nu_k = (beta @ Z) / k
    if not np.all(nu_k < 0):
        return BlockSearch(None, f"k={k} too small: rounded point {nu_k.tolist()} is not "
                           "strictly negative", k, params, rounding.error, nu_k)

    # merge atoms of the same consumer; trade sets are convex so the average stays inside
    members, bundles, refs = [], [], []
    for t in sorted({int(i) for i in witness.indices}):
        sel = [j for j, i in enumerate(witness.indices) if i == t and beta[j] > 0]
        if not sel:
            continue
        b = int(beta[sel].sum())
        z = (beta[sel] @ Z[sel]) / b
        members.append((t, b))
        bundles.append(np.clip(z + economy.endowments[t], 0.0, None))
        refs.append(allocation.bundles[t])
    Y = np.array(bundles)
    R = np.array(refs)
    mult = np.array([b for _, b in members])
    surplus = mult @ (economy.endowments[[t for t, _ in members]] - Y)
    coal = BlockingCoalition(tuple(members), Y, R, eta, surplus)
    check = verify_coalition(economy, coal, strict_surplus=True, max_size=k)
    if not check.ok:
        return BlockSearch(None, "rounded coalition failed verification: "
                           + "; ".join(check.reasons), k, params, rounding.error, nu_k)
    gains = check.gains
    if np.any(gains < eta * (1 - 1e-6)):
        logger.info("coalition gains %s fall slightly short of eta=%g", gains, eta)
    return BlockSearch(coal, "blocking coalition found", k, params, rounding.error, nu_k)
