"""Exchange economies, allocations and the two supported utility families.

Bundles, endowments and prices are plain 1-d ``numpy`` arrays of length
``num_goods``; allocations are ``(h, num_goods)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    DegenerateUtilityError,
    InputError,
    UnsupportedFamilyError,
)

DEFAULT_ETA_BAR = 0.2


@dataclass(frozen=True)
class ShiftedPower:
    """``u(x) = (1/N) * sum_j (x_j + theta) ** rho`` with ``0 < rho < 1``."""

    rho: float
    theta: float
    N: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InputError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.theta > 0.0:
            raise InputError(f"theta must be positive, got {self.theta}")
        if not self.N > 0.0:
            raise InputError(f"N must be positive, got {self.N}")

    family = "shifted_power"

    def value(self, x):
        return float(np.sum((x + self.theta) ** self.rho)) / self.N

    def gradient(self, x):
        return (self.rho / self.N) * (x + self.theta) ** (self.rho - 1.0)


@dataclass(frozen=True, eq=False)
class PLC:
    """Piecewise-linear concave utility ``min_k (U[k] @ x + T[k])``."""

    U: np.ndarray
    T: np.ndarray

    family = "plc"

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        T = np.asarray(self.T, dtype=float).reshape(-1)
        if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] < 1:
            raise InputError("PLC coefficient matrix must have at least one piece")
        if T.shape[0] != U.shape[0]:
            raise InputError(
                f"PLC intercepts have {T.shape[0]} entries for {U.shape[0]} pieces")
        if np.any(U < 0) or np.any(T < 0):
            raise InputError("PLC coefficients and intercepts must be nonnegative")
        U.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "T", T)

    def __eq__(self, other):
        if not isinstance(other, PLC):
            return NotImplemented
        return np.array_equal(self.U, other.U) and np.array_equal(self.T, other.T)

    __hash__ = None

    def piece_values(self, x):
        return self.U @ x + self.T

    def value(self, x):
        return float(np.min(self.piece_values(x)))

    def active_piece(self, x):
        # argmin returns the first minimiser: lowest index wins ties
        return int(np.argmin(self.piece_values(x)))

    def gradient(self, x):
        return self.U[self.active_piece(x)].copy()


UtilitySpec = Union[ShiftedPower, PLC]


@dataclass(frozen=True, eq=False)
class Consumer:
    endowment: np.ndarray
    utility: UtilitySpec

    def __post_init__(self):
        w = np.asarray(self.endowment, dtype=float).reshape(-1)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("endowments must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "endowment", w)


@dataclass(frozen=True, eq=False)
class Economy:
    """An exchange economy: ``num_goods`` goods and an ordered list of consumers."""

    num_goods: int
    consumers: tuple

    def __post_init__(self):
        object.__setattr__(self, "consumers", tuple(self.consumers))
        if int(self.num_goods) < 1:
            raise InputError("an economy needs at least one good")
        if len(self.consumers) < 1:
            raise InputError("an economy needs at least one consumer")
        for i, c in enumerate(self.consumers):
            if c.endowment.shape[0] != self.num_goods:
                raise InputError(
                    f"consumer {i}: endowment has length {c.endowment.shape[0]}, "
                    f"expected {self.num_goods}")
            if isinstance(c.utility, PLC) and c.utility.U.shape[1] != self.num_goods:
                raise InputError(
                    f"consumer {i}: PLC matrix has {c.utility.U.shape[1]} columns, "
                    f"expected {self.num_goods}")
        if not np.all(self.total_endowment > 0):
            raise InputError("total endowment must be strictly positive in every good")

    @classmethod
    def from_arrays(cls, endowments, utilities):
        endowments = np.atleast_2d(np.asarray(endowments, dtype=float))
        if len(utilities) != endowments.shape[0]:
            raise InputError("need one utility per endowment row")
        consumers = [Consumer(w, u) for w, u in zip(endowments, utilities)]
        return cls(endowments.shape[1], consumers)

    @property
    def h(self) -> int:
        return len(self.consumers)

    @property
    def endowments(self) -> np.ndarray:
        return np.vstack([c.endowment for c in self.consumers])

    @property
    def total_endowment(self) -> np.ndarray:
        return np.sum([c.endowment for c in self.consumers], axis=0)

    @property
    def utilities(self) -> list:
        return [c.utility for c in self.consumers]

    def families(self) -> set:
        return {c.utility.family for c in self.consumers}

    def feasibility_tol(self) -> float:
        return 1e-9 * (1.0 + float(np.max(np.abs(self.total_endowment))))


@dataclass(frozen=True, eq=False)
class Allocation:
    bundles: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bundles, dtype=float))
        b.setflags(write=False)
        object.__setattr__(self, "bundles", b)

    def __len__(self):
        return self.bundles.shape[0]

    def __getitem__(self, i):
        return self.bundles[i]


@dataclass(frozen=True, eq=False)
class ReplicaAllocation:
    """Allocation of the ``n``-th replica; row ``c * h + t`` is copy ``c`` of type ``t``."""

    n: int
    bundles: np.ndarray

    def __post_init__(self):
        if int(self.n) < 1:
            raise InputError("replication factor must be at least 1")
        b = np.atleast_2d(np.asarray(self.bundles, dtype=float))
        if b.shape[0] % self.n:
            raise InputError(
                f"{b.shape[0]} bundles cannot be split into {self.n} copies")
        b.setflags(write=False)
        object.__setattr__(self, "bundles", b)

    @property
    def h(self) -> int:
        return self.bundles.shape[0] // self.n

    @property
    def bundles_by_copy(self) -> np.ndarray:
        """View of shape ``(n, h, num_goods)``."""
        return self.bundles.reshape(self.n, self.h, -1)


@dataclass(frozen=True)
class ConcavityProfile:
    alpha: float
    radius: float
    lipschitz: float
    valid: bool | None = None

    def __post_init__(self):
        for name in ("alpha", "radius", "lipschitz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be finite and positive, got {v}")


@dataclass(frozen=True)
class CurvatureCheck:
    ok: bool
    lhs: float
    rhs: float


def _as_bundle(x, num_goods=None):
    x = np.asarray(x, dtype=float).reshape(-1)
    if num_goods is not None and x.shape[0] != num_goods:
        raise InputError(f"bundle has length {x.shape[0]}, expected {num_goods}")
    return x


def _num_goods(u):
    return u.U.shape[1] if isinstance(u, PLC) else None


def utility_eval(u: UtilitySpec, x) -> float:
    x = _as_bundle(x, _num_goods(u))
    if np.any(x < 0):
        raise InputError("utility is only defined on the nonnegative orthant")
    return u.value(x)


def utility_supergradient(u: UtilitySpec, x) -> np.ndarray:
    """Gradient for the smooth family; the active piece's row for PLC."""
    x = _as_bundle(x, _num_goods(u))
    return u.gradient(x)


def lipschitz_constant(u: UtilitySpec) -> float:
    """Sup-norm gradient bound over the nonnegative orthant, ``rho * theta**(rho-1) / N``."""
    if not isinstance(u, ShiftedPower):
        raise UnsupportedFamilyError("lipschitz_constant is defined for shifted_power only")
    return u.rho * u.theta ** (u.rho - 1.0) / u.N


def strong_concavity(u: UtilitySpec, r: float) -> ConcavityProfile:
    if not isinstance(u, ShiftedPower):
        raise UnsupportedFamilyError("strong_concavity is defined for shifted_power only")
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    alpha = u.rho * (1.0 - u.rho) * (r + u.theta) ** (u.rho - 2.0) / u.N
    return ConcavityProfile(alpha=alpha, radius=float(r), lipschitz=lipschitz_constant(u))


def curvature_rhs(eps, lipschitz, num_goods, h):
    return 2.0 * eps * lipschitz * num_goods / h + 2.0


def validate_curvature(profile: ConcavityProfile, eps, num_goods, h) -> CurvatureCheck:
    lhs = profile.alpha * profile.radius ** 2
    rhs = curvature_rhs(eps, profile.lipschitz, num_goods, h)
    return CurvatureCheck(ok=bool(lhs >= rhs), lhs=lhs, rhs=rhs)


def min_curvature_radius(u: ShiftedPower, eps, num_goods, h) -> float:
    """Smallest ``r`` for which ``strong_concavity(u, r)`` passes ``validate_curvature``.

    ``alpha(r) * r**2`` is increasing in ``r`` for this family, so a bracket
    found by doubling plus a root solve suffices.
    """
    rhs = curvature_rhs(eps, lipschitz_constant(u), num_goods, h)

    def excess(r):
        return strong_concavity(u, r).alpha * r * r - rhs

    # excess < 0 near r = 0 because rhs >= 2
    lo, hi = 1e-12, 1.0
    while excess(hi) < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise InputError("no finite radius satisfies the curvature condition")
    r = brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    # nudge upward until the floating point predicate holds
    while excess(r) < 0:
        r = math.nextafter(r, math.inf) * (1 + 1e-15)
    return r


def normalize(economy: Economy, eta_bar: float = DEFAULT_ETA_BAR) -> Economy:
    """Rescale every shifted-power utility so that ``u(total endowment) = 1 - eta_bar``.

    PLC consumers are returned unchanged.
    """
    if not 0.0 < eta_bar < 1.0:
        raise InputError(f"eta_bar must lie in (0, 1), got {eta_bar}")
    wbar = economy.total_endowment
    consumers = []
    for c in economy.consumers:
        u = c.utility
        if isinstance(u, ShiftedPower):
            N = float(np.sum((wbar + u.theta) ** u.rho)) / (1.0 - eta_bar)
            u = replace(u, N=N)
        consumers.append(Consumer(c.endowment, u))
    return Economy(economy.num_goods, consumers)


def replicate(economy: Economy, n: int) -> Economy:
    """The ``n``-th replica, consumers ordered copy-major: (copy 0, type 0), (copy 0, type 1), ..."""
    if int(n) != n or n < 1:
        raise InputError(f"replication factor must be a positive integer, got {n}")
    return Economy(economy.num_goods, list(economy.consumers) * int(n))


def check_allocation(economy: Economy, bundles, tol: float | None = None) -> Allocation:
    """Validate shape, sign and market clearing; return an :class:`Allocation`."""
    b = np.atleast_2d(np.asarray(bundles, dtype=float))
    if b.shape != (economy.h, economy.num_goods):
        raise InputError(
            f"allocation has shape {b.shape}, expected {(economy.h, economy.num_goods)}")
    if not np.all(np.isfinite(b)):
        raise InputError("allocation contains non-finite entries")
    if tol is None:
        tol = economy.feasibility_tol()
    if np.any(b < -tol):
        raise InputError("allocation bundles must be nonnegative")
    excess = b.sum(axis=0) - economy.total_endowment
    if np.max(np.abs(excess)) > tol:
        raise InputError(
            f"allocation does not clear markets: excess demand {excess.tolist()}")
    return Allocation(np.clip(b, 0.0, None))


def check_replica_allocation(economy: Economy, n: int, bundles,
                             tol: float | None = None) -> ReplicaAllocation:
    ra = ReplicaAllocation(n, bundles)
    if ra.h != economy.h or ra.bundles.shape[1] != economy.num_goods:
        raise InputError(
            f"replica allocation has shape {ra.bundles.shape}, expected "
            f"{(n * economy.h, economy.num_goods)}")
    if tol is None:
        tol = n * economy.feasibility_tol()
    if np.any(ra.bundles < -tol):
        raise InputError("allocation bundles must be nonnegative")
    excess = ra.bundles.sum(axis=0) - n * economy.total_endowment
    if np.max(np.abs(excess)) > tol:
        raise InputError(
            f"replica allocation does not clear markets: excess demand {excess.tolist()}")
    return ra


def require_nondegenerate(u: UtilitySpec):
    if isinstance(u, PLC):
        zero_rows = ~np.any(u.U > 0, axis=1)
        if np.all(zero_rows) and not np.any(u.T > 0):
            raise DegenerateUtilityError("PLC utility is identically zero")
