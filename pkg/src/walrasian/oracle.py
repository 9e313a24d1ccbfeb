"""Brute-force reference computations.

Deliberately naive and independent of the solver path: nothing here uses the
ellipsoid method, the hull projection or the analytic gradients.  Results
are used to cross-check the tester and the coalition builder on small
instances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .economy import PLC, Allocation, Economy, ShiftedPower, check_allocation
from .exceptions import InputError, UnsupportedFamilyError

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _values(u, Y):
    """Utility of every bundle along the last axis of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if isinstance(u, ShiftedPower):
        return np.sum((Y + u.theta) ** u.rho, axis=-1) / u.N
    if isinstance(u, PLC):
        return np.min(Y @ u.U.T + u.T, axis=-1)
    raise UnsupportedFamilyError(f"unknown utility {type(u).__name__}")


def finite_diff_gradient(u, x, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``u`` at ``x`` (needs ``x >= step``)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.any(x < step):
        raise InputError("central differences need every coordinate >= step")
    E = np.eye(x.shape[0]) * step
    return (_values(u, x + E) - _values(u, x - E)) / (2.0 * step)


@dataclass(frozen=True)
class GridSpec:
    """Price grid on the simplex with spacing ``step``; bundles searched in
    ``[0, search_radius]^l`` (default ``2 * max(total endowment)``)."""

    step: float = 1e-3
    search_radius: Optional[float] = None

    def __post_init__(self):
        if not self.step > 0:
            raise InputError(f"grid step must be positive, got {self.step}")
        if self.search_radius is not None and not self.search_radius > 0:
            raise InputError("search radius must be positive")

    def prices(self, num_goods: int) -> np.ndarray:
        n = max(1, int(round(1.0 / self.step)))
        if num_goods == 2:
            a = np.arange(n + 1) / n
            return np.column_stack([a, 1.0 - a])
        if num_goods == 3:
            rows = [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]
            return np.array(rows, dtype=float) / n
        raise InputError(f"grid search supports 2 or 3 goods, got {num_goods}")


def _last_coordinate(u, fixed, thr, R, iters=52):
    """Smallest last coordinate reaching ``thr`` given the others (``inf`` if none)."""
    m = fixed.shape[0]

    def at(y):
        return _values(u, np.column_stack([fixed, y]))

    lo = np.zeros(m)
    hi = np.full(m, R)
    reach = at(hi) >= thr
    free = at(lo) >= thr
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = at(mid) >= thr
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    y = np.where(free, 0.0, hi)
    return np.where(reach, y, np.inf)


def _min_cost(u, P, thr, R, fixed, iters=42):
    """Minimum of ``P @ y`` over bundles extending ``fixed`` that reach ``thr``.

    Golden-section search coordinate by coordinate: the partial minimum of a
    convex cost over a convex set is convex in the remaining coordinates.
    """
    m, ell = P.shape
    j = fixed.shape[1]
    if j == ell - 1:
        y = _last_coordinate(u, fixed, thr, R)
        base = np.sum(P[:, :j] * fixed, axis=1)
        return np.where(np.isfinite(y), base + P[:, j] * np.where(np.isfinite(y), y, 0.0),
                        np.inf)

    def f(t):
        return _min_cost(u, P, thr, R, np.column_stack([fixed, t]), iters)

    a = np.zeros(m)
    b = np.full(m, R)
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        # infinite values lie left of the feasible interval, so move right
        right = (f1 > f2) | (np.isinf(f1) & np.isinf(f2))
        a = np.where(right, x1, a)
        b = np.where(right, b, x2)
        nx1 = np.where(right, x2, b - GOLDEN * (b - a))
        nx2 = np.where(right, a + GOLDEN * (b - a), x1)
        x1, x2 = nx1, nx2
        v = f(np.where(right, x2, x1))
        f1, f2 = np.where(right, f2, v), np.where(right, v, f1)
    best = np.minimum(f1, f2)
    for edge in (np.zeros(m), np.full(m, R)):
        best = np.minimum(best, f(edge))
    return best


def naive_min_expenditure(u, prices, threshold: float, search_radius: float) -> np.ndarray:
    """Cheapest cost of reaching ``threshold`` at each row of ``prices``."""
    P = np.atleast_2d(np.asarray(prices, dtype=float))
    return _min_cost(u, P, threshold, float(search_radius), np.zeros((P.shape[0], 0)))


def passing_prices(economy: Economy, allocation, eps: float, prices,
                   search_radius: float | None = None,
                   tol: float | None = None) -> np.ndarray:
    """Boolean mask of the rows of ``prices`` satisfying both epsilon-Walrasian conditions."""
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    P = np.atleast_2d(np.asarray(prices, dtype=float))
    wbar = economy.total_endowment
    R = 2.0 * float(np.max(wbar)) if search_radius is None else float(search_radius)
    if tol is None:
        tol = 1e-7 * (1.0 + float(np.max(wbar)))
    h = economy.h
    ok = np.ones(P.shape[0], dtype=bool)
    for i, c in enumerate(economy.consumers):
        x = allocation.bundles[i]
        income = P @ c.endowment
        ok &= np.abs(P @ x - income) <= eps + tol
        if not ok.any():
            break
        thr = float(_values(c.utility, x))
        cost = np.full(P.shape[0], np.inf)
        cost[ok] = naive_min_expenditure(c.utility, P[ok], thr, R)
        ok &= cost >= income - eps / h - tol
    return ok


def grid_price_search(economy: Economy, allocation, eps: float,
                      grid: GridSpec | None = None) -> Optional[np.ndarray]:
    """First simplex grid price satisfying both conditions, or ``None``."""
    grid = GridSpec() if grid is None else grid
    P = grid.prices(economy.num_goods)
    mask = passing_prices(economy, allocation, eps, P, grid.search_radius)
    hits = np.flatnonzero(mask)
    return P[hits[0]].copy() if hits.size else None


@dataclass(frozen=True)
class OracleBlock:
    """Coalition found by exhaustive search, in type-multiplicity form."""

    members: tuple
    bundles: np.ndarray
    reference: np.ndarray
    value: float
    eta: float

    @property
    def size(self) -> int:
        return int(sum(b for _, b in self.members))

    def to_dict(self):
        return {"size": self.size,
                "members": [{"type": int(t), "multiplicity": int(b)} for t, b in self.members],
                "bundles": self.bundles.tolist(), "reference": self.reference.tolist(),
                "value": self.value, "eta": self.eta}


def multiplicity_vectors(h: int, max_k: int):
    """Multiplicity vectors with coprime entries, in order of increasing size.

    Scaling every multiplicity leaves the blocking problem unchanged, so
    vectors with a common factor are skipped.
    """
    def parts(total, slots):
        if slots == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in parts(total - first, slots - 1):
                yield (first,) + rest

    for size in range(1, max_k + 1):
        for beta in parts(size, h):
            if math.gcd(*beta) == 1:
                yield beta


def _project_columns(w, totals):
    """Project each good's column onto ``{v >= 0, sum(v) = total}``.

    ``w`` has shape ``(restarts, members, goods)``.
    """
    v = np.moveaxis(w, 1, -1)
    s = v.shape[-1]
    srt = -np.sort(-v, axis=-1)
    css = np.cumsum(srt, axis=-1) - totals[None, :, None]
    ind = np.arange(1, s + 1)
    cond = srt - css / ind > 0
    rho = s - np.argmax(cond[..., ::-1], axis=-1)
    shift = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    out = np.maximum(v - shift, 0.0)
    return np.moveaxis(out, -1, 1)


def _fd_grad_batch(u, Y, step=1e-7):
    """Finite-difference gradients at every bundle along the last axis of ``Y``."""
    ell = Y.shape[-1]
    G = np.empty_like(Y)
    for a in range(ell):
        e = np.zeros(ell)
        e[a] = step
        lo_ok = Y[..., a] >= step
        up = _values(u, Y + e)
        down = np.where(lo_ok, _values(u, np.maximum(Y - e, 0.0)), _values(u, Y))
        G[..., a] = (up - down) / np.where(lo_ok, 2.0 * step, step)
    return G


def _best_split(utils, refs, beta, endow, restarts, iters, eta, rng):
    """Maximise ``min_t u_t(y_t) - ref_t`` over ``sum beta_t y_t = sum beta_t w_t``."""
    s, ell = endow.shape
    b = beta.astype(float)[None, :, None]
    totals = (beta[:, None] * endow).sum(axis=0)
    w = np.empty((restarts, s, ell))
    w[0] = beta[:, None] * endow
    if restarts > 1:
        w[1:] = np.moveaxis(rng.dirichlet(np.ones(s), size=(restarts - 1, ell)), -1, 1) * totals

    def objective(w):
        Y = w / b
        vals = np.column_stack([_values(u, Y[:, t]) - r for t, (u, r) in enumerate(zip(utils, refs))])
        return vals, Y

    scale = max(float(np.max(totals)), 1e-12)
    best_val, best_w = -np.inf, w[0].copy()
    stale = 0
    for it in range(iters):
        vals, Y = objective(w)
        obj = vals.min(axis=1)
        r = int(np.argmax(obj))
        if obj[r] > best_val + 1e-12:
            best_val, best_w = float(obj[r]), w[r].copy()
            stale = 0
        else:
            stale += 1
        if best_val > eta or stale > 200:
            break
        worst = np.argmin(vals, axis=1)
        G = np.zeros_like(w)
        for t, u in enumerate(utils):
            rows = np.flatnonzero(worst == t)
            if rows.size:
                G[rows, t] = _fd_grad_batch(u, Y[rows, t]) / beta[t]
        norm = np.linalg.norm(G, axis=(1, 2), keepdims=True)
        step = 0.25 * scale / math.sqrt(it + 1.0)
        w = _project_columns(w + step * G / np.where(norm > 0, norm, 1.0), totals)
    return best_val, best_w / b[0]


def brute_force_block(economy: Economy, allocation, max_k: int, eta: float,
                      restarts: int = 20, iters: int = 5000,
                      rng_seed: int = 0) -> Optional[OracleBlock]:
    """Search coalitions of total size ``<= max_k`` in increasing size.

    Members of the same type get the same bundle (averaging within a type
    never hurts a concave utility).  Returns the first coalition whose worst
    member gains more than ``eta``; ``None`` means none was found, which is
    heuristic evidence only.
    """
    if not isinstance(allocation, Allocation):
        allocation = check_allocation(economy, allocation)
    if int(max_k) != max_k or not 1 <= max_k <= 60:
        raise InputError(f"max_k must be an integer in [1, 60], got {max_k}")
    if economy.h > 4:
        raise InputError("exhaustive blocking search supports at most 4 consumers")
    rng = np.random.default_rng(rng_seed)
    utils = economy.utilities
    X = allocation.bundles
    refs = np.array([float(_values(u, x)) for u, x in zip(utils, X)])
    for beta in multiplicity_vectors(economy.h, int(max_k)):
        sup = [t for t, v in enumerate(beta) if v > 0]
        bsup = np.array([beta[t] for t in sup])
        val, Y = _best_split([utils[t] for t in sup], refs[sup], bsup,
                             economy.endowments[sup], restarts, iters, eta, rng)
        logger.debug("multiplicities %s: best worst-member gain %.3e", beta, val)
        if val > eta:
            members = tuple((t, int(beta[t])) for t in sup)
            return OracleBlock(members, Y, X[sup].copy(), val, eta)
    return None
