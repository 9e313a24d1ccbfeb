"""scikit-learn style wrapper around the tester.

``fit`` takes an :class:`~walrasian.economy.Economy` and derives the
constants once; ``predict`` and ``transform`` take a stack of allocations of
shape ``(m, h, l)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .convexgeom import DEFAULT_MAX_ITERS
from .economy import Economy, check_allocation
from .equilibrium import compute_params, test_walrasian
from .exceptions import InputError


class WalrasianTester(BaseEstimator):
    """Classify allocations as epsilon-Walrasian (``True``) or not.

    Parameters
    ----------
    epsilon : float
        Approximation level.
    mode : {"auto", "strong", "plc"}
        Utility regime; ``"auto"`` infers it from the economy.
    tol : float or None
        Hull-membership tolerance.
    max_iters : int
        Iteration cap for the hull projection.
    search_radius : float or None
        Box size for expenditure minimisation.
    """

    def __init__(self, epsilon: float = 0.05, mode: str = "auto", tol=None,
                 max_iters: int = DEFAULT_MAX_ITERS, search_radius=None):
        self.epsilon = epsilon
        self.mode = mode
        self.tol = tol
        self.max_iters = max_iters
        self.search_radius = search_radius

    def fit(self, X: Economy, y=None):
        if not isinstance(X, Economy):
            raise InputError("fit expects an Economy")
        self.economy_ = X
        self.params_ = compute_params(X, self.epsilon, self.mode)
        self.n_goods_ = X.num_goods
        self.n_consumers_ = X.h
        return self

    def _allocations(self, X):
        check_is_fitted(self, "params_")
        A = check_array(np.asarray(X, dtype=float).reshape(len(X), -1), ensure_all_finite=True)
        A = A.reshape(-1, self.n_consumers_, self.n_goods_)
        return [check_allocation(self.economy_, a) for a in A]

    def decide(self, X) -> list:
        """Full verdicts for each allocation."""
        return [test_walrasian(self.economy_, a, self.epsilon, self.mode, self.tol,
                               self.max_iters, self.search_radius, params=self.params_)
                for a in self._allocations(X)]

    def predict(self, X) -> np.ndarray:
        return np.array([v.is_walrasian for v in self.decide(X)], dtype=bool)

    def transform(self, X) -> np.ndarray:
        """Supporting prices, one row per allocation; ``NaN`` rows for rejected ones."""
        out = np.full((len(X), self.n_goods_), np.nan)
        for j, v in enumerate(self.decide(X)):
            if v.is_walrasian:
                out[j] = v.price
        return out

    def fit_transform(self, X: Economy, allocations):
        return self.fit(X).transform(allocations)
