import numpy as np
import pytest
from scipy.optimize import brentq

from walrasian import PLC, Economy, ShiftedPower

SQRT = ShiftedPower(0.5, 1.0, 5.0)
EDGEWORTH = Economy.from_arrays([[2.0, 1.0], [1.0, 2.0]], [SQRT, SQRT])


@pytest.fixture
def edgeworth():
    return EDGEWORTH


@pytest.fixture
def plc_economy():
    return Economy.from_arrays(np.eye(2), [PLC(np.array([[2.0, 1.0]]), np.zeros(1)),
                                           PLC(np.array([[1.0, 2.0]]), np.zeros(1))])


EQUILIBRIUM = np.array([[1.5, 1.5], [1.5, 1.5]])
IRRATIONAL = np.array([[2.9, 2.9], [0.1, 0.1]])


@pytest.fixture
def report_line(capsys):
    """Print a line straight to the terminal, bypassing capture."""
    def emit(text):
        with capsys.disabled():
            print(text)
    return emit


def demand(u: ShiftedPower, p, income):
    """Utility-maximising bundle of a shifted power consumer (closed form plus root find)."""
    p = np.asarray(p, dtype=float)
    expo = 1.0 / (u.rho - 1.0)

    def bundle(c):
        return np.maximum(c * p ** expo - u.theta, 0.0)

    if income <= 0:
        return np.zeros_like(p)
    hi = 1.0
    while p @ bundle(hi) < income:
        hi *= 2.0
    c = brentq(lambda c: p @ bundle(c) - income, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return bundle(c)


def two_good_equilibrium(economy: Economy):
    """Market-clearing price and allocation of a two-good shifted power economy."""
    W = economy.endowments

    def excess(p1):
        p = np.array([p1, 1.0 - p1])
        X = np.array([demand(c.utility, p, p @ W[i]) for i, c in enumerate(economy.consumers)])
        return X[:, 0].sum() - W[:, 0].sum()

    p1 = brentq(excess, 1e-6, 1 - 1e-6, xtol=1e-14)
    p = np.array([p1, 1.0 - p1])
    X = np.array([demand(c.utility, p, p @ W[i]) for i, c in enumerate(economy.consumers)])
    # absorb root-finding residue so the allocation clears exactly
    X[-1] += W.sum(axis=0) - X.sum(axis=0)
    return p, X
