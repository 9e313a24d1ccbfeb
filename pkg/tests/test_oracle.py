import numpy as np
import pytest

from walrasian import PLC
from walrasian.coalitions import BlockingCoalition, verify_coalition
from walrasian.oracle import (
    GridSpec,
    brute_force_block,
    finite_diff_gradient,
    grid_price_search,
    multiplicity_vectors,
    naive_min_expenditure,
)
from walrasian.exceptions import InputError

from conftest import EQUILIBRIUM, IRRATIONAL, SQRT


def test_oracle_does_not_touch_solver_code():
    import walrasian.oracle as orc
    src = open(orc.__file__).read()
    assert "convexgeom" not in src and "equilibrium" not in src


def test_finite_diff_examples():
    g = finite_diff_gradient(SQRT, [0.01, 0.01], 1e-5)
    np.testing.assert_allclose(g, 1 / (10 * np.sqrt(1.01)), rtol=1e-8)
    lin = PLC(np.array([[2.0, 1.0]]), np.zeros(1))
    np.testing.assert_allclose(finite_diff_gradient(lin, [3.0, 4.0]), [2, 1], rtol=1e-8)
    g = finite_diff_gradient(SQRT, [0.7, 0.7])
    assert g[0] == pytest.approx(g[1])
    with pytest.raises(InputError):
        finite_diff_gradient(SQRT, [0.0, 1.0])


def test_grid_spec():
    assert GridSpec(0.25).prices(2).shape == (5, 2)
    P = GridSpec(0.5).prices(3)
    assert P.shape == (6, 3) and np.allclose(P.sum(axis=1), 1)
    with pytest.raises(InputError):
        GridSpec(0.0)
    with pytest.raises(InputError):
        GridSpec(0.1).prices(4)


def test_naive_min_expenditure_symmetric():
    thr = SQRT.value(np.array([1.0, 2.0]))
    e = naive_min_expenditure(SQRT, [[0.5, 0.5]], thr, 6.0)[0]
    assert e == pytest.approx((5 * thr / 2) ** 2 - 1, abs=1e-7)


def test_grid_search_examples(edgeworth):
    p = grid_price_search(edgeworth, EQUILIBRIUM, 0.05, GridSpec(1e-3))
    assert p is not None and abs(p[0] - 0.5) <= 0.05
    assert grid_price_search(edgeworth, IRRATIONAL, 0.1, GridSpec(1e-3)) is None
    # huge epsilon: the first grid point already passes
    p = grid_price_search(edgeworth, IRRATIONAL, 100.0, GridSpec(0.1))
    np.testing.assert_allclose(p, [0.0, 1.0])


def test_multiplicity_vectors():
    vecs = list(multiplicity_vectors(2, 3))
    assert vecs == [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)]
    assert all(sum(v) <= 3 for v in vecs)


def test_brute_force_examples(edgeworth):
    blk = brute_force_block(edgeworth, IRRATIONAL, 2, 0.01)
    assert blk is not None and blk.size == 1 and blk.members == ((1, 1),)
    np.testing.assert_allclose(blk.bundles[0], [1.0, 2.0])
    coal = BlockingCoalition(blk.members, blk.bundles, blk.reference, 0.01,
                             edgeworth.endowments[[1]].sum(axis=0) - blk.bundles.sum(axis=0))
    assert verify_coalition(edgeworth, coal, strict_surplus=False).ok
    with pytest.raises(InputError):
        brute_force_block(edgeworth, IRRATIONAL, 0, 0.01)


def test_brute_force_none_at_equilibrium(edgeworth):
    assert brute_force_block(edgeworth, EQUILIBRIUM, 4, 0.01) is None
