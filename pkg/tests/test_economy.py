import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walrasian import PLC, Economy, ShiftedPower, check_allocation, normalize, replicate
from walrasian.economy import (
    ConcavityProfile,
    check_replica_allocation,
    lipschitz_constant,
    min_curvature_radius,
    strong_concavity,
    utility_eval,
    utility_supergradient,
    validate_curvature,
)
from walrasian.exceptions import InputError, UnsupportedFamilyError

from conftest import SQRT

PLC2 = PLC(np.array([[2.0, 1.0], [1.0, 2.0]]), np.zeros(2))


def test_shifted_power_values():
    assert utility_eval(SQRT, [0, 0]) == pytest.approx(0.4)
    assert utility_eval(SQRT, [3, 3]) == pytest.approx(0.8)


def test_plc_value():
    assert utility_eval(PLC2, [1, 0]) == 1.0


def test_gradients():
    np.testing.assert_allclose(utility_supergradient(SQRT, [0, 0]), [0.1, 0.1])
    np.testing.assert_allclose(utility_supergradient(SQRT, [3, 0]), [0.05, 0.1])
    np.testing.assert_array_equal(utility_supergradient(PLC2, [2, 1]), [1, 2])
    # tie at value 3: lowest piece index wins
    np.testing.assert_array_equal(utility_supergradient(PLC2, [1, 1]), [2, 1])


def test_eval_rejects_bad_input():
    with pytest.raises(InputError):
        utility_eval(SQRT, [1, -1])
    with pytest.raises(InputError):
        utility_eval(PLC2, [1, 1, 1])


def test_lipschitz():
    assert lipschitz_constant(SQRT) == pytest.approx(0.1)
    assert lipschitz_constant(ShiftedPower(0.5, 4, 5)) == pytest.approx(0.05)
    assert lipschitz_constant(ShiftedPower(0.5, 1, 4)) == pytest.approx(0.125)
    with pytest.raises(UnsupportedFamilyError):
        lipschitz_constant(PLC2)


def test_strong_concavity_formula():
    assert strong_concavity(SQRT, 4).alpha == pytest.approx(1 / (4 * 5 * 5 ** 1.5))
    assert strong_concavity(SQRT, 1600).alpha == pytest.approx(7.806e-7, rel=1e-3)
    alphas = [strong_concavity(SQRT, r).alpha for r in (1, 10, 100, 1e4)]
    assert all(a > b for a, b in zip(alphas, alphas[1:]))
    with pytest.raises(InputError):
        strong_concavity(SQRT, 0)
    with pytest.raises(UnsupportedFamilyError):
        strong_concavity(PLC2, 1)


def test_curvature_validation():
    prof = strong_concavity(SQRT, 4)
    chk = validate_curvature(prof, 0.2, 2, 2)
    assert not chk.ok
    assert chk.lhs == pytest.approx(0.0716, abs=1e-4)
    assert chk.rhs == pytest.approx(2.04)
    chk = validate_curvature(strong_concavity(SQRT, 1700), 0.2, 2, 2)
    assert chk.ok and chk.lhs == pytest.approx(2.06, abs=0.01)
    assert validate_curvature(ConcavityProfile(1.0, 2.0, 1.0), 0.0, 2, 2).ok


def test_min_curvature_radius_is_tight():
    r = min_curvature_radius(SQRT, 0.2, 2, 2)
    assert validate_curvature(strong_concavity(SQRT, r), 0.2, 2, 2).ok
    assert not validate_curvature(strong_concavity(SQRT, r * 0.999), 0.2, 2, 2).ok


def test_normalize():
    E = Economy.from_arrays([[1.5, 1.5], [1.5, 1.5]], [ShiftedPower(0.5, 1), PLC2])
    out = normalize(E, 0.2)
    assert out.consumers[0].utility.N == pytest.approx(5.0)
    assert out.consumers[1].utility == PLC2
    # N uses totals, not individual endowments
    E = Economy.from_arrays([[0.1, 0.1], [0.0, 0.0]], [ShiftedPower(0.5, 1)] * 2)
    N = 2 * math.sqrt(1.1) / 0.8
    assert normalize(E).consumers[1].utility.N == pytest.approx(N)


def test_replicate_ordering(edgeworth):
    assert replicate(edgeworth, 1).consumers == edgeworth.consumers
    R = replicate(edgeworth, 3)
    assert R.h == 6
    np.testing.assert_array_equal(R.endowments[::2], np.tile([2.0, 1.0], (3, 1)))
    np.testing.assert_allclose(R.total_endowment, 3 * edgeworth.total_endowment)
    with pytest.raises(InputError):
        replicate(edgeworth, 0)


def test_economy_validation():
    with pytest.raises(InputError):
        Economy.from_arrays([[0.0, 1.0]], [SQRT])
    with pytest.raises(InputError):
        Economy.from_arrays([[1.0, -1.0], [1.0, 2.0]], [SQRT, SQRT])
    with pytest.raises(InputError):
        PLC(np.array([[1.0, 1.0]]), np.zeros(2))


def test_allocation_checks(edgeworth):
    check_allocation(edgeworth, [[1.5, 1.5], [1.5, 1.5]])
    with pytest.raises(InputError):
        check_allocation(edgeworth, [[1.5, 1.5], [1.5, 1.6]])
    ra = check_replica_allocation(edgeworth, 2, [[2.5, .5], [1, 2], [1.5, 1.5], [1, 2]])
    assert ra.bundles_by_copy.shape == (2, 2, 2)
    with pytest.raises(InputError):
        check_replica_allocation(edgeworth, 2, [[2.5, .5], [1, 2], [1.5, 1.5], [1, 2.1]])


@settings(max_examples=60, deadline=None)
@given(rho=st.floats(0.1, 0.9), theta=st.floats(0.1, 5), N=st.floats(0.5, 10),
       x=st.lists(st.floats(0, 50), min_size=3, max_size=3),
       y=st.lists(st.floats(0, 50), min_size=3, max_size=3))
def test_shifted_power_supergradient_inequality(rho, theta, N, x, y):
    u = ShiftedPower(rho, theta, N)
    x, y = np.array(x), np.array(y)
    g = utility_supergradient(u, x)
    assert utility_eval(u, y) <= utility_eval(u, x) + g @ (y - x) + 1e-9
    assert np.max(g) <= lipschitz_constant(u) + 1e-12


@settings(max_examples=60, deadline=None)
@given(U=st.lists(st.lists(st.floats(0, 5), min_size=2, max_size=2), min_size=1, max_size=4),
       x=st.lists(st.floats(0, 10), min_size=2, max_size=2),
       y=st.lists(st.floats(0, 10), min_size=2, max_size=2))
def test_plc_supergradient_inequality(U, x, y):
    u = PLC(np.array(U), np.zeros(len(U)))
    x, y = np.array(x), np.array(y)
    g = utility_supergradient(u, x)
    assert utility_eval(u, y) <= utility_eval(u, x) + g @ (y - x) + 1e-9
