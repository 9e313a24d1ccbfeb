import numpy as np
import pytest
from sklearn.base import clone

from walrasian import WalrasianTester
from walrasian.exceptions import InputError

from conftest import EDGEWORTH, EQUILIBRIUM, IRRATIONAL


def test_predict_and_transform():
    est = WalrasianTester(epsilon=0.1).fit(EDGEWORTH)
    X = np.stack([EQUILIBRIUM, IRRATIONAL])
    np.testing.assert_array_equal(est.predict(X), [True, False])
    P = est.transform(X)
    np.testing.assert_allclose(P[0], [0.5, 0.5], atol=0.05)
    assert np.all(np.isnan(P[1]))


def test_params_api():
    est = WalrasianTester(epsilon=0.2, mode="strong")
    assert est.get_params()["epsilon"] == 0.2
    est2 = clone(est).set_params(epsilon=0.3)
    assert est2.epsilon == 0.3 and est.epsilon == 0.2


def test_requires_fit_and_economy():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        WalrasianTester().predict(np.stack([EQUILIBRIUM]))
    with pytest.raises(InputError):
        WalrasianTester().fit(np.zeros((2, 2)))
