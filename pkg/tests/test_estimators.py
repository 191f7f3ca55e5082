import numpy as np
import pytest
from sklearn.base import clone

from ecnnts.ecnn import init_params
from ecnnts.estimators import ECNNRegressor, LSTMRegressor, RNNRegressor, regressor_for
from ecnnts.synthetic import teacher_sequences


@pytest.fixture(scope="module")
def windows():
    _, X, Y = teacher_sequences(2, 2, 1, 6, 40, seed=1)
    return X, Y[:, :, 0]


def test_get_params_and_clone():
    est = ECNNRegressor(n_hidden=8, epochs=3, random_state=4)
    params = est.get_params()
    assert params == dict(n_hidden=8, epochs=3, batch_size=64, learning_rate=1e-3, truncation=None,
                          optimizer="adam", random_state=4)
    twin = clone(est)
    assert twin is not est and twin.get_params() == params
    est.set_params(epochs=7)
    assert est.epochs == 7


@pytest.mark.parametrize("cls", [ECNNRegressor, RNNRegressor, LSTMRegressor])
def test_fit_predict_shapes(cls, windows):
    X, Y = windows
    est = cls(n_hidden=4, epochs=3, batch_size=8).fit(X[:30], Y[:30], eval_set=(X[30:], Y[30:]))
    assert est.n_features_in_ == 2 and est.n_outputs_ == 1
    pred = est.predict(X, Y[:, :-1])
    assert pred.shape == (40,)
    np.testing.assert_array_equal(est.predict(X, Y), pred)
    assert np.isfinite(est.score(X, Y))
    assert len(est.report_.val_loss) == 3


def test_context_matters_only_for_ecnn(windows):
    X, Y = windows
    for cls in (ECNNRegressor, RNNRegressor):
        est = cls(n_hidden=4, epochs=1).fit(X, Y)
        same = np.allclose(est.predict(X, Y[:, :-1]), est.predict(X, np.zeros_like(Y[:, :-1])))
        assert same == (cls is RNNRegressor)


def test_deterministic(windows):
    X, Y = windows
    a = ECNNRegressor(n_hidden=4, epochs=4, batch_size=8, random_state=2).fit(X, Y)
    b = ECNNRegressor(n_hidden=4, epochs=4, batch_size=8, random_state=2).fit(X, Y)
    assert a.params_ == b.params_


def test_from_params_and_errors(windows):
    X, Y = windows
    prm = init_params(3, 2, 1, seed=0)
    est = ECNNRegressor.from_params(prm)
    assert est.n_hidden == 3 and est.predict(X).shape == (40,)
    with pytest.raises(ValueError, match="features"):
        est.predict(X[:, :, :1])
    with pytest.raises(ValueError, match="cannot wrap"):
        RNNRegressor.from_params(prm)
    with pytest.raises(ValueError, match="windows"):
        ECNNRegressor(epochs=1).fit(X[:, :, 0], Y)
    with pytest.raises(ValueError, match="per-step"):
        ECNNRegressor(epochs=1).fit(X, Y[:, :3])
    with pytest.raises(ValueError, match="unknown"):
        regressor_for("gru")


def test_unfitted_predict(windows):
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        LSTMRegressor().predict(windows[0])


def test_init_params_warm_start(windows):
    X, Y = windows
    prm = init_params(5, 2, 1, seed=9)
    est = ECNNRegressor(n_hidden=5, epochs=0).fit(X, Y, init_params=prm)
    assert est.params_ == prm
