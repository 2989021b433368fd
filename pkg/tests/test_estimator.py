import numpy as np
import pytest
from sklearn.base import clone

from layerqnn.data import generate_dataset
from layerqnn.estimator import QNNClassifier, check_bloch_array


def _small(**kw):
    base = dict(n_sites=3, n_steps=2, backend="dense", shots=200, rounds=2, batch_size=4, chi_mpo=None, chi_mps=None)
    base.update(kw)
    return QNNClassifier(**base)


def _data(count=16, seed=0):
    ds = generate_dataset("I", count, seed)
    return ds.bloch_array(), np.where(ds.labels() == "A", "up", "down")


def test_get_params_and_clone():
    est = _small(margin=0.3)
    params = est.get_params()
    assert params["margin"] == 0.3 and params["n_sites"] == 3
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(rounds=5)
    assert est.rounds == 5


def test_fit_predict_shapes():
    X, y = _data()
    est = _small().fit(X[:12], y[:12], X[12:], y[12:])
    assert len(est.history_.rounds) == 2
    assert set(est.classes_) == {"down", "up"}
    pred = est.predict(X)
    assert pred.shape == (16,) and set(pred) <= set(est.classes_)
    assert est.decision_function(X).shape == (16,)
    assert 0.0 <= est.score(X, y) <= 1.0
    assert np.isfinite(est.margin_score(X, y))


def test_fit_is_reproducible():
    X, y = _data()
    a = _small().fit(X, y)
    b = _small().fit(X, y)
    assert a.params_ == b.params_ and a.centroids_ == b.centroids_


def test_validation_errors():
    X, y = _data()
    with pytest.raises(ValueError):
        _small().fit(X[:, :2], y)
    with pytest.raises(ValueError):
        _small().fit(X * 2, y)
    with pytest.raises(ValueError):
        _small().fit(X, np.full(len(y), "up"))
    with pytest.raises(ValueError):
        _small().fit(X, y, X, np.full(len(y), "sideways"))


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        _small().predict(_data()[0])


def test_check_bloch_array():
    good = np.array([[0.0, 0.0, 0.5], [0.3, 0.4, 0.0]])
    assert np.array_equal(check_bloch_array(good), good)
    with pytest.raises(ValueError):
        check_bloch_array(np.array([[0.0, 0.0, 0.4]]))
