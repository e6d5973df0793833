import numpy as np
import pytest

from mile import BdeClassifier, BdeRegressor
from mile.errors import ConfigError, ShapeError
from mile.synthetic import make_dataset


def _xy(n, seed):
    d = make_dataset("sine", n, seed)
    return d.X, d.y

FAST = dict(n_members=2, epochs=100, warmup_steps=200, n_samples=20, n_thinning=5, hidden_layers=(8,))


@pytest.fixture(scope="module")
def regressor():
    X, y = _xy(200, 1)
    return BdeRegressor(**FAST).fit(X, y[:, 0]), X


def test_regressor_output_shapes(regressor):
    reg, X = regressor
    assert reg.predict(X).shape == (200,)
    m, s = reg.predict(X, mean_and_std=True)
    assert s.shape == (200,) and np.all(s > 0)
    m2, iv = reg.predict(X, credible_intervals=[0.1, 0.5, 0.9])
    assert iv.shape == (3, 200)
    assert np.all(np.diff(iv, axis=0) >= 0)
    np.testing.assert_array_equal(m, m2)
    assert reg.predict(X, raw=True).shape == (8, 200, 2)


def test_regressor_learns_sine(regressor):
    reg, _ = regressor
    Xt, yt = _xy(200, 2)
    rmse = np.sqrt(np.mean((reg.predict(Xt) - yt[:, 0]) ** 2))
    assert rmse < 0.5


def test_regressor_is_deterministic(regressor):
    reg, X = regressor
    X0, y0 = _xy(200, 1)
    again = BdeRegressor(**FAST).fit(X0, y0[:, 0])
    np.testing.assert_array_equal(reg.ensemble_.samples, again.ensemble_.samples)


def test_unfitted_and_bad_input():
    with pytest.raises(ConfigError):
        BdeRegressor().predict(np.zeros((2, 1)))
    with pytest.raises(ShapeError):
        BdeClassifier(**FAST).fit(np.zeros((4, 1)), np.ones(4))
    with pytest.raises(ConfigError):
        BdeRegressor(**dict(FAST, n_members=0)).fit(np.zeros((10, 1)), np.zeros(10))


def test_classifier_string_labels():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(150, 2))
    y = np.where(X[:, 0] > 0, "right", "left")
    clf = BdeClassifier(**FAST).fit(X, y)
    p = clf.predict_proba(X)
    assert p.shape == (150, 2)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert list(clf.classes_) == ["left", "right"]
    assert np.mean(clf.predict(X) == y) > 0.9
    assert clf.predict(X, raw=True).shape == (8, 150, 2)
