import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from srblab.estimators import HyperbolicityTransformer, SRBMeasureEstimator


def test_params_and_clone():
    t = HyperbolicityTransformer(horizon=500, lam=0.25)
    c = clone(t)
    assert c.get_params() == t.get_params() and c is not t
    e = SRBMeasureEstimator(n_particles=2000).set_params(n_generations=3)
    assert clone(e).get_params()["n_generations"] == 3


def test_transformer_linear():
    X = np.random.default_rng(0).random((4, 2))
    F = HyperbolicityTransformer(kind="linear_cat", horizon=300).fit_transform(X)
    assert F.shape == (4, 6)
    # liminf of the backward log-norms: -log lambda1
    assert np.allclose(F[:, 0], -np.log((3 + 5 ** 0.5) / 2), atol=1e-12)
    assert np.all(F[:, 4] == 1) and np.all(F[:, 5] == 1)


def test_transformer_in_pipeline():
    X = np.random.default_rng(1).random((3, 2))
    pipe = make_pipeline(HyperbolicityTransformer(kind="neutral_cat", horizon=300))
    assert pipe.fit_transform(X).shape == (3, 6)


def test_measure_estimator_linear():
    e = SRBMeasureEstimator(kind="linear_cat", depth=50, n_particles=20000, n_generations=11).fit([[0.3, 0.4]])
    assert e.histogram_.shape == (32, 32) and abs(e.histogram_.sum() - 1) < 1e-12
    X = np.random.default_rng(2).random((500, 2))
    assert np.abs(e.predict(X) - 1).mean() < 0.2
    assert abs(e.score(X)) < 0.1
    assert e.tau_stats_.mean == 1.0


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        SRBMeasureEstimator().predict([[0.1, 0.2]])
