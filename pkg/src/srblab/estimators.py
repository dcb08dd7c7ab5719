"""scikit-learn style wrappers around the orbit and measure pipelines."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dynamics import MapModel
from .errors import SRBLabError
from .graph_transform import grow_unstable_manifold
from .hyperbolicity import RegionParams, analyze_orbit
from .inducing import BINS, push_measure, spread_to_srb, tau_statistics


def _points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("X must have shape (n_points, 2)")
    return X - np.floor(X)


class HyperbolicityTransformer(TransformerMixin, BaseEstimator):
    """Maps torus points to orbit features:
    liminf_u, liminf_s, theta_hat, ratio_sup, lambda-verdict, bounded verdict."""

    feature_names = ("liminf_u", "liminf_s", "theta_hat", "ratio_sup", "lambda_hyperbolic", "bounded_type")

    def __init__(self, kind="neutral_cat", r0=0.008, horizon=10**4, lam=0.3, window=32, L=4.0):
        self.kind = kind
        self.r0 = r0
        self.horizon = horizon
        self.lam = lam
        self.window = window
        self.L = L

    def fit(self, X=None, y=None):
        self.model_ = MapModel(self.kind, self.r0)
        self.params_ = RegionParams(lam=self.lam)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        out = np.full((len(X), len(self.feature_names)), np.nan)
        for i, p in enumerate(_points(X)):
            try:
                r = analyze_orbit(self.model_, p, self.params_, self.horizon, self.window, self.L)
            except SRBLabError:
                continue
            out[i] = (r.liminf_u, r.liminf_s, r.theta_hat, r.ratio_sup, r.verdict_lambda, r.verdict_bounded)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(self.feature_names, dtype=object)


class SRBMeasureEstimator(BaseEstimator):
    """fit(X): X[0] is the base point of the seed patch; the SRB estimate is
    stored as measure_ with its 32x32 histogram in histogram_."""

    def __init__(self, kind="neutral_cat", r0=0.008, depth=1000, n_particles=10**5, n_generations=50,
                 seed=0, bins=BINS):
        self.kind = kind
        self.r0 = r0
        self.depth = depth
        self.n_particles = n_particles
        self.n_generations = n_generations
        self.seed = seed
        self.bins = bins

    def fit(self, X, y=None):
        p = _points(X)[0]
        model = MapModel(self.kind, self.r0)
        P = RegionParams()
        patch, _ = grow_unstable_manifold(model, p, self.depth, P)
        mu, rs = push_measure(model, patch, self.n_particles, self.n_generations, P, seed=self.seed)
        self.tau_stats_ = tau_statistics(rs, seed=self.seed) if len(rs) >= 1000 else None
        self.induced_ = mu
        self.measure_ = spread_to_srb(model, mu, rs, P, seed=self.seed)
        self.histogram_ = self.measure_.histogram(self.bins)
        return self

    def predict(self, X):
        """Cell density of the histogram estimate at X (uniform = 1)."""
        check_is_fitted(self, "histogram_")
        idx = np.minimum((_points(X) * self.bins).astype(int), self.bins - 1)
        return self.histogram_[idx[:, 0], idx[:, 1]] * self.bins**2

    def score(self, X, y=None):
        """Mean log density at X."""
        return float(np.mean(np.log(np.maximum(self.predict(X), 1e-300))))
