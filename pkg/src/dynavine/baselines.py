"""Gaussian reference models fitted on the same windowed pseudo-observations.

Two baselines:

* per-window Gaussian copula: normal-scores correlation per window,
  projected to the nearest valid correlation matrix;
* Fisher-z state space: each correlation entry follows a scalar random
  walk observed through its per-window Fisher z transform, filtered by a
  Kalman recursion with the innovation variance picked from a small grid
  by one-step-ahead predictive likelihood.

Both expose log_density(u, t) and to_dict() so the evaluation layer can
treat them like the vine estimators.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .numkernel import R_MAX, fisher_z, fisher_z_inv, nearest_pd_correlation, normal_quantile

SSM_Q_GRID = (0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
DIFFUSE_VAR = 1e6


def gaussian_copula_logdensity(corr, u):
    """Log density of the Gaussian copula with correlation `corr` at rows u."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    z = normal_quantile(u)
    sign, logdet = np.linalg.slogdet(corr)
    if sign <= 0:
        raise DataError("correlation matrix is not positive definite")
    prec = np.linalg.inv(corr)
    quad = np.einsum("ni,ij,nj->n", z, prec - np.eye(corr.shape[0]), z)
    return -0.5 * logdet - 0.5 * quad


def normal_scores_correlation(u):
    """Correlation of the normal scores of one window, made valid."""
    z = normal_quantile(np.asarray(u, dtype=float))
    c = np.corrcoef(z, rowvar=False)
    return nearest_pd_correlation(c)


@dataclass
class GaussianWindows:
    """Per-window Gaussian copulas over a shared variable set."""

    correlations: list
    estimator: str = "gaussian_windowed"
    extras: dict = field(default_factory=dict)

    @property
    def n_windows(self):
        return len(self.correlations)

    @property
    def dim(self):
        return self.correlations[0].shape[0]

    def log_density(self, u, t=0, truncation_level=None):
        if not 0 <= t < self.n_windows:
            raise DataError("window index out of range")
        return gaussian_copula_logdensity(self.correlations[t], u)

    def to_dict(self):
        return {
            "schema": "dvc-gaussian/1",
            "estimator": self.estimator,
            "n_windows": self.n_windows,
            "correlations": [c.tolist() for c in self.correlations],
            "extras": self.extras,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != "dvc-gaussian/1":
            raise DataError(f"unsupported model schema: {data.get('schema')}")
        return cls(correlations=[np.asarray(c, dtype=float) for c in data["correlations"]],
                   estimator=data.get("estimator", "gaussian_windowed"),
                   extras=data.get("extras", {}))


def fit_gaussian_windows(windows):
    """Independent normal-scores Gaussian copula per window."""
    return GaussianWindows(
        correlations=[normal_scores_correlation(w) for w in windows])


def _kalman_filter(y, obs_var, q):
    """Scalar random-walk filter; returns filtered means and the one-step
    predictive NLL accumulated from the second observation on (the first
    is absorbed by the diffuse prior)."""
    T = y.size
    m, p = 0.0, DIFFUSE_VAR
    means = np.empty(T)
    nll = 0.0
    for t in range(T):
        pp = p + (q if t > 0 else 0.0)
        s = pp + obs_var[t]
        e = y[t] - m
        if t > 0:
            nll += 0.5 * (np.log(2.0 * np.pi * s) + e * e / s)
        gain = pp / s
        m = m + gain * e
        p = pp * (1.0 - gain)
        means[t] = m
    return means, nll


def fit_gaussian_ssm(windows, q_grid=SSM_Q_GRID):
    """Fisher-z random-walk Kalman baseline.

    Per window the normal-scores correlations give one z observation per
    variable pair with variance 1/(N_t - 3); the shared innovation
    variance comes from `q_grid` by one-step predictive likelihood summed
    over the pairs, and the filtered (not smoothed) states map back to
    per-window correlation matrices, each projected to validity.
    """
    windows = [np.asarray(w, dtype=float) for w in windows]
    T = len(windows)
    d = windows[0].shape[1]
    n_t = np.array([w.shape[0] for w in windows], dtype=float)
    if np.any(n_t <= 3):
        raise DataError("need more than three rows per window for Fisher z")
    obs_var = 1.0 / (n_t - 3.0)

    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    zs = np.empty((len(pairs), T))
    for t, w in enumerate(windows):
        # degenerate windows can hit |corr| = 1 exactly; keep z finite
        c = np.clip(normal_scores_correlation(w), -R_MAX, R_MAX)
        for k, (i, j) in enumerate(pairs):
            zs[k, t] = fisher_z(c[i, j])

    scores = []
    for q in q_grid:
        total = sum(_kalman_filter(zs[k], obs_var, q)[1] for k in range(len(pairs)))
        scores.append(total)
    best = int(np.argmin(scores))
    q = q_grid[best]

    filtered = np.vstack([_kalman_filter(zs[k], obs_var, q)[0] for k in range(len(pairs))])
    correlations = []
    for t in range(T):
        c = np.eye(d)
        for k, (i, j) in enumerate(pairs):
            c[i, j] = c[j, i] = fisher_z_inv(filtered[k, t])
        correlations.append(nearest_pd_correlation(c))
    return GaussianWindows(
        correlations=correlations, estimator="gaussian_ssm",
        extras={"q": float(q), "q_scores": [float(s) for s in scores]})
