"""Full-covariance Gaussian mixture fitted by EM."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, solve_triangular
from scipy.special import logsumexp

from .kmeans import fit_kmeans
from .model import ClusterModel, as_array

RIDGE = 1e-6
TOL = 1e-8
MAX_ITER = 500


def _log_gauss(x, mean, cov):
    c, _ = cho_factor(cov, lower=True)
    lower = np.tril(c)
    z = solve_triangular(lower, (x - mean).T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(lower)))
    d = x.shape[1]
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + np.sum(z * z, axis=0))


def _m_step(x, resp, ridge):
    n, d = x.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ x) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for j in range(resp.shape[1]):
        xc = x - means[j]
        covs[j] = (resp[:, j, None] * xc).T @ xc / nk[j] + ridge * np.eye(d)
    return weights, means, covs


def _e_step(x, weights, means, covs):
    logp = np.column_stack([np.log(weights[j]) + _log_gauss(x, means[j], covs[j]) for j in range(len(weights))])
    lse = logsumexp(logp, axis=1)
    return float(lse.sum()), np.exp(logp - lse[:, None])


def fit_gmm(features, k: int, seed: int = 0, ridge: float = RIDGE, tol: float = TOL,
            max_iter: int = MAX_ITER) -> ClusterModel:
    x = as_array(features)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= n={n}")
    init = fit_kmeans(x, k, seed=seed)
    resp = np.zeros((n, k))
    resp[np.arange(n), init.labels] = 1.0
    weights, means, covs = _m_step(x, resp, ridge)
    history = []
    for _ in range(max_iter):
        ll, resp = _e_step(x, weights, means, covs)
        history.append(ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        weights, means, covs = _m_step(x, resp, ridge)
    resp = resp / resp.sum(axis=1, keepdims=True)
    return ClusterModel(
        "gmm",
        np.argmax(resp, axis=1),
        centroids=means,
        memberships=resp,
        params={"k": k, "ridge": ridge, "tol": tol, "max_iter": max_iter},
        seed=seed,
        diagnostics={"log_likelihood": history, "weights": weights, "covariances": covs},
    )
