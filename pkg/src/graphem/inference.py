"""Kalman filter, RTS smoother and the EM sufficient statistics.

All per-step quantities are stored as stacked arrays: ``means`` has shape
``(K, nx)`` and ``covs`` has shape ``(K, nx, nx)``.  The smoother arrays
carry one extra leading entry for the prior at ``k = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from graphem._linalg import NumericalError, cho_factor_jitter, symmetrize
from graphem.ssm import StateSpaceModel

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class FilterRun:
    """Output of :func:`kalman_filter` for steps k = 1..K."""

    means: np.ndarray
    covs: np.ndarray
    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    innovations: np.ndarray
    innovation_covs: np.ndarray
    neg_log_lik: float

    @property
    def K(self) -> int:
        return len(self.means)

    @property
    def filtered(self) -> list[GaussianBelief]:
        return [GaussianBelief(m, P) for m, P in zip(self.means, self.covs)]


@dataclass(frozen=True)
class SmootherRun:
    """Smoothed marginals for k = 0..K and smoother gains G_0..G_{K-1}."""

    means: np.ndarray
    covs: np.ndarray
    gains: np.ndarray

    @property
    def smoothed(self) -> list[GaussianBelief]:
        return [GaussianBelief(m, P) for m, P in zip(self.means, self.covs)]


@dataclass(frozen=True)
class EMStats:
    """Posterior second moments entering the EM surrogate.

    ``Sigma`` averages E[x_k x_k^T], ``Phi`` averages E[x_{k-1} x_{k-1}^T]
    and ``C`` averages E[x_k x_{k-1}^T], each over k = 1..K.
    """

    Sigma: np.ndarray
    Phi: np.ndarray
    C: np.ndarray
    K: int


def _as_observations(model: StateSpaceModel, observations) -> np.ndarray:
    Y = np.asarray(observations, dtype=float)
    if Y.ndim == 1 and model.ny == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[1] != model.ny:
        raise ValueError(f"observations must have shape (K, {model.ny}), got {Y.shape}")
    if len(Y) < 1:
        raise ValueError("at least one observation is required")
    return Y


def kalman_filter(model: StateSpaceModel, observations) -> FilterRun:
    """Run the Kalman filter from the prior (x0_mean, P0).

    Raises
    ------
    NumericalError
        If an innovation covariance cannot be factorized at some step.
    """
    Y = _as_observations(model, observations)
    K, nx, ny = len(Y), model.nx, model.ny
    A, H, Q, R = model.A, model.H, model.Q, model.R

    means = np.empty((K, nx))
    covs = np.empty((K, nx, nx))
    pmeans = np.empty((K, nx))
    pcovs = np.empty((K, nx, nx))
    innov = np.empty((K, ny))
    scovs = np.empty((K, ny, ny))

    m, P = model.x0_mean, model.P0
    nll = 0.0
    for k in range(K):
        m_pred = A @ m
        P_pred = symmetrize(A @ P @ A.T + Q)
        z = Y[k] - H @ m_pred
        PHt = P_pred @ H.T
        S = symmetrize(H @ PHt + R)
        try:
            cf = cho_factor_jitter(S, "innovation covariance")
        except NumericalError as exc:
            raise NumericalError(f"step {k + 1}: {exc}") from exc
        # gain^T = S^{-1} H P_pred
        gain = linalg.cho_solve(cf, PHt.T, check_finite=False).T
        m = m_pred + gain @ z
        P = symmetrize(P_pred - gain @ S @ gain.T)

        logdet = 2.0 * np.log(np.diag(cf[0])).sum()
        w = linalg.cho_solve(cf, z, check_finite=False)
        nll += 0.5 * (ny * LOG_2PI + logdet + z @ w)

        means[k], covs[k] = m, P
        pmeans[k], pcovs[k] = m_pred, P_pred
        innov[k], scovs[k] = z, S

    return FilterRun(means, covs, pmeans, pcovs, innov, scovs, float(nll))


def rts_smoother(model: StateSpaceModel, run: FilterRun) -> SmootherRun:
    """Rauch-Tung-Striebel backward pass over a :class:`FilterRun`.

    The returned arrays are indexed k = 0..K, with index 0 the smoothed
    initial state; ``means[K]`` is exactly the last filtered mean.
    """
    K, nx = run.means.shape
    A = model.A
    fmeans = np.concatenate([model.x0_mean[None], run.means])
    fcovs = np.concatenate([model.P0[None], run.covs])

    means = np.empty((K + 1, nx))
    covs = np.empty((K + 1, nx, nx))
    gains = np.empty((K, nx, nx))
    means[K], covs[K] = fmeans[K], fcovs[K]

    for k in range(K - 1, -1, -1):
        P_pred = run.predicted_covs[k]
        try:
            cf = cho_factor_jitter(P_pred, "predicted covariance")
        except NumericalError as exc:
            raise NumericalError(f"smoother step {k}: {exc}") from exc
        # G_k = P_k A^T (P_{k+1}^-)^{-1}
        G = linalg.cho_solve(cf, A @ fcovs[k], check_finite=False).T
        means[k] = fmeans[k] + G @ (means[k + 1] - run.predicted_means[k])
        covs[k] = symmetrize(fcovs[k] + G @ (covs[k + 1] - P_pred) @ G.T)
        gains[k] = G

    return SmootherRun(means, covs, gains)


def em_stats(model: StateSpaceModel, run: FilterRun, smoothed: SmootherRun) -> EMStats:
    """Sufficient statistics Sigma, Phi, C averaged over k = 1..K."""
    m, P, G = smoothed.means, smoothed.covs, smoothed.gains
    K = len(G)
    if len(m) != K + 1 or run.K != K:
        raise ValueError("filter and smoother runs have inconsistent lengths")
    second = P + np.einsum("ki,kj->kij", m, m)
    Sigma = second[1:].sum(axis=0) / K
    Phi = second[:-1].sum(axis=0) / K
    C = (np.einsum("kij,klj->il", P[1:], G) + m[1:].T @ m[:-1]) / K
    return EMStats(Sigma=symmetrize(Sigma), Phi=symmetrize(Phi), C=C, K=K)


def neg_log_posterior(model: StateSpaceModel, observations, gamma: float = 0.0,
                      run: FilterRun | None = None) -> float:
    """MAP energy ``gamma * ||A||_1 - log p(y_{1:K} | A)``.

    ``||A||_1`` is the entrywise absolute sum.  Pass ``run`` to reuse a
    filter pass already computed for ``model``.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if run is None:
        run = kalman_filter(model, observations)
    return run.neg_log_lik + gamma * float(np.abs(model.A).sum())
