"""Granger-causality baselines: VAR least squares, pairwise and conditional F-tests.

Series are arranged as a ``(K, N)`` array, one column per variable.  Edge
``(n, m)`` of a returned graph means "lags of series m help predict series
n", the same orientation as entry (n, m) of a transition matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from graphem._linalg import NumericalError
from graphem.metrics import BinaryGraph


@dataclass(frozen=True)
class VarFit:
    coefficients: list[np.ndarray]
    residual_covariance: np.ndarray
    residuals: np.ndarray
    intercept: np.ndarray | None = None


def _series(series) -> np.ndarray:
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"series must be a (K, N) array, got shape {X.shape}")
    return X


def lag_matrix(X: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[x_{k-1}, ..., x_{k-p}]`` for k = p..K-1, shape ``(K - p, N p)``."""
    K = len(X)
    return np.hstack([X[p - lag:K - lag] for lag in range(1, p + 1)])


def _lstsq(design: np.ndarray, target: np.ndarray):
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise NumericalError(f"regressor matrix is rank deficient (rank {rank} < {design.shape[1]})")
    resid = target - design @ coef
    return coef, resid


def fit_var(series, p: int = 1, intercept: bool = False) -> VarFit:
    """Least-squares VAR(p) fit.

    The residual covariance divides by ``K - p - N p`` (minus one more with
    an intercept), the number of residual degrees of freedom.
    """
    X = _series(series)
    K, N = X.shape
    if p < 1:
        raise ValueError("lag order must be >= 1")
    if K <= N * p + 1:
        raise ValueError(f"need K > N p + 1 observations, got K={K}, N={N}, p={p}")
    design = lag_matrix(X, p)
    if intercept:
        design = np.hstack([np.ones((len(design), 1)), design])
    coef, resid = _lstsq(design, X[p:])
    dof = len(resid) - design.shape[1]
    if dof <= 0:
        raise ValueError("not enough observations for the residual covariance")
    offset = 1 if intercept else 0
    coefs = [coef[offset + lag * N: offset + (lag + 1) * N].T for lag in range(p)]
    return VarFit(
        coefficients=coefs,
        residual_covariance=resid.T @ resid / dof,
        residuals=resid,
        intercept=coef[0] if intercept else None,
    )


def f_sf(F: float, d1: float, d2: float) -> float:
    """Upper tail probability of the F(d1, d2) distribution."""
    if F <= 0:
        return 1.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F)))


def f_test(rss_restricted: float, rss_full: float, d1: int, d2: int) -> tuple[float, float]:
    """Nested-model F statistic and its p-value."""
    if d2 <= 0:
        raise ValueError("no residual degrees of freedom left for the F-test")
    if rss_full <= 0:
        stat = np.inf if rss_restricted > rss_full else 0.0
        return stat, (0.0 if stat > 0 else 1.0)
    stat = max((rss_restricted - rss_full) / d1 / (rss_full / d2), 0.0)
    return stat, f_sf(stat, d1, d2)


def _gc_pvalue(target: np.ndarray, others: np.ndarray, cause: np.ndarray) -> float:
    """p-value for adding ``cause`` regressors to an intercept + ``others`` model."""
    ones = np.ones((len(target), 1))
    restricted = np.hstack([ones, others])
    full = np.hstack([restricted, cause])
    _, r0 = _lstsq(restricted, target)
    _, r1 = _lstsq(full, target)
    d2 = len(target) - full.shape[1]
    return f_test(float(r0 @ r0), float(r1 @ r1), cause.shape[1], d2)[1]


def _columns(N: int, p: int, variables) -> list[int]:
    return [lag * N + v for lag in range(p) for v in variables]


def gc_pvalues(series, p: int = 1, conditional: bool = False) -> np.ndarray:
    """Matrix of Granger-causality p-values, entry (n, m) testing m -> n.

    Regressions include an intercept.  Pairwise tests use only the lags of
    n (and m); conditional tests also include the lags of every other
    series.  Diagonal entries test the own lags of series n given the lags
    of all other series, in both modes, so that for N = 2 the two modes
    coincide.
    """
    X = _series(series)
    K, N = X.shape
    if p < 1:
        raise ValueError("lag order must be >= 1")
    n_reg = N * p + 1
    if K - p <= n_reg:
        raise ValueError(f"series too short for lag order {p}: K={K}")
    lags = lag_matrix(X, p)
    Y = X[p:]
    out = np.ones((N, N))
    for n in range(N):
        for m in range(N):
            if conditional or m == n:
                base = [v for v in range(N) if v != m]
            else:
                base = [n]
            others = lags[:, _columns(N, p, base)]
            cause = lags[:, _columns(N, p, [m])]
            out[n, m] = _gc_pvalue(Y[:, n], others, cause)
    return out


def pairwise_gc(series, p: int = 1, alpha: float = 0.05) -> BinaryGraph:
    """Pairwise Granger causality graph: edge where the F-test p-value < alpha."""
    return BinaryGraph(gc_pvalues(series, p, conditional=False) < alpha)


def conditional_gc(series, p: int = 1, alpha: float = 0.05) -> BinaryGraph:
    """Conditional Granger causality graph, conditioning on all other series."""
    return BinaryGraph(gc_pvalues(series, p, conditional=True) < alpha)
