"""Small dense linear-algebra helpers shared by the inference and M-step code."""

from __future__ import annotations

import numpy as np
from scipy import linalg


class NumericalError(ArithmeticError):
    """A covariance or system matrix could not be factorized, even after jitter."""


JITTER = 1e-10


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def cho_factor_jitter(M: np.ndarray, what: str = "matrix"):
    """Cholesky factor of a symmetric matrix, retrying once with a trace-scaled jitter."""
    try:
        return linalg.cho_factor(M, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    n = M.shape[0]
    scale = max(np.trace(M) / n, 1.0) if np.isfinite(M).all() else 1.0
    try:
        return linalg.cho_factor(M + JITTER * scale * np.eye(n), lower=True, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"{what} is not positive definite") from exc


def cholesky_psd(M: np.ndarray, what: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix, used for sampling.

    An all-zero matrix gives a zero factor, so deterministic components
    (e.g. Q = 0) are supported.
    """
    M = np.asarray(M, dtype=float)
    if not np.any(M):
        return np.zeros_like(M)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(M + JITTER * np.eye(M.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive semi-definite") from exc
