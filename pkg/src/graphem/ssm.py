"""Linear-Gaussian state-space model, trajectory simulation and the
block-diagonal stable transition generator used by the synthetic benchmark.

The model is::

    x_k = A x_{k-1} + q_k,    q_k ~ N(0, Q)
    y_k = H x_k + r_k,        r_k ~ N(0, R)

with ``x_0 ~ N(x0_mean, P0)`` and ``k = 1..K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from graphem._linalg import cholesky_psd

STABILITY_TARGET = 0.99


def as_generator(rng=None) -> np.random.Generator:
    """Accept a Generator, a seed, a SeedSequence or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_covariance(M: np.ndarray, name: str) -> None:
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(M).min() < -1e-10 * scale:
        raise ValueError(f"{name} is not positive semi-definite")


@dataclass(frozen=True)
class StateSpaceModel:
    """Parameters of the linear-Gaussian SSM.

    Arrays are copied and made read-only on construction.
    """

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0_mean: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for name, ndim in (("A", 2), ("H", 2), ("Q", 2), ("R", 2), ("x0_mean", 1), ("P0", 2)):
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim, name))
        nx, ny = self.nx, self.ny
        expected = {"A": (nx, nx), "H": (ny, nx), "Q": (nx, nx), "R": (ny, ny),
                    "x0_mean": (nx,), "P0": (nx, nx)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in ("Q", "R", "P0"):
            _check_covariance(getattr(self, name), name)

    @property
    def nx(self) -> int:
        return self.H.shape[1]

    @property
    def ny(self) -> int:
        return self.H.shape[0]

    def with_transition(self, A) -> "StateSpaceModel":
        return replace(self, A=A)

    @classmethod
    def isotropic(cls, A, sigma_q: float, sigma_r: float, sigma_p: float,
                  x0_mean=None) -> "StateSpaceModel":
        """Model with H = Id, Q = sigma_q^2 Id, R = sigma_r^2 Id and P0 = sigma_p^2 Id."""
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        eye = np.eye(n)
        if x0_mean is None:
            x0_mean = np.zeros(n)
        return cls(A=A, H=eye, Q=sigma_q**2 * eye, R=sigma_r**2 * eye,
                   x0_mean=x0_mean, P0=sigma_p**2 * eye)


@dataclass(frozen=True)
class Trajectory:
    """Simulated hidden states x_1..x_K and observations y_1..y_K (one row per step)."""

    states: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(self.states, 2, "states"))
        object.__setattr__(self, "observations", _frozen(self.observations, 2, "observations"))
        if len(self.states) != len(self.observations):
            raise ValueError("states and observations must have the same length")
        if len(self.states) < 1:
            raise ValueError("a trajectory needs at least one time step")

    @property
    def K(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class BlockSpec:
    """Block layout of a synthetic transition matrix plus the noise scales
    (sigma_q, sigma_r, sigma_p) used with it."""

    block_sizes: tuple[int, ...]
    noise_scales: tuple[float, float, float] = field(default=(0.1, 0.1, 1e-4))

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.block_sizes)
        if not sizes:
            raise ValueError("block_sizes must not be empty")
        if any(b < 1 for b in sizes):
            raise ValueError(f"block sizes must be >= 1, got {sizes}")
        scales = tuple(float(s) for s in self.noise_scales)
        if len(scales) != 3 or any(s <= 0 for s in scales):
            raise ValueError("noise_scales must be three positive reals (sigma_q, sigma_r, sigma_p)")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "noise_scales", scales)

    @property
    def nx(self) -> int:
        return sum(self.block_sizes)

    def support(self) -> np.ndarray:
        """Boolean mask of the diagonal-block positions."""
        return block_diag(*[np.ones((b, b), dtype=bool) for b in self.block_sizes]).astype(bool)

    def model(self, A) -> StateSpaceModel:
        sq, sr, sp = self.noise_scales
        return StateSpaceModel.isotropic(A, sq, sr, sp)


def project_stable(M, target: float = STABILITY_TARGET) -> np.ndarray:
    """Rescale ``M`` so its largest singular value is at most ``target``.

    Matrices already below the target are returned unchanged (as a copy).
    Rescaling keeps the sparsity pattern intact.
    """
    M = np.array(M, dtype=float)
    smax = np.linalg.norm(M, 2) if M.size else 0.0
    if smax >= target:
        M *= target / smax
    return M


def generate_block_transition(spec: BlockSpec | Sequence[int], rng=None) -> np.ndarray:
    """Random block-diagonal transition matrix with spectral norm below one.

    Block entries are i.i.d. uniform on [-1, 1]; the full matrix is then
    passed through :func:`project_stable`.
    """
    if not isinstance(spec, BlockSpec):
        spec = BlockSpec(tuple(spec))
    rng = as_generator(rng)
    blocks = [rng.uniform(-1.0, 1.0, size=(b, b)) for b in spec.block_sizes]
    return project_stable(block_diag(*blocks))


def random_dense_stable(n: int, rng=None, target: float = 0.5) -> np.ndarray:
    """Dense random matrix rescaled to have spectral norm exactly ``target``.

    Used as the EM initialisation.
    """
    rng = as_generator(rng)
    M = rng.uniform(-1.0, 1.0, size=(n, n))
    return M * (target / np.linalg.norm(M, 2))


def simulate(model: StateSpaceModel, K: int, rng=None) -> Trajectory:
    """Draw one trajectory of length ``K`` from ``model``.

    Deterministic for a given seed: x_0, then all state noise, then all
    observation noise are drawn in that order.
    """
    K = int(K)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    rng = as_generator(rng)
    L0 = cholesky_psd(model.P0, "P0")
    Lq = cholesky_psd(model.Q, "Q")
    Lr = cholesky_psd(model.R, "R")

    x0 = model.x0_mean + L0 @ rng.standard_normal(model.nx)
    q = rng.standard_normal((K, model.nx)) @ Lq.T
    r = rng.standard_normal((K, model.ny)) @ Lr.T

    A = model.A
    states = np.empty((K, model.nx))
    x = x0
    for k in range(K):
        x = A @ x + q[k]
        states[k] = x
    observations = states @ model.H.T + r
    return Trajectory(states=states, observations=observations)
