"""Small dense kernels: matrix propagators, PSD factors, Gaussian sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ExcessiveNegativity,
    GridMismatch,
    NonFiniteCoefficient,
    NotSymmetric,
    SingularObservedBlock,
)
from .model import TimeGrid

SYMMETRY_TOL = 1e-10
NEGATIVITY_RTOL = 1e-6
NEGATIVITY_ATOL = 1e-12


@dataclass(frozen=True)
class MatrixPath:
    grid: TimeGrid
    mats: np.ndarray  # (n_points, d, d)

    def __post_init__(self):
        if self.mats.shape[0] != self.grid.n_points:
            raise GridMismatch("one matrix per grid point expected")

    def at(self, t: float) -> np.ndarray:
        return self.mats[self.grid.index_of(t)]


@dataclass(frozen=True)
class PsdFactor:
    """``factor @ factor.T`` reproduces the (clipped) input matrix."""

    factor: np.ndarray
    clipped_mass: float

    @property
    def dim(self) -> int:
        return self.factor.shape[0]


def _checked(mat: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(mat)):
        raise NonFiniteCoefficient("generator matrix has NaN/Inf entries")
    return mat


def integrate_matrix_ode(A: Callable[[float], np.ndarray], grid: TimeGrid) -> MatrixPath:
    """Fundamental solution of ``dPsi = A(t) Psi dt`` by classical RK4."""
    d = _checked(np.asarray(A(0.0), dtype=float)).shape[0]
    mats = np.empty((grid.n_points, d, d))
    mats[0] = np.eye(d)
    h = grid.dt
    for i in range(grid.n_steps):
        t = i * h
        psi = mats[i]
        a0 = _checked(np.asarray(A(t), dtype=float))
        am = _checked(np.asarray(A(t + 0.5 * h), dtype=float))
        a1 = _checked(np.asarray(A(t + h), dtype=float))
        k1 = a0 @ psi
        k2 = am @ (psi + 0.5 * h * k1)
        k3 = am @ (psi + 0.5 * h * k2)
        k4 = a1 @ (psi + h * k3)
        mats[i + 1] = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return MatrixPath(grid, mats)


def integrate_matrix_sde(A, B: np.ndarray, x_path: np.ndarray, grid: TimeGrid) -> MatrixPath:
    """Euler-Maruyama fundamental solution of ``dPsi = A Psi dt + B Psi dX``.

    ``A`` is either a callable of time or an array of matrices, one per grid
    point; only left-endpoint values are used.
    """
    x_path = np.asarray(x_path, dtype=float)
    if x_path.shape != (grid.n_points,):
        raise GridMismatch(f"x_path has shape {x_path.shape}, grid has {grid.n_points} points")
    B = _checked(np.asarray(B, dtype=float))
    d = B.shape[0]
    if callable(A):
        a_at = lambda i: np.asarray(A(i * grid.dt), dtype=float)
    else:
        A = np.asarray(A, dtype=float)
        if A.shape[0] != grid.n_points:
            raise GridMismatch("A must have one matrix per grid point")
        a_at = lambda i: A[i]
    dx = np.diff(x_path)
    mats = np.empty((grid.n_points, d, d))
    mats[0] = np.eye(d)
    for i in range(grid.n_steps):
        step = _checked(a_at(i)) * grid.dt + B * dx[i]
        mats[i + 1] = mats[i] + step @ mats[i]
    if not np.all(np.isfinite(mats)):
        raise NonFiniteCoefficient("fundamental solution overflowed")
    return MatrixPath(grid, mats)


def psd_factor(sigma: np.ndarray, strict: bool = True) -> PsdFactor:
    """Spectral square root with negative eigenvalues clipped to zero.

    With ``strict`` a clipped mass above ``1e-6 * sum|eig| + 1e-12`` raises
    :class:`ExcessiveNegativity`; otherwise it is only reported.
    """
    sigma = np.asarray(sigma, dtype=float)
    scale = 1.0 + np.max(np.abs(sigma), initial=0.0)
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise NotSymmetric("covariance matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    neg = evals < 0
    clipped = float(-evals[neg].sum())
    if strict and clipped > NEGATIVITY_RTOL * float(np.abs(evals).sum()) + NEGATIVITY_ATOL:
        raise ExcessiveNegativity(
            f"clipped eigenvalue mass {clipped:.3e} exceeds tolerance; covariance is not PSD"
        )
    evals = np.where(neg, 0.0, evals)
    return PsdFactor(evecs * np.sqrt(evals), clipped)


def mvn_sample(mean, factor: PsdFactor, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """``mean + F z`` with standard normal ``z``; ``size`` draws stack on axis 0."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (factor.dim,):
        raise DimensionMismatch(f"mean has shape {mean.shape}, factor has dim {factor.dim}")
    r = factor.factor.shape[1]
    if size is None:
        return mean + factor.factor @ rng.standard_normal(r)
    return mean + rng.standard_normal((size, r)) @ factor.factor.T


def conditional_gaussian(mean, cov, observed_idx: Sequence[int], observed_vals):
    """Mean and covariance of the unobserved coordinates given the observed ones."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    obs = np.asarray(observed_idx, dtype=int)
    vals = np.asarray(observed_vals, dtype=float)
    if obs.shape != vals.shape or cov.shape != (mean.size, mean.size):
        raise DimensionMismatch("observed indices/values or covariance have wrong shape")
    free = np.setdiff1d(np.arange(mean.size), obs)
    s22 = cov[np.ix_(obs, obs)]
    s12 = cov[np.ix_(free, obs)]
    s11 = cov[np.ix_(free, free)]
    ridge = 1e-12 * max(np.trace(s22), 0.0)
    s22 = s22 + ridge * np.eye(obs.size)
    try:
        gain = np.linalg.solve(s22, s12.T).T
    except np.linalg.LinAlgError:
        raise SingularObservedBlock("observed covariance block is singular") from None
    if not np.all(np.isfinite(gain)):
        raise SingularObservedBlock("observed covariance block is singular")
    cond_mean = mean[free] + gain @ (vals - mean[obs])
    cond_cov = s11 - gain @ s12.T
    return cond_mean, 0.5 * (cond_cov + cond_cov.T)
