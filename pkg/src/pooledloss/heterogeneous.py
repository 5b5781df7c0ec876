"""Moment systems for pools made of several weighted types.

Per-type moments are normalized to unit initial mass; pool-wide quantities
are weighted sums. Types interact through the pool-wide first moment in
the contagion drift and, when contagion is on, through the martingale
forcing, since one default moves every survivor's intensity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import GridMismatch, MomentVectorTooShort, UnstableBlowup, ValidationError
from .fluctuation import BLOWUP, FluctuationConfig, covariation_matrix, drift_matrix
from .lln import initial_moments, lln_step
from .model import ObligorParams, PortfolioSpec, SystematicRiskSpec, TimeGrid, eval_risk_coeffs
from .numerics import psd_factor
from .streams import FLUCT, stream


@dataclass(frozen=True)
class TypedMomentField:
    grid: TimeGrid
    K_lln: int
    types: tuple[ObligorParams, ...]
    weights: np.ndarray
    u: np.ndarray  # (n_points, P, K_lln + 1), per-type normalized
    x_path: np.ndarray
    dv_path: np.ndarray
    risk: SystematicRiskSpec
    clamped: int = 0

    @property
    def aggregate(self) -> np.ndarray:
        """Pool-wide moments ``sum_p w_p u_k(t, p)``, shape (n_points, K_lln + 1)."""
        return np.einsum("p,ipk->ik", self.weights, self.u)

    @property
    def loss(self) -> np.ndarray:
        return 1.0 - self.aggregate[:, 0]


def _split(types) -> tuple[tuple[ObligorParams, ...], np.ndarray]:
    if isinstance(types, PortfolioSpec):
        types = types.types
    types = list(types)
    if not types:
        raise ValidationError("need at least one type")
    params = tuple(t for t, _ in types)
    weights = np.array([w for _, w in types], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValidationError("type weights must be positive and sum to 1")
    return params, weights


def solve_heterogeneous_lln(
    types,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    K_lln: int,
    x_path,
    dv_path,
) -> TypedMomentField:
    """Per-type Euler solution in lockstep, coupled through ``sum_p w_p u_1(p)``."""
    params, weights = _split(types)
    if K_lln < 1:
        raise ValidationError("K_lln must be >= 1")
    x_path = np.asarray(x_path, dtype=float)
    dv_path = np.asarray(dv_path, dtype=float)
    if x_path.shape != (grid.n_points,) or dv_path.shape != (grid.n_steps,):
        raise GridMismatch("x_path/dv_path do not match the grid")
    b0, s0 = eval_risk_coeffs(risk, x_path)
    P = len(params)
    u = np.empty((grid.n_points, P, K_lln + 1))
    u[0] = [initial_moments(p, K_lln) for p in params]
    clamped = 0
    for i in range(grid.n_steps):
        u1 = weights @ u[i, :, 1]
        for j, p in enumerate(params):
            u[i + 1, j], c = lln_step(u[i, j], p, b0[i], s0[i], dv_path[i], grid.dt, u1_total=u1)
            clamped += c
    return TypedMomentField(grid, K_lln, params, weights, u, x_path, dv_path, risk, clamped)


def _block_drift(field: TypedMomentField, i: int, K: int, b0, s0) -> np.ndarray:
    P = len(field.types)
    d = K + 1
    k = np.arange(d, dtype=float)
    u = field.u[i]
    u1 = field.weights @ u[:, 1]
    A = np.zeros((P * d, P * d))
    for p, par in enumerate(field.types):
        blk = drift_matrix(u[p], par, K, b0, s0, u1_total=u1)
        # own column carries weight w_p instead of 1; other types add w_q
        blk[1:, 1] += par.beta_c * k[1:] * u[p, :K] * (field.weights[p] - 1.0)
        A[p * d:(p + 1) * d, p * d:(p + 1) * d] = blk
        for q in range(P):
            if q != p:
                A[p * d + 1:(p + 1) * d, q * d + 1] += par.beta_c * k[1:] * u[p, :K] * field.weights[q]
    return A


def _block_covariation(field: TypedMomentField, i: int, K: int) -> np.ndarray:
    """Covariation rate of the per-type normalized martingale forcing.

    Idiosyncratic diffusion and default removal act within a type. A default
    of any name shifts every survivor's intensity, so the contagion terms
    couple types through rank-one pieces built from ``c_{q,k} = beta_c(q) k u_{k-1}(q)``.
    """
    if len(field.types) == 1:
        return covariation_matrix(field.u[i, 0], field.types[0], K)
    d = K + 1
    k = np.arange(d)
    kk, jj = np.meshgrid(k, k, indexing="ij")
    u = field.u[i]
    U1 = field.weights @ u[:, 1]
    blocks, c, r = [], [], []
    for p, par in enumerate(field.types):
        own = par.sigma ** 2 * kk * jj * u[p, np.maximum(kk + jj - 1, 0)] + u[p, kk + jj + 1]
        blocks.append(own / field.weights[p])
        c.append(par.beta_c * k * u[p, np.maximum(k - 1, 0)])
        r.append(u[p, k + 1])
    c = np.concatenate(c)
    r = np.concatenate(r)
    S = block_diag(*blocks)
    S += U1 * np.outer(c, c) - np.outer(c, r) - np.outer(r, c)
    return S


def solve_heterogeneous_fluctuation(
    field: TypedMomentField,
    cfg: FluctuationConfig,
    J: int,
    seed: int,
) -> np.ndarray:
    """Scheme 1 sample paths of per-type normalized fluctuation moments.

    Returns shape (J, n_points, P, K+1). Pool-wide ``v_0`` is
    ``sum_p w_p v_0(p)``. A single type reproduces
    :func:`~pooledloss.fluctuation.scheme1_sample_paths` exactly.
    """
    K = cfg.K
    if field.K_lln < 2 * K + 1:
        raise MomentVectorTooShort(f"LLN truncation {field.K_lln} < 2K+1 = {2 * K + 1}")
    if cfg.dt_fluct is not None and cfg.substeps(field.grid) != 1:
        raise ValidationError("heterogeneous fluctuations run on the LLN grid only")
    P = len(field.types)
    d = K + 1
    grid = field.grid
    dt = grid.dt
    b0, s0 = eval_risk_coeffs(field.risk, field.x_path)
    lin_k = np.concatenate([par.beta_s * np.arange(d, dtype=float) for par in field.types])
    init = np.tile(cfg.initial, P)
    rng = stream(seed, FLUCT, 0)
    v = np.broadcast_to(init, (J, P * d)).copy()
    out = np.empty((J, grid.n_points, P * d))
    out[:, 0] = v
    for i in range(grid.n_steps):
        A = _block_drift(field, i, K, b0[i], s0[i])
        F = psd_factor(_block_covariation(field, i, K), strict=False).factor
        z = rng.standard_normal((J, P * d))
        v = v + (v @ A.T) * dt + (s0[i] * field.dv_path[i]) * lin_k * v + (z @ F.T) * np.sqrt(dt)
        if not np.all(np.abs(v) <= BLOWUP):
            raise UnstableBlowup("fluctuation moments exceeded 1e12; reduce dt")
        out[:, i + 1] = v
    return out.reshape(J, grid.n_points, P, d)


def aggregate_fluctuation(field: TypedMomentField, samples: np.ndarray) -> np.ndarray:
    """Pool-wide ``v_0`` per sample and grid point, shape (J, n_points)."""
    return np.einsum("p,jip->ji", field.weights, samples[..., 0])


def approximate_losses(field: TypedMomentField, samples: np.ndarray, names: float) -> np.ndarray:
    """Second-order loss samples ``L(t) - v_0(t)/sqrt(N)``, shape (J, n_points)."""
    return field.loss - aggregate_fluctuation(field, samples) / np.sqrt(names)
