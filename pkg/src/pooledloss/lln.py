"""Truncated law-of-large-numbers moment system along a systematic path.

``u_k(t)`` is the k-th moment of the limiting (sub-probability) intensity
measure; ``1 - u_0`` is the first-order loss. The hierarchy is closed with
``u_{K+1} = 0`` and integrated by Euler-Maruyama on the supplied Brownian
increments of the systematic factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, UnstableBlowup, ValidationError
from .model import ObligorParams, SystematicRiskSpec, TimeGrid, eval_risk_coeffs

BLOWUP = 1e12


@dataclass(frozen=True)
class MomentTrajectory:
    grid: TimeGrid
    K_lln: int
    u: np.ndarray  # (n_points, K_lln + 1)
    x_path: np.ndarray  # (n_points,)
    dv_path: np.ndarray  # (n_steps,)
    int_sigma0_sq: np.ndarray  # (n_points,)
    params: ObligorParams
    risk: SystematicRiskSpec
    clamped: int = 0

    @property
    def loss(self) -> np.ndarray:
        return first_order_loss(self)


def lln_drift(u, params: ObligorParams, b0, s0, u1_total=None):
    """dt-coefficient of the moment system; leading axes of ``u`` broadcast.

    ``u1_total`` replaces ``u_1`` in the contagion term (pool-wide first
    moment in heterogeneous pools); ``b0``/``s0`` broadcast against
    ``u[..., 0]``.
    """
    K = u.shape[-1] - 1
    k = np.arange(K + 1, dtype=float)
    b0 = np.asarray(b0, dtype=float)[..., None]
    s0 = np.asarray(s0, dtype=float)[..., None]
    u1 = u[..., 1:2] if u1_total is None else np.asarray(u1_total, dtype=float)[..., None]
    bs = params.beta_s
    own = -params.alpha * k + bs * b0 * k + 0.5 * bs * bs * s0 * s0 * k * (k - 1)
    lower = 0.5 * params.sigma ** 2 * k * (k - 1) + params.alpha * params.lambda_bar * k + params.beta_c * k * u1
    drift = u * own
    drift[..., 1:] += u[..., :-1] * lower[..., 1:]
    drift[..., :-1] -= u[..., 1:]
    return drift


def lln_step(u, params, b0, s0, dv, dt, u1_total=None):
    """One Euler step; returns the new moments and the number of clamped entries."""
    k = np.arange(u.shape[-1], dtype=float)
    noise = (params.beta_s * np.asarray(s0, dtype=float) * np.asarray(dv, dtype=float))[..., None] * k
    new = u + lln_drift(u, params, b0, s0, u1_total) * dt + noise * u
    neg = new < 0
    count = int(neg.sum())
    if count:
        new[neg] = 0.0
    if not np.all(np.abs(new) <= BLOWUP):
        raise UnstableBlowup(
            "LLN moments exceeded 1e12 (moment-growth instability); reduce dt or the truncation level"
        )
    return new, count


def initial_moments(params: ObligorParams, K: int) -> np.ndarray:
    return params.lambda0 ** np.arange(K + 1, dtype=float)


def solve_lln_moments(
    params: ObligorParams,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    K_lln: int,
    x_path,
    dv_path,
) -> MomentTrajectory:
    """Euler solution of the truncated moment system on one systematic path."""
    if K_lln < 1:
        raise ValidationError("K_lln must be >= 1")
    x_path = np.asarray(x_path, dtype=float)
    dv_path = np.asarray(dv_path, dtype=float)
    if x_path.shape != (grid.n_points,) or dv_path.shape != (grid.n_steps,):
        raise GridMismatch("x_path/dv_path do not match the grid")
    b0, s0 = eval_risk_coeffs(risk, x_path)
    u = np.empty((grid.n_points, K_lln + 1))
    u[0] = initial_moments(params, K_lln)
    clamped = 0
    for i in range(grid.n_steps):
        u[i + 1], c = lln_step(u[i], params, b0[i], s0[i], dv_path[i], grid.dt)
        clamped += c
    s0sq = s0 * s0
    isq = np.concatenate(([0.0], np.cumsum(0.5 * grid.dt * (s0sq[1:] + s0sq[:-1]))))
    return MomentTrajectory(grid, K_lln, u, x_path, dv_path, isq, params, risk, clamped)


def stabilized_moments(traj: MomentTrajectory) -> np.ndarray:
    """``exp(-0.5 beta_s^2 k(k-1) int sigma0^2) * u_k`` at every grid point."""
    k = np.arange(traj.K_lln + 1, dtype=float)
    bs = traj.params.beta_s
    return np.exp(-0.5 * bs * bs * np.outer(traj.int_sigma0_sq, k * (k - 1))) * traj.u


def first_order_loss(traj: MomentTrajectory) -> np.ndarray:
    return 1.0 - traj.u[:, 0]
