"""Fluctuation moments: conditionally Gaussian second-order correction.

Given a systematic path, the truncated fluctuation moments ``v_0..v_K``
solve a linear SDE

    dv = A(t) v dt + B v dX + dM,   B = diag(k beta_s),

whose martingale forcing ``M`` has conditional covariation rate
``Sigma_M(t)`` built from the LLN moments. ``A`` here excludes the
``k beta_s b0`` drift because ``B dX`` carries it.

Two routes are offered:

* Scheme 1 samples ``v`` paths directly with Euler-Maruyama;
* Scheme 2 computes the conditional Gaussian law through the Euler
  propagator ``Psi`` (or RK4 when ``beta_s = 0``).

The propagator-based covariance accumulates
``Psi(t_{i+1})^{-1} Sigma_M(t_i) Psi(t_{i+1})^{-T} dt`` which is exactly the
covariance of the Scheme 1 Euler recursion; the beta_s = 0 case uses the
trapezoidal rule with the RK4 propagator instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import (
    GridMismatch,
    IllConditionedPsi,
    MomentVectorTooShort,
    RequiresZeroBetaS,
    UnstableBlowup,
    ValidationError,
)
from .lln import MomentTrajectory, initial_moments, lln_step
from .model import ObligorParams, SystematicRiskSpec, TimeGrid, eval_risk_coeffs
from .numerics import integrate_matrix_ode, integrate_matrix_sde, psd_factor
from .streams import FLUCT, X_BLOCK, parallel_map, stream, systematic_paths

BLOWUP = 1e12
PSI_COND_MAX = 1e12


@dataclass(frozen=True)
class FluctuationConfig:
    K: int = 6
    v0: np.ndarray | None = None
    dt_fluct: float | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("fluctuation truncation K must be >= 1")
        if self.v0 is not None:
            v0 = np.asarray(self.v0, dtype=float)
            if v0.shape != (self.K + 1,):
                raise ValidationError(f"v0 must have length K+1={self.K + 1}")
            object.__setattr__(self, "v0", v0)

    @property
    def initial(self) -> np.ndarray:
        return np.zeros(self.K + 1) if self.v0 is None else self.v0

    def substeps(self, grid: TimeGrid) -> int:
        if self.dt_fluct is None:
            return 1
        ratio = grid.dt / self.dt_fluct
        m = int(round(ratio))
        if m < 1 or abs(ratio - m) > 1e-9 * ratio:
            raise ValidationError("dt_fluct must divide the LLN time step")
        return m


@dataclass(frozen=True)
class ConditionalGaussianLaw:
    """Law of ``v(t)`` given the systematic path: ``N(Psi v0, Psi I Psi^T)``.

    ``inner[i]`` holds the accumulated ``int_0^{t_i} Psi^{-1} Sigma_M Psi^{-T}``.
    """

    grid: TimeGrid
    psi: np.ndarray  # (n_points, d, d)
    inner: np.ndarray  # (n_points, d, d)
    v0: np.ndarray

    @property
    def dim(self) -> int:
        return self.v0.size

    def mean(self, t: float) -> np.ndarray:
        return self.psi[self.grid.index_of(t)] @ self.v0

    def cov(self, t: float) -> np.ndarray:
        i = self.grid.index_of(t)
        c = self.psi[i] @ self.inner[i] @ self.psi[i].T
        return 0.5 * (c + c.T)

    @property
    def means(self) -> np.ndarray:
        return self.psi @ self.v0

    @property
    def covs(self) -> np.ndarray:
        c = self.psi @ self.inner @ np.swapaxes(self.psi, 1, 2)
        return 0.5 * (c + np.swapaxes(c, 1, 2))

    @property
    def var_v0(self) -> np.ndarray:
        return self.covs[:, 0, 0]


# --------------------------------------------------------------------------
# coefficient builders


def covariation_matrix(u, params: ObligorParams, K: int) -> np.ndarray:
    """Conditional covariation rate of the martingale forcing, shape (..., K+1, K+1).

    ``u`` must hold at least ``2K + 2`` moments; leading axes broadcast.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] < 2 * K + 2:
        raise MomentVectorTooShort(f"need {2 * K + 2} LLN moments for K={K}, got {u.shape[-1]}")
    k = np.arange(K + 1)
    kk, jj = np.meshgrid(k, k, indexing="ij")
    s = kk + jj
    # index -1 only ever appears multiplied by k=0 or j=0
    km1 = np.maximum(kk - 1, 0)
    jm1 = np.maximum(jj - 1, 0)
    up = lambda idx: u[..., idx]
    bc = params.beta_c
    out = (
        params.sigma ** 2 * kk * jj * up(np.maximum(s - 1, 0))
        + up(s + 1)
        - bc * kk * up(km1) * up(jj + 1)
        - bc * jj * up(jm1) * up(kk + 1)
        + bc * bc * kk * jj * up(km1) * up(jm1) * u[..., 1, None, None]
    )
    return out


def drift_matrix(u, params: ObligorParams, K: int, b0=0.0, s0=0.0, include_factor_drift=True, u1_total=None):
    """Matrix of dt-coefficients of the v-system, shape (..., K+1, K+1).

    With ``include_factor_drift`` the ``k beta_s b0`` diagonal term is included
    (Scheme 1 form); without it the matrix pairs with ``B dX`` (Scheme 2 form).
    """
    u = np.asarray(u, dtype=float)
    lead = u.shape[:-1]
    k = np.arange(K + 1, dtype=float)
    b0 = np.asarray(b0, dtype=float)[..., None]
    s0 = np.asarray(s0, dtype=float)[..., None]
    u1 = u[..., 1:2] if u1_total is None else np.asarray(u1_total, dtype=float)[..., None]
    bs = params.beta_s
    A = np.zeros(lead + (K + 1, K + 1))
    diag = -k * params.alpha + 0.5 * k * (k - 1) * (bs * s0) ** 2
    if include_factor_drift:
        diag = diag + k * bs * b0
    idx = np.arange(K + 1)
    A[..., idx, idx] = diag
    sub = 0.5 * params.sigma ** 2 * k * (k - 1) + params.alpha * params.lambda_bar * k + k * params.beta_c * u1
    A[..., idx[1:], idx[:-1]] += sub[..., 1:]
    A[..., idx[:-1], idx[1:]] -= 1.0
    # linearized contagion: beta_c k u_{k-1} v_1
    A[..., 1:, 1] += params.beta_c * k[1:] * u[..., :K]
    return A


def factor_matrix(params: ObligorParams, K: int) -> np.ndarray:
    return np.diag(params.beta_s * np.arange(K + 1, dtype=float))


def _check_lengths(traj: MomentTrajectory, K: int):
    if traj.K_lln < 2 * K + 1:
        raise MomentVectorTooShort(f"LLN truncation {traj.K_lln} < 2K+1 = {2 * K + 1}")


# --------------------------------------------------------------------------
# grid refinement for dt_fluct < dt


@dataclass(frozen=True)
class _FineInputs:
    grid: TimeGrid
    m: int
    u: np.ndarray
    x: np.ndarray
    dv: np.ndarray
    b0: np.ndarray
    s0: np.ndarray


def _fine_inputs(traj: MomentTrajectory, cfg: FluctuationConfig, rng=None) -> _FineInputs:
    m = cfg.substeps(traj.grid)
    b0, s0 = eval_risk_coeffs(traj.risk, traj.x_path)
    if m == 1:
        return _FineInputs(traj.grid, 1, traj.u, traj.x_path, traj.dv_path, b0, s0)
    fine = traj.grid.refine(m)
    tc, tf = traj.grid.times, fine.times
    u = np.stack([np.interp(tf, tc, traj.u[:, k]) for k in range(traj.u.shape[1])], axis=1)
    n = traj.grid.n_steps
    if rng is None:
        rng = np.random.default_rng(0)
    # Brownian bridge refinement: sub-increments sum to the coarse increment
    z = rng.standard_normal((n, m)) * np.sqrt(fine.dt)
    dev = z - z.mean(axis=1, keepdims=True)
    dv = (traj.dv_path[:, None] / m + dev).ravel()
    dx_coarse = np.diff(traj.x_path)
    dx = (dx_coarse[:, None] / m + s0[:-1, None] * dev).ravel()
    x = np.concatenate(([traj.x_path[0]], traj.x_path[0] + np.cumsum(dx)))
    fb0, fs0 = eval_risk_coeffs(traj.risk, x)
    return _FineInputs(fine, m, u, x, dv, fb0, fs0)


# --------------------------------------------------------------------------
# Scheme 1


def scheme1_sample_paths(
    traj: MomentTrajectory,
    params: ObligorParams,
    cfg: FluctuationConfig,
    J: int,
    seed: int,
) -> np.ndarray:
    """``J`` Euler paths of the fluctuation moments on the LLN grid, shape (J, n_points, K+1).

    Uses the trajectory's own Brownian increments for the ``v_k dV`` term.
    """
    K = cfg.K
    _check_lengths(traj, K)
    rng = stream(seed, FLUCT, 0)
    fin = _fine_inputs(traj, cfg, stream(seed, FLUCT, 1))
    dt = fin.grid.dt
    k = np.arange(K + 1, dtype=float)
    v = np.broadcast_to(cfg.initial, (J, K + 1)).copy()
    out = np.empty((J, traj.grid.n_points, K + 1))
    out[:, 0] = v
    for i in range(fin.grid.n_steps):
        u = fin.u[i]
        A = drift_matrix(u, params, K, fin.b0[i], fin.s0[i])
        F = psd_factor(covariation_matrix(u, params, K), strict=False).factor
        z = rng.standard_normal((J, K + 1))
        v = v + (v @ A.T) * dt + (params.beta_s * fin.s0[i] * fin.dv[i]) * k * v + (z @ F.T) * np.sqrt(dt)
        if not np.all(np.abs(v) <= BLOWUP):
            raise UnstableBlowup("fluctuation moments exceeded 1e12; reduce dt_fluct")
        if (i + 1) % fin.m == 0:
            out[:, (i + 1) // fin.m] = v
    return out


# --------------------------------------------------------------------------
# semi-analytic laws


def gaussian_case(traj: MomentTrajectory, params: ObligorParams, cfg: FluctuationConfig) -> ConditionalGaussianLaw:
    """Exact Gaussian law when the intensities have no systematic exposure.

    RK4 propagator of ``dPsi = A Psi dt`` and trapezoidal accumulation of
    ``Psi^{-1} Sigma_M Psi^{-T}``.
    """
    if params.beta_s != 0:
        raise RequiresZeroBetaS("the closed Gaussian case needs beta_s = 0")
    K = cfg.K
    _check_lengths(traj, K)
    fin = _fine_inputs(traj, cfg)
    tf = fin.grid.times

    def A(t):
        u = np.array([np.interp(t, tf, fin.u[:, k]) for k in range(K + 2)])
        return drift_matrix(u, params, K)

    psi = integrate_matrix_ode(A, fin.grid).mats
    inv = np.linalg.inv(psi)
    sm = covariation_matrix(fin.u, params, K)
    integrand = inv @ sm @ np.swapaxes(inv, 1, 2)
    inner = np.zeros_like(integrand)
    inner[1:] = np.cumsum(0.5 * fin.grid.dt * (integrand[1:] + integrand[:-1]), axis=0)
    sel = slice(None, None, fin.m)
    return ConditionalGaussianLaw(traj.grid, psi[sel], inner[sel], cfg.initial)


def scheme2_conditional_law(
    traj: MomentTrajectory,
    params: ObligorParams,
    cfg: FluctuationConfig,
    seed: int = 0,
) -> ConditionalGaussianLaw:
    """Conditional Gaussian law of ``v`` given the trajectory's systematic path.

    ``seed`` only matters when ``cfg.dt_fluct`` refines the grid (bridge
    interpolation of the factor increments).
    """
    K = cfg.K
    _check_lengths(traj, K)
    fin = _fine_inputs(traj, cfg, stream(seed, FLUCT, 1))
    A = drift_matrix(fin.u, params, K, fin.b0, fin.s0, include_factor_drift=False)
    psi = integrate_matrix_sde(A, factor_matrix(params, K), fin.x, fin.grid).mats
    cond = np.linalg.cond(psi)
    if not np.all(cond <= PSI_COND_MAX):
        raise IllConditionedPsi(
            f"fundamental solution condition number {np.nanmax(cond):.3e} exceeds 1e12 "
            "(large systematic exposure); reduce dt_fluct"
        )
    inv = np.linalg.inv(psi[1:])
    sm = covariation_matrix(fin.u[:-1], params, K)
    terms = inv @ sm @ np.swapaxes(inv, 1, 2) * fin.grid.dt
    inner = np.zeros_like(psi)
    inner[1:] = np.cumsum(terms, axis=0)
    sel = slice(None, None, fin.m)
    return ConditionalGaussianLaw(traj.grid, psi[sel], inner[sel], cfg.initial)


def cross_covariance(law: ConditionalGaussianLaw, tau1: float, tau2: float) -> np.ndarray:
    """``Cov[v(tau1), v(tau2) | X]``."""
    i, j = law.grid.index_of(tau1), law.grid.index_of(tau2)
    return law.psi[i] @ law.inner[min(i, j)] @ law.psi[j].T


def _clipped_factor(cov: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_skeleton(law: ConditionalGaussianLaw, times: Sequence[float], rng: np.random.Generator, size: int | None = None):
    """Joint draw of ``v`` at ``times`` by sequential Gaussian bridging.

    The latest time is drawn from its marginal; every other time, in the
    order given, from its law conditional on the nearest already-drawn
    times on either side. Returns shape (len(times), d) or
    (size, len(times), d).
    """
    from .numerics import conditional_gaussian

    times = [float(t) for t in times]
    if not times:
        raise ValidationError("no skeleton times requested")
    for t in times:
        law.grid.index_of(t)
    d = law.dim
    n = 1 if size is None else size
    order = [int(np.argmax(times))] + [i for i in range(len(times)) if i != int(np.argmax(times))]
    out = np.empty((n, len(times), d))
    done: dict[float, int] = {}
    for pos in order:
        s = times[pos]
        if s in done:
            out[:, pos] = out[:, done[s]]
            continue
        left = [t for t in done if t < s and np.trace(law.cov(t)) > 0]
        right = [t for t in done if t > s]
        nb = ([max(left)] if left else []) + ([min(right)] if right else [])
        blocks = [s] + nb
        mean = np.concatenate([law.mean(t) for t in blocks])
        cov = np.block([[cross_covariance(law, a, b) for b in blocks] for a in blocks])
        if nb:
            obs_idx = np.arange(d, d * len(blocks))
            vals = np.concatenate([out[:, done[t]] for t in nb], axis=1)
            # the conditional covariance does not depend on the observed values
            _, cc = conditional_gaussian(mean, cov, obs_idx, vals[0])
            cm = mean[:d] + (vals - mean[d:]) @ _regression(cov, d).T
        else:
            cm, cc = np.broadcast_to(mean[:d], (n, d)), cov[:d, :d]
        F = _clipped_factor(cc)
        out[:, pos] = cm + rng.standard_normal((n, d)) @ F.T
        done[s] = pos
    return out[0] if size is None else out


def _regression(cov: np.ndarray, d: int) -> np.ndarray:
    s22 = cov[d:, d:]
    ridge = 1e-12 * max(np.trace(s22), 0.0)
    return np.linalg.solve(s22 + ridge * np.eye(s22.shape[0]), cov[d:, :d]).T


def stabilized_fluctuations(law_or_samples, traj: MomentTrajectory) -> np.ndarray:
    """Apply ``exp(-0.5 beta_s^2 k(k-1) int sigma0^2)`` to fluctuation moments on the grid."""
    v = np.asarray(law_or_samples, dtype=float)
    K = v.shape[-1] - 1
    k = np.arange(K + 1, dtype=float)
    bs = traj.params.beta_s
    return np.exp(-0.5 * bs * bs * np.outer(traj.int_sigma0_sq, k * (k - 1))) * v


# --------------------------------------------------------------------------
# batched engines over many systematic paths


@dataclass
class PathBundle:
    """Per-path conditional quantities at the requested horizons.

    ``lln_loss``, ``v0_mean`` and ``v0_var`` have shape (M, H); ``samples``
    (Scheme 1 only) has shape (M, J, H) and holds sampled ``v_0``.
    """

    horizons: np.ndarray
    lln_loss: np.ndarray
    v0_mean: np.ndarray
    v0_var: np.ndarray
    samples: np.ndarray | None = None
    scheme: str = "scheme2"
    seconds_x: float = 0.0
    seconds_fluct: float = 0.0
    clamped: int = 0

    @property
    def paths(self) -> int:
        return self.lln_loss.shape[0]

    def column(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.horizons, t, rtol=0, atol=1e-12))
        if hits.size == 0:
            raise GridMismatch(f"horizon {t} was not recorded")
        return int(hits[0])


@numba.njit(cache=True, nogil=True)
def _scheme2_kernel(u_init, alpha, lbar, sigma, bc, bs, b0, s0, dv, x, dt, K, rec, lln_out, var_out):
    """Lockstep LLN Euler step and Scheme 2 covariance recursion per path.

    Returns the number of clamped LLN entries, or -1 (LLN blow-up) /
    -2 (non-finite covariance).
    """
    M, steps = dv.shape
    n = u_init.size
    d = K + 1
    u = np.empty(n)
    new = np.empty(n)
    sig = np.empty((d, d))
    sm = np.empty((d, d))
    G = np.empty((d, d))
    tmp = np.empty((d, d))
    clamped = 0
    for m in range(M):
        u[:] = u_init
        sig[:, :] = 0.0
        for i in range(steps + 1):
            h = rec[i]
            if h >= 0:
                lln_out[m, h] = 1.0 - u[0]
                var_out[m, h] = sig[0, 0]
            if i == steps:
                break
            u1 = u[1]
            # martingale covariation rate
            for k in range(d):
                km1 = k - 1 if k > 0 else 0
                for j in range(d):
                    jm1 = j - 1 if j > 0 else 0
                    s = k + j - 1 if k + j > 0 else 0
                    sm[k, j] = (sigma * sigma * k * j * u[s] + u[k + j + 1]
                                - bc * k * u[km1] * u[j + 1] - bc * j * u[jm1] * u[k + 1]
                                + bc * bc * k * j * u[km1] * u[jm1] * u1)
            # one-step propagator I + A dt + B dX
            dx = x[m, i + 1] - x[m, i]
            for k in range(d):
                for j in range(d):
                    G[k, j] = 0.0
                G[k, k] = 1.0 + (-k * alpha + 0.5 * k * (k - 1) * (bs * s0[m, i]) ** 2) * dt + bs * k * dx
                if k > 0:
                    G[k, k - 1] += (0.5 * sigma * sigma * k * (k - 1) + alpha * lbar * k + k * bc * u1) * dt
                    G[k, 1] += bc * k * u[k - 1] * dt
                if k < K:
                    G[k, k + 1] -= dt
            for k in range(d):
                for j in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += G[k, l] * sig[l, j]
                    tmp[k, j] = acc
            for k in range(d):
                for j in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += tmp[k, l] * G[j, l]
                    sig[k, j] = acc + sm[k, j] * dt
                    if not np.isfinite(sig[k, j]):
                        return -2
            # LLN Euler step
            noise = bs * s0[m, i] * dv[m, i]
            for k in range(n):
                own = -alpha * k + bs * b0[m, i] * k + 0.5 * bs * bs * s0[m, i] * s0[m, i] * k * (k - 1)
                dr = u[k] * own
                if k > 0:
                    dr += u[k - 1] * (0.5 * sigma * sigma * k * (k - 1) + alpha * lbar * k + bc * k * u1)
                if k < n - 1:
                    dr -= u[k + 1]
                val = u[k] + dr * dt + noise * k * u[k]
                if val < 0.0:
                    val = 0.0
                    clamped += 1
                if not abs(val) <= BLOWUP:
                    return -1
                new[k] = val
            u[:] = new
    return clamped


def _block_run(params, risk, grid, K, K_lln, seed, lo, hi, rec, scheme, J):
    t0 = time.perf_counter()
    x, dv = systematic_paths(risk, grid, hi - lo, seed, start=lo)
    b0, s0 = eval_risk_coeffs(risk, x)
    M = hi - lo
    if scheme == "scheme2":
        b0, s0 = np.broadcast_to(b0, x.shape).copy(), np.broadcast_to(s0, x.shape).copy()
        marks = np.full(grid.n_points, -1, dtype=np.int64)
        for i, h in rec.items():
            marks[i] = h
        lln_loss = np.empty((M, len(rec)))
        var = np.empty((M, len(rec)))
        t1 = time.perf_counter()
        clamped = _scheme2_kernel(
            initial_moments(params, K_lln), params.alpha, params.lambda_bar, params.sigma, params.beta_c,
            params.beta_s, b0, s0, dv, x, grid.dt, K, marks, lln_loss, var,
        )
        if clamped == -1:
            raise UnstableBlowup("LLN moments exceeded 1e12 (moment-growth instability); reduce dt or the truncation level")
        if clamped == -2:
            raise UnstableBlowup("conditional covariance overflowed; reduce the time step")
        t2 = time.perf_counter()
        return lln_loss, np.zeros_like(var), var, None, t1 - t0, t2 - t1, clamped
    # scheme1: batched Euler-Maruyama of v alongside the LLN moments
    d = K + 1
    dt = grid.dt
    u = np.broadcast_to(initial_moments(params, K_lln), (M, K_lln + 1)).copy()
    H = len(rec)
    lln_loss = np.empty((M, H))
    samples = np.zeros((M, J, H))
    v = np.zeros((M, J, d))
    k = np.arange(d, dtype=float)
    rng = stream(seed, FLUCT, 2, lo // X_BLOCK)
    clamped = 0
    t_f = 0.0
    for i in range(grid.n_steps + 1):
        if i in rec:
            lln_loss[:, rec[i]] = 1.0 - u[:, 0]
            samples[:, :, rec[i]] = v[:, :, 0]
        if i == grid.n_steps:
            break
        ta = time.perf_counter()
        sm = covariation_matrix(u, params, K)
        A = drift_matrix(u, params, K, b0[:, i], s0[:, i])
        evals, evecs = np.linalg.eigh(sm)
        F = evecs * np.sqrt(np.clip(evals, 0.0, None))[:, None, :]
        z = rng.standard_normal((M, J, d))
        lin = (params.beta_s * s0[:, i] * dv[:, i])[:, None, None] * k
        v = v + np.einsum("mjl,mkl->mjk", v, A) * dt + lin * v + np.einsum("mjl,mkl->mjk", z, F) * np.sqrt(dt)
        if not np.all(np.abs(v) <= BLOWUP):
            raise UnstableBlowup("fluctuation moments exceeded 1e12; reduce the time step")
        t_f += time.perf_counter() - ta
        u, c = lln_step(u, params, b0[:, i], s0[:, i], dv[:, i], dt)
        clamped += c
    t_x = time.perf_counter() - t0 - t_f
    zeros = np.zeros((M, H))
    return lln_loss, zeros, zeros.copy(), samples, t_x, t_f, clamped


def run_paths(
    params: ObligorParams,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    K: int,
    paths: int,
    seed: int,
    horizons: Sequence[float],
    scheme: str = "scheme2",
    J: int = 1,
    K_lln: int | None = None,
    threads: int | None = None,
    start: int = 0,
) -> PathBundle:
    """Scheme 1 or Scheme 2 over systematic paths ``start..start+paths-1``.

    Work is split into fixed blocks of :data:`X_BLOCK` paths, each with its
    own random streams, so output is independent of ``threads``. With
    ``scheme="scheme1"`` the ``start`` must be block aligned.
    """
    if scheme not in ("scheme1", "scheme2"):
        raise ValidationError(f"unknown scheme {scheme!r}")
    if paths < 1:
        raise ValidationError("need at least one systematic path")
    if scheme == "scheme1" and (J < 1 or start % X_BLOCK):
        raise ValidationError("scheme1 needs J >= 1 and a block-aligned start")
    K_lln = 3 * K if K_lln is None else K_lln
    if K_lln < 2 * K + 1:
        raise MomentVectorTooShort(f"LLN truncation {K_lln} < 2K+1 = {2 * K + 1}")
    hz = np.asarray(horizons, dtype=float)
    if np.unique(hz).size != hz.size:
        raise ValidationError("horizons must be distinct")
    rec = {grid.index_of(t): h for h, t in enumerate(hz)}
    stop = start + paths
    edges = sorted({start, stop, *range((start // X_BLOCK + 1) * X_BLOCK, stop, X_BLOCK)})
    blocks = list(zip(edges[:-1], edges[1:]))
    parts = parallel_map(
        lambda b: _block_run(params, risk, grid, K, K_lln, seed, b[0], b[1], rec, scheme, J), blocks, threads
    )
    cat = lambda j: np.concatenate([p[j] for p in parts], axis=0)
    return PathBundle(
        horizons=hz,
        lln_loss=cat(0),
        v0_mean=cat(1),
        v0_var=cat(2),
        samples=cat(3) if scheme == "scheme1" else None,
        scheme=scheme,
        seconds_x=sum(p[4] for p in parts),
        seconds_fluct=sum(p[5] for p in parts),
        clamped=sum(p[6] for p in parts),
    )
