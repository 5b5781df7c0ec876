"""Monte Carlo simulation of the finite N-name pool.

The simulator is the reference against which the large-pool approximations
are validated. Time stepping per grid interval:

1. Euler step of the systematic factor X;
2. full-truncation Euler step of each surviving intensity;
3. trapezoidal update of each name's integrated intensity;
4. a name defaults once its integrated intensity reaches its unit
   exponential threshold;
5. the ``d`` defaults of the step each add ``beta_c / N`` to every
   survivor's intensity and ``1 / N`` to the loss; survivors' integrated
   intensities are credited half a step of the jump, the trapezoidal value
   for a jump at mid-step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import HorizonOffGrid, TimeOffGrid, ValidationError
from .model import PortfolioSpec, SystematicRiskSpec, TimeGrid
from .streams import POOL, euler_factor_path, parallel_map, stream

# normals held in memory per batch of paths
_BATCH_FLOATS = 4_000_000


@dataclass(frozen=True)
class PoolPath:
    grid: TimeGrid
    loss: np.ndarray  # (n_points,)
    x: np.ndarray  # (n_points,)
    default_times: np.ndarray  # (N,), NaN for survivors
    names: int
    intensity: np.ndarray | None = None  # (n_points, N), zero once defaulted

    @property
    def defaults(self) -> np.ndarray:
        return np.rint(self.loss * self.names).astype(int)


@dataclass(frozen=True)
class EmpiricalLossDistribution:
    horizon: float
    samples: np.ndarray

    @property
    def paths(self) -> int:
        return self.samples.size

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def variance(self) -> float:
        return float(self.samples.var(ddof=1)) if self.paths > 1 else 0.0

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.variance / self.paths))

    def quantile(self, level: float) -> float:
        return float(np.quantile(np.sort(self.samples), level))

    def cdf(self, x) -> np.ndarray:
        s = np.sort(self.samples)
        return np.searchsorted(s, np.asarray(x, dtype=float), side="right") / s.size

    def summary(self) -> dict:
        return {
            "horizon": self.horizon,
            "paths": self.paths,
            "mean": self.mean,
            "variance": self.variance,
            "std_error": self.std_error,
            "q95": self.quantile(0.95),
            "q99": self.quantile(0.99),
        }


def _name_arrays(portfolio: PortfolioSpec):
    counts = portfolio.type_counts()
    cols = {k: [] for k in ("alpha", "lambda_bar", "sigma", "beta_c", "beta_s", "lambda0")}
    for (params, _), n in zip(portfolio.types, counts):
        for key in cols:
            cols[key].append(np.full(n, getattr(params, key)))
    return {k: np.concatenate(v) for k, v in cols.items()}


@numba.njit(cache=True, nogil=True)
def _step_pool(alpha, lbar, sigma, beta_c, beta_s, lambda0, thresh, dw, dx, dt, diffusive, defaults, dtimes, lam_out, keep):
    B, n = thresh.shape
    steps = dx.shape[1]
    lam = np.empty(n)
    integ = np.empty(n)
    alive = np.empty(n, dtype=np.bool_)
    for b in range(B):
        lam[:] = lambda0
        integ[:] = 0.0
        alive[:] = True
        total = 0
        if keep:
            lam_out[b, 0, :] = lam
        for i in range(steps):
            d = 0
            for j in range(n):
                if not alive[j]:
                    continue
                old = lam[j]
                new = old + alpha[j] * (lbar[j] - old) * dt + beta_s[j] * old * dx[b, i]
                if diffusive:
                    new += sigma[j] * np.sqrt(old) * dw[b, i, j]
                if new < 0.0:
                    new = 0.0
                integ[j] += 0.5 * dt * (old + new)
                lam[j] = new
                if integ[j] >= thresh[b, j]:
                    alive[j] = False
                    dtimes[b, j] = (i + 1) * dt
                    d += 1
            if d > 0:
                for j in range(n):
                    if alive[j]:
                        jump = beta_c[j] * d / n
                        lam[j] += jump
                        # the defaults fall inside the step, on average at its middle
                        integ[j] += 0.5 * dt * jump
            total += d
            defaults[b, i + 1] = total
            if keep:
                for j in range(n):
                    lam_out[b, i + 1, j] = lam[j] if alive[j] else 0.0


def _simulate_batch(portfolio, risk, grid, seed, path_ids, x_seed=None, keep_names=False):
    n = portfolio.names
    p = _name_arrays(portfolio)
    B = len(path_ids)
    steps = grid.n_steps
    dt = grid.dt
    sqdt = np.sqrt(dt)
    diffusive = bool(np.any(p["sigma"] > 0))
    uses_x = bool(np.any(p["beta_s"] != 0)) and not risk.is_frozen

    thresh = np.empty((B, n))
    dw = np.empty((B, steps, n)) if diffusive else None
    dv = np.zeros((B, steps))
    for b, pid in enumerate(path_ids):
        g = stream(seed, POOL, pid, 0)
        thresh[b] = g.standard_exponential(n)
        if diffusive:
            dw[b] = g.standard_normal((steps, n))
        if uses_x or keep_names:
            gx = stream(seed if x_seed is None else x_seed, POOL, pid, 1)
            dv[b] = gx.standard_normal(steps)
    if diffusive:
        dw *= sqdt
    dv *= sqdt

    xs = euler_factor_path(risk, grid, dv) if (uses_x or keep_names) else np.full((B, steps + 1), risk.x0)
    dx = np.diff(xs, axis=1) if uses_x else np.zeros((B, steps))
    defaults = np.zeros((B, steps + 1), dtype=np.int64)
    dtimes = np.full((B, n), np.nan)
    lam_out = np.zeros((B, steps + 1, n)) if keep_names else np.zeros((1, 1, 1))
    _step_pool(
        p["alpha"], p["lambda_bar"], p["sigma"], p["beta_c"], p["beta_s"], p["lambda0"],
        thresh, dw if diffusive else np.zeros((B, 1, 1)), dx, dt, diffusive, defaults, dtimes,
        lam_out, keep_names,
    )
    if keep_names:
        return defaults / n, xs, dtimes, lam_out
    return defaults / n, xs, None, None


def simulate_pool(
    portfolio: PortfolioSpec,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    seed: int,
    path_id: int = 0,
    x_seed: int | None = None,
) -> PoolPath:
    """One path of the finite pool with per-name default times and intensities.

    ``x_seed`` overrides the factor stream only. Path ``path_id`` has the same
    loss as the corresponding row of :func:`simulate_losses`.
    """
    loss, xs, dtimes, lam = _simulate_batch(portfolio, risk, grid, seed, [path_id], x_seed, keep_names=True)
    return PoolPath(grid, loss[0], xs[0], dtimes[0], portfolio.names, lam[0])


def simulate_losses(
    portfolio: PortfolioSpec,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    paths: int,
    seed: int,
    threads: int | None = None,
    start: int = 0,
    x_seed: int | None = None,
) -> np.ndarray:
    """Loss trajectories of paths ``start..start+paths-1``, shape (paths, n_points)."""
    if paths < 1:
        raise ValidationError("need at least one path")
    per_path = grid.n_steps * portfolio.names + 1
    size = max(1, min(64, _BATCH_FLOATS // per_path))
    ids = np.arange(start, start + paths)
    batches = [ids[i:i + size] for i in range(0, paths, size)]
    parts = parallel_map(
        lambda b: _simulate_batch(portfolio, risk, grid, seed, list(b), x_seed)[0], batches, threads
    )
    return np.concatenate(parts, axis=0)


def empirical_loss_distribution(
    portfolio: PortfolioSpec,
    risk: SystematicRiskSpec,
    grid: TimeGrid,
    paths: int,
    t: float,
    seed: int,
    threads: int | None = None,
) -> EmpiricalLossDistribution:
    try:
        idx = grid.index_of(t)
    except TimeOffGrid as exc:
        raise HorizonOffGrid(str(exc)) from None
    losses = simulate_losses(portfolio, risk, grid, paths, seed, threads)
    return EmpiricalLossDistribution(float(t), losses[:, idx].copy())
