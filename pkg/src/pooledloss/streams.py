"""Deterministic random streams and systematic-factor paths.

Every stream is addressed by ``(seed, purpose, index...)`` through
``numpy.random.SeedSequence`` spawn keys, so results never depend on how work
is split across threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np

from .model import SystematicRiskSpec, TimeGrid, eval_risk_coeffs

# purpose tags for spawn keys
POOL = 1
SYSTEMATIC = 2
FLUCT = 3
SKELETON = 4

# systematic paths are drawn in fixed-size blocks, one stream per block
X_BLOCK = 256


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``POOLEDLOSS_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("POOLEDLOSS_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map; thread count affects only wall time."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def euler_factor_path(risk: SystematicRiskSpec, grid: TimeGrid, dv: np.ndarray) -> np.ndarray:
    """Euler path(s) of X driven by Brownian increments ``dv`` (last axis = time)."""
    dv = np.asarray(dv, dtype=float)
    x = np.empty(dv.shape[:-1] + (dv.shape[-1] + 1,))
    x[..., 0] = risk.x0
    for i in range(dv.shape[-1]):
        b0, s0 = eval_risk_coeffs(risk, x[..., i])
        x[..., i + 1] = x[..., i] + b0 * grid.dt + s0 * dv[..., i]
    return x


def brownian_increments(seed: int, start: int, stop: int, grid: TimeGrid) -> np.ndarray:
    """Increments ``dV`` for systematic paths ``start..stop-1``, shape (M, n_steps)."""
    out = np.empty((stop - start, grid.n_steps))
    sqdt = np.sqrt(grid.dt)
    for block in range(start // X_BLOCK, (stop - 1) // X_BLOCK + 1 if stop > start else 0):
        lo = block * X_BLOCK
        z = stream(seed, SYSTEMATIC, block).standard_normal((X_BLOCK, grid.n_steps))
        a, b = max(lo, start), min(lo + X_BLOCK, stop)
        out[a - start:b - start] = z[a - lo:b - lo] * sqdt
    return out


def systematic_paths(risk: SystematicRiskSpec, grid: TimeGrid, n_paths: int, seed: int, start: int = 0):
    """Return ``(x, dv)`` for paths ``start..start+n_paths-1``.

    ``x`` has shape (M, n_points) and ``dv`` shape (M, n_steps); path ``m`` is
    the same regardless of which range it is requested in.
    """
    dv = brownian_increments(seed, start, start + n_paths, grid)
    return euler_factor_path(risk, grid, dv), dv
