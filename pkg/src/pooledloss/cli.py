"""Command-line batch driver.

Subcommands ``simulate``, ``approx``, ``var``, ``skeleton``, ``compare`` and
``allocate`` read a JSON config, run the corresponding pipeline and write
CSV tables plus a JSON manifest into ``--out``. Exit status is 0 on success,
2 for usage or configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputs, NumericalError, RequiresZeroBetaS, ValidationError
from .finite_system import EmpiricalLossDistribution, simulate_losses, simulate_pool
from .fluctuation import FluctuationConfig, gaussian_case, run_paths, sample_skeleton, scheme1_sample_paths, scheme2_conditional_law
from .heterogeneous import aggregate_fluctuation, solve_heterogeneous_fluctuation, solve_heterogeneous_lln
from .io import RunManifest, config_hash, lln_rows, moment_header, typed_lln_rows, write_csv, write_plot_stub, write_records
from .lln import solve_lln_moments
from .loss import (
    Call,
    EstimatorReport,
    GaussianMixtureLoss,
    Scheme,
    expected_payoff,
    first_order_mixture,
    lattice,
    mixture_from_bundle,
    optimal_allocation,
    pilot_allocation_inputs,
    rationalized_allocation,
    second_order_mixture,
)
from .model import RunConfig, TimeGrid, load_config
from .streams import FLUCT, SKELETON, X_BLOCK, stream, systematic_paths

SCHEMES = ("first_order", "scheme1", "scheme2", "gaussian")
LEVELS = (0.95, 0.99)


@dataclass
class Settings:
    cfg: RunConfig
    grid: TimeGrid
    horizon: float
    seed: int
    out: Path
    threads: int | None
    scheme: str
    paths: int
    finite_paths: int
    samples: int
    K: int
    K_lln: int


def _pick(flag, cfg: RunConfig, key: str, default):
    if flag is not None:
        return flag
    return cfg.option(key, default)


def _settings(args, cfg: RunConfig, paths_key: str = "paths", paths_default: int = 2000) -> Settings:
    seed = int(_pick(args.seed, cfg, "seed", 0))
    if not 0 <= seed < 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    horizon = float(_pick(args.horizon, cfg, "horizon", cfg.grid.horizon))
    grid = TimeGrid(horizon, cfg.grid.dt)
    scheme = _pick(args.scheme, cfg, "scheme", "scheme2")
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}")
    K = int(_pick(args.trunc, cfg, "K", 6))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return Settings(
        cfg=cfg,
        grid=grid,
        horizon=horizon,
        seed=seed,
        out=out,
        threads=args.threads,
        scheme=scheme,
        paths=int(_pick(args.paths, cfg, paths_key, paths_default)),
        finite_paths=int(_pick(args.paths if paths_key == "finite_paths" else None, cfg, "finite_paths", 10_000)),
        samples=int(_pick(args.samples, cfg, "samples", 1)),
        K=K,
        K_lln=int(cfg.option("K_lln", 3 * K)),
    )


def _manifest(command: str, s: Settings, scheme: str | None) -> RunManifest:
    return RunManifest(
        command=command,
        config_hash=config_hash(s.cfg.raw),
        seed=s.seed,
        scheme=scheme,
        settings={
            "horizon": s.horizon,
            "dt": s.grid.dt,
            "names": s.cfg.portfolio.names,
            "paths": s.paths,
            "samples": s.samples,
            "K": s.K,
            "K_lln": s.K_lln,
        },
    )


# --------------------------------------------------------------------------
# second-order distributions shared by approx / var / compare


@dataclass
class SampleLoss:
    """Loss law represented by samples (Scheme 1 output)."""

    samples: np.ndarray
    horizon: float

    def quantile(self, level: float) -> float:
        return float(np.quantile(self.samples, level))

    def cdf(self, x):
        s = np.sort(self.samples)
        return np.searchsorted(s, np.asarray(x, dtype=float), side="right") / s.size

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def variance(self) -> float:
        return float(self.samples.var(ddof=1))

    def lattice(self, points: int = 1001) -> np.ndarray:
        lo = min(0.0, self.quantile(0.001))
        hi = max(1.0, self.quantile(0.999))
        x = np.linspace(lo, hi, points)
        from scipy.stats import gaussian_kde

        pdf = gaussian_kde(self.samples)(x) if np.ptp(self.samples) > 0 else np.zeros(points)
        return np.column_stack([x, self.cdf(x), pdf])


@dataclass
class Approximation:
    second: GaussianMixtureLoss | SampleLoss
    first: GaussianMixtureLoss
    seconds: float
    clamped: int
    components: np.ndarray | None = None  # rows path_id, lln_loss, v0_mean, v0_var
    pilot: dict | None = None


def _require_homogeneous(s: Settings, scheme: str):
    if not s.cfg.portfolio.is_homogeneous:
        raise ValidationError(f"scheme {scheme!r} needs a homogeneous portfolio; use first_order or scheme1")


def auto_allocate(s: Settings, budget: float, strike: float | None = None) -> tuple[int, int, dict]:
    """Pilot Scheme 1 run and the budget-optimal ``(M, J)``."""
    params = s.cfg.portfolio.params
    payoff = Call(float(_pick(strike, s.cfg, "strike", 0.12)))
    pm = int(s.cfg.option("pilot_paths", 50))
    pj = int(s.cfg.option("pilot_samples", 20))
    pilot = run_paths(params, s.cfg.risk, s.grid, s.K, pm, s.seed + 1, [s.horizon], "scheme1", J=pj,
                      K_lln=s.K_lln, threads=s.threads)
    loss = pilot.lln_loss[:, None, 0] - pilot.samples[..., 0] / math.sqrt(s.cfg.portfolio.names)
    s1, s2, tau1, tau2 = pilot_allocation_inputs(loss, payoff, pilot.seconds_x, pilot.seconds_fluct)
    info = {"sigma1_sq": s1, "sigma2_sq": s2, "tau1": tau1, "tau2": tau2, "budget": budget}
    try:
        M, J = optimal_allocation(s1, s2, tau1, tau2, budget)
        info["degenerate"] = False
    except DegenerateInputs:
        M, J = rationalized_allocation(s1, s2, tau1, tau2, budget)
        info["degenerate"] = True
    info.update(M=M, J=J)
    return M, J, info


def approximate(s: Settings, scheme: str, auto_budget: float | None = None) -> Approximation:
    """First- and second-order loss laws at ``s.horizon``."""
    t0 = time.perf_counter()
    pf = s.cfg.portfolio
    N = pf.names
    if not pf.is_homogeneous:
        if scheme not in ("first_order", "scheme1"):
            _require_homogeneous(s, scheme)
        return _approx_heterogeneous(s, scheme, t0)
    params = pf.params
    if scheme == "gaussian":
        if params.beta_s != 0:
            raise RequiresZeroBetaS("scheme gaussian needs beta_s = 0 for every type")
        x, dv = systematic_paths(s.cfg.risk, s.grid, 1, s.seed)
        traj = solve_lln_moments(params, s.cfg.risk, s.grid, s.K_lln, x[0], dv[0])
        law = gaussian_case(traj, params, FluctuationConfig(s.K))
        L = traj.loss[-1:]
        mix = second_order_mixture(L, [law], N, s.horizon)
        comps = np.array([[0, L[0], law.means[-1, 0], law.var_v0[-1]]])
        return Approximation(mix, first_order_mixture(L, s.horizon, N), time.perf_counter() - t0,
                             traj.clamped, comps)
    pilot = None
    M, J = s.paths, s.samples
    if scheme == "scheme1" and auto_budget is not None:
        M, J, pilot = auto_allocate(s, auto_budget)
    if M < 1:
        raise ValidationError("need at least one systematic path")
    run_scheme = "scheme1" if scheme == "scheme1" else "scheme2"
    bundle = run_paths(params, s.cfg.risk, s.grid, s.K, M, s.seed, [s.horizon], run_scheme, J=J,
                       K_lln=s.K_lln, threads=s.threads)
    first = mixture_from_bundle(bundle, N, s.horizon, first_order=True)
    comps = np.column_stack([np.arange(M), bundle.lln_loss[:, 0], bundle.v0_mean[:, 0], bundle.v0_var[:, 0]])
    if scheme == "scheme1":
        loss = bundle.lln_loss[:, None, 0] - bundle.samples[..., 0] / math.sqrt(N)
        second = SampleLoss(loss.ravel(), s.horizon)
        comps = None
    elif scheme == "first_order":
        second = first
    else:
        second = mixture_from_bundle(bundle, N, s.horizon)
    return Approximation(second, first, time.perf_counter() - t0, bundle.clamped, comps, pilot)


def _approx_heterogeneous(s: Settings, scheme: str, t0: float) -> Approximation:
    pf = s.cfg.portfolio
    x, dv = systematic_paths(s.cfg.risk, s.grid, s.paths, s.seed)
    cfg = FluctuationConfig(s.K)
    L = np.empty(s.paths)
    draws = []
    clamped = 0
    for m in range(s.paths):
        field = solve_heterogeneous_lln(pf, s.cfg.risk, s.grid, s.K_lln, x[m], dv[m])
        clamped += field.clamped
        L[m] = field.loss[-1]
        if scheme == "scheme1":
            sub = int(stream(s.seed, FLUCT, 5, m).integers(2 ** 63))
            v = solve_heterogeneous_fluctuation(field, cfg, s.samples, sub)
            draws.append(L[m] - aggregate_fluctuation(field, v)[:, -1] / math.sqrt(pf.names))
    first = first_order_mixture(L, s.horizon, pf.names)
    second = SampleLoss(np.concatenate(draws), s.horizon) if scheme == "scheme1" else first
    return Approximation(second, first, time.perf_counter() - t0, clamped)


def _path0_dumps(s: Settings, scheme: str, man: RunManifest):
    """Moment trajectories of systematic path 0, for inspection and plotting."""
    pf = s.cfg.portfolio
    x, dv = systematic_paths(s.cfg.risk, s.grid, 1, s.seed)
    times = s.grid.times
    if not pf.is_homogeneous:
        field = solve_heterogeneous_lln(pf, s.cfg.risk, s.grid, s.K_lln, x[0], dv[0])
        man.add(write_csv(s.out / "lln_types.csv", ["t", "type_id"] + moment_header("u", s.K_lln),
                          typed_lln_rows(times, field.u)))
        return
    params = pf.params
    traj = solve_lln_moments(params, s.cfg.risk, s.grid, s.K_lln, x[0], dv[0])
    man.add(write_csv(s.out / "lln.csv", ["t"] + moment_header("u", s.K_lln), lln_rows(times, traj.u)))
    cfg = FluctuationConfig(s.K)
    if scheme == "scheme1":
        v = scheme1_sample_paths(traj, params, cfg, 1, s.seed)[0]
        man.add(write_csv(s.out / "fluct.csv", ["t"] + moment_header("v", s.K), lln_rows(times, v)))
    elif scheme in ("scheme2", "gaussian"):
        law = gaussian_case(traj, params, cfg) if scheme == "gaussian" else scheme2_conditional_law(traj, params, cfg)
        man.add(write_csv(s.out / "covariance.csv", ["t", "Sigma_00"], np.column_stack([times, law.var_v0])))


def _lattice_rows(dist) -> np.ndarray:
    return dist.lattice() if isinstance(dist, SampleLoss) else lattice(dist)


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg, paths_key="finite_paths", paths_default=10_000)
    M = s.finite_paths
    if M < 1:
        raise ValidationError("paths must be >= 1")
    man = _manifest("simulate", s, "finite_system")
    t0 = time.perf_counter()
    losses = simulate_losses(cfg.portfolio, cfg.risk, s.grid, M, s.seed, s.threads)
    man.timings["finite_system"] = time.perf_counter() - t0
    dist = EmpiricalLossDistribution(s.horizon, losses[:, -1])
    man.add(write_csv(s.out / "losses.csv", ["path_id", "loss_at_t"], np.column_stack([np.arange(M), dist.samples])))
    n_traj = min(M, int(args.trajectories))
    if n_traj:
        rows = []
        for pid in range(n_traj):
            p = simulate_pool(cfg.portfolio, cfg.risk, s.grid, s.seed, path_id=pid)
            rows.append(np.column_stack([np.full(s.grid.n_points, pid), s.grid.times, p.loss, p.x]))
        man.add(write_csv(s.out / "trajectories.csv", ["path_id", "t", "loss", "x"], np.vstack(rows)))
    man.diagnostics = dist.summary()
    man.add(write_plot_stub(s.out, "losses.csv", "path_id", ["loss_at_t"]))
    man.write(s.out)
    print(f"simulate: {M} paths, mean loss {dist.mean:.6g} +/- {dist.std_error:.2g}")
    return 0


def cmd_approx(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg)
    if args.auto_budget is not None and args.auto_budget <= 0:
        raise ValidationError("--auto-budget must be positive")
    man = _manifest("approx", s, s.scheme)
    ap = approximate(s, s.scheme, args.auto_budget if s.scheme == "scheme1" else None)
    man.timings["approximation"] = ap.seconds
    man.add(write_csv(s.out / "lattice.csv", ["loss", "cdf", "pdf"], _lattice_rows(ap.second)))
    var_rows = [[lv, ap.first.quantile(lv), ap.second.quantile(lv), math.nan] for lv in _levels(cfg)]
    man.add(write_csv(s.out / "var.csv", ["level", "var_first_order", "var_second_order", "var_finite_system"], var_rows))
    if ap.components is not None:
        man.add(write_csv(s.out / "components.csv", ["path_id", "lln_loss", "v0_mean", "v0_var"], ap.components))
    _path0_dumps(s, s.scheme, man)
    man.add(write_plot_stub(s.out, "lattice.csv", "loss", ["cdf", "pdf"]))
    man.diagnostics = {"mean": ap.second.mean, "variance": ap.second.variance, "clamped": ap.clamped}
    if isinstance(ap.second, GaussianMixtureLoss):
        man.diagnostics["mass_outside_unit"] = ap.second.mass_outside_unit()
    if ap.pilot is not None:
        man.diagnostics["allocation"] = ap.pilot
    man.write(s.out)
    print(f"approx[{s.scheme}]: mean loss {ap.second.mean:.6g}, variance {ap.second.variance:.6g}")
    return 0


def _levels(cfg: RunConfig) -> list[float]:
    return [float(v) for v in cfg.option("levels", LEVELS)]


def cmd_var(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg)
    if s.finite_paths < 1 or s.paths < 1:
        raise ValidationError("paths must be >= 1")
    man = _manifest("var", s, s.scheme)
    ap = approximate(s, s.scheme)
    man.timings["approximation"] = ap.seconds
    t0 = time.perf_counter()
    finite = simulate_losses(cfg.portfolio, cfg.risk, s.grid, s.finite_paths, s.seed, s.threads)[:, -1]
    man.timings["finite_system"] = time.perf_counter() - t0
    rows = [[lv, ap.first.quantile(lv), ap.second.quantile(lv), float(np.quantile(finite, lv))] for lv in _levels(cfg)]
    man.add(write_csv(s.out / "var.csv", ["level", "var_first_order", "var_second_order", "var_finite_system"], rows))
    man.add(write_plot_stub(s.out, "var.csv", "level", ["var_first_order", "var_second_order", "var_finite_system"]))
    man.settings["finite_paths"] = s.finite_paths
    man.write(s.out)
    for r in rows:
        print(f"VaR {r[0]:.3g}: first {r[1]:.6g}  second {r[2]:.6g}  finite {r[3]:.6g}")
    return 0


def cmd_skeleton(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg, paths_default=10)
    scheme = "gaussian" if s.scheme == "gaussian" else "scheme2"
    _require_homogeneous(s, scheme)
    if s.paths < 1 or s.samples < 1 or args.points < 1:
        raise ValidationError("paths, samples and points must be >= 1")
    params = cfg.portfolio.params
    N = cfg.portfolio.names
    steps = s.grid.n_steps
    idx = np.unique(np.linspace(0, steps, args.points + 1).round().astype(int)[1:])
    times = s.grid.times[idx]
    man = _manifest("skeleton", s, scheme)
    t0 = time.perf_counter()
    x, dv = systematic_paths(cfg.risk, s.grid, s.paths, s.seed)
    fcfg = FluctuationConfig(s.K)
    rows = []
    for m in range(s.paths):
        traj = solve_lln_moments(params, cfg.risk, s.grid, s.K_lln, x[m], dv[m])
        law = gaussian_case(traj, params, fcfg) if scheme == "gaussian" else scheme2_conditional_law(traj, params, fcfg)
        v = sample_skeleton(law, times, stream(s.seed, SKELETON, m), size=s.samples)[..., 0]
        loss = traj.loss[idx] - v / math.sqrt(N)
        for j in range(s.samples):
            rows.append(np.column_stack([np.full(idx.size, m), np.full(idx.size, j), times, loss[j], v[j]]))
        if m == 0:
            man.add(write_csv(s.out / "covariance.csv", ["t", "Sigma_00"], np.column_stack([s.grid.times, law.var_v0])))
            man.add(write_csv(s.out / "lln.csv", ["t"] + moment_header("u", s.K_lln), lln_rows(s.grid.times, traj.u)))
    man.timings["skeleton"] = time.perf_counter() - t0
    man.add(write_csv(s.out / "skeleton.csv", ["path_id", "sample_id", "t", "loss", "v0"], np.vstack(rows)))
    man.add(write_plot_stub(s.out, "covariance.csv", "t", ["Sigma_00"]))
    man.write(s.out)
    print(f"skeleton: {s.paths} x {s.samples} skeletons on {idx.size} times")
    return 0


def budget_compare(s: Settings, budget: float, payoff, scheme: str = "scheme2") -> tuple[EstimatorReport, EstimatorReport]:
    """Finite-system and second-order estimates of ``E payoff(L_T)`` at equal wall time."""
    if not budget > 0:
        raise ValidationError("budget must be positive")
    cfg = s.cfg
    _require_homogeneous(s, scheme)
    params = cfg.portfolio.params
    N = cfg.portfolio.names
    # compile and warm caches outside the timed region
    tiny = TimeGrid(cfg.grid.dt, cfg.grid.dt)
    simulate_losses(cfg.portfolio, cfg.risk, tiny, 1, s.seed)
    run_paths(params, cfg.risk, tiny, s.K, 1, s.seed, [tiny.horizon], scheme, J=s.samples, K_lln=s.K_lln)

    t0 = time.perf_counter()
    chunks, start = [], 0
    while True:
        chunks.append(simulate_losses(cfg.portfolio, cfg.risk, s.grid, 64, s.seed, s.threads, start=start)[:, -1])
        start += 64
        if time.perf_counter() - t0 >= budget:
            break
    finite = expected_payoff(np.concatenate(chunks), payoff, Scheme.FINITE_SYSTEM, time.perf_counter() - t0)

    t0 = time.perf_counter()
    L, var, mean, draws, start = [], [], [], [], 0
    block = X_BLOCK * max(1, (s.threads or 1))
    while True:
        b = run_paths(params, cfg.risk, s.grid, s.K, block, s.seed, [s.horizon], scheme, J=s.samples,
                      K_lln=s.K_lln, threads=s.threads, start=start)
        start += block
        L.append(b.lln_loss[:, 0])
        var.append(b.v0_var[:, 0])
        mean.append(b.v0_mean[:, 0])
        if scheme == "scheme1":
            draws.append(b.lln_loss[:, None, 0] - b.samples[..., 0] / math.sqrt(N))
        if time.perf_counter() - t0 >= budget:
            break
    if scheme == "scheme1":
        second = expected_payoff(np.concatenate(draws), payoff, Scheme.SCHEME1, time.perf_counter() - t0)
    else:
        mix = second_order_mixture(np.concatenate(L), np.concatenate(var), N, s.horizon, np.concatenate(mean))
        second = expected_payoff(mix, payoff, Scheme.SCHEME2, time.perf_counter() - t0)
    return finite, second


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg)
    budget = float(_pick(args.budget, cfg, "budget_seconds", 5.0))
    if budget <= 0:
        raise ValidationError("budget must be positive")
    scheme = "scheme1" if s.scheme == "scheme1" else "scheme2"
    payoff = Call(float(_pick(args.strike, cfg, "strike", 0.12)))
    man = _manifest("compare", s, scheme)
    finite, second = budget_compare(s, budget, payoff, scheme)
    ratio = finite.std_error / second.std_error if second.std_error > 0 else math.inf
    recs = [(r.scheme.value, r.estimate, r.std_error, r.wall_time, r.samples, ratio) for r in (finite, second)]
    man.add(write_records(s.out / "compare.csv",
                          ["scheme", "estimate", "std_error", "wall_time", "samples", "std_error_ratio"], recs))
    man.timings = {"finite_system": finite.wall_time, scheme: second.wall_time}
    man.settings["budget_seconds"] = budget
    man.write(s.out)
    print(f"compare: finite SE {finite.std_error:.3g}, second-order SE {second.std_error:.3g}, ratio {ratio:.3g}")
    return 0


def cmd_allocate(args) -> int:
    cfg = load_config(args.config)
    s = _settings(args, cfg)
    _require_homogeneous(s, "scheme1")
    budget = float(_pick(args.budget, cfg, "budget_seconds", 5.0))
    if budget <= 0:
        raise ValidationError("budget must be positive")
    man = _manifest("allocate", s, "scheme1")
    M, J, info = auto_allocate(s, budget, args.strike)
    keys = ["sigma1_sq", "sigma2_sq", "tau1", "tau2", "budget", "M", "J"]
    man.add(write_csv(s.out / "allocation.csv", keys, [[info[k] for k in keys]]))
    man.diagnostics = info
    man.write(s.out)
    note = " (negative discriminant, rationalized formula used)" if info["degenerate"] else ""
    print(f"allocate: M={M}, J={J}{note}")
    return 0


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (default: $POOLEDLOSS_THREADS or 1)")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--paths", "-M", type=int, help="number of paths")
    common.add_argument("--samples", "-J", type=int, help="fluctuation samples per systematic path")
    common.add_argument("--trunc", "-K", type=int, help="fluctuation truncation level")
    common.add_argument("--horizon", type=float, help="evaluation time (on the grid)")

    p = argparse.ArgumentParser(prog="pooledloss", description="Large-pool loss distribution approximations.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", parents=[common], help="finite-system Monte Carlo")
    sp.add_argument("--trajectories", type=int, default=0, help="also dump this many full paths")
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("approx", parents=[common], help="first/second-order loss distribution")
    sp.add_argument("--auto-budget", type=float, help="scheme1: choose M and J for this many seconds")
    sp.set_defaults(func=cmd_approx)
    sp = sub.add_parser("var", parents=[common], help="VaR table against the finite system")
    sp.set_defaults(func=cmd_var)
    sp = sub.add_parser("skeleton", parents=[common], help="bridge-sampled loss skeletons")
    sp.add_argument("--points", type=int, default=10, help="skeleton times in (0, horizon]")
    sp.set_defaults(func=cmd_skeleton)
    for name, fn, helptext in (("compare", cmd_compare, "standard errors at equal wall time"),
                               ("allocate", cmd_allocate, "optimal Scheme 1 allocation from a pilot")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--budget", type=float, help="seconds")
        sp.add_argument("--strike", type=float, help="call strike on the loss")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"pooledloss {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"pooledloss {args.command}: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
