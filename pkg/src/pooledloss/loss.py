"""First- and second-order loss distributions, VaR, payoffs and budgeting."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import BadLevel, DegenerateInputs, GridMismatch, MismatchedPaths, ValidationError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Scheme(str, enum.Enum):
    FINITE_SYSTEM = "finite_system"
    SCHEME1 = "scheme1"
    SCHEME2 = "scheme2"
    FIRST_ORDER = "first_order"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class EstimatorReport:
    estimate: float
    std_error: float
    wall_time: float
    scheme: Scheme
    samples: int = 0

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValidationError("std_error must be >= 0")


# --------------------------------------------------------------------------
# payoffs


@dataclass(frozen=True)
class Call:
    strike: float


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Indicator:
    """``1{L > threshold}``."""

    threshold: float


Payoff = Call | Identity | Indicator


def apply_payoff(payoff: Payoff, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if isinstance(payoff, Call):
        return np.maximum(x - payoff.strike, 0.0)
    if isinstance(payoff, Identity):
        return x
    if isinstance(payoff, Indicator):
        return (x > payoff.threshold).astype(float)
    raise ValidationError(f"unknown payoff {payoff!r}")


def gaussian_payoff(payoff: Payoff, mean, var) -> np.ndarray:
    """Closed-form ``E f(Y)`` for ``Y ~ N(mean, var)``, elementwise."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    safe = np.where(sd > 0, sd, 1.0)
    if isinstance(payoff, Identity):
        return mean.copy()
    if isinstance(payoff, Call):
        z = (mean - payoff.strike) / safe
        val = (mean - payoff.strike) * ndtr(z) + sd * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        return np.where(sd > 0, val, np.maximum(mean - payoff.strike, 0.0))
    if isinstance(payoff, Indicator):
        z = (mean - payoff.threshold) / safe
        return np.where(sd > 0, ndtr(z), (mean > payoff.threshold).astype(float))
    raise ValidationError(f"unknown payoff {payoff!r}")


# --------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class GaussianMixtureLoss:
    """Loss law as a weighted sum of normal components (zero variance = point mass).

    Support is the whole real line; :meth:`mass_outside_unit` reports the
    probability that leaks outside [0, 1].
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    horizon: float
    names: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if not (w.shape == m.shape == v.shape) or w.ndim != 1 or w.size == 0:
            raise MismatchedPaths("weights, means and variances must be equal-length vectors")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be positive and sum to 1")
        if np.any(v < 0) or not np.all(np.isfinite(m)) or not np.all(np.isfinite(v)):
            raise ValidationError("mixture variances must be finite and >= 0")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            object.__setattr__(self, name, arr)

    @property
    def components(self) -> int:
        return self.weights.size

    @property
    def sds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.means)

    @property
    def variance(self) -> float:
        return float(self.weights @ (self.variances + self.means ** 2) - self.mean ** 2)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        sd = self.sds
        z = (x[..., None] - self.means) / np.where(sd > 0, sd, 1.0)
        per = np.where(sd > 0, ndtr(z), (x[..., None] >= self.means).astype(float))
        out = per @ self.weights
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        """Density of the continuous part (point masses contribute nothing)."""
        x = np.asarray(x, dtype=float)
        sd = self.sds
        pos = sd > 0
        if not np.any(pos):
            return np.zeros_like(x) if x.ndim else 0.0
        s = sd[pos]
        z = (x[..., None] - self.means[pos]) / s
        out = (np.exp(-0.5 * z * z) * _INV_SQRT_2PI / s) @ self.weights[pos]
        return float(out) if out.ndim == 0 else out

    def quantile(self, level: float, tol: float = 1e-10) -> float:
        return mixture_quantile(self, level, tol)

    def mass_outside_unit(self) -> float:
        return float(self.cdf(np.nextafter(0.0, -1.0)) + 1.0 - self.cdf(1.0))


def mixture_cdf(mix: GaussianMixtureLoss, x):
    return mix.cdf(x)


def mixture_quantile(mix: GaussianMixtureLoss, level: float, tol: float = 1e-10) -> float:
    """Smallest ``x`` with ``cdf(x) >= level``, by bisection to ``tol``."""
    if not (0.0 < level < 1.0):
        raise BadLevel(f"quantile level must lie in (0, 1), got {level!r}")
    spread = 40.0 * mix.sds
    lo = float(np.min(mix.means - spread)) - 1e-12
    hi = float(np.max(mix.means + spread)) + 1e-12
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mix.cdf(mid) >= level:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi) if mix.cdf(0.5 * (lo + hi)) >= level else hi


def _variances_from(laws, t) -> np.ndarray:
    out = []
    for law in laws:
        if hasattr(law, "cov"):
            out.append(law.cov(t)[0, 0])
        else:
            out.append(float(law))
    return np.asarray(out, dtype=float)


def _means_from(laws, t):
    if all(hasattr(law, "mean") and callable(law.mean) for law in laws):
        return np.array([law.mean(t)[0] for law in laws])
    return None


def second_order_mixture(lln_losses, laws, names: float, t: float, v0_means=None) -> GaussianMixtureLoss:
    """Equal-weight mixture of ``N(L^m(t) - E[v_0^m]/sqrt(N), Var[v_0^m(t)]/N)``.

    ``laws`` is a sequence of conditional Gaussian laws or of ``Var[v_0(t)]``
    values, one per systematic path.
    """
    L = np.atleast_1d(np.asarray(lln_losses, dtype=float))
    laws = list(laws) if not isinstance(laws, np.ndarray) else list(np.atleast_1d(laws))
    if L.size != len(laws) or L.size < 1:
        raise MismatchedPaths(f"{L.size} LLN losses but {len(laws)} conditional laws")
    var = _variances_from(laws, t)
    if v0_means is None:
        v0_means = _means_from(laws, t)
    mean = L if v0_means is None else L - np.asarray(v0_means, dtype=float) / math.sqrt(names)
    M = L.size
    return GaussianMixtureLoss(np.full(M, 1.0 / M), mean, np.maximum(var, 0.0) / names, t, names)


def first_order_mixture(lln_losses, t: float, names: float = math.inf) -> GaussianMixtureLoss:
    """Point masses at the per-path LLN losses."""
    L = np.atleast_1d(np.asarray(lln_losses, dtype=float))
    M = L.size
    return GaussianMixtureLoss(np.full(M, 1.0 / M), L, np.zeros(M), t, names)


def mixture_from_bundle(bundle, names: float, t: float, first_order: bool = False) -> GaussianMixtureLoss:
    c = bundle.column(t)
    if first_order:
        return first_order_mixture(bundle.lln_loss[:, c], t, names)
    return second_order_mixture(bundle.lln_loss[:, c], bundle.v0_var[:, c], names, t, bundle.v0_mean[:, c])


# --------------------------------------------------------------------------
# estimators


def expected_payoff(source, payoff: Payoff, scheme: Scheme | None = None, wall_time: float = 0.0) -> EstimatorReport:
    """Estimate ``E f(L)`` with a standard error.

    ``source`` is a :class:`GaussianMixtureLoss` (closed form per component,
    error from the spread across components), a 1-d array of loss samples,
    or a 2-d array (paths x samples-per-path) whose standard error comes from
    the per-path averages.
    """
    t0 = time.perf_counter()
    if isinstance(source, GaussianMixtureLoss):
        vals = gaussian_payoff(payoff, source.means, source.variances)
        est = float(source.weights @ vals)
        M = vals.size
        se = float(vals.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0
        scheme = scheme or Scheme.SCHEME2
        n = M
    else:
        arr = np.asarray(source, dtype=float)
        vals = apply_payoff(payoff, arr)
        if vals.ndim == 2:
            vals = vals.mean(axis=1)
        est = float(vals.mean())
        n = vals.size
        se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        scheme = scheme or Scheme.FINITE_SYSTEM
    return EstimatorReport(est, se, wall_time + time.perf_counter() - t0, Scheme(scheme), n)


def optimal_allocation(sigma1_sq: float, sigma2_sq: float, tau1: float, tau2: float, total_time: float):
    """Variance-minimizing numbers of systematic paths ``M`` and samples per path ``J``.

    Minimizes ``sigma1^2/M + sigma2^2/(M J)`` subject to
    ``M tau1 + M J tau2 = total_time``; ``J`` does not depend on the budget.
    The per-unit-time path rate is

        M0 = (-2 tau1 sigma1^2 + sqrt((2 tau1 sigma1^2)^2 + 4 sigma1^2 disc)) / (2 disc),
        disc = sigma2^2 tau1 tau2 - sigma1^2 tau1^2,

    evaluated in rationalized form so that ``disc = 0`` takes its limit
    ``1 / (2 tau1)``. A negative ``disc`` is rejected; see
    :func:`rationalized_allocation` for that regime.
    """
    vals = (sigma1_sq, sigma2_sq, tau1, tau2, total_time)
    if not all(math.isfinite(v) and v > 0 for v in vals):
        raise DegenerateInputs("variances, costs and budget must all be positive")
    disc = sigma2_sq * tau1 * tau2 - sigma1_sq * tau1 * tau1
    if disc < 0:
        raise DegenerateInputs("negative discriminant sigma2^2 tau1 tau2 - sigma1^2 tau1^2")
    return rationalized_allocation(sigma1_sq, sigma2_sq, tau1, tau2, total_time)


def rationalized_allocation(sigma1_sq: float, sigma2_sq: float, tau1: float, tau2: float, total_time: float):
    """Budget-optimal ``(M, J)`` for any sign of the discriminant.

    ``M0 = 2 sigma1^2 / (a + sqrt(a^2 + 4 sigma1^2 disc))`` with ``a = 2 tau1 sigma1^2``
    equals the root used by :func:`optimal_allocation`; the square-root
    argument is ``4 sigma1^2 sigma2^2 tau1 tau2 > 0`` whatever ``disc`` is.
    """
    vals = (sigma1_sq, sigma2_sq, tau1, tau2, total_time)
    if not all(math.isfinite(v) and v > 0 for v in vals):
        raise DegenerateInputs("variances, costs and budget must all be positive")
    a = 2.0 * tau1 * sigma1_sq
    disc = sigma2_sq * tau1 * tau2 - sigma1_sq * tau1 * tau1
    m0 = 2.0 * sigma1_sq / (a + math.sqrt(a * a + 4.0 * sigma1_sq * disc))
    j = (1.0 - m0 * tau1) / (tau2 * m0)
    return max(1, int(round(m0 * total_time))), max(1, int(round(j)))


def allocation_variance(sigma1_sq, sigma2_sq, M, J) -> float:
    return sigma1_sq / M + sigma2_sq / (M * J)


def pilot_allocation_inputs(samples: np.ndarray, payoff: Payoff, seconds_x: float, seconds_fluct: float):
    """``(sigma1^2, sigma2^2, tau1, tau2)`` from a Scheme 1 pilot of shape (M, J)."""
    vals = apply_payoff(payoff, samples)
    M, J = vals.shape
    if M < 2 or J < 2:
        raise DegenerateInputs("pilot needs at least 2 paths and 2 samples per path")
    s2 = float(vals.var(axis=1, ddof=1).mean())
    if not s2 > 0:
        raise DegenerateInputs("pilot payoff has zero within-path variance; is the strike out of reach?")
    s1 = float(vals.mean(axis=1).var(ddof=1) - s2 / J)
    s1 = max(s1, 1e-3 * s2, 1e-300)
    return s1, s2, seconds_x / M, seconds_fluct / (M * J)


# --------------------------------------------------------------------------
# loss process


def loss_process_paths(lln_loss, v0_samples, names: float) -> np.ndarray:
    """Approximate loss skeletons ``L(t) - v_0(t)/sqrt(N)``."""
    L = np.asarray(lln_loss, dtype=float)
    v = np.asarray(v0_samples, dtype=float)
    if v.shape[-1] != L.shape[-1]:
        raise GridMismatch(f"{L.shape[-1]} LLN times but {v.shape[-1]} fluctuation times")
    return L - v / math.sqrt(names)


def exceedance_fraction(paths: np.ndarray, level: float) -> float:
    """Fraction of skeletons whose running maximum reaches ``level``."""
    paths = np.atleast_2d(paths)
    return float(np.mean(paths.max(axis=1) >= level))


def first_passage_times(paths: np.ndarray, times: Sequence[float], level: float) -> np.ndarray:
    """First skeleton time at or above ``level`` (``inf`` if never)."""
    paths = np.atleast_2d(paths)
    times = np.asarray(times, dtype=float)
    hit = paths >= level
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), times[first], np.inf)


# --------------------------------------------------------------------------
# tabulation


def lattice(mix: GaussianMixtureLoss, points: int = 1001) -> np.ndarray:
    """``(loss, cdf, pdf)`` rows over ``[min(0, q_0.001), max(1, q_0.999)]``."""
    lo = min(0.0, mix.quantile(0.001))
    hi = max(1.0, mix.quantile(0.999))
    x = np.linspace(lo, hi, points)
    return np.column_stack([x, mix.cdf(x), mix.pdf(x)])


def empirical_quantile(samples, level: float) -> float:
    if not (0.0 < level < 1.0):
        raise BadLevel(f"quantile level must lie in (0, 1), got {level!r}")
    return float(np.quantile(np.asarray(samples, dtype=float), level))


def ks_distance(cdf_fn, samples) -> float:
    """Sup distance between a model CDF and the empirical CDF of ``samples``."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    uniq, idx = np.unique(s, return_index=True)
    after = np.append(idx[1:], n) / n
    before = idx / n
    F = np.asarray(cdf_fn(uniq), dtype=float)
    left = np.asarray(cdf_fn(np.nextafter(uniq, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(F - after)), np.max(np.abs(left - before))))
