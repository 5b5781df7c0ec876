"""Property suites. Runnable on their own: ``pytest tests/test_properties.py``."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pooledloss.finite_system import simulate_losses, simulate_pool
from pooledloss.fluctuation import (
    FluctuationConfig,
    covariation_matrix,
    drift_matrix,
    gaussian_case,
    run_paths,
    scheme1_sample_paths,
    scheme2_conditional_law,
)
from pooledloss.lln import solve_lln_moments
from pooledloss.loss import GaussianMixtureLoss
from pooledloss.model import ObligorParams, PortfolioSpec, SystematicRiskSpec, TimeGrid, eval_risk_coeffs, validate_portfolio
from pooledloss.numerics import conditional_gaussian, integrate_matrix_ode, mvn_sample, psd_factor
from pooledloss.streams import systematic_paths

OU = SystematicRiskSpec.ou(1.0, 2.0, 1.0, 1.0)
GRID = TimeGrid(0.5, 0.005)
FIG3 = ObligorParams(4.0, 0.2, 0.9, 1.0, 1.0, 0.2)
FIG2 = ObligorParams(4.0, 0.2, 0.9, 0.0, 1.0, 0.2)

params_st = st.builds(
    ObligorParams,
    alpha=st.floats(0.0, 6.0),
    lambda_bar=st.floats(0.0, 0.5),
    sigma=st.floats(0.0, 1.2),
    beta_c=st.floats(0.0, 3.0),
    beta_s=st.floats(-1.5, 1.5),
    lambda0=st.floats(0.0, 0.6),
)


def one_path(seed, grid=GRID, risk=OU):
    x, dv = systematic_paths(risk, grid, 1, seed)
    return x[0], dv[0]


# --------------------------------------------------------------------------
# model


@given(params_st, st.integers(1, 2000))
@settings(max_examples=40, deadline=None)
def test_validation_idempotent(p, N):
    spec = validate_portfolio(PortfolioSpec.homogeneous(p, N))
    assert validate_portfolio(spec) == spec


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 5))
def test_ou_drift_affine(x1, x2, speed):
    spec = SystematicRiskSpec.ou(1.0, speed, 1.0, 0.0)
    b1, _ = eval_risk_coeffs(spec, x1)
    b2, _ = eval_risk_coeffs(spec, x2)
    assert b1 - b2 == pytest.approx(-speed * (x1 - x2), abs=1e-12)


# --------------------------------------------------------------------------
# finite system


@given(params_st, st.integers(1, 40), st.integers(0, 2 ** 32))
@settings(max_examples=25, deadline=None)
def test_loss_monotone_quantized_and_intensities_nonnegative(p, N, seed):
    path = simulate_pool(PortfolioSpec.homogeneous(p, N), OU, TimeGrid(0.5, 0.01), seed)
    assert np.all(np.diff(path.loss) >= 0)
    np.testing.assert_allclose(path.loss * N, np.rint(path.loss * N), atol=1e-12)
    assert 0.0 <= path.loss[-1] <= 1.0
    assert np.all(path.intensity >= 0.0)


def test_finite_system_thread_determinism():
    pf = PortfolioSpec.homogeneous(FIG3, 50)
    grid = TimeGrid(0.2, 0.01)
    a = simulate_losses(pf, OU, grid, 300, 11, threads=1)
    b = simulate_losses(pf, OU, grid, 300, 11, threads=4)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, simulate_losses(pf, OU, grid, 300, 11, threads=2))


# --------------------------------------------------------------------------
# numerics


def test_rk4_fourth_order():
    a = np.array([-1.0, 0.5, -2.0])
    errs = []
    for dt in (0.1, 0.05):
        g = TimeGrid(1.0, dt)
        psi = integrate_matrix_ode(lambda t: np.diag(a), g).mats[-1]
        errs.append(np.max(np.abs(np.diag(psi) - np.exp(a))))
    assert errs[0] / errs[1] >= 8


def test_psi_starts_at_identity():
    g = TimeGrid(0.2, 0.01)
    path = integrate_matrix_ode(lambda t: np.array([[0.0, 1.0], [-1.0, t]]), g)
    np.testing.assert_array_equal(path.mats[0], np.eye(2))


@given(arrays(float, (5, 3), elements=st.floats(-3, 3)), st.integers(0, 2 ** 32))
@settings(max_examples=40, deadline=None)
def test_psd_factor_quadratic_form(G, seed):
    S = G @ G.T - 0.01 * np.eye(5)  # slightly indefinite
    F = psd_factor(S, strict=False).factor
    z = np.random.default_rng(seed).normal(size=(100, 5))
    assert np.all(np.einsum("ni,ij,nj->n", z, F @ F.T, z) >= -1e-12)


@given(arrays(float, (4, 4), elements=st.floats(-2, 2)), st.lists(st.integers(0, 3), min_size=1, max_size=3, unique=True))
@settings(max_examples=40, deadline=None)
def test_conditional_covariance_symmetric_psd(G, obs):
    S = G @ G.T + 0.1 * np.eye(4)
    _, cov = conditional_gaussian(np.zeros(4), S, obs, np.ones(len(obs)))
    assert np.max(np.abs(cov - cov.T)) <= 1e-10
    assert np.min(np.linalg.eigvalsh(cov)) >= -1e-10 * np.trace(S)


def test_mvn_sample_converges_to_psd_projection():
    S = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.95], [0.0, 0.95, 1.0]])  # indefinite
    f = psd_factor(S, strict=False)
    assert f.clipped_mass > 0
    draws = mvn_sample(np.zeros(3), f, np.random.default_rng(0), size=100_000)
    np.testing.assert_allclose(np.cov(draws.T), f.factor @ f.factor.T, atol=0.02)


# --------------------------------------------------------------------------
# LLN moments


def test_closure_convergence():
    x, dv = one_path(1)
    for K in (12, 14):
        a = solve_lln_moments(FIG2, OU, GRID, K, x, dv).u[-1, 0]
        b = solve_lln_moments(FIG2, OU, GRID, K + 2, x, dv).u[-1, 0]
        assert abs(a - b) < 1e-4


def test_no_exposure_ignores_factor_path():
    p = ObligorParams(4.0, 0.2, 0.9, 1.0, 0.0, 0.2)
    a = solve_lln_moments(p, OU, GRID, 12, *one_path(1))
    b = solve_lln_moments(p, OU, GRID, 12, *one_path(2))
    np.testing.assert_array_equal(a.u, b.u)


@given(params_st, st.integers(0, 2 ** 32))
@settings(max_examples=25, deadline=None)
def test_zeroth_moment_is_a_survival_fraction(p, seed):
    traj = solve_lln_moments(p, OU, TimeGrid(0.5, 0.01), 10, *one_path(seed, TimeGrid(0.5, 0.01)))
    u0 = traj.u[:, 0]
    assert np.all((u0 >= 0) & (u0 <= 1))
    assert np.all(np.diff(u0) <= 0)
    assert np.all(traj.u >= 0)


# --------------------------------------------------------------------------
# fluctuations


@given(params_st, arrays(float, 16, elements=st.floats(0, 1)))
@settings(max_examples=50, deadline=None)
def test_covariation_symmetric_and_factorizable(p, raw):
    # moments of a nonnegative measure on [0, 1]: u_k = sum_i m_i x_i^k
    x = raw[:8]
    m = raw[8:] / 8
    u = (m[:, None] * x[:, None] ** np.arange(16)).sum(0)
    S = covariation_matrix(u, p, 6)
    assert np.max(np.abs(S - S.T)) <= 1e-10
    f = psd_factor(S, strict=False)
    rec = f.factor @ f.factor.T
    assert np.min(np.linalg.eigvalsh(rec)) >= -1e-12 * (1 + np.abs(S).max())


def test_covariation_negativity_is_a_discretization_artifact():
    p = ObligorParams(4.0, 0.2, 0.9, 1.0, 0.0, 0.2)
    frozen = SystematicRiskSpec.constant(1.0)
    g = TimeGrid(1.0, 0.001)
    traj = solve_lln_moments(p, frozen, g, 18, np.ones(g.n_points), np.zeros(g.n_steps))
    for u in traj.u[::50]:
        f = psd_factor(covariation_matrix(u, p, 6), strict=False)
        evals = np.linalg.eigvalsh(covariation_matrix(u, p, 6))
        assert f.clipped_mass <= 1e-6 * np.abs(evals).sum() + 1e-12


def test_law_starts_at_zero_covariance_and_identity():
    law = scheme2_conditional_law(solve_lln_moments(FIG3, OU, GRID, 18, *one_path(3)), FIG3, FluctuationConfig(6))
    np.testing.assert_array_equal(law.psi[0], np.eye(7))
    np.testing.assert_array_equal(law.cov(0.0), 0.0)


def test_linear_in_initial_fluctuation():
    traj = solve_lln_moments(FIG3, OU, GRID, 18, *one_path(4))
    v0 = np.linspace(0.1, 0.7, 7)
    a = scheme2_conditional_law(traj, FIG3, FluctuationConfig(6, v0=v0))
    b = scheme2_conditional_law(traj, FIG3, FluctuationConfig(6, v0=2.5 * v0))
    np.testing.assert_allclose(b.means, 2.5 * a.means, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(a.covs, b.covs)


def test_martingale_increments_uncorrelated_in_time():
    traj = solve_lln_moments(FIG3, OU, GRID, 18, *one_path(5))
    J = 5000
    v = scheme1_sample_paths(traj, FIG3, FluctuationConfig(4), J, seed=6)
    b0, s0 = eval_risk_coeffs(OU, traj.x_path)
    k = np.arange(5)
    dm = []
    for i in (40, 41, 42):
        A = drift_matrix(traj.u[i], FIG3, 4, b0[i], s0[i])
        pred = v[:, i] @ A.T * GRID.dt + (FIG3.beta_s * k * s0[i] * traj.dv_path[i]) * v[:, i]
        dm.append(v[:, i + 1, 0] - v[:, i, 0] - pred[:, 0])
    for a, b in ((dm[0], dm[1]), (dm[1], dm[2])):
        assert abs(np.corrcoef(a, b)[0, 1]) <= 3 / np.sqrt(J)


def test_constant_factor_scheme2_tracks_gaussian_case():
    p = ObligorParams(4.0, 0.2, 0.9, 1.0, 1.0, 0.2)
    frozen = SystematicRiskSpec.constant(1.0)
    traj = solve_lln_moments(p, frozen, GRID, 18, np.ones(GRID.n_points), np.zeros(GRID.n_steps))
    flat = ObligorParams(4.0, 0.2, 0.9, 1.0, 0.0, 0.2)
    s2 = scheme2_conditional_law(traj, p, FluctuationConfig(6)).covs
    gc = gaussian_case(traj, flat, FluctuationConfig(6)).covs
    assert np.max(np.abs(s2 - gc)) <= 10 * GRID.dt * np.max(np.abs(gc))


def test_batched_engine_thread_determinism():
    for scheme in ("scheme1", "scheme2"):
        a = run_paths(FIG3, OU, GRID, 4, 300, 8, [0.25, 0.5], scheme, J=3, threads=1)
        b = run_paths(FIG3, OU, GRID, 4, 300, 8, [0.25, 0.5], scheme, J=3, threads=4)
        np.testing.assert_array_equal(a.lln_loss, b.lln_loss)
        np.testing.assert_array_equal(a.v0_var, b.v0_var)


# --------------------------------------------------------------------------
# mixtures


@given(
    st.lists(st.tuples(st.floats(0.01, 1), st.floats(-0.5, 1.5), st.floats(0, 0.1)), min_size=1, max_size=8),
    arrays(float, 30, elements=st.floats(-1, 2)),
)
@settings(max_examples=60, deadline=None)
def test_mixture_cdf_monotone_in_unit_interval(comps, xs):
    w = np.array([c[0] for c in comps])
    mix = GaussianMixtureLoss(w / w.sum(), np.array([c[1] for c in comps]), np.array([c[2] for c in comps]), 1.0, 100)
    F = mix.cdf(np.sort(xs))
    assert np.all((F >= 0) & (F <= 1))
    assert np.all(np.diff(F) >= -1e-15)
    q = [mix.quantile(lv) for lv in (0.1, 0.5, 0.9)]
    assert q[0] <= q[1] <= q[2]
