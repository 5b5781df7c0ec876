import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pooledloss.errors import (
    BadWeights,
    EmptyPortfolio,
    NegativeParameter,
    NonFiniteInput,
    TimeOffGrid,
    ValidationError,
)
from pooledloss.model import (
    ObligorParams,
    PortfolioSpec,
    SystematicRiskSpec,
    TimeGrid,
    eval_risk_coeffs,
    load_config,
    parse_config,
    validate_portfolio,
)


def test_fig3_portfolio_validates(fig3_params):
    spec = validate_portfolio(PortfolioSpec.homogeneous(fig3_params, 1000))
    assert spec.names == 1000
    assert spec.params == fig3_params


def test_negative_contagion_rejected():
    with pytest.raises(NegativeParameter):
        ObligorParams(4.0, 0.2, 0.9, -0.5, 1.0, 0.2)


def test_negative_beta_s_allowed():
    assert ObligorParams(4.0, 0.2, 0.9, 1.0, -1.0, 0.2).beta_s == -1.0


def test_nonfinite_parameter_rejected():
    with pytest.raises(NonFiniteInput):
        ObligorParams(float("nan"), 0.2, 0.9, 1.0, 1.0, 0.2)


def test_two_types_keep_weights(fig3_params, fig1_params):
    spec = validate_portfolio(PortfolioSpec(100, ((fig3_params, 0.7), (fig1_params, 0.3))))
    np.testing.assert_array_equal(spec.weights, [0.7, 0.3])
    assert spec.type_counts().tolist() == [70, 30]


def test_bad_weights(fig3_params):
    with pytest.raises(BadWeights):
        validate_portfolio(PortfolioSpec(10, ((fig3_params, 0.7), (fig3_params, 0.2))))
    with pytest.raises(BadWeights):
        validate_portfolio(PortfolioSpec(10, ((fig3_params, 1.5), (fig3_params, -0.5))))


def test_empty_portfolio(fig3_params):
    with pytest.raises(EmptyPortfolio):
        validate_portfolio(PortfolioSpec(0, ((fig3_params, 1.0),)))
    with pytest.raises(EmptyPortfolio):
        validate_portfolio(PortfolioSpec(10, ()))


def test_validation_idempotent(fig3_params):
    once = validate_portfolio(PortfolioSpec(50, ((fig3_params, 0.5), (fig3_params, 0.5))))
    assert validate_portfolio(once) == once


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.integers(1, 5000))
def test_type_counts_sum_to_names(raw, N):
    w = np.array(raw) / np.sum(raw)
    w[-1] = 1.0 - w[:-1].sum()
    p = ObligorParams(1.0, 0.1, 0.1, 0.0, 0.0, 0.1)
    spec = PortfolioSpec(N, tuple((p, float(x)) for x in w))
    counts = spec.type_counts()
    assert counts.sum() == N
    assert np.all(np.abs(counts - w * N) < 1.0 + 1e-9)


def test_ou_coefficients():
    ou = SystematicRiskSpec.ou(mean=1.0, speed=2.0, vol=1.0, x0=1.0)
    assert eval_risk_coeffs(ou, 1.0) == (0.0, 1.0)
    assert eval_risk_coeffs(ou, 0.0) == (2.0, 1.0)
    b0, s0 = eval_risk_coeffs(ou, np.array([0.0, 1.0, 2.0]))
    np.testing.assert_array_equal(b0, [2.0, 0.0, -2.0])
    np.testing.assert_array_equal(s0, [1.0, 1.0, 1.0])


def test_constant_factor_is_frozen():
    c = SystematicRiskSpec.constant(0.5)
    assert eval_risk_coeffs(c, 3.7) == (0.0, 0.0)
    assert c.is_frozen and c.x0 == 0.5


def test_custom_factor():
    spec = SystematicRiskSpec(kind="custom", drift_fn=lambda x: -x, vol_fn=lambda x: 0.3 + 0 * x, x0=1.0)
    assert eval_risk_coeffs(spec, 2.0) == (-2.0, 0.3)


def test_nonfinite_factor_value():
    with pytest.raises(NonFiniteInput):
        eval_risk_coeffs(SystematicRiskSpec.ou(1, 2, 1, 1), float("inf"))


def test_grid_index_and_refine():
    g = TimeGrid(0.5, 0.005)
    assert g.n_steps == 100 and g.n_points == 101
    assert g.index_of(0.25) == 50
    assert g.refine(5).n_steps == 500
    with pytest.raises(TimeOffGrid):
        g.index_of(0.2501)
    with pytest.raises(TimeOffGrid):
        g.index_of(0.6)
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 0.3)


CONFIG = {
    "portfolio": {"names": 1000, "types": [
        {"alpha": 4, "lambda_bar": 0.2, "sigma": 0.9, "beta_c": 1, "beta_s": 1, "lambda0": 0.2, "weight": 1}]},
    "systematic": {"kind": "ou", "mean": 1, "speed": 2, "vol": 1, "x0": 1},
    "grid": {"horizon": 0.5, "dt": 0.005},
    "run": {"K": 6, "paths": 10},
}


def test_parse_config_roundtrip(tmp_path, fig3_params):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CONFIG))
    cfg = load_config(path)
    assert cfg.portfolio.params == fig3_params
    assert cfg.risk == SystematicRiskSpec.ou(1, 2, 1, 1)
    assert cfg.grid == TimeGrid(0.5, 0.005)
    assert cfg.option("K") == 6 and cfg.option("missing", 3) == 3


def test_parse_config_errors(tmp_path):
    with pytest.raises(ValidationError):
        parse_config({"portfolio": CONFIG["portfolio"]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        load_config(bad)


def test_shipped_configs_parse():
    from importlib.resources import files

    names = sorted(p.name for p in files("pooledloss").joinpath("configs").iterdir() if p.name.endswith(".json"))
    assert {"fig1_bc0.json", "fig1_bc1.json", "fig2.json", "fig3.json", "fig5.json", "fig_var.json",
            "fig_truncation.json", "appendix.json"} <= set(names)
    for name in names:
        load_config(files("pooledloss").joinpath("configs", name))
