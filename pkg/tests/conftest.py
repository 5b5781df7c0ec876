import numpy as np
import pytest

from pooledloss.model import ObligorParams, PortfolioSpec, SystematicRiskSpec, TimeGrid


@pytest.fixture
def fig3_params():
    return ObligorParams(alpha=4.0, lambda_bar=0.2, sigma=0.9, beta_c=1.0, beta_s=1.0, lambda0=0.2)


@pytest.fixture
def fig1_params():
    return ObligorParams(alpha=4.0, lambda_bar=0.2, sigma=0.9, beta_c=1.0, beta_s=0.0, lambda0=0.2)


@pytest.fixture
def frozen_params():
    return ObligorParams(alpha=0.0, lambda_bar=0.0, sigma=0.0, beta_c=0.0, beta_s=0.0, lambda0=0.2)


@pytest.fixture
def ou():
    return SystematicRiskSpec.ou(mean=1.0, speed=2.0, vol=1.0, x0=1.0)


@pytest.fixture
def frozen_x():
    return SystematicRiskSpec.constant(1.0)


@pytest.fixture
def half_grid():
    return TimeGrid(0.5, 0.005)


def homogeneous(params, N):
    return PortfolioSpec.homogeneous(params, N)


def flat_path(grid):
    """Systematic path that never moves."""
    return np.ones(grid.n_points), np.zeros(grid.n_steps)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
