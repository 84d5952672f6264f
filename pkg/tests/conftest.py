import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hawkes_score import BoostSpec, HawkesParams, MarkModel, SimConfig, simulate

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


NULL_PARAMS = HawkesParams(0.5, 0.5, 1.0)


def sim_stream(params=NULL_PARAMS, horizon=200.0, seed=0, boost="linear", psi=None, marks="iid-gauss", dim=1,
               **kw):
    spec = BoostSpec.parse(boost, mark_dim=dim)
    cfg = SimConfig(params, horizon, boost=spec, psi=psi if psi is not None else (0.0,) * spec.psi_dim,
                    mark_model=MarkModel.parse(marks, dim=dim), seed=seed, **kw)
    return simulate(cfg)


@pytest.fixture
def small_stream():
    return sim_stream(horizon=100.0, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
