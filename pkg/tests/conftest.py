import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cfhbf.channel import PathLossModel, draw_channels, generate_topology
from cfhbf.config import ScenarioConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_channels(seed=0, **kw):
    """Small scenario and one channel draw; keyword args override ScenarioConfig."""
    base = dict(L=4, K=2, Nr=8, Nt=2, N=2, nbar=1)
    base.update(kw)
    cfg = ScenarioConfig(**base)
    rng = np.random.default_rng(seed)
    plm = PathLossModel.from_config(cfg)
    ch = draw_channels(cfg, generate_topology(cfg, rng), plm, rng)
    return cfg, ch


@pytest.fixture
def small():
    return make_channels(3)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
