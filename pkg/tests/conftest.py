import numpy as np
import pytest

from renkf import esn
from renkf.assimilation import vdp_config
from renkf.esn import ReservoirConfig
from renkf.training import TrainingConfig


def tiny_vdp(**overrides):
    """A Van der Pol run small enough to finish in about a second."""
    base = dict(
        m=4, reservoir=ReservoirConfig(n_reservoir=30), grid_size=1,
        sigma_in_range=(0.1, 0.1), rho_range=(0.9, 0.9),
        training=TrainingConfig(l_sets=3, t_train=0.1), n_wash=10,
        t_spinup=0.1, t_start_da=0.15, t_stop_da=0.2, t_post=0.02, t_err=0.01,
    )
    base.update(overrides)
    return vdp_config(**base)


@pytest.fixture
def tiny_config():
    return tiny_vdp()


def sine_datasets(n=400, n_q=2, n_sets=2, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) * 0.05
    out = []
    for _ in range(n_sets):
        ph = rng.uniform(0, 2 * np.pi, n_q)
        freq = rng.uniform(0.8, 1.2, n_q)
        out.append(np.sin(freq * t[:, None] + ph) + 0.3 * np.cos(2.3 * t[:, None] + ph))
    return out


@pytest.fixture(scope="session")
def trained_esn():
    """Small two-channel network trained on sinusoids."""
    cfg = ReservoirConfig(n_reservoir=40, sigma_in=0.5, rho=0.8, tikhonov=1e-8, seed=3)
    data = sine_datasets()
    return esn.train(esn.generate_reservoir(cfg, 2), data, cfg), data


# one summary line per acceptance criterion, shown after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
