import numpy as np
import pytest

from cfdual.netmodel import NetworkConfig, draw_realization, trial_rng
from cfdual.topology import build_plan

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")


def desk_config(**kw):
    base = dict(num_aps=25, antennas_per_ap=4, num_users=10)
    base.update(kw)
    return NetworkConfig(**base)


def desk_instance(seed, trial=0, cluster_size=5, csi_size=4, **kw):
    cfg = desk_config(**kw)
    real = draw_realization(cfg, trial_rng(seed, trial), trial)
    plan = build_plan(real.beta, cluster_size, csi_size, cfg.antennas_per_ap)
    return cfg, real, plan


def random_channels(rng, K, L, N, scale=1.0):
    return scale * (rng.standard_normal((K, L, N)) + 1j * rng.standard_normal((K, L, N))) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
