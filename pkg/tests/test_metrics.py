import numpy as np
import pytest

from cfdual.dualopt import DualConfig, DualProblem, run_centralized_reference
from cfdual.metrics import (
    average_load, gain_matrix, overhead, overhead_from_load, se_report, sinr_all, sum_se,
)
from cfdual.precoding import PrecodingSolution
from cfdual.topology import ClusterPlan, build_plan, invert_to_served_sets

from conftest import random_channels


def single_link(h, p):
    d = (h / np.linalg.norm(h))[None, None]
    return PrecodingSolution(serving=np.array([[0]]), directions=d, powers=np.array([[p]]))


def test_single_user_sinr(rng):
    h = random_channels(rng, 1, 1, 4)
    sol = single_link(h[0, 0], 3.0)
    assert sinr_all(h, sol)[0] == pytest.approx(3.0 * np.linalg.norm(h) ** 2)
    assert sinr_all(h, single_link(h[0, 0], 0.0))[0] == 0.0


@pytest.mark.parametrize("s, se", [(1.0, 1.0), (0.0, 0.0), (3.0, 2.0)])
def test_sum_se_values(s, se):
    assert sum_se([s]) == pytest.approx(se)


def test_sum_se_rejects_negative():
    with pytest.raises(ValueError):
        sum_se([-0.1])


def test_phase_invariance(rng):
    H = random_channels(rng, 3, 4, 2)
    plan = build_plan(rng.uniform(size=(3, 4)), 2, 2, 2)
    sol, _ = run_centralized_reference(H, plan, DualConfig(rho_max=5.0))
    # one common phase per user precoder
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, (3, 1, 1)))
    rot = PrecodingSolution(sol.serving, sol.directions * phase, sol.powers)
    np.testing.assert_allclose(sinr_all(H, rot), sinr_all(H, sol), rtol=1e-12)


def test_pzf_full_sharing_nulls_interference(rng):
    H = random_channels(rng, 2, 2, 2)
    plan = build_plan(np.ones((2, 2)), 2, 2, 2)
    sol, _ = run_centralized_reference(H, plan, DualConfig(rho_max=10.0))
    G = np.abs(gain_matrix(H, sol)) ** 2
    assert G[0, 1] < 1e-12 * G[0, 0] and G[1, 0] < 1e-12 * G[1, 1]


def test_se_report_fields(rng):
    H = random_channels(rng, 1, 1, 4)
    rep = se_report(H, single_link(H[0, 0], 12.0), rho_max=10.0, scheme="x")
    assert rep.max_violation == pytest.approx(0.2)
    assert rep.sum_se == pytest.approx(np.log2(1 + 12.0 * np.linalg.norm(H) ** 2))


def test_overhead_examples():
    rep = overhead_from_load(2.0, antennas=4, bits_per_symbol=4, quant_bits=8)
    assert rep.reduction == 0.875
    assert overhead_from_load(2.0, 4, tau_d=100).distributed_bits == 800
    with pytest.raises(ValueError):
        overhead_from_load(2.0, 4, tau_d=0)


def test_overhead_load_from_plan():
    # K=20 users, |M|=10, L=100: every AP serves exactly two users
    serving = np.array([np.sort((np.arange(10) * 10 + k // 2 * 1) % 100) for k in range(20)])
    served = invert_to_served_sets(serving, 100)
    assert all(len(d) == 2 for d in served)
    plan = ClusterPlan(serving=serving, csi=np.arange(20)[:, None], served=served,
                       master=serving[:, 0], num_aps=100)
    assert average_load(plan) == 2.0
    assert overhead(plan, antennas=4).reduction == 0.875
