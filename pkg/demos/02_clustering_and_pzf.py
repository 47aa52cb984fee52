"""User-centric clusters, CSI sharing sets and null-space precoding."""

# %%
import numpy as np

from cfdual.netmodel import NetworkConfig, draw_realization, trial_rng
from cfdual.precoding import aggregate_channel, null_spaces
from cfdual.topology import build_plan

cfg = NetworkConfig(num_aps=25, num_users=10)
real = draw_realization(cfg, trial_rng(0, 1))
plan = build_plan(real.beta, cluster_size=5, csi_size=4, antennas=cfg.antennas_per_ap)

# %%
# User 0 is served by its five strongest APs and shares CSI with three neighbours.
print("serving APs of user 0:", plan.serving[0], "master AP:", plan.master[0])
print("CSI set of user 0:", plan.csi[0])
print("users per AP:", [len(d) for d in plan.served])

# %%
# The precoding space has N|M| - (|C| - 1) = 20 - 3 = 17 dimensions.
bases, own = null_spaces(real.H, plan)
agg = aggregate_channel(real.H, plan.csi[0], plan.serving[0], 0)
w = bases[0].matrix @ np.ones(bases[0].dim)
print("null-space dimension:", bases[0].dim)
print("leakage to CSI users:", np.abs(agg.Htilde.conj().T @ w).max())
