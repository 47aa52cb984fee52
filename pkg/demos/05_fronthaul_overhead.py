"""Fronthaul load: local precoding versus shipping CSI to a central unit."""

# %%
from cfdual.metrics import overhead, overhead_from_load
from cfdual.netmodel import NetworkConfig, draw_realization, trial_rng
from cfdual.topology import build_plan

rep = overhead_from_load(k_bar=2.0, antennas=4)
print(f"distributed {rep.distributed_bits:.0f} bits, centralized {rep.centralized_bits:.0f} bits")
print(f"reduction {100 * rep.reduction:.1f}%")

# %%
# On a drawn network the load K-bar depends on how clusters overlap.
cfg = NetworkConfig(num_aps=100, num_users=20)
real = draw_realization(cfg, trial_rng(0, 0))
for m in (5, 10, 20):
    plan = build_plan(real.beta, m, 5, cfg.antennas_per_ap)
    r = overhead(plan, cfg.antennas_per_ap)
    print(f"|M| = {m:2d}  K-bar {r.k_bar:5.2f}  reduction {100 * r.reduction:5.1f}%")
