"""Monte Carlo comparison of the three precoding schemes."""

# %%
from cfdual.harness import ExperimentConfig, run_experiment

cfg = ExperimentConfig(trials=50, iterations=2, scheme="pzf-dual,pzf-centralized,pinv-epa")
summary = run_experiment(cfg, output=False)
print(summary)

# %%
# Sharing more CSI nulls more interference but shrinks the precoding space.
for c in (1, 2, 4, 8):
    s = run_experiment(cfg.replace(csi_size=c, scheme="pzf-centralized"), output=False)
    print(f"|C| = {c:2d}  sum-SE {s.schemes['pzf-centralized'].mean:6.2f}")
