"""Command line entry point: ``cfdual run | sweep | plot``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .harness import SWEEP_AXES, load_config, read_csv, run_experiment, save_summary, sweep


def _parser():
    p = argparse.ArgumentParser(prog="cfdual", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo run of one configuration")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--scheme", help="comma-separated: pzf-dual,pzf-centralized,pinv-epa")
    run.add_argument("--out", dest="output")

    sw = sub.add_parser("sweep", help="repeat a run over values of one parameter")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated integers")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--trials", type=int)
    sw.add_argument("--scheme")
    sw.add_argument("--out", dest="output")

    pl = sub.add_parser("plot", help="line chart of mean sum-SE from a results CSV")
    pl.add_argument("--in", dest="input", required=True)
    pl.add_argument("--out", dest="output", required=True)
    pl.add_argument("--x", choices=("c_size", "m_size", "iter"),
                    help="x-axis column (default: the first one that varies)")
    return p


def plot_csv(src, dst, x=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(src)
    if not rows:
        raise ConfigError(f"{src}: no rows")
    if x is None:
        x = next((c for c in ("c_size", "m_size", "iter")
                  if len({getattr(r, c) for r in rows}) > 1), "iter")
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r.scheme][getattr(r, x)].append(r.sum_se)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for scheme, pts in sorted(groups.items()):
        xs = sorted(pts)
        mean = np.array([np.mean(pts[v]) for v in xs])
        err = np.array([np.std(pts[v], ddof=1) / np.sqrt(len(pts[v])) if len(pts[v]) > 1 else 0.0
                        for v in xs])
        ax.errorbar(xs, mean, yerr=err, marker="o", capsize=3, label=scheme)
    ax.set_xlabel({"c_size": "|C|", "m_size": "|M|", "iter": "iterations"}[x])
    ax.set_ylabel("sum SE [bit/s/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst, format=Path(dst).suffix.lstrip(".") or "svg")
    plt.close(fig)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            plot_csv(args.input, args.output, args.x)
            return 0
        cfg = load_config(args.config, seed=args.seed, trials=args.trials,
                          scheme=args.scheme, output=args.output)
        if args.command == "run":
            summary = run_experiment(cfg)
            print(summary)
            save_summary(summary, Path(cfg.output).with_suffix(".summary.json"))
        else:
            values = [int(v) for v in args.values.split(",") if v.strip()]
            for v, summary in sweep(cfg, args.axis, values).items():
                print(f"[{args.axis}={v}]")
                print(summary)
        return 0
    except (ConfigError, NumericalError, OSError, ValueError) as exc:
        print(f"cfdual: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
