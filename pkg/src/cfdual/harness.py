"""Monte Carlo driver: config files, trials across schemes, CSV output, sweeps.

Trial ``t`` draws its network from ``trial_rng(seed, t)``, so every scheme
and every point of a sweep sees the same channels (common random numbers),
and results do not depend on trial order or worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dualopt import DualConfig, DualProblem, run_centralized_reference, run_dual_decomposition
from .errors import ConfigError, NumericalError
from .metrics import average_load, overhead_from_load, se_report
from .netmodel import NetworkConfig, draw_realization, trial_rng
from .precoding import pinv_epa
from .topology import build_plan, check_feasible

__all__ = [
    "SCHEMES", "CSV_COLUMNS", "SWEEP_AXES", "ExperimentConfig", "ResultRow",
    "SchemeSummary", "Summary", "load_config", "parse_config", "run_trial",
    "run_experiment", "sweep", "read_csv", "write_csv",
]

log = logging.getLogger(__name__)

SCHEMES = ("pzf-dual", "pzf-centralized", "pinv-epa")
CSV_COLUMNS = ("trial", "scheme", "m_size", "c_size", "iter", "sum_se",
               "max_power_violation", "msg_bytes")
SWEEP_AXES = ("cluster_size", "csi_size", "iterations")

_NETWORK_FIELDS = tuple(f.name for f in dataclasses.fields(NetworkConfig))


@dataclass(frozen=True)
class ExperimentConfig:
    # network
    num_aps: int = 25
    antennas_per_ap: int = 4
    num_users: int = 10
    ap_grid_spacing: float = 100.0
    ap_grid_rows: int = 0
    area_side: float | None = None
    ap_height_delta: float = 10.0
    shadow_std: float = 4.0
    shadow_decorrelation: float = 9.0
    asd_deg: float = 15.0
    rho_max_db: float = 94.0
    pathloss_intercept: float = -30.5
    pathloss_exponent_coeff: float = 36.7
    # clustering and schemes
    cluster_size: int = 5
    csi_size: int = 4
    scheme: tuple = ("pzf-dual",)
    iterations: int = 2
    alpha: float = 0.05
    init: str = "load"
    trials: int = 200
    seed: int = 0
    output: str = "results.csv"
    trace: bool = False
    workers: int = 1
    # overhead model
    tau_d: int = 190
    bits_per_symbol: int = 4
    quant_bits: int = 8
    scalar_bytes: int = 4

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", tuple(s.strip() for s in self.scheme.split(",") if s.strip()))
        bad = [s for s in self.scheme if s not in SCHEMES]
        if bad or not self.scheme:
            raise ConfigError(f"unknown scheme(s) {bad or self.scheme}; choose from {SCHEMES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.cluster_size > self.num_aps:
            raise ConfigError(f"cluster_size={self.cluster_size} exceeds num_aps={self.num_aps}")
        if not 1 <= self.csi_size <= self.num_users:
            raise ConfigError(f"csi_size={self.csi_size} outside [1, {self.num_users}]")
        check_feasible(self.antennas_per_ap, self.cluster_size, self.csi_size)
        self.network  # validates the layout

    @property
    def network(self) -> NetworkConfig:
        return NetworkConfig(**{k: getattr(self, k) for k in _NETWORK_FIELDS})

    @property
    def dual(self) -> DualConfig:
        return DualConfig(rho_max=self.network.rho_max, alpha=self.alpha,
                          scalar_bytes=self.scalar_bytes, init=self.init)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ResultRow:
    trial: int
    scheme: str
    m_size: int
    c_size: int
    iter: int
    sum_se: float
    max_power_violation: float
    msg_bytes: int

    def as_list(self):
        return [self.trial, self.scheme, self.m_size, self.c_size, self.iter,
                repr(self.sum_se), repr(self.max_power_violation), self.msg_bytes]


@dataclass(frozen=True)
class SchemeSummary:
    mean: float
    stderr: float
    n: int


@dataclass
class Summary:
    schemes: dict
    aborted: list = field(default_factory=list)
    k_bar: float = math.nan
    overhead_reduction: float = math.nan
    config: ExperimentConfig | None = None

    def as_dict(self):
        return {
            "schemes": {k: dataclasses.asdict(v) for k, v in self.schemes.items()},
            "aborted": self.aborted,
            "k_bar": self.k_bar,
            "overhead_reduction": self.overhead_reduction,
        }

    def __str__(self):
        lines = [f"{name:16s} sum-SE {s.mean:8.3f} +/- {s.stderr:.3f} bit/s/Hz  (n={s.n})"
                 for name, s in self.schemes.items()]
        if self.aborted:
            lines.append(f"aborted trials: {len(self.aborted)}")
        lines.append(f"mean users per active AP {self.k_bar:.3f}, "
                     f"fronthaul reduction {100 * self.overhead_reduction:.1f}%")
        return "\n".join(lines)


def _coerce(name, raw, default):
    text = raw.strip()
    try:
        if name == "scheme":
            return text
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if default is None:
            return None if text.lower() in ("none", "") else float(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    defaults = {f.name: f.default for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, defaults[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


def run_trial(config: ExperimentConfig, trial: int):
    """All schemes on one channel realization.

    Returns ``(rows, finals, k_bar)``: every CSV row, the final row per
    scheme, and the mean load of active APs.
    """
    net = config.network
    dual = config.dual
    real = draw_realization(net, trial_rng(config.seed, trial), trial)
    plan = build_plan(real.beta, config.cluster_size, config.csi_size, net.antennas_per_ap)
    H = real.H
    M, C = config.cluster_size, config.csi_size
    rows, finals = [], {}
    problem = None
    for scheme in config.scheme:
        if scheme == "pinv-epa":
            sol = pinv_epa(H, plan, net.rho_max)
            rep = se_report(H, sol, net.rho_max, scheme, trial)
            row = ResultRow(trial, scheme, M, C, 0, rep.sum_se, rep.max_violation, 0)
            rows.append(row)
            finals[scheme] = row
            continue
        problem = problem or DualProblem(H, plan, net.rho_max)
        if problem.degenerate:
            log.warning("trial %d: users %s degenerate, zero power", trial, sorted(problem.degenerate))
        if scheme == "pzf-dual":
            sol, tr = run_dual_decomposition(H, plan, dual, config.iterations, problem=problem,
                                             evaluate_se=config.trace)
            steps = range(len(tr)) if config.trace else [tr.iterations]
            for n in steps:
                se = tr.sum_se[n] if config.trace else se_report(H, sol, net.rho_max).sum_se
                rows.append(ResultRow(trial, scheme, M, C, n, se, tr.max_violation(n),
                                      tr.scalars[n] * config.scalar_bytes))
            finals[scheme] = rows[-1]
        else:
            sol, tr = run_centralized_reference(H, plan, dual, problem=problem)
            if not tr.converged:
                log.warning("trial %d: reference stopped before tolerance", trial)
            rep = se_report(H, sol, net.rho_max, scheme, trial)
            row = ResultRow(trial, scheme, M, C, tr.iterations, rep.sum_se, rep.max_violation, 0)
            rows.append(row)
            finals[scheme] = row
    return rows, finals, average_load(plan)


def _safe_trial(args):
    config, trial = args
    try:
        return trial, run_trial(config, trial), None
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return trial, None, str(exc)


def write_csv(path, rows, append=False):
    path = Path(path)
    fresh = not append or not path.exists() or path.stat().st_size == 0
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row.as_list())


def read_csv(path):
    with open(path, newline="") as fh:
        return [ResultRow(int(r["trial"]), r["scheme"], int(r["m_size"]), int(r["c_size"]),
                          int(r["iter"]), float(r["sum_se"]), float(r["max_power_violation"]),
                          int(r["msg_bytes"]))
                for r in csv.DictReader(fh)]


def _summarize(finals, config):
    out = {}
    for scheme in config.scheme:
        se = np.array([f[scheme].sum_se for f in finals])
        n = se.size
        err = float(se.std(ddof=1) / np.sqrt(n)) if n > 1 else math.nan
        out[scheme] = SchemeSummary(mean=float(se.mean()) if n else math.nan, stderr=err, n=n)
    return out


def run_experiment(config: ExperimentConfig, output=None, append=False):
    """Run ``config.trials`` trials, write the CSV, return a :class:`Summary`.

    ``output`` overrides ``config.output``; pass ``False`` to skip writing.
    """
    jobs = [(config, t) for t in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_safe_trial, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        results = [_safe_trial(job) for job in jobs]
    rows, finals, loads, aborted = [], [], [], []
    for trial, res, err in results:
        if res is None:
            log.warning("trial %d aborted: %s", trial, err)
            aborted.append(trial)
            continue
        rows.extend(res[0])
        finals.append(res[1])
        loads.append(res[2])
    path = config.output if output is None else output
    if path:
        write_csv(path, rows, append=append)
    k_bar = float(np.mean(loads)) if loads else math.nan
    oh = overhead_from_load(k_bar, config.antennas_per_ap, config.tau_d,
                            config.bits_per_symbol, config.quant_bits)
    return Summary(schemes=_summarize(finals, config), aborted=aborted, k_bar=k_bar,
                   overhead_reduction=oh.reduction, config=config)


def sweep(config: ExperimentConfig, axis: str, values, output=None):
    """One experiment per value of ``axis`` into a single long-form CSV.

    Infeasible values are logged and skipped. Returns ``{value: Summary}``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    path = config.output if output is None else output
    if path:
        Path(path).unlink(missing_ok=True)
    out = {}
    for v in values:
        try:
            cfg = config.replace(**{axis: int(v)})
        except ConfigError as exc:
            log.warning("skipping %s=%s: %s", axis, v, exc)
            continue
        out[int(v)] = run_experiment(cfg, output=path, append=True)
    return out


def save_summary(summary: Summary, path):
    Path(path).write_text(json.dumps(summary.as_dict(), indent=2, default=float) + "\n")
