"""Joint precoder/power optimization by dual decomposition.

Per-AP power constraints couple the users; relaxing them with multipliers
``lambda_l`` splits the problem into one closed-form subproblem per serving
cluster. The CPU runs projected gradient ascent on ``lambda``.

The ascent is carried out on the scale-free variable ``mu = rho_max * lambda``
with gradient ``(power_l - rho_max) / rho_max``, so the step size is
meaningful for any ``rho_max``. In raw units this is the update
``lambda <- [lambda + alpha / rho_max**2 * dg/dlambda]_+``.

Starting point: ``lambda_l = |D_l| / (2 |M| rho_max)`` by default ("load"),
i.e. each served user is expected to draw ``rho_max / |D_l|`` from AP l
while spreading its power over ``|M|`` APs. ``init="uniform"`` gives
``1 / (2 rho_max)`` everywhere, the single-user single-AP optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, root

from .errors import DegenerateUserError, NumericalError
from .metrics import sum_se, sinr_all
from .precoding import NullSpaceBasis, PrecodingSolution, null_spaces, solution_from_coefficients
from .topology import ClusterPlan

__all__ = [
    "DualConfig", "DualState", "IterationTrace", "MessageTally",
    "solve_subproblem", "subproblem_objective", "dual_gradient", "project_update",
    "DualProblem", "run_dual_decomposition", "run_centralized_reference",
    "account_messages",
]

LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True)
class DualConfig:
    rho_max: float
    alpha: float = 0.05
    lambda_floor: float = LAMBDA_FLOOR  # in mu units
    scalar_bytes: int = 4
    tol: float = 1e-6                   # reference stop, projected gradient / rho_max
    max_iters: int = 2000
    init: str = "load"

    def __post_init__(self):
        if self.init not in ("load", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def lambda_init(self, plan: ClusterPlan) -> np.ndarray:
        """Initial multipliers of the active APs, raw units."""
        active = plan.active_aps
        if self.init == "uniform":
            return np.full(active.size, 1.0 / (2.0 * self.rho_max))
        load = np.array([len(plan.served[l]) for l in active], dtype=float)
        return load / (2.0 * plan.cluster_size * self.rho_max)


@dataclass
class DualState:
    lam: np.ndarray          # per active AP, raw units
    iteration: int = 0
    gradient: np.ndarray | None = None
    bytes_exchanged: int = 0


@dataclass
class IterationTrace:
    """One entry per dual iterate ``lambda^(0..T)``.

    Entry n holds the multipliers, the per-AP power and objectives of the
    precoder computed from ``lambda^(n)``, and the cumulative scalar count
    after n exchange rounds.
    """

    active_aps: np.ndarray
    rho_max: float
    lam: list = field(default_factory=list)
    power: list = field(default_factory=list)
    approx_objective: list = field(default_factory=list)
    sum_se: list = field(default_factory=list)
    scalars: list = field(default_factory=list)
    degenerate: set = field(default_factory=set)
    converged: bool = False

    def __len__(self):
        return len(self.lam)

    @property
    def iterations(self) -> int:
        return len(self.lam) - 1

    def max_violation(self, n: int = -1) -> float:
        """Largest relative overshoot of the per-AP budget, 0 when feasible."""
        p = self.power[n]
        if p.size == 0:
            return 0.0
        return max(0.0, float(np.max(p / self.rho_max - 1.0)))


@dataclass(frozen=True)
class MessageTally:
    per_iteration: np.ndarray  # scalars exchanged in each round
    scalars: int
    bytes: int


def _blocks(N_k):
    if isinstance(N_k, NullSpaceBasis):
        return N_k.blocks
    return np.asarray(N_k)


def solve_subproblem(N_blocks, h, lam, floor: float = LAMBDA_FLOOR):
    """Closed-form minimizer of ``sum_l lam_l ||N_l c||^2 - ln(h^H N c)``.

    Parameters
    ----------
    N_blocks : NullSpaceBasis or np.ndarray
        Per-AP row blocks of the null-space basis, shape ``(|M|, N, d)``.
    h : np.ndarray
        Stacked own channel, length ``N |M|``.
    lam : array_like
        Multipliers of the serving APs, in the same order as the blocks.
    floor : float
        Multipliers are clamped to at least this value so the quadratic
        form stays invertible.

    Returns
    -------
    np.ndarray
        ``c = A N^H h / sqrt(h^H N A N^H h)`` with
        ``A = (sum_l 2 lam_l N_l^H N_l)^-1``. ``h^H N c`` is real positive.

    Raises
    ------
    DegenerateUserError
        If ``N^H h`` vanishes.
    """
    blocks = _blocks(N_blocks)
    lam = np.maximum(np.asarray(lam, dtype=float), floor)
    M, n, d = blocks.shape
    Nmat = blocks.reshape(M * n, d)
    b = Nmat.conj().T @ np.asarray(h)
    if np.linalg.norm(b) <= 1e-12 * np.linalg.norm(h):
        raise DegenerateUserError(None)
    Q = 2.0 * np.einsum("l,lni,lnj->ij", lam, blocks.conj(), blocks)
    x = np.linalg.solve(Q, b)
    s = np.real(np.vdot(b, x))
    return x / np.sqrt(s)


def subproblem_objective(N_blocks, h, lam, c) -> float:
    """Value of the per-cluster Lagrangian term at ``c`` (``inf`` off-domain)."""
    blocks = _blocks(N_blocks)
    M, n, d = blocks.shape
    seg = blocks @ c
    quad = float(np.sum(np.asarray(lam) * np.sum(np.abs(seg) ** 2, axis=1)))
    gain = np.real(np.vdot(np.asarray(h), blocks.reshape(M * n, d) @ c))
    if gain <= 0:
        return np.inf
    return quad - np.log(gain)


def dual_gradient(coeffs, plan: ClusterPlan, bases, rho_max: float) -> np.ndarray:
    """``dg/dlambda_l = sum_{k in D_l} ||N_kl c_k||^2 - rho_max`` per active AP."""
    power = np.zeros(plan.num_aps)
    for k, (basis, c) in enumerate(zip(bases, coeffs)):
        seg = _blocks(basis) @ c
        np.add.at(power, plan.serving[k], np.sum(np.abs(seg) ** 2, axis=1))
    return power[plan.active_aps] - rho_max


def project_update(lam, alpha: float, gradient) -> np.ndarray:
    """``[lam + alpha * gradient]_+`` element-wise."""
    if not alpha > 0:
        raise ValueError("step size must be positive")
    return np.maximum(np.asarray(lam, dtype=float) + alpha * np.asarray(gradient, dtype=float), 0.0)


class DualProblem:
    """Precomputed per-user quantities for repeated subproblem solves.

    Users are batched by null-space dimension; with generic channels every
    user shares ``d = N|M| - |C| + 1`` and there is a single batch.
    """

    def __init__(self, H, plan: ClusterPlan, rho_max: float, bases=None, own=None):
        if bases is None:
            bases, own = null_spaces(H, plan)
        self.H = H
        self.plan = plan
        self.rho_max = float(rho_max)
        self.bases = bases
        self.own = own
        self.active = plan.active_aps
        self._pos = np.full(plan.num_aps, -1)
        self._pos[self.active] = np.arange(self.active.size)
        self.slot = self._pos[plan.serving]  # (K, |M|) active index of each serving AP
        self.b = [basis.matrix.conj().T @ h for basis, h in zip(bases, own)]
        self.grams = [np.einsum("lni,lnj->lij", basis.blocks.conj(), basis.blocks) for basis in bases]
        self.degenerate = {k for k in range(plan.num_users)
                           if np.linalg.norm(self.b[k]) <= 1e-12 * np.linalg.norm(own[k])}
        groups = {}
        for k in range(plan.num_users):
            if k not in self.degenerate:
                groups.setdefault(bases[k].dim, []).append(k)
        self.groups = [(np.array(ks), np.stack([self.grams[k] for k in ks]),
                        np.stack([self.b[k] for k in ks])) for ks in groups.values()]

    @property
    def num_users(self):
        return self.plan.num_users

    def solve(self, lam, floor: float = LAMBDA_FLOOR):
        """Coefficients of all users for multipliers ``lam`` (active-AP order).

        ``floor`` is in normalized units and is applied as ``floor / rho_max``.
        Degenerate users get zero coefficients.
        """
        lam_eff = np.maximum(np.asarray(lam, dtype=float), floor / self.rho_max)
        coeffs = [np.zeros(b.shape[0], dtype=complex) for b in self.b]
        for ks, G, b in self.groups:
            Q = 2.0 * np.einsum("kl,klij->kij", lam_eff[self.slot[ks]], G)
            x = np.linalg.solve(Q, b[..., None])[..., 0]
            s = np.real(np.einsum("ki,ki->k", b.conj(), x))
            c = x / np.sqrt(s)[:, None]
            for j, k in enumerate(ks):
                coeffs[k] = c[j]
        return coeffs

    def solve_each(self, lam, floor: float = LAMBDA_FLOOR):
        """Same as :meth:`solve` but one :func:`solve_subproblem` call per user.

        This is the exact per-master arithmetic of the distributed scheme,
        which the batched solve only matches to rounding.
        """
        lam = np.asarray(lam, dtype=float)
        return [np.zeros(self.bases[k].dim, dtype=complex) if k in self.degenerate
                else solve_subproblem(self.bases[k], self.own[k], lam[self.slot[k]],
                                      floor / self.rho_max)
                for k in range(self.num_users)]

    def segment_power(self, coeffs) -> np.ndarray:
        """``||N_kl c_k||^2`` as a (K, |M|) array."""
        return np.stack([np.real(np.einsum("i,lij,j->l", c.conj(), G, c))
                         for c, G in zip(coeffs, self.grams)])

    def ap_power(self, coeffs) -> np.ndarray:
        power = np.zeros(self.active.size)
        np.add.at(power, self.slot.ravel(), self.segment_power(coeffs).ravel())
        return power

    def approx_objective(self, coeffs) -> float:
        """``sum_k ln(h_k^H N_k c_k)`` over non-degenerate users."""
        vals = [np.real(np.vdot(b, c)) for k, (b, c) in enumerate(zip(self.b, coeffs))
                if k not in self.degenerate]
        return float(np.sum(np.log(vals)))

    def dual_value(self, lam, floor: float = LAMBDA_FLOOR) -> float:
        """``g(lambda)``: the Lagrangian minimized over all coefficients."""
        lam = np.asarray(lam, dtype=float)
        coeffs = self.solve(lam, floor)
        power = self.ap_power(coeffs)
        return float(np.dot(lam, power - self.rho_max) - self.approx_objective(coeffs))

    def solution(self, coeffs, label="") -> PrecodingSolution:
        return solution_from_coefficients(self.bases, coeffs, self.plan, label=label)


def _record(trace, problem, lam, coeffs, power, scalars, evaluate_se):
    if not (np.all(np.isfinite(power)) and np.all(np.isfinite(lam))):
        raise NumericalError(f"non-finite dual iterate at iteration {len(trace.lam)}: "
                             f"lambda={lam}, power={power}")
    trace.lam.append(np.array(lam, dtype=float))
    trace.power.append(power)
    trace.approx_objective.append(problem.approx_objective(coeffs))
    if evaluate_se:
        sol = problem.solution(coeffs)
        trace.sum_se.append(sum_se(sinr_all(problem.H, sol)))
    trace.scalars.append(scalars)


def projected_gradient(mu, grad) -> np.ndarray:
    """Ascent direction left after projection onto ``mu >= 0``."""
    return np.where(np.asarray(mu) > 0, grad, np.maximum(grad, 0.0))


class _Cpu:
    """Owns the multipliers (as ``mu = rho_max * lambda``) and steps them."""

    def __init__(self, lam0, config: DualConfig):
        self.mu = np.asarray(lam0, dtype=float) * config.rho_max
        self.config = config

    @property
    def lam(self):
        return self.mu / self.config.rho_max

    def update(self, gradients):
        g = np.asarray(gradients) / self.config.rho_max
        self.mu = project_update(self.mu, self.config.alpha, g)


def run_dual_decomposition(H, plan: ClusterPlan, config: DualConfig, max_iters: int,
                           problem: DualProblem | None = None, evaluate_se: bool = True):
    """Distributed scheme with an in-process CPU <-> AP message simulation.

    Each round: the CPU sends ``lambda_l`` to every active AP, every cluster
    master solves its user's subproblem with the multipliers of its serving
    APs, each AP adds up the power its users request and reports the
    gradient back, and the CPU takes a projected step. ``lambda^(0)`` is a
    protocol constant and is not transmitted, so ``T`` rounds cost
    ``2 * #active * T`` scalars. The returned precoder uses ``lambda^(T)``.

    Returns
    -------
    (PrecodingSolution, IterationTrace)
    """
    problem = problem or DualProblem(H, plan, config.rho_max)
    active = [int(l) for l in problem.active]
    cpu = _Cpu(config.lambda_init(plan), config)
    trace = IterationTrace(active_aps=problem.active, rho_max=config.rho_max,
                           degenerate=set(problem.degenerate))
    floor = config.lambda_floor / config.rho_max
    scalars = 0

    def round_trip(lam_at_ap):
        # masters gather their cluster's multipliers over the local links
        coeffs = []
        for k in range(plan.num_users):
            if k in problem.degenerate:
                coeffs.append(np.zeros(problem.bases[k].dim, dtype=complex))
                continue
            lam_k = np.array([lam_at_ap[int(l)] for l in plan.serving[k]])
            coeffs.append(solve_subproblem(problem.bases[k], problem.own[k], lam_k, floor))
        # each serving AP learns its segment power from the master
        seg = problem.segment_power(coeffs)
        used = dict.fromkeys(active, 0.0)
        for k in range(plan.num_users):
            for m, l in enumerate(plan.serving[k]):
                used[int(l)] += seg[k, m]
        return coeffs, np.array([used[l] for l in active])

    lam_at_ap = dict(zip(active, cpu.lam))
    coeffs, power = round_trip(lam_at_ap)
    _record(trace, problem, cpu.lam, coeffs, power, scalars, evaluate_se)
    for _ in range(max_iters):
        scalars += len(active)                       # gradients up
        cpu.update(power - config.rho_max)
        lam_at_ap = dict(zip(active, cpu.lam))
        scalars += len(active)                       # lambda down
        coeffs, power = round_trip(lam_at_ap)
        _record(trace, problem, cpu.lam, coeffs, power, scalars, evaluate_se)
    return problem.solution(coeffs, label="pzf-dual"), trace


def _fixed_step(problem, config, trace, max_iters, tol, evaluate_se):
    cpu = _Cpu(config.lambda_init(problem.plan), config)
    coeffs = problem.solve_each(cpu.lam, config.lambda_floor)
    power = problem.ap_power(coeffs)
    _record(trace, problem, cpu.lam, coeffs, power, 0, evaluate_se)
    for _ in range(max_iters):
        pg = projected_gradient(cpu.mu, power / config.rho_max - 1.0)
        if np.max(np.abs(pg), initial=0.0) < tol:
            trace.converged = True
            break
        cpu.update(power - config.rho_max)
        coeffs = problem.solve_each(cpu.lam, config.lambda_floor)
        power = problem.ap_power(coeffs)
        _record(trace, problem, cpu.lam, coeffs, power, 0, evaluate_se)
    else:
        pg = projected_gradient(cpu.mu, power / config.rho_max - 1.0)
        trace.converged = bool(np.max(np.abs(pg), initial=0.0) < tol)
    return coeffs


def _quasi_newton(problem, config, trace, max_iters, tol, evaluate_se):
    rho = config.rho_max

    def negdual(mu):
        coeffs = problem.solve(mu / rho, config.lambda_floor)
        power = problem.ap_power(coeffs)
        g = np.dot(mu, power / rho - 1.0) - problem.approx_objective(coeffs)
        return -g, -(power / rho - 1.0)

    def record(mu):
        coeffs = problem.solve(mu / rho, config.lambda_floor)
        _record(trace, problem, mu / rho, coeffs, problem.ap_power(coeffs), 0, evaluate_se)

    mu0 = config.lambda_init(problem.plan) * rho
    record(mu0)
    if mu0.size:
        res = minimize(negdual, mu0, jac=True, method="L-BFGS-B",
                       bounds=[(0.0, None)] * mu0.size, callback=record,
                       options=dict(maxiter=max_iters, maxcor=20, ftol=1e-300, gtol=0.1 * tol))
        mu = _polish(problem, config, res.x, tol)
        if not np.array_equal(mu, trace.lam[-1] * rho):
            record(mu)
    else:
        mu = mu0
    coeffs = problem.solve(mu / rho, config.lambda_floor)
    pg = projected_gradient(mu, problem.ap_power(coeffs) / rho - 1.0)
    trace.converged = bool(np.max(np.abs(pg), initial=0.0) < tol)
    return coeffs


def _pg_norm(problem, config, mu):
    coeffs = problem.solve(mu / config.rho_max, config.lambda_floor)
    grad = problem.ap_power(coeffs) / config.rho_max - 1.0
    return np.max(np.abs(projected_gradient(mu, grad)), initial=0.0)


def _polish(problem, config, mu, tol):
    # Near the optimum the dual value stops resolving in double precision,
    # so finish with a root solve of the gradient on the positive multipliers.
    best = _pg_norm(problem, config, mu)
    if best < tol:
        return mu
    free = mu > 0
    if not np.any(free):
        return mu

    def grad_free(x):
        trial = mu.copy()
        trial[free] = np.abs(x)
        coeffs = problem.solve(trial / config.rho_max, config.lambda_floor)
        return problem.ap_power(coeffs)[free] / config.rho_max - 1.0

    sol = root(grad_free, mu[free], method="hybr", options=dict(xtol=1e-14))
    cand = mu.copy()
    cand[free] = np.abs(sol.x)
    if np.all(np.isfinite(cand)) and _pg_norm(problem, config, cand) < best:
        return cand
    return mu


def run_centralized_reference(H, plan: ClusterPlan, config: DualConfig,
                              problem: DualProblem | None = None, max_iters: int | None = None,
                              tol: float | None = None, method: str = "lbfgs",
                              evaluate_se: bool = False):
    """Solve the same dual problem at the CPU, without message simulation.

    Both methods stop once the projected gradient satisfies
    ``max_l |dg/dlambda_l| < tol * rho_max`` or after ``max_iters`` iterations.

    ``method="fixed"`` repeats the distributed projected-gradient arithmetic
    user by user; with ``tol=0`` and the same ``max_iters`` it
    reproduces the distributed multiplier trajectory. The fixed step cannot
    settle on APs whose optimal multiplier is small (the dual curvature grows
    like ``1/mu**2``), so the converged benchmark uses ``method="lbfgs"``:
    bound-constrained L-BFGS on the same dual function and gradient.

    Returns
    -------
    (PrecodingSolution, IterationTrace)
        ``trace.converged`` reports whether the tolerance was met. Without
        ``evaluate_se`` the trace holds a single sum-SE, for the final point.
    """
    problem = problem or DualProblem(H, plan, config.rho_max)
    max_iters = config.max_iters if max_iters is None else max_iters
    tol = config.tol if tol is None else tol
    trace = IterationTrace(active_aps=problem.active, rho_max=config.rho_max,
                           degenerate=set(problem.degenerate))
    if method == "fixed":
        coeffs = _fixed_step(problem, config, trace, max_iters, tol, evaluate_se)
    elif method == "lbfgs":
        coeffs = _quasi_newton(problem, config, trace, max_iters, tol, evaluate_se)
    else:
        raise ValueError(f"unknown method {method!r}")
    solution = problem.solution(coeffs, label="pzf-centralized")
    if not evaluate_se:
        trace.sum_se.append(sum_se(sinr_all(H, solution)))
    return solution, trace


def account_messages(trace: IterationTrace, scalar_bytes: int = 4) -> MessageTally:
    """Scalars and bytes of the dual protocol: one down and one up per active
    AP per round."""
    rounds = trace.iterations if len(trace) else 0
    per = np.full(rounds, 2 * trace.active_aps.size, dtype=int)
    total = int(per.sum())
    return MessageTally(per_iteration=per, scalars=total, bytes=total * scalar_bytes)
