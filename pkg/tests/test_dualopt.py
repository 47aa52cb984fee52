import numpy as np
import pytest
from scipy.optimize import minimize

from cfdual.dualopt import (
    DualConfig, DualProblem, IterationTrace, account_messages, dual_gradient, project_update,
    run_centralized_reference, run_dual_decomposition, solve_subproblem, subproblem_objective,
)
from cfdual.errors import DegenerateUserError
from cfdual.precoding import null_space
from cfdual.topology import build_plan

from conftest import desk_instance, random_channels


def cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def unit_problem(seed, K=4, L=4, N=2, m=2, c=2, rho=None):
    """Small instance with unit-scale channels so g is well resolved."""
    rng = np.random.default_rng(seed)
    H = random_channels(rng, K, L, N)
    plan = build_plan(rng.uniform(0.1, 1.0, size=(K, L)), m, c, N)
    rho = rng.uniform(1.0, 10.0) if rho is None else rho
    return H, plan, rho, DualProblem(H, plan, rho)


def random_subproblem(rng, M=3, N=2, cols=2):
    basis = null_space(cgauss(rng, M * N, cols), antennas=N)
    return basis, cgauss(rng, M * N), rng.uniform(0.1, 1.0, size=M)


def test_identity_null_space_examples(rng):
    h = cgauss(rng, 4)
    I = np.eye(4)[None]
    c = solve_subproblem(I, h, [0.5])
    np.testing.assert_allclose(c, h / np.linalg.norm(h), atol=1e-12)
    assert np.linalg.norm(c) ** 2 == pytest.approx(1.0)
    for lam in (0.01, 0.3, 7.0):
        assert np.linalg.norm(solve_subproblem(I, h, [lam])) ** 2 == pytest.approx(1 / (2 * lam))


def test_subproblem_matches_generic_minimizer(rng):
    for _ in range(10):
        basis, h, lam = random_subproblem(rng)
        c = solve_subproblem(basis, h, lam)
        d = basis.dim

        def f(x):
            return subproblem_objective(basis, h, lam, x[:d] + 1j * x[d:])

        x0 = np.concatenate([c.real, c.imag]) * 0.5 + 0.1
        if not np.isfinite(f(x0)):
            x0 = np.concatenate([c.real, c.imag])
        res = minimize(f, x0, method="BFGS", options=dict(gtol=1e-10))
        best = subproblem_objective(basis, h, lam, c)
        assert best <= res.fun + 1e-9 * max(1.0, abs(res.fun))
        assert best == pytest.approx(res.fun, rel=1e-6, abs=1e-9)


def test_subproblem_stationary_and_real_gain(rng):
    for _ in range(20):
        basis, h, lam = random_subproblem(rng)
        c = solve_subproblem(basis, h, lam)
        B = basis.blocks
        Qh = np.einsum("l,lni,lnj->ij", lam, B.conj(), B)
        b = basis.matrix.conj().T @ h
        gain = np.vdot(b, c)
        # Wirtinger gradient of the objective with respect to conj(c)
        grad = Qh @ c - b / (2 * gain.real)
        assert np.linalg.norm(grad) < 1e-8 * (1 + np.linalg.norm(c))
        assert abs(gain.imag) < 1e-10 * abs(gain) and gain.real > 0


def test_subproblem_degenerate():
    basis = null_space(np.array([[1.0], [0.0]]), antennas=2)
    with pytest.raises(DegenerateUserError):
        solve_subproblem(basis, np.array([1.0, 0.0]), [1.0])


def test_project_update_examples():
    assert project_update([0.1], 0.05, [-4.0])[0] == 0.0
    assert project_update([1.0], 0.05, [0.0])[0] == 1.0
    assert project_update([0.0], 0.05, [2.0])[0] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        project_update([1.0], 0.0, [1.0])


def test_project_update_nonnegative(rng):
    lam = rng.uniform(0, 1, 100)
    out = project_update(lam, 0.3, rng.normal(0, 5, 100))
    assert np.all(out >= 0.0)


def test_dual_gradient_examples():
    H, plan, rho, pr = unit_problem(0)
    zero = [np.zeros(b.dim, dtype=complex) for b in pr.bases]
    np.testing.assert_array_equal(dual_gradient(zero, plan, pr.bases, rho), -rho)
    coeffs = pr.solve(np.full(pr.active.size, 0.4))
    P = pr.ap_power(coeffs)
    np.testing.assert_allclose(dual_gradient(coeffs, plan, pr.bases, P[0]), P - P[0])
    assert dual_gradient(coeffs, plan, pr.bases, P[0])[0] == 0.0


def finite_difference(pr, lam):
    fd = np.empty_like(lam)
    for l in range(lam.size):
        h = 1e-6 * max(lam[l], 1.0)
        e = np.zeros_like(lam)
        e[l] = h
        fd[l] = (pr.dual_value(lam + e) - pr.dual_value(lam - e)) / (2 * h)
    return fd


def test_gradient_matches_finite_differences():
    for seed in range(5):
        H, plan, rho, pr = unit_problem(seed)
        lam = np.random.default_rng(seed).uniform(0.1, 1.0, pr.active.size)
        grad = dual_gradient(pr.solve(lam), plan, pr.bases, rho)
        fd = finite_difference(pr, lam)
        assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-4


def test_dual_concavity():
    rng = np.random.default_rng(9)
    for seed in range(5):
        _, _, _, pr = unit_problem(seed)
        for _ in range(5):
            a, b = rng.uniform(0.05, 2.0, (2, pr.active.size))
            t = rng.uniform()
            lhs = pr.dual_value(t * a + (1 - t) * b)
            assert lhs >= t * pr.dual_value(a) + (1 - t) * pr.dual_value(b) - 1e-8


def test_scalar_kkt():
    rng = np.random.default_rng(4)
    H = random_channels(rng, 1, 1, 2)
    plan = build_plan(np.ones((1, 1)), 1, 1, 2)
    rho = 10.0
    for init in ("load", "uniform"):
        sol, tr = run_dual_decomposition(H, plan, DualConfig(rho_max=rho, init=init), 20)
        assert tr.power[-1][0] == pytest.approx(rho, rel=1e-9)
        assert tr.lam[-1][0] == pytest.approx(1 / (2 * rho), rel=1e-9)
    _, tr = run_centralized_reference(H, plan, DualConfig(rho_max=rho, init="uniform"))
    assert tr.lam[-1][0] == pytest.approx(1 / (2 * rho), rel=1e-6)


@pytest.mark.xfail(strict=True, reason="fixed-step ascent cycles on APs with small optimal "
                   "multipliers; no step size settles every AP within 50 rounds at desk scale")
def test_desk_kkt_after_fifty_iterations():
    cfg, real, plan = desk_instance(19)
    rho = cfg.rho_max
    _, tr = run_dual_decomposition(real.H, plan, DualConfig(rho_max=rho), 50, evaluate_se=False)
    lam, P = tr.lam[-1], tr.power[-1]
    assert tr.max_violation() < 0.01
    assert np.all(np.abs(lam * (P - rho)) <= 1e-2 * lam * rho + 1e-6)


def test_few_iterations_close_to_fifty():
    for seed in range(3):
        cfg, real, plan = desk_instance(seed)
        _, tr = run_dual_decomposition(real.H, plan, DualConfig(rho_max=cfg.rho_max), 50)
        assert tr.sum_se[3] >= 0.95 * tr.sum_se[50]


def test_fixed_reference_reproduces_distributed_trajectory():
    cfg, real, plan = desk_instance(1)
    dc = DualConfig(rho_max=cfg.rho_max)
    _, a = run_dual_decomposition(real.H, plan, dc, 25, evaluate_se=False)
    _, b = run_centralized_reference(real.H, plan, dc, max_iters=25, tol=0.0, method="fixed")
    assert len(a) == len(b) == 26
    for la, lb in zip(a.lam, b.lam):
        np.testing.assert_allclose(la * cfg.rho_max, lb * cfg.rho_max, rtol=0, atol=1e-12)


def test_reference_constraint_audit():
    for seed in range(3):
        cfg, real, plan = desk_instance(seed)
        sol, tr = run_centralized_reference(real.H, plan, DualConfig(rho_max=cfg.rho_max))
        assert tr.converged
        p = sol.ap_power(cfg.num_aps)
        assert np.max(p / cfg.rho_max) <= 1 + 1e-6


def test_reference_matches_primal_oracle():
    # L=2, N=2, K=2, |C|=2, |M|=2: maximize sum_k ln(h_k^H N_k c_k) under per-AP budgets
    rho = 100.0
    rng = np.random.default_rng(21)
    H = random_channels(rng, 2, 2, 2)
    plan = build_plan(rng.uniform(0.5, 1.0, (2, 2)), 2, 2, 2)
    pr = DualProblem(H, plan, rho)
    _, tr = run_centralized_reference(H, plan, DualConfig(rho_max=rho), problem=pr)
    dual_obj = tr.approx_objective[-1]
    dims = [b.dim for b in pr.bases]
    split = np.cumsum([0] + [2 * d for d in dims])

    def unpack(x):
        return [x[split[i]:split[i] + d] + 1j * x[split[i] + d:split[i + 1]] for i, d in enumerate(dims)]

    def neg(x):
        vals = [np.real(np.vdot(b, c)) for b, c in zip(pr.b, unpack(x))]
        return np.inf if min(vals) <= 0 else -np.sum(np.log(vals))

    cons = [{"type": "ineq", "fun": lambda x, l=l: rho - pr.ap_power(unpack(x))[l]}
            for l in range(pr.active.size)]
    best = -np.inf
    for start in range(8):
        r = np.random.default_rng(start)
        x0 = np.concatenate([np.concatenate([b.real, b.imag]) for b in pr.b])
        x0 = x0 * r.uniform(0.5, 1.5, x0.size) * 1e-3
        res = minimize(neg, x0, method="SLSQP", constraints=cons,
                       options=dict(ftol=1e-12, maxiter=1000))
        if res.success and all(c["fun"](res.x) >= -1e-6 * rho for c in cons):
            best = max(best, -res.fun)
    assert np.isfinite(best)
    assert dual_obj == pytest.approx(best, rel=1e-3)
    assert dual_obj >= best - 1e-6 * abs(best)


def test_monotone_ascent_small_step():
    for seed in range(3):
        cfg, real, plan = desk_instance(seed)
        pr = DualProblem(real.H, plan, cfg.rho_max)
        _, tr = run_dual_decomposition(real.H, plan, DualConfig(rho_max=cfg.rho_max, alpha=1e-3),
                                       30, problem=pr, evaluate_se=False)
        g = np.array([pr.dual_value(l) for l in tr.lam])
        assert np.all(np.diff(g) >= -1e-8)


def test_message_accounting():
    tr = IterationTrace(active_aps=np.arange(10), rho_max=1.0, lam=[None] * 4)
    tally = account_messages(tr)
    assert tally.scalars == 60 and tally.bytes == 240
    np.testing.assert_array_equal(tally.per_iteration, [20, 20, 20])
    assert account_messages(IterationTrace(active_aps=np.arange(10), rho_max=1.0, lam=[None])).scalars == 0
    assert account_messages(IterationTrace(np.arange(10), 1.0, lam=[None] * 7)).bytes == 2 * tally.bytes


def test_message_count_matches_protocol():
    cfg, real, plan = desk_instance(3)
    _, tr = run_dual_decomposition(real.H, plan, DualConfig(rho_max=cfg.rho_max), 3, evaluate_se=False)
    tally = account_messages(tr)
    assert tally.scalars == tr.scalars[-1] == 2 * plan.active_aps.size * 3
