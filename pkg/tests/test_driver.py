"""Stepping loop: stepsize rule, single iterations, full runs."""

import math
import warnings

import numpy as np
import pytest

from stosqp import (
    INFINITE,
    AlgoConfig,
    BetaSchedule,
    CurvatureViolation,
    DivisionByZero,
    EmptySchedule,
    HessianPolicy,
    InvalidConstant,
    InvalidRange,
    KktSystem,
    MeritParams,
    MeritState,
    NoiseModel,
    compute_stepsize,
    make_quadratic,
    make_random_licq,
    make_rosenbrock_sphere,
    run,
    sample_kstar,
    solve_kkt,
    step_once,
    true_quantities,
)
from stosqp.problems import Problem
from stosqp.tail_bounds import smax_bound


def _stoch_config(k_max, seed=0, gamma=0.5, variance=1.0, **kw):
    return AlgoConfig(
        k_max=k_max,
        seed=seed,
        beta_schedule=BetaSchedule.constant(gamma),
        noise=NoiseModel.gaussian(variance),
        **kw,
    )


def _det_config(k_max, **kw):
    return AlgoConfig(k_max=k_max, mode="deterministic", **kw)


def _quiet_run(problem, config, keep_trace=True):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run(problem, config, keep_trace=keep_trace)


def test_stepsize_degenerate_interval():
    a_hat_i, a_til_i, a_hat, a_til, alpha = compute_stepsize(
        0.7, 1.0, 1.0, 0.1, 1.0, 0.0, 1.0, 0.0, 0.0
    )
    # interval collapses to the single point beta*xi*tau/(tau*L) = 0.1
    assert a_hat == a_til == alpha == 0.1
    assert a_hat_i == pytest.approx(0.07)
    assert a_til_i == a_hat_i


def test_stepsize_interior_value():
    a_hat_i, a_til_i, a_hat, a_til, alpha = compute_stepsize(
        0.5, 1.0, 0.2, 1.0, 1.0, 0.0, 1.0, 0.0, 0.5
    )
    assert a_hat_i == 0.5
    assert a_til_i == 0.5
    # interval [0.2, 0.7]; candidate 0.5 is interior and below 1
    assert a_hat == a_til == alpha == 0.5


def test_stepsize_tie_at_one():
    _, _, a_hat, a_til, alpha = compute_stepsize(
        0.3, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0
    )
    assert a_hat == a_til == 1.0
    assert alpha == 1.0


def test_stepsize_above_one_takes_tilde():
    _, a_til_i, a_hat, a_til, alpha = compute_stepsize(
        3.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.1, 1.0
    )
    assert a_til_i == pytest.approx(2.6)
    assert a_hat == a_til == 2.0
    assert alpha == 2.0


def test_stepsize_zero_violation_aligns_candidates():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a_hat_i, a_til_i, *_ = compute_stepsize(
            float(rng.uniform(0.01, 5.0)),
            float(rng.uniform(0.1, 2.0)),
            float(rng.uniform(0.1, 2.0)),
            float(rng.uniform(0.01, 1.0)),
            float(rng.uniform(0.5, 5.0)),
            float(rng.uniform(0.0, 2.0)),
            float(rng.uniform(0.1, 4.0)),
            0.0,
            float(rng.uniform(0.0, 2.0)),
        )
        assert a_til_i == a_hat_i


def test_stepsize_projection_invariant():
    rng = np.random.default_rng(2)
    for _ in range(200):
        tau = float(rng.uniform(0.1, 2.0))
        xi = float(rng.uniform(0.1, 2.0))
        beta = float(rng.uniform(0.01, 1.0))
        L = float(rng.uniform(0.5, 5.0))
        Gamma = float(rng.uniform(0.0, 2.0))
        theta = float(rng.uniform(0.0, 2.0))
        lo = beta * xi * tau / (tau * L + Gamma)
        hi = lo + theta * beta * beta
        _, _, a_hat, a_til, alpha = compute_stepsize(
            float(rng.uniform(-1.0, 5.0)),
            tau,
            xi,
            beta,
            L,
            Gamma,
            float(rng.uniform(0.1, 4.0)),
            float(rng.uniform(0.0, 2.0)),
            theta,
        )
        assert lo - 1e-15 <= a_hat <= hi + 1e-15
        assert lo - 1e-15 <= a_til <= hi + 1e-15
        assert alpha == 1.0 or lo - 1e-15 <= alpha <= hi + 1e-15


def test_stepsize_zero_step_raises():
    with pytest.raises(DivisionByZero):
        compute_stepsize(1.0, 1.0, 1.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0)


def test_zero_step_branch_keeps_parameters():
    # solution at the origin; starting there the exact step vanishes
    prob = make_quadratic(4, 1, seed=5, q=np.zeros(4), b=np.zeros(1))
    config = _det_config(k_max=3)
    state = MeritState.from_params(config.merit)
    rec = step_once(prob, config, state, np.zeros(4), np.random.default_rng(0))
    assert rec.tau_trial is INFINITE
    assert rec.xi_trial is INFINITE
    assert (
        rec.alpha_hat_init
        == rec.alpha_tilde_init
        == rec.alpha_hat
        == rec.alpha_tilde
        == rec.alpha
        == 1.0
    )
    assert rec.tau == config.merit.tau_init
    assert rec.xi == config.merit.xi_init
    assert not rec.tau_decreased and not rec.xi_decreased
    assert np.array_equal(rec.x + rec.alpha * rec.d, np.zeros(4))


def test_deterministic_mode_exact_quantities():
    prob = make_quadratic(5, 2, seed=6)
    res = _quiet_run(prob, _det_config(k_max=25))
    assert len(res.trace) == 26
    for rec in res.trace:
        assert rec.d is rec.d_true or np.array_equal(rec.d, rec.d_true)
        assert np.array_equal(rec.y, rec.y_true)
        assert np.array_equal(rec.g, prob.grad_f(rec.x))
        if rec.tau_trial is INFINITE:
            assert rec.tau_trial_true is INFINITE
        else:
            assert rec.tau_trial == rec.tau_trial_true
        # tau never exceeds the true trial, so tau_hat collapses to tau
        assert rec.tau_hat == rec.tau
        assert rec.delta_q_true == rec.delta_q_stoch


def test_sampled_step_mean_matches_exact_step():
    prob = make_quadratic(5, 2, seed=7)
    config = _stoch_config(k_max=0, variance=1.0)
    x = prob.x0
    d_true, *_ = true_quantities(prob, x, np.eye(5), sigma=config.merit.sigma)
    rng = np.random.default_rng(8)
    T = 2000
    draws = np.zeros((T, 5))
    for t in range(T):
        state = MeritState.from_params(config.merit)
        rec = step_once(prob, config, state, x, rng, beta=0.05)
        draws[t] = rec.d
        assert np.array_equal(rec.d_true, d_true)
    se = math.sqrt(float(np.sum(draws.var(axis=0, ddof=1))) / T)
    assert float(np.linalg.norm(draws.mean(axis=0) - d_true)) <= 3.0 * se


def test_run_kmax_zero():
    prob = make_quadratic(4, 1, seed=9)
    res = _quiet_run(prob, _stoch_config(k_max=0, seed=1))
    assert len(res.trace) == 1
    assert res.k_star == 0
    assert res.summary["iterations"] == 1
    assert np.array_equal(res.x_at_kstar, prob.x0)


def test_sample_kstar_distribution():
    rng = np.random.default_rng(10)
    assert sample_kstar([2.0], rng) == 0
    T = 100000
    counts = np.zeros(3)
    for _ in range(T):
        counts[sample_kstar([1.0, 1.0, 2.0], rng)] += 1
    for idx, p in enumerate([0.25, 0.25, 0.5]):
        se = math.sqrt(p * (1.0 - p) / T)
        assert abs(counts[idx] / T - p) <= 3.0 * se
    with pytest.raises(EmptySchedule):
        sample_kstar([], rng)
    with pytest.raises(InvalidRange):
        sample_kstar([0.5, 0.0], rng)


def test_kstar_uniform_over_constant_schedule():
    # beta constant makes k* uniform over {0..k_max}
    prob = make_quadratic(4, 1, seed=11)
    T = 2000
    counts = np.zeros(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for r in range(T):
            res = run(prob, _stoch_config(k_max=3, seed=1000 + r), keep_trace=False)
            counts[res.k_star] += 1
    expected = T / 4.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # 99.9th percentile of chi-square with 3 degrees of freedom
    assert chi2 <= 16.266


def test_true_quantities_identity_and_kkt_point():
    prob = make_quadratic(6, 2, seed=12)
    rng = np.random.default_rng(13)
    a = rng.normal(size=(6, 6))
    H = a @ a.T + np.eye(6)
    for _ in range(10):
        x = rng.normal(size=6)
        d_true, y_true, _, stat, _ = true_quantities(prob, x, H, sigma=0.5)
        assert abs(stat - float(np.linalg.norm(H @ d_true))) <= 1e-10 * max(1.0, stat)
        assert stat == pytest.approx(
            float(np.linalg.norm(prob.grad_f(x) + prob.jac_c(x).T @ y_true)),
            abs=0.0,
            rel=1e-15,
        )
    x_star, _ = prob.solution
    d_true, _, _, stat, _ = true_quantities(prob, x_star, np.eye(6), sigma=0.5)
    assert float(np.linalg.norm(d_true)) <= 1e-10
    assert stat <= 1e-10


def test_true_quantities_feasible_point_infinite_trial():
    base = make_quadratic(6, 2, seed=14)
    A = base.jac_c(base.x0)
    x_feas = np.random.default_rng(15).normal(size=6)
    prob = make_quadratic(6, 2, seed=14, b=A @ x_feas)
    assert np.all(prob.c(x_feas) == 0.0)
    _, _, trial, _, c1 = true_quantities(prob, x_feas, np.eye(6), sigma=0.5)
    assert c1 == 0.0
    assert trial is INFINITE


def test_bitwise_reproducibility():
    prob = make_quadratic(5, 2, seed=16)
    for config in (_stoch_config(k_max=12, seed=3), _det_config(k_max=12)):
        r1 = _quiet_run(prob, config)
        r2 = _quiet_run(prob, config)
        assert r1.k_star == r2.k_star
        for a, b in zip(r1.trace, r2.trace):
            assert np.array_equal(a.x, b.x)
            assert np.array_equal(a.g, b.g)
            assert np.array_equal(a.d, b.d)
            assert np.array_equal(a.y, b.y)
            assert a.tau == b.tau and a.xi == b.xi
            assert a.alpha == b.alpha
            assert a.delta_q_stoch == b.delta_q_stoch
            assert a.phi_after == b.phi_after


def test_deterministic_convergence_with_stop():
    prob = make_quadratic(4, 2, seed=17)
    k_max = 1000
    config = _det_config(
        k_max=k_max,
        stop_eps=1e-6,
        beta_schedule=BetaSchedule.explicit([1.0] * (k_max + 1)),
    )
    res = _quiet_run(prob, config)
    assert res.summary["stop_iteration"] is not None
    last = res.trace[-1]
    assert last.stationarity <= 1e-6
    assert math.sqrt(last.c_norm1) <= 1e-6
    x_star, _ = prob.solution
    assert float(np.linalg.norm(last.x - x_star)) <= 1e-3


def test_parameter_monotonicity_and_floors():
    prob = make_quadratic(8, 3, seed=18)
    config = _stoch_config(k_max=300, seed=4)
    res = _quiet_run(prob, config)
    eps_tau = config.merit.eps_tau
    eps_xi = config.merit.eps_xi
    prev_tau = config.merit.tau_init
    prev_xi = config.merit.xi_init
    s_seen = 0
    for rec in res.trace:
        assert rec.tau <= prev_tau
        if rec.tau_decreased:
            s_seen += 1
            assert rec.tau_trial is not INFINITE
            assert rec.tau <= (1.0 - eps_tau) * min(prev_tau, rec.tau_trial) + 1e-15
        else:
            assert rec.tau == prev_tau
        assert rec.xi <= prev_xi
        if rec.xi_decreased:
            assert rec.xi <= (1.0 - eps_xi) * rec.xi_trial + 1e-15
        else:
            assert rec.xi == prev_xi
        prev_tau, prev_xi = rec.tau, rec.xi
    assert res.summary["s_count"] == s_seen
    assert res.summary["final_tau"] == prev_tau
    # decrease budget: the bound evaluated at the empirical floor
    bound = smax_bound(
        res.summary["tau_min_empirical"],
        config.merit.tau_init,
        eps_tau,
        config.k_max,
    )
    assert res.summary["s_count"] <= bound


def test_tau_hat_dominated_by_tau_and_true_trial():
    prob = make_quadratic(6, 2, seed=19)
    res = _quiet_run(prob, _stoch_config(k_max=200, seed=5))
    for rec in res.trace:
        assert rec.tau_hat <= rec.tau + 1e-15
        if rec.tau_trial_true is not INFINITE:
            assert rec.tau_hat <= rec.tau_trial_true + 1e-15


def test_alpha_only_leaves_interval_at_one():
    prob = make_quadratic(6, 2, seed=20)
    config = _stoch_config(k_max=200, seed=6)
    betas = config.beta_schedule.realize(config.k_max)
    res = _quiet_run(prob, config)
    for rec in res.trace:
        if rec.tau_trial is INFINITE and rec.alpha == 1.0 and np.all(rec.d == 0.0):
            continue
        beta = betas[rec.k]
        lo = beta * rec.xi * rec.tau / (rec.tau * prob.L + prob.Gamma)
        hi = lo + config.theta * beta * beta
        assert lo - 1e-12 <= rec.alpha_hat <= hi + 1e-12
        assert lo - 1e-12 <= rec.alpha_tilde <= hi + 1e-12
        assert rec.alpha == 1.0 or lo - 1e-12 <= rec.alpha <= hi + 1e-12


def test_keep_trace_false_matches_full_run():
    prob = make_quadratic(5, 2, seed=21)
    config = _stoch_config(k_max=40, seed=7)
    full = _quiet_run(prob, config)
    light = _quiet_run(prob, config, keep_trace=False)
    assert light.k_star == full.k_star
    assert len(light.trace) == 1
    ref = full.trace[full.k_star]
    got = light.trace[0]
    assert got.k == full.k_star
    assert np.array_equal(got.x, ref.x)
    assert np.array_equal(got.d, ref.d)
    assert got.alpha == ref.alpha
    assert got.stationarity == ref.stationarity
    assert light.summary == full.summary


def test_keep_trace_false_rejects_stop_eps():
    prob = make_quadratic(4, 2, seed=22)
    with pytest.raises(InvalidRange):
        run(prob, _det_config(k_max=10, stop_eps=1e-6), keep_trace=False)


def test_warns_when_beta_exceeds_admissible_estimate():
    prob = make_quadratic(4, 1, seed=23)
    config = AlgoConfig(
        k_max=2,
        mode="deterministic",
        beta_schedule=BetaSchedule.explicit([1.0, 1.0, 1.0]),
    )
    with pytest.warns(RuntimeWarning):
        run(prob, config)


def test_config_validation():
    with pytest.raises(InvalidConstant):
        AlgoConfig(k_max=5)  # stochastic mode needs a noise model
    with pytest.raises(InvalidConstant):
        AlgoConfig(k_max=5, mode="deterministic", noise=NoiseModel.gaussian(1.0))
    with pytest.raises(InvalidRange):
        AlgoConfig(k_max=5, noise=NoiseModel.gaussian(1.0), stop_eps=1e-6)
    with pytest.raises(InvalidRange):
        AlgoConfig(k_max=5, mode="deterministic", stop_eps=0.0)
    with pytest.raises(InvalidRange):
        BetaSchedule.constant(0.0)
    with pytest.raises(InvalidRange):
        BetaSchedule.explicit([0.5, 1.5])
    with pytest.raises(EmptySchedule):
        BetaSchedule.explicit([])
    prob = make_quadratic(4, 1, seed=24)
    config = AlgoConfig(
        k_max=3,
        mode="deterministic",
        beta_schedule=BetaSchedule.explicit([0.5, 0.5]),
    )
    from stosqp import DimensionMismatch

    with pytest.raises(DimensionMismatch):
        run(prob, config)


def test_verify_curvature_flag():
    prob = make_quadratic(4, 1, seed=25)
    ok = _det_config(k_max=1, verify_curvature=0.5)
    _quiet_run(prob, ok)
    bad = _det_config(k_max=1, verify_curvature=100.0)
    with pytest.raises(CurvatureViolation):
        run(prob, bad)


def test_user_hook_hessian_is_used():
    prob = make_quadratic(4, 1, seed=26)
    H = 2.0 * np.eye(4)
    config = _det_config(
        k_max=0, hessian_policy=HessianPolicy.user_hook(lambda p, x, k: H)
    )
    state = MeritState.from_params(config.merit)
    rec = step_once(prob, config, state, prob.x0, np.random.default_rng(0))
    sol = solve_kkt(
        KktSystem(H=H, J=prob.jac_c(prob.x0), g=prob.grad_f(prob.x0), c=prob.c(prob.x0))
    )
    assert np.max(np.abs(rec.d_true - sol.d)) <= 1e-10


def test_regularized_policy_shifts_until_curvature():
    # hess is -2 I, so shifts must climb to 10 before the check passes
    def make_bad():
        return Problem(
            n=2,
            m=1,
            f=lambda x: float(-(x @ x)),
            grad_f=lambda x: -2.0 * x,
            c=lambda x: np.array([x[0] - 1.0]),
            jac_c=lambda x: np.array([[1.0, 0.0]]),
            L=2.0,
            Gamma=0.0,
            x0=np.array([2.0, 1.0]),
            f_low=-100.0,
            hess_f=lambda x: -2.0 * np.eye(2),
        )

    prob = make_bad()
    config = _det_config(
        k_max=0, hessian_policy=HessianPolicy.regularized(zeta=0.1)
    )
    state = MeritState.from_params(config.merit)
    rec = step_once(prob, config, state, prob.x0, np.random.default_rng(0))
    # H = -2 I + 10 I = 8 I on the null direction e_2
    sol = solve_kkt(
        KktSystem(
            H=8.0 * np.eye(2),
            J=prob.jac_c(prob.x0),
            g=prob.grad_f(prob.x0),
            c=prob.c(prob.x0),
        )
    )
    assert np.max(np.abs(rec.d_true - sol.d)) <= 1e-10

    starved = _det_config(
        k_max=0,
        hessian_policy=HessianPolicy.regularized(zeta=0.1, max_shifts=2),
    )
    with pytest.raises(CurvatureViolation):
        run(prob, starved)


def test_regularized_policy_on_curved_problem():
    prob = make_rosenbrock_sphere()
    config = _det_config(k_max=3, hessian_policy=HessianPolicy.regularized(zeta=0.1))
    res = _quiet_run(prob, config)
    assert len(res.trace) == 4


def test_summary_bookkeeping():
    prob = make_random_licq(6, 2, seed=27)
    config = _stoch_config(k_max=50, seed=8)
    res = _quiet_run(prob, config)
    s = res.summary
    assert s["iterations"] == len(res.trace) == 51
    assert s["stop_iteration"] is None
    assert s["final_tau"] == res.trace[-1].tau
    assert s["tau_min_empirical"] == min(rec.tau for rec in res.trace)
    assert s["min_stationarity"] == min(rec.stationarity for rec in res.trace)
    assert s["beta_max"] == pytest.approx(0.5 / math.sqrt(51.0))
    assert s["a_min_running"] <= s["a_max_initial"]
    assert s["s_count"] == sum(rec.tau_decreased for rec in res.trace)
    assert s["r_count"] == sum(rec.xi_decreased for rec in res.trace)
