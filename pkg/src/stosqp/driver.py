"""Stochastic SQP driver: the full adaptive-merit loop.

Each iteration samples a gradient (or uses the exact one), solves the
Newton-KKT system, updates the merit parameter tau and the ratio
parameter xi, projects the prescribed stepsize onto its admissible
interval, and steps.  Every iteration additionally solves the same KKT
matrix against the exact gradient so the trace carries the true step,
true multiplier, true trial parameter, and the stationarity norm as
diagnostics.  A run ends after k_max + 1 iterations (or earlier in
deterministic mode when the stationarity pair passes stop_eps) and
reports one iterate sampled with probability proportional to the
stepsize weights beta_k.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from stosqp import merit
from stosqp.errors import (
    CurvatureViolation,
    DimensionMismatch,
    DivisionByZero,
    EmptySchedule,
    InvalidConstant,
    InvalidDimension,
    InvalidInterval,
    InvalidRange,
)
from stosqp.kkt import KktFactorization, check_reduced_curvature
from stosqp.merit import INFINITE, Infinite, MeritParams, MeritState
from stosqp.problems import NoiseModel, sample_gradient


@dataclass(frozen=True)
class BetaSchedule:
    """Stepsize weights beta_k, either Constant(gamma) realized as
    gamma / sqrt(k_max + 1), or an explicit per-iteration list."""

    kind: str
    gamma: float = 0.5
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "explicit"):
            raise InvalidRange("unknown beta schedule kind %r" % (self.kind,))
        if self.kind == "constant":
            if not 0.0 < self.gamma <= 1.0:
                raise InvalidRange("gamma must lie in (0, 1], got %r" % (self.gamma,))
        else:
            if len(self.values) == 0:
                raise EmptySchedule("explicit beta schedule is empty")
            for v in self.values:
                if not 0.0 < v <= 1.0:
                    raise InvalidRange("beta values must lie in (0, 1], got %r" % (v,))

    @classmethod
    def constant(cls, gamma=0.5):
        return cls(kind="constant", gamma=float(gamma))

    @classmethod
    def explicit(cls, values):
        return cls(kind="explicit", values=tuple(float(v) for v in values))

    def realize(self, k_max):
        """Per-iteration beta array of length k_max + 1."""
        if self.kind == "constant":
            return np.full(k_max + 1, self.gamma / math.sqrt(k_max + 1.0))
        if len(self.values) != k_max + 1:
            raise DimensionMismatch(
                "explicit schedule has %d entries, need k_max+1 = %d"
                % (len(self.values), k_max + 1)
            )
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class HessianPolicy:
    """How the model Hessian is produced each iteration.

    "identity": H = I (always satisfies reduced curvature with
    zeta <= 1 and is independent of the sampled gradient).
    "regularized": problem Hessian plus a grown multiple of I until
    the reduced-curvature check passes at the target zeta.
    "user_hook": arbitrary callable(problem, x, k) -> H.
    """

    kind: str
    zeta: float = 0.1
    shift0: float = 1e-3
    growth: float = 10.0
    max_shifts: int = 40
    hook: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("identity", "regularized", "user_hook"):
            raise InvalidRange("unknown hessian policy kind %r" % (self.kind,))
        if self.kind == "regularized":
            if self.zeta <= 0.0:
                raise InvalidRange("zeta must be positive, got %r" % (self.zeta,))
            if self.shift0 <= 0.0 or self.growth <= 1.0:
                raise InvalidRange("need shift0 > 0 and growth > 1")
        if self.kind == "user_hook" and self.hook is None:
            raise InvalidRange("user_hook policy needs a hook callable")

    @classmethod
    def identity(cls):
        return cls(kind="identity")

    @classmethod
    def regularized(cls, zeta=0.1, shift0=1e-3, growth=10.0, max_shifts=40):
        return cls(
            kind="regularized",
            zeta=float(zeta),
            shift0=float(shift0),
            growth=float(growth),
            max_shifts=int(max_shifts),
        )

    @classmethod
    def user_hook(cls, hook):
        return cls(kind="user_hook", hook=hook)


@dataclass(frozen=True)
class AlgoConfig:
    """Full configuration of one run."""

    k_max: int
    merit: MeritParams = MeritParams()
    theta: float = 1.0
    beta_schedule: BetaSchedule = BetaSchedule(kind="constant", gamma=0.5)
    hessian_policy: HessianPolicy = HessianPolicy(kind="identity")
    seed: int = 0
    mode: str = "stochastic"
    noise: Optional[NoiseModel] = None
    stop_eps: Optional[float] = None
    d_zero_tol: float = 1e-12
    kkt_tol: float = 1e-9
    verify_curvature: Optional[float] = None

    def __post_init__(self):
        if self.k_max < 0:
            raise InvalidDimension("k_max must be >= 0, got %r" % (self.k_max,))
        if self.theta < 0.0:
            raise InvalidRange("theta must be >= 0, got %r" % (self.theta,))
        if self.mode not in ("stochastic", "deterministic"):
            raise InvalidRange("mode must be stochastic or deterministic")
        if self.mode == "stochastic" and self.noise is None:
            raise InvalidConstant("stochastic mode needs a noise model")
        if self.mode == "deterministic" and self.noise is not None:
            raise InvalidConstant("deterministic mode takes no noise model")
        if self.stop_eps is not None:
            if self.mode != "deterministic":
                raise InvalidRange("stop_eps applies to deterministic mode only")
            if self.stop_eps <= 0.0:
                raise InvalidRange("stop_eps must be positive, got %r" % (self.stop_eps,))
        if self.d_zero_tol < 0.0:
            raise InvalidRange("d_zero_tol must be >= 0, got %r" % (self.d_zero_tol,))
        if self.kkt_tol <= 0.0:
            raise InvalidRange("kkt_tol must be positive, got %r" % (self.kkt_tol,))


@dataclass(slots=True)
class IterationRecord:
    """Everything iteration k saw and decided, plus exact-gradient
    diagnostics (the *_true fields and the stationarity norm)."""

    k: int
    x: np.ndarray
    g: np.ndarray
    d: np.ndarray
    y: np.ndarray
    tau_trial: Union[float, Infinite]
    tau: float
    xi_trial: Union[float, Infinite]
    xi: float
    alpha_hat_init: float
    alpha_tilde_init: float
    alpha_hat: float
    alpha_tilde: float
    alpha: float
    f: float
    c_norm1: float
    tau_decreased: bool
    xi_decreased: bool
    d_true: np.ndarray
    y_true: np.ndarray
    tau_trial_true: Union[float, Infinite]
    tau_hat: float
    delta_q_stoch: float
    delta_q_true: float
    stationarity: float
    phi_before: float
    phi_after: float


@dataclass
class RunResult:
    trace: list
    k_star: int
    x_at_kstar: np.ndarray
    summary: dict


def compute_stepsize(delta_q_value, tau, xi, beta, L, Gamma, d_norm_sq, c_norm1, theta):
    """Prescribed stepsize rule.

    Both candidate stepsizes are projected onto
    [beta*xi*tau/(tau*L+Gamma), same + theta*beta^2]; the returned
    alpha is alpha_hat when alpha_hat < 1, exactly 1 when
    alpha_tilde <= 1 <= alpha_hat, and alpha_tilde when it exceeds 1.
    Returns (alpha_hat_init, alpha_tilde_init, alpha_hat, alpha_tilde,
    alpha).
    """
    if d_norm_sq == 0.0:
        raise DivisionByZero("stepsize needs a nonzero step")
    denom = (tau * L + Gamma) * d_norm_sq
    alpha_hat_init = beta * delta_q_value / denom
    alpha_tilde_init = alpha_hat_init - 4.0 * c_norm1 / denom
    lo = beta * xi * tau / (tau * L + Gamma)
    hi = lo + theta * beta * beta
    if lo > hi:
        raise InvalidInterval("projection interval is empty: [%r, %r]" % (lo, hi))
    alpha_hat = min(max(alpha_hat_init, lo), hi)
    alpha_tilde = min(max(alpha_tilde_init, lo), hi)
    if alpha_hat < 1.0:
        alpha = alpha_hat
    elif alpha_tilde <= 1.0:
        alpha = 1.0
    else:
        alpha = alpha_tilde
    return alpha_hat_init, alpha_tilde_init, alpha_hat, alpha_tilde, alpha


def _materialize_hessian(problem, policy, x, k, eye):
    if policy.kind == "identity":
        return eye
    if policy.kind == "user_hook":
        return np.asarray(policy.hook(problem, x, k), dtype=np.float64)
    if problem.hess_f is None:
        raise InvalidConstant(
            "regularized hessian policy needs a problem with hess_f"
        )
    H0 = np.asarray(problem.hess_f(x), dtype=np.float64)
    H0 = 0.5 * (H0 + H0.T)
    J = np.asarray(problem.jac_c(x), dtype=np.float64)
    shift = 0.0
    for _ in range(policy.max_shifts):
        H = H0 if shift == 0.0 else H0 + shift * eye
        if check_reduced_curvature(H, J, policy.zeta):
            return H
        shift = policy.shift0 if shift == 0.0 else shift * policy.growth
    raise CurvatureViolation(
        "regularized hessian failed reduced-curvature target %r" % (policy.zeta,)
    )


def true_quantities(problem, x, H, *, sigma, fac=None, kkt_tol=1e-9):
    """Exact-gradient diagnostics at x.

    Solves the KKT system with the exact gradient and returns
    (d_true, y_true, tau_trial_true, stationarity, c_norm1) where
    stationarity is ||grad f + J^T y_true||_2 (which coincides with
    ||H d_true|| for KKT solutions).  Pass fac to reuse an existing
    factorization of [[H, J^T], [J, 0]].
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(problem.grad_f(x), dtype=np.float64)
    c = np.asarray(problem.c(x), dtype=np.float64)
    J = np.asarray(problem.jac_c(x), dtype=np.float64)
    if fac is None:
        fac = KktFactorization(H, J)
    n = problem.n
    z, _ = fac.solve(-np.concatenate([grad, c]), kkt_tol)
    d_true = z[:n]
    y_true = z[n:]
    c_norm1 = merit.l1_norm(c)
    stationarity = float(np.linalg.norm(grad + J.T @ y_true))
    gd = float(grad @ d_true)
    curv = float(d_true @ (H @ d_true))
    curv = curv if curv > 0.0 else 0.0
    tau_trial_true = merit.tau_trial_from_scalars(gd, curv, c_norm1, sigma)
    return d_true, y_true, tau_trial_true, stationarity, c_norm1


def _step_core(problem, config, state, x, rng, k, beta, eye):
    """One iteration; returns (record, x_next, f_next, c_next)."""
    params = config.merit
    f_k = float(problem.f(x))
    g_true = np.asarray(problem.grad_f(x), dtype=np.float64)
    c_k = np.asarray(problem.c(x), dtype=np.float64)
    J = np.asarray(problem.jac_c(x), dtype=np.float64)
    c_norm1 = merit.l1_norm(c_k)

    H = _materialize_hessian(problem, config.hessian_policy, x, k, eye)
    if config.verify_curvature is not None and not check_reduced_curvature(
        H, J, config.verify_curvature
    ):
        raise CurvatureViolation(
            "reduced curvature below %r at iteration %d"
            % (config.verify_curvature, k)
        )

    fac = KktFactorization(H, J)
    n = problem.n
    rhs_true = np.concatenate([g_true, c_k])
    np.negative(rhs_true, out=rhs_true)
    z_true, _ = fac.solve(rhs_true, config.kkt_tol)
    d_true = z_true[:n]
    y_true = z_true[n:]

    if config.mode == "deterministic":
        g = g_true
        d = d_true
        y = y_true
    else:
        g = sample_gradient(problem, config.noise, x, rng)
        rhs = np.concatenate([g, c_k])
        np.negative(rhs, out=rhs)
        z, _ = fac.solve(rhs, config.kkt_tol)
        d = z[:n]
        y = z[n:]

    gd_true = float(g_true @ d_true)
    curv_true = float(d_true @ (H @ d_true))
    curv_true = curv_true if curv_true > 0.0 else 0.0
    stationarity = float(np.linalg.norm(g_true + J.T @ y_true))
    tau_trial_true = merit.tau_trial_from_scalars(
        gd_true, curv_true, c_norm1, params.sigma
    )

    if float(np.max(np.abs(d), initial=0.0)) <= config.d_zero_tol:
        # stationary for the sampled gradient: keep all parameters
        tau_trial_k = INFINITE
        xi_trial_k = INFINITE
        tau_k = state.tau
        xi_k = state.xi
        tau_dec = False
        xi_dec = False
        gd = float(g @ d)
        curv = float(d @ (H @ d))
        curv = curv if curv > 0.0 else 0.0
        alphas = (1.0, 1.0, 1.0, 1.0, 1.0)
    else:
        gd = float(g @ d)
        curv = float(d @ (H @ d))
        curv = curv if curv > 0.0 else 0.0
        tau_trial_k = merit.tau_trial_from_scalars(gd, curv, c_norm1, params.sigma)
        tau_k, tau_dec = merit.update_tau(state, tau_trial_k, params.eps_tau)
        d_norm_sq = float(d @ d)
        delta_q_stoch_pre = merit.delta_q_from_scalars(tau_k, gd, curv, c_norm1)
        xi_trial_k = merit.xi_trial(delta_q_stoch_pre, tau_k, d_norm_sq)
        xi_k, xi_dec = merit.update_xi(state, xi_trial_k, params.eps_xi)
        alphas = compute_stepsize(
            delta_q_stoch_pre,
            tau_k,
            xi_k,
            beta,
            problem.L,
            problem.Gamma,
            d_norm_sq,
            c_norm1,
            config.theta,
        )

    delta_q_stoch = merit.delta_q_from_scalars(tau_k, gd, curv, c_norm1)
    tau_hat = tau_k if isinstance(tau_trial_true, Infinite) else min(tau_k, tau_trial_true)
    delta_q_true = merit.delta_q_from_scalars(tau_hat, gd_true, curv_true, c_norm1)

    alpha = alphas[4]
    x_next = x + alpha * d
    f_next = float(problem.f(x_next))
    c_next = np.asarray(problem.c(x_next), dtype=np.float64)
    phi_before = merit.phi_value(tau_k, f_k, c_norm1)
    phi_after = merit.phi_value(tau_k, f_next, merit.l1_norm(c_next))

    rec = IterationRecord(
        k=k,
        x=x,
        g=g,
        d=d,
        y=y,
        tau_trial=tau_trial_k,
        tau=tau_k,
        xi_trial=xi_trial_k,
        xi=xi_k,
        alpha_hat_init=alphas[0],
        alpha_tilde_init=alphas[1],
        alpha_hat=alphas[2],
        alpha_tilde=alphas[3],
        alpha=alpha,
        f=f_k,
        c_norm1=c_norm1,
        tau_decreased=tau_dec,
        xi_decreased=xi_dec,
        d_true=d_true,
        y_true=y_true,
        tau_trial_true=tau_trial_true,
        tau_hat=tau_hat,
        delta_q_stoch=delta_q_stoch,
        delta_q_true=delta_q_true,
        stationarity=stationarity,
        phi_before=phi_before,
        phi_after=phi_after,
    )
    return rec, x_next, f_next, c_next


def step_once(problem, config, state, x, rng, k=0, beta=None):
    """One iteration from iterate x; returns its IterationRecord.

    The successor iterate is record.x + record.alpha * record.d.
    beta defaults to the config schedule's value at k.
    """
    if beta is None:
        beta = float(config.beta_schedule.realize(config.k_max)[k])
    eye = np.eye(problem.n)
    rec, _, _, _ = _step_core(problem, config, state, x, rng, k, beta, eye)
    return rec


def sample_kstar(betas, rng):
    """Index k drawn with probability beta_k / sum(betas)."""
    b = np.asarray(betas, dtype=np.float64)
    if b.size == 0:
        raise EmptySchedule("cannot sample from an empty schedule")
    if np.any(b <= 0.0):
        raise InvalidRange("beta values must be positive")
    return int(rng.choice(b.size, p=b / b.sum()))


def run(problem, config, keep_trace=True):
    """Execute k_max + 1 iterations (fewer on deterministic early stop).

    Randomness flows from config.seed through two named substreams
    (noise draws, k* sampling), so identical configs reproduce bitwise
    identical runs.  In deterministic mode the run stops at the first
    iterate whose stationarity norm is <= stop_eps with
    sqrt(||c||_1) <= stop_eps; that iterate is returned as final and
    the last record's step fields describe the step not taken.

    keep_trace=False keeps only the sampled k* record (requires no
    stop_eps); the summary is unchanged.
    """
    if keep_trace is False and config.stop_eps is not None:
        raise InvalidRange("keep_trace=False cannot renormalize early-stopped k*")
    betas = config.beta_schedule.realize(config.k_max)
    ss = np.random.SeedSequence(config.seed)
    noise_ss, kstar_ss = ss.spawn(2)
    rng = np.random.default_rng(noise_ss)
    rng_kstar = np.random.default_rng(kstar_ss)
    state = MeritState.from_params(config.merit)
    eye = np.eye(problem.n)

    # admissible-gamma bookkeeping: the analysis wants
    # beta <= a_min / (a_max + theta) with a_k = xi_k tau_k/(tau_k L + Gamma)
    a_max = (
        config.merit.xi_init
        * config.merit.tau_init
        / (config.merit.tau_init * problem.L + problem.Gamma)
    )
    a_min = a_max

    kstar_pre = None
    if not keep_trace:
        kstar_pre = sample_kstar(betas, rng_kstar)

    x = np.array(problem.x0, dtype=np.float64)
    trace = []
    kstar_record = None
    stop_iteration = None
    min_stationarity = math.inf
    box_exits = 0
    last = None
    for k in range(config.k_max + 1):
        rec, x_next, _, _ = _step_core(problem, config, state, x, rng, k, betas[k], eye)
        last = rec
        if keep_trace:
            trace.append(rec)
        elif k == kstar_pre:
            kstar_record = rec
        min_stationarity = min(min_stationarity, rec.stationarity)
        a_min = min(a_min, state.xi * state.tau / (state.tau * problem.L + problem.Gamma))
        if (
            config.stop_eps is not None
            and rec.stationarity <= config.stop_eps
            and math.sqrt(rec.c_norm1) <= config.stop_eps
        ):
            stop_iteration = k
            break
        if problem.box_radius is not None and float(np.max(np.abs(x_next))) > problem.box_radius:
            box_exits += 1
        x = x_next

    iterations = (stop_iteration + 1) if stop_iteration is not None else config.k_max + 1
    if keep_trace:
        k_star = sample_kstar(betas[:iterations], rng_kstar)
        x_at_kstar = trace[k_star].x
    else:
        k_star = kstar_pre
        trace = [kstar_record]
        x_at_kstar = kstar_record.x

    gamma_bound = a_min / (a_max + config.theta) if a_max + config.theta > 0 else math.inf
    beta_max = float(np.max(betas[:iterations]))
    if beta_max > gamma_bound:
        warnings.warn(
            "largest beta %.3g exceeds the admissible-stepsize estimate %.3g"
            % (beta_max, gamma_bound),
            RuntimeWarning,
            stacklevel=2,
        )

    summary = {
        "iterations": iterations,
        "stop_iteration": stop_iteration,
        "final_tau": state.tau,
        "final_xi": state.xi,
        "s_count": state.s_count,
        "r_count": state.r_count,
        "tau_min_empirical": state.tau,
        "xi_min_empirical": state.xi,
        "min_stationarity": min_stationarity,
        "final_stationarity": last.stationarity,
        "final_f": last.f,
        "final_c_norm1": last.c_norm1,
        "a_max_initial": a_max,
        "a_min_running": a_min,
        "gamma_bound_estimate": gamma_bound,
        "beta_max": beta_max,
        "box_exits": box_exits,
    }
    return RunResult(trace=trace, k_star=k_star, x_at_kstar=x_at_kstar, summary=summary)
