"""Tail-bound formulas and their Monte Carlo verifiers.

Covers the Chernoff-style threshold ell, the union-corrected failure
probability hat_delta, the cap on merit-parameter decreases, and
simulation checks: the capped Bernoulli decrease process, the
symmetric-noise step-quality probability, and the sub-Gaussian
max-deviation bound.
"""

import math
from dataclasses import dataclass

import numpy as np

from stosqp.errors import (
    EmptySchedule,
    InvalidConstant,
    InvalidDelta,
    InvalidDimension,
    InvalidRange,
)
from stosqp.kkt import KktFactorization

# chunk size for vectorized Monte Carlo loops (bounds peak memory)
_CHUNK = 10_000


@dataclass(frozen=True)
class TailParams:
    """Shared constants of the tail bounds: decrease budget s_max,
    failure probability delta, horizon k_max, and the per-iteration
    good-step probability p_tau."""

    s_max: int
    delta: float
    k_max: int
    p_tau: float = 1.0

    def __post_init__(self):
        if self.s_max < 0:
            raise InvalidRange("s_max must be >= 0, got %r" % (self.s_max,))
        if not 0.0 < self.delta < 1.0:
            raise InvalidDelta("delta must lie in (0, 1), got %r" % (self.delta,))
        if self.k_max < 0:
            raise InvalidDimension("k_max must be >= 0, got %r" % (self.k_max,))
        if not 0.0 < self.p_tau <= 1.0:
            raise InvalidRange("p_tau must lie in (0, 1], got %r" % (self.p_tau,))

    def hat_delta(self):
        return hat_delta(self.delta, self.s_max, self.k_max)

    def ell_threshold(self):
        return ell(self.s_max, self.hat_delta())


@dataclass
class CappedProcessResult:
    """Monte Carlo verdict for the capped decrease process."""

    trials: int
    freq_bound_holds: float
    freq_count_exceeds: float
    threshold: float
    max_prob_sum: float


def ell(s, delta_hat):
    """Threshold s + log(1/delta_hat) + sqrt(log^2 + 2 s log).

    A Bernoulli sum whose success probabilities add up to at least
    this value exceeds s with probability at least 1 - delta_hat.
    """
    if s < 0:
        raise InvalidRange("s must be >= 0, got %r" % (s,))
    if not 0.0 < delta_hat < 1.0:
        raise InvalidDelta("delta_hat must lie in (0, 1), got %r" % (delta_hat,))
    log_inv = math.log(1.0 / delta_hat)
    return s + log_inv + math.sqrt(log_inv * log_inv + 2.0 * s * log_inv)


def hat_delta(delta, s_max, k_max):
    """delta split over the binomial count of decrease patterns:
    delta / sum_{j=0}^{max(s_max-1, 0)} C(k_max, j).

    Exact big-integer arithmetic, switching to log-domain when the
    denominator outgrows float range.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidDelta("delta must lie in (0, 1), got %r" % (delta,))
    if s_max < 0:
        raise InvalidRange("s_max must be >= 0, got %r" % (s_max,))
    if k_max < 0:
        raise InvalidDimension("k_max must be >= 0, got %r" % (k_max,))
    if s_max <= 1:
        return delta
    denom = sum(math.comb(k_max, j) for j in range(min(s_max, k_max + 1)))
    if denom.bit_length() <= 1000:
        return delta / denom
    return math.exp(math.log(delta) - math.log(denom))


def smax_bound(tau_min, tau_init, eps_tau, k_max):
    """Largest possible number of tau decreases before hitting tau_min:
    min(k_max + 1, ceil(log(tau_min/tau_init) / log(1 - eps_tau)))."""
    if not 0.0 < tau_min <= tau_init:
        raise InvalidRange(
            "need 0 < tau_min <= tau_init, got %r, %r" % (tau_min, tau_init)
        )
    if not 0.0 < eps_tau < 1.0:
        raise InvalidRange("eps_tau must lie in (0, 1), got %r" % (eps_tau,))
    if k_max < 0:
        raise InvalidDimension("k_max must be >= 0, got %r" % (k_max,))
    ratio = math.log(tau_min / tau_init) / math.log(1.0 - eps_tau)
    return min(k_max + 1, max(0, math.ceil(ratio)))


def _prob_array(probs):
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise EmptySchedule("probability schedule must be a nonempty vector")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidRange("probabilities must lie in [0, 1]")
    return p


def mc_chernoff_check(probs, s, delta, trials, rng):
    """Empirical P[sum of independent Bernoulli(p_j) <= s].

    When sum(probs) >= ell(s, delta) the estimate must come out
    <= delta + 3 sqrt(delta(1-delta)/trials); with a smaller mass the
    result is only informational.
    """
    p = _prob_array(probs)
    if s < 0:
        raise InvalidRange("s must be >= 0, got %r" % (s,))
    if not 0.0 < delta < 1.0:
        raise InvalidDelta("delta must lie in (0, 1), got %r" % (delta,))
    if trials < 1:
        raise InvalidDimension("trials must be >= 1, got %r" % (trials,))
    hits = 0
    done = 0
    while done < trials:
        chunk = min(_CHUNK, trials - done)
        counts = (rng.uniform(size=(chunk, p.size)) < p).sum(axis=1)
        hits += int(np.count_nonzero(counts <= s))
        done += chunk
    return hits / trials


def simulate_capped_process(prob_schedule, s_max, k_max, delta, trials, rng):
    """Monte Carlo of the capped decrease process.

    Z_k ~ Bernoulli(p_k) while fewer than s_max successes have
    occurred; afterwards the conditional probability in force is 0.
    For each trial the in-force conditional probabilities are summed;
    the result reports how often that sum stays below
    ell(s_max, hat_delta(delta, s_max, k_max)) + 1, which the theory
    puts at probability >= 1 - delta.
    """
    if callable(prob_schedule):
        p = np.array([prob_schedule(k) for k in range(k_max + 1)], dtype=np.float64)
    else:
        p = np.asarray(prob_schedule, dtype=np.float64)
        if p.shape != (k_max + 1,):
            raise InvalidDimension(
                "prob schedule has shape %s, expected (%d,)" % (p.shape, k_max + 1)
            )
    p = _prob_array(p)
    if s_max < 0:
        raise InvalidRange("s_max must be >= 0, got %r" % (s_max,))
    if s_max > k_max + 1:
        raise InvalidRange("need s_max <= k_max + 1")
    if trials < 1:
        raise InvalidDimension("trials must be >= 1, got %r" % (trials,))
    threshold = ell(s_max, hat_delta(delta, s_max, k_max)) + 1.0

    holds = 0
    exceeds = 0
    max_sum = 0.0
    done = 0
    while done < trials:
        chunk = min(_CHUNK, trials - done)
        raw = rng.uniform(size=(chunk, k_max + 1)) < p
        before = np.cumsum(raw, axis=1) - raw
        active = before < s_max
        z = raw & active
        counts = z.sum(axis=1)
        prob_sums = (active * p).sum(axis=1)
        holds += int(np.count_nonzero(prob_sums <= threshold))
        exceeds += int(np.count_nonzero(counts > s_max))
        max_sum = max(max_sum, float(prob_sums.max()))
        done += chunk
    return CappedProcessResult(
        trials=trials,
        freq_bound_holds=holds / trials,
        freq_count_exceeds=exceeds / trials,
        threshold=threshold,
        max_prob_sum=max_sum,
    )


def mc_ptau_symmetric(problem, x, H, noise, trials, rng):
    """Empirical P[G^T D + max(D^T H D, 0) >= the exact-gradient value].

    D is the KKT step for the sampled gradient G at fixed x; the
    symmetric-noise theory puts this probability at >= 1/2.  The exact
    gradient is pushed through the same vectorized pipeline as the
    samples so the zero-noise case compares bitwise equal (equality
    counts as success).
    """
    if noise.kind not in ("none", "gaussian", "symmetric_bounded"):
        raise InvalidConstant("needs symmetric noise, got kind %r" % (noise.kind,))
    if trials < 1:
        raise InvalidDimension("trials must be >= 1, got %r" % (trials,))
    x = np.asarray(x, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    grad = np.asarray(problem.grad_f(x), dtype=np.float64)
    c = np.asarray(problem.c(x), dtype=np.float64)
    J = np.asarray(problem.jac_c(x), dtype=np.float64)
    n = problem.n
    m = J.shape[0]
    fac = KktFactorization(H, J)

    def stats_for(gs):
        # gs: (count, n) gradients; KKT solve is affine in the gradient
        rhs = np.empty((n + m, gs.shape[0]))
        rhs[:n] = -gs.T
        rhs[n:] = -c[:, None]
        sol = fac.solve(rhs, tol=math.inf, max_refine=0)[0]
        dmat = sol[:n]
        gd = np.einsum("ij,ji->i", gs, dmat)
        quad = np.einsum("ji,jk,ki->i", dmat, H, dmat)
        return gd + np.maximum(quad, 0.0)

    successes = 0
    done = 0
    while done < trials:
        chunk = min(_CHUNK, trials - done)
        # exact gradient rides along as row 0 of every batch so the
        # comparison value is produced by the identical code path and
        # zero noise yields equality, which counts as success
        gs = np.empty((chunk + 1, n))
        gs[0] = grad
        gs[1:] = grad + noise.sample_deviations(n, rng, count=chunk)
        stats = stats_for(gs)
        successes += int(np.count_nonzero(stats[1:] >= stats[0]))
        done += chunk
    return successes / trials


def mc_subgaussian_max(noise, M, k_max, delta, trials, rng, n=2):
    """Frequency that max_k ||G_k - grad f|| stays below
    sqrt(M (1 + log((k_max+1)/delta))) over k_max + 1 draws.

    Must be >= 1 - delta (minus Monte Carlo error) whenever the noise
    is sub-Gaussian at scale M; n is the deviation dimension.
    """
    if noise.kind not in ("none", "gaussian", "symmetric_bounded"):
        raise InvalidConstant("needs additive noise, got kind %r" % (noise.kind,))
    if M <= 0.0:
        raise InvalidConstant("M must be positive, got %r" % (M,))
    if not 0.0 < delta < 1.0:
        raise InvalidDelta("delta must lie in (0, 1), got %r" % (delta,))
    if k_max < 0:
        raise InvalidDimension("k_max must be >= 0, got %r" % (k_max,))
    if trials < 1:
        raise InvalidDimension("trials must be >= 1, got %r" % (trials,))
    threshold = math.sqrt(M * (1.0 + math.log((k_max + 1) / delta)))
    per_chunk = max(1, _CHUNK // (k_max + 1))
    within = 0
    done = 0
    while done < trials:
        chunk = min(per_chunk, trials - done)
        dev = noise.sample_deviations(n, rng, count=chunk * (k_max + 1))
        norms = np.linalg.norm(dev, axis=1).reshape(chunk, k_max + 1)
        within += int(np.count_nonzero(norms.max(axis=1) <= threshold))
        done += chunk
    return within / trials


def subgaussian_scale(noise, n):
    """Scale M with E[exp(||G - grad f||^2 / M)] <= e for the noise.

    Exact for the isotropic Gaussian model (equality) and the bounded
    ball model (radius squared dominates).
    """
    if noise.kind == "gaussian":
        return gaussian_subgaussian_scale(noise.variance_bound, n)
    if noise.kind == "symmetric_bounded":
        return noise.effective_radius(n) ** 2
    raise InvalidConstant("no sub-Gaussian scale for kind %r" % (noise.kind,))


def gaussian_subgaussian_scale(total_variance, n):
    """M with E[exp(||eps||^2 / M)] = e for eps ~ N(0, (v/n) I_n)."""
    if total_variance <= 0.0 or n < 1:
        raise InvalidConstant("needs positive variance and dimension >= 1")
    sigma_sq = total_variance / n
    return 2.0 * sigma_sq / (-math.expm1(-2.0 / n))


def eval_tau_min_formula(
    kappa_v,
    kappa_g,
    kappa_H,
    zeta,
    kappa_c,
    M,
    k_max,
    delta,
    sigma,
    eps_tau,
    tau_init,
):
    """Closed-form floor on the merit parameter and the matching
    decrease budget.

    Evaluates the high-probability gradient-deviation radius
    M_tau = sqrt(M (1 + log((k_max+1)/delta))), the trial-denominator
    bound kappa_tau_min = kappa_v (kappa_g + M_tau + (kappa_H/zeta)
    (M_tau + kappa_g + zeta + kappa_H kappa_v kappa_c)), and returns
    (tau_min, s_max) with tau_min = (1-sigma)(1-eps_tau)/kappa_tau_min
    and s_max the decrease budget implied by that floor (0 when the
    floor already exceeds tau_init).
    """
    for name, v in (
        ("kappa_v", kappa_v),
        ("kappa_g", kappa_g),
        ("kappa_H", kappa_H),
        ("zeta", zeta),
        ("kappa_c", kappa_c),
        ("M", M),
        ("tau_init", tau_init),
    ):
        if v <= 0.0:
            raise InvalidConstant("%s must be positive, got %r" % (name, v))
    if not 0.0 < delta < 1.0:
        raise InvalidDelta("delta must lie in (0, 1), got %r" % (delta,))
    if not 0.0 < sigma < 1.0:
        raise InvalidRange("sigma must lie in (0, 1), got %r" % (sigma,))
    if not 0.0 < eps_tau < 1.0:
        raise InvalidRange("eps_tau must lie in (0, 1), got %r" % (eps_tau,))
    if k_max < 0:
        raise InvalidDimension("k_max must be >= 0, got %r" % (k_max,))
    m_tau = math.sqrt(M * (1.0 + math.log((k_max + 1) / delta)))
    kappa_tau_min = kappa_v * (
        kappa_g
        + m_tau
        + (kappa_H / zeta) * (m_tau + kappa_g + zeta + kappa_H * kappa_v * kappa_c)
    )
    tau_min = (1.0 - sigma) * (1.0 - eps_tau) / kappa_tau_min
    s_max = smax_bound(min(tau_min, tau_init), tau_init, eps_tau, k_max)
    return tau_min, s_max
