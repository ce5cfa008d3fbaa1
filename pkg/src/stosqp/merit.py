"""Exact l1 merit function and its adaptive parameters.

The merit value weighs the objective by a penalty parameter tau and
adds the l1 constraint violation.  Each iteration compares tau against
a trial value keeping the predicted model reduction sufficiently
positive, and compares a reduction-ratio floor xi against its own
trial; both only ever decrease, each time by at least a fixed factor.
"""

from dataclasses import dataclass

import numpy as np

from stosqp.errors import DivisionByZero, InvalidRange, NonPositiveTau


class Infinite:
    """Positive infinite sentinel for trial values with no finite cap.

    A dedicated type (not float('inf')) so serialized traces and
    update comparisons cannot confuse an overflowed float with the
    explicit no-cap case.  Totally ordered against real numbers:
    greater than every float, equal only to itself.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Infinite()"

    def __str__(self):
        return "inf"

    def __eq__(self, other):
        return isinstance(other, Infinite)

    def __hash__(self):
        return hash("stosqp.Infinite")

    def __gt__(self, other):
        return not isinstance(other, Infinite)

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, Infinite)


INFINITE = Infinite()


@dataclass(frozen=True)
class MeritParams:
    """Fixed constants of the merit updates.

    sigma: fraction of the constraint violation the model reduction
    must retain; eps_tau / eps_xi: minimum relative decrease applied
    whenever tau / xi move; tau_init / xi_init: starting values.
    """

    sigma: float = 0.5
    eps_tau: float = 0.1
    eps_xi: float = 0.1
    tau_init: float = 1.0
    xi_init: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "eps_tau", "eps_xi"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidRange("%s must lie in (0, 1), got %r" % (name, v))
        for name in ("tau_init", "xi_init"):
            v = getattr(self, name)
            if not v > 0.0:
                raise InvalidRange("%s must be positive, got %r" % (name, v))


@dataclass
class MeritState:
    """Current tau and xi plus decrease counters."""

    tau: float
    xi: float
    s_count: int = 0
    r_count: int = 0

    @classmethod
    def from_params(cls, params):
        return cls(tau=params.tau_init, xi=params.xi_init)


def l1_norm(v):
    return float(np.sum(np.abs(v)))


def phi_value(tau, f_value, c_norm1):
    """Merit value from precomputed f(x) and ||c(x)||_1."""
    return tau * float(f_value) + c_norm1


def phi(problem, x, tau):
    """Merit value tau * f(x) + ||c(x)||_1."""
    return phi_value(tau, problem.f(x), l1_norm(problem.c(x)))


def _curvature(H, d):
    """max(d^T H d, 0) with an exact zero for nonpositive curvature."""
    d = np.asarray(d, dtype=np.float64)
    quad = float(d @ (np.asarray(H, dtype=np.float64) @ d))
    return quad if quad > 0.0 else 0.0


def delta_q_from_scalars(tau, gd, curvature, c_norm1):
    """Model reduction from precomputed g^T d and max(d^T H d, 0)."""
    return -tau * (gd + 0.5 * curvature) + c_norm1


def delta_q(tau, g, H, d, c_norm1):
    """Predicted merit reduction of the step d under parameter tau."""
    gd = float(np.asarray(g, dtype=np.float64) @ np.asarray(d, dtype=np.float64))
    return delta_q_from_scalars(tau, gd, _curvature(H, d), c_norm1)


def tau_trial_from_scalars(gd, curvature, c_norm1, sigma):
    """Trial penalty weight from precomputed scalars.

    Infinite when the directional terms do not fight the constraint
    reduction (denominator <= 0).  A zero ratio can only arise when
    c_norm1 is 0 against a rounding-level positive denominator, which
    in exact arithmetic is the denominator <= 0 case, so it also
    reports as Infinite; finite results are always positive.
    """
    denom = gd + curvature
    if denom <= 0.0:
        return INFINITE
    value = (1.0 - sigma) * c_norm1 / denom
    if value == 0.0:
        return INFINITE
    return value


def tau_trial(g, d, H, c_norm1, sigma):
    """Largest penalty weight keeping the model reduction above
    sigma * ||c||_1; Infinite when any weight does."""
    gd = float(np.asarray(g, dtype=np.float64) @ np.asarray(d, dtype=np.float64))
    return tau_trial_from_scalars(gd, _curvature(H, d), c_norm1, sigma)


def update_tau(state, trial, eps_tau):
    """Keep tau if it does not exceed the trial, else cut below it.

    Mutates state (tau and s_count) and returns (new_tau, decreased).
    NonPositiveTau flags an update that would zero out or flip the
    parameter (an eps_tau >= 1 misconfiguration or a nonpositive
    trial).
    """
    if state.tau <= trial:
        return state.tau, False
    new = (1.0 - eps_tau) * trial
    if new <= 0.0:
        raise NonPositiveTau("tau update produced %r" % (new,))
    state.tau = new
    state.s_count += 1
    return new, True


def xi_trial(delta_q_value, tau, d_norm_sq):
    """Ratio of model reduction to tau * ||d||^2."""
    if d_norm_sq == 0.0:
        raise DivisionByZero("xi trial needs a nonzero step")
    if tau <= 0.0:
        raise NonPositiveTau("xi trial needs tau > 0, got %r" % (tau,))
    return delta_q_value / (tau * d_norm_sq)


def update_xi(state, trial, eps_xi):
    """Keep xi if it does not exceed the trial, else cut below it.

    Mutates state (xi and r_count) and returns (new_xi, decreased).
    """
    if state.xi <= trial:
        return state.xi, False
    new = (1.0 - eps_xi) * trial
    if new <= 0.0:
        raise NonPositiveTau("xi update produced %r" % (new,))
    state.xi = new
    state.r_count += 1
    return new, True
