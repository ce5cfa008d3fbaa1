"""Equality-constrained test problems and stochastic gradient models.

Each problem bundles smooth oracles (objective, gradient, constraints,
Jacobian, optionally Hessian and finite-sum component gradients) with
the smoothness constants the stepsize rule consumes: L bounds the
gradient's Lipschitz constant and Gamma the aggregate second-order
constant of the constraint vector, both valid on the documented box
when one is declared.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from stosqp.errors import (
    DimensionMismatch,
    InvalidConstant,
    InvalidDimension,
    InvalidRange,
)


@dataclass
class Problem:
    n: int
    m: int
    f: Callable
    grad_f: Callable
    c: Callable
    jac_c: Callable
    L: float
    Gamma: float
    x0: np.ndarray
    f_low: Optional[float] = None
    hess_f: Optional[Callable] = None
    name: str = ""
    box_radius: Optional[float] = None
    solution: Optional[tuple] = None
    n_components: Optional[int] = None
    component_grad_mean: Optional[Callable] = None
    component_sq_mean: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise InvalidDimension(
                "need 1 <= m <= n, got m=%d n=%d" % (self.m, self.n)
            )
        if self.L <= 0.0:
            raise InvalidConstant("L must be positive, got %r" % (self.L,))
        if self.Gamma < 0.0:
            raise InvalidConstant("Gamma must be >= 0, got %r" % (self.Gamma,))
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        if self.x0.shape != (self.n,):
            raise DimensionMismatch("x0 must have shape (%d,)" % self.n)

    def minibatch_variance(self, batch):
        """Exact E||G - grad_f||^2 for a without-replacement batch."""
        if self.n_components is None or self.component_sq_mean is None:
            raise InvalidConstant("problem has no finite-sum components")
        N = self.n_components
        if not 1 <= batch <= N:
            raise InvalidRange("batch must lie in [1, %d], got %r" % (N, batch))
        if batch == N:
            return 0.0
        return (N - batch) / (batch * (N - 1)) * self.component_sq_mean


_NOISE_KINDS = ("none", "gaussian", "symmetric_bounded", "minibatch")


@dataclass(frozen=True)
class NoiseModel:
    """Gradient noise description.

    kinds: "none" (exact gradients), "gaussian" (isotropic with
    E||G - grad f||^2 = variance_bound), "symmetric_bounded" (uniform
    on a ball, E||G - grad f||^2 <= variance_bound and support inside
    radius), "minibatch" (without-replacement mean of finite-sum
    component gradients).
    """

    kind: str
    variance_bound: float = 0.0
    radius: float = 0.0
    n_components: int = 0
    batch: int = 0

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise InvalidConstant("unknown noise kind %r" % (self.kind,))
        if self.kind in ("gaussian", "symmetric_bounded"):
            if self.variance_bound <= 0.0:
                raise InvalidConstant(
                    "variance_bound must be positive, got %r" % (self.variance_bound,)
                )
        if self.kind == "symmetric_bounded" and self.radius <= 0.0:
            raise InvalidConstant("radius must be positive, got %r" % (self.radius,))
        if self.kind == "minibatch":
            if self.n_components < 1:
                raise InvalidConstant(
                    "n_components must be >= 1, got %r" % (self.n_components,)
                )
            if not 1 <= self.batch <= self.n_components:
                raise InvalidRange(
                    "batch must lie in [1, %d], got %r"
                    % (self.n_components, self.batch)
                )

    @classmethod
    def none(cls):
        return cls(kind="none")

    @classmethod
    def gaussian(cls, variance_bound):
        return cls(kind="gaussian", variance_bound=float(variance_bound))

    @classmethod
    def symmetric_bounded(cls, variance_bound, radius):
        return cls(
            kind="symmetric_bounded",
            variance_bound=float(variance_bound),
            radius=float(radius),
        )

    @classmethod
    def minibatch(cls, n_components, batch):
        return cls(kind="minibatch", n_components=int(n_components), batch=int(batch))

    def effective_radius(self, n):
        """Ball radius for "symmetric_bounded": the declared radius,
        shrunk if needed so the variance bound holds with the uniform
        ball's exact second moment n/(n+2) * r^2."""
        if self.kind != "symmetric_bounded":
            raise InvalidConstant("effective_radius applies to symmetric_bounded")
        return min(self.radius, math.sqrt(self.variance_bound * (n + 2.0) / n))

    def sample_deviations(self, n, rng, count=None):
        """Draw G - grad_f deviations of dimension n.

        Returns shape (n,) when count is None, else (count, n).
        "minibatch" has no problem-free deviation law; use
        sample_gradient for it.
        """
        size = (n,) if count is None else (count, n)
        if self.kind == "none":
            return np.zeros(size)
        if self.kind == "gaussian":
            return rng.normal(0.0, math.sqrt(self.variance_bound / n), size)
        if self.kind == "symmetric_bounded":
            r_eff = self.effective_radius(n)
            z = rng.normal(0.0, 1.0, size)
            norms = np.linalg.norm(z, axis=-1, keepdims=count is not None)
            radii = r_eff * rng.uniform(0.0, 1.0, size=None if count is None else (count, 1)) ** (1.0 / n)
            return z / norms * radii
        raise InvalidConstant("minibatch deviations need problem component data")


def sample_gradient(problem, noise, x, rng):
    """One stochastic gradient draw at x under the given noise model.

    kind "none" and full-batch "minibatch" return the exact gradient
    without consuming randomness.
    """
    if noise.kind == "none":
        return np.asarray(problem.grad_f(x), dtype=np.float64)
    if noise.kind == "minibatch":
        if problem.n_components is None or problem.component_grad_mean is None:
            raise InvalidConstant("problem has no finite-sum components")
        if problem.n_components != noise.n_components:
            raise DimensionMismatch(
                "noise declares %d components, problem has %d"
                % (noise.n_components, problem.n_components)
            )
        if noise.batch == noise.n_components:
            return np.asarray(problem.grad_f(x), dtype=np.float64)
        idx = rng.choice(noise.n_components, size=noise.batch, replace=False)
        return np.asarray(problem.component_grad_mean(x, idx), dtype=np.float64)
    dev = noise.sample_deviations(problem.n, rng)
    return np.asarray(problem.grad_f(x), dtype=np.float64) + dev


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def make_quadratic(n, m, seed, q=None, b=None, n_components=None, component_spread=1.0):
    """Strongly convex quadratic objective with linear constraints.

    f(x) = 0.5 x^T Q x + q^T x with Q built from a known eigensystem
    (eigenvalues in [1, 4], so L = ||Q||_2 is exact and Gamma = 0),
    constraints A x = b with well-conditioned full-row-rank A.  The
    exact KKT point is solved once and stored on the problem.  Passing
    q and b overrides the random linear terms (q = b = 0 puts the
    solution at the origin with zero multiplier).  n_components > 0
    attaches finite-sum component gradients Q x + q + r_i with
    mean-zero shifts r_i for minibatch noise.
    """
    if not 1 <= m < n:
        raise InvalidDimension("need 1 <= m < n, got m=%d n=%d" % (m, n))
    rng = np.random.default_rng(seed)
    eigs = rng.uniform(1.0, 4.0, n)
    V = _random_orthogonal(rng, n)
    Q = (V * eigs) @ V.T
    Q = 0.5 * (Q + Q.T)
    L = float(np.max(eigs))
    q_vec = rng.normal(size=n) if q is None else np.asarray(q, dtype=np.float64)
    if q_vec.shape != (n,):
        raise DimensionMismatch("q must have shape (%d,)" % n)

    sa = rng.uniform(1.0, 2.0, m)
    Vt = _random_orthogonal(rng, n)[:m, :]
    A = sa[:, None] * Vt
    b_vec = A @ rng.normal(size=n) if b is None else np.asarray(b, dtype=np.float64)
    if b_vec.shape != (m,):
        raise DimensionMismatch("b must have shape (%d,)" % m)
    x0 = rng.normal(size=n)

    K = np.zeros((n + m, n + m))
    K[:n, :n] = Q
    K[n:, :n] = A
    K[:n, n:] = A.T
    sol = np.linalg.solve(K, np.concatenate([-q_vec, b_vec]))
    x_star, y_star = sol[:n], sol[n:]

    f_low = float(-0.5 * q_vec @ np.linalg.solve(Q, q_vec))

    prob = Problem(
        n=n,
        m=m,
        f=lambda x: float(0.5 * x @ (Q @ x) + q_vec @ x),
        grad_f=lambda x: Q @ x + q_vec,
        c=lambda x: A @ x - b_vec,
        jac_c=lambda x: A,
        L=L,
        Gamma=0.0,
        x0=x0,
        f_low=f_low,
        hess_f=lambda x: Q,
        name="quadratic(n=%d,m=%d,seed=%d)" % (n, m, seed),
        solution=(x_star, y_star),
    )
    if n_components is not None:
        N = int(n_components)
        if N < 1:
            raise InvalidDimension("n_components must be >= 1, got %r" % (N,))
        shifts = rng.normal(0.0, component_spread, (N, n))
        shifts -= shifts.mean(axis=0)
        prob.n_components = N
        prob.component_grad_mean = lambda x, idx: Q @ x + q_vec + shifts[idx].mean(axis=0)
        prob.component_sq_mean = float(np.mean(np.sum(shifts**2, axis=1)))
    return prob


def make_rosenbrock_sphere():
    """Rosenbrock objective constrained to the unit circle.

    L = 3902 bounds the objective Hessian norm on the documented box
    ||x||_inf <= 1.5 (row-sum bound 1200*1.5^2 + 400*1.5 + 2 + 400*1.5);
    the constraint Hessian is 2 I, so Gamma = 2.  f >= 0 everywhere,
    so f_low = 0.
    """

    def f(x):
        return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)

    def grad_f(x):
        return np.array(
            [
                -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]),
                200.0 * (x[1] - x[0] ** 2),
            ]
        )

    def hess_f(x):
        return np.array(
            [
                [1200.0 * x[0] ** 2 - 400.0 * x[1] + 2.0, -400.0 * x[0]],
                [-400.0 * x[0], 200.0],
            ]
        )

    return Problem(
        n=2,
        m=1,
        f=f,
        grad_f=grad_f,
        c=lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 1.0]),
        jac_c=lambda x: np.array([[2.0 * x[0], 2.0 * x[1]]]),
        L=3902.0,
        Gamma=2.0,
        x0=np.array([0.5, 0.5]),
        f_low=0.0,
        hess_f=hess_f,
        name="rosenbrock-sphere",
        box_radius=1.5,
    )


def make_random_licq(n, m, seed):
    """Random smooth problem with a globally full-rank Jacobian.

    Strongly convex quadratic core plus small trigonometric terms:
    f(x) = 0.5 x^T Q x + q^T x + rho_f * sum(cos(x_i)) with Q
    eigenvalues in [1, 3], so L = ||Q||_2 + rho_f is exact;
    c_j(x) = a_j^T x - b_j + rho_c * sin(v_j^T x) with unit v_j, so
    each row of the Jacobian sits within rho_c of the constant full
    -rank matrix A (singular values >= 1) and Gamma = m * rho_c.  A
    feasible point is built in, so the constraints are consistent.
    """
    if not 1 <= m < n:
        raise InvalidDimension("need 1 <= m < n, got m=%d n=%d" % (m, n))
    rng = np.random.default_rng(seed)
    rho_f = 0.1
    rho_c = 0.05

    eigs = rng.uniform(1.0, 3.0, n)
    V = _random_orthogonal(rng, n)
    Q = (V * eigs) @ V.T
    Q = 0.5 * (Q + Q.T)
    q_vec = 0.5 * rng.normal(size=n)
    L = float(np.max(eigs)) + rho_f

    sa = rng.uniform(1.0, 2.0, m)
    Vt = _random_orthogonal(rng, n)[:m, :]
    A = sa[:, None] * Vt
    Vdir = rng.normal(size=(m, n))
    Vdir /= np.linalg.norm(Vdir, axis=1, keepdims=True)

    x_feas = 0.5 * rng.normal(size=n)
    b_vec = A @ x_feas + rho_c * np.sin(Vdir @ x_feas)
    x0 = x_feas + 0.5 * rng.normal(size=n)

    def f(x):
        return float(0.5 * x @ (Q @ x) + q_vec @ x + rho_f * np.sum(np.cos(x)))

    def grad_f(x):
        return Q @ x + q_vec - rho_f * np.sin(x)

    def hess_f(x):
        return Q - rho_f * np.diag(np.cos(x))

    def c(x):
        return A @ x - b_vec + rho_c * np.sin(Vdir @ x)

    def jac_c(x):
        return A + rho_c * np.cos(Vdir @ x)[:, None] * Vdir

    # f(x) >= 0.5 ||x||^2 - ||q|| ||x|| - rho_f n >= -0.5 ||q||^2 - rho_f n
    f_low = float(-0.5 * q_vec @ q_vec - rho_f * n - 1.0)

    return Problem(
        n=n,
        m=m,
        f=f,
        grad_f=grad_f,
        c=c,
        jac_c=jac_c,
        L=L,
        Gamma=m * rho_c,
        x0=x0,
        f_low=f_low,
        hess_f=hess_f,
        name="random-licq(n=%d,m=%d,seed=%d)" % (n, m, seed),
    )
