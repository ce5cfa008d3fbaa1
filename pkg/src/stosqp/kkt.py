"""Dense Newton-KKT block systems for equality-constrained steps.

Assembles [[H, J^T], [J, 0]], factors it once per iterate with the
symmetric-indefinite kernel, solves for (step, multiplier) pairs with
iterative refinement, and provides the tangential/normal step split
and the reduced-curvature check used by Hessian policies.
"""

import math
from dataclasses import dataclass

import numpy as np

from stosqp import backend
from stosqp.errors import DimensionMismatch, SingularSystem

# relative floor on factorization pivots before a system is declared
# singular (rank-deficient Jacobian or collapsed curvature)
PIVOT_RTOL = 1e-12
# relative tolerance for the symmetry check on H
SYMMETRY_RTOL = 1e-12
# relative floor on singular values when deciding Jacobian row rank
RANK_RTOL = 1e-10

DEFAULT_SOLVE_TOL = 1e-8


def _as_float_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch("%s must be a matrix, got ndim=%d" % (name, a.ndim))
    return a


def _as_float_vector(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionMismatch("%s must be a vector, got ndim=%d" % (name, a.ndim))
    return a


@dataclass(frozen=True)
class KktSystem:
    """One Newton-KKT system: Hessian model, constraint Jacobian, and
    the gradient / constraint-value right-hand side at the iterate."""

    H: np.ndarray
    J: np.ndarray
    g: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        H = _as_float_matrix(self.H, "H")
        J = _as_float_matrix(self.J, "J")
        g = _as_float_vector(self.g, "g")
        c = _as_float_vector(self.c, "c")
        n = H.shape[0]
        m = J.shape[0]
        if H.shape[1] != n:
            raise DimensionMismatch("H must be square, got %s" % (H.shape,))
        if J.shape[1] != n:
            raise DimensionMismatch("J has %d columns, expected %d" % (J.shape[1], n))
        if not 1 <= m <= n:
            raise DimensionMismatch("need 1 <= m <= n, got m=%d n=%d" % (m, n))
        if g.shape[0] != n:
            raise DimensionMismatch("g has length %d, expected %d" % (g.shape[0], n))
        if c.shape[0] != m:
            raise DimensionMismatch("c has length %d, expected %d" % (c.shape[0], m))
        scale = max(1.0, float(np.max(np.abs(H))))
        if float(np.max(np.abs(H - H.T))) > SYMMETRY_RTOL * scale:
            raise ValueError("H is not symmetric within tolerance")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "c", c)

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.J.shape[0]

    def validate_rank(self, rank_rtol=RANK_RTOL):
        """Raise SingularSystem unless J has full row rank."""
        s = np.linalg.svd(self.J, compute_uv=False)
        if s[-1] <= rank_rtol * s[0]:
            raise SingularSystem(
                "Jacobian is row rank deficient: sigma_min/sigma_max = %.3e"
                % (s[-1] / s[0] if s[0] > 0 else 0.0)
            )


@dataclass(frozen=True)
class KktSolution:
    """Primal step d, multiplier y, and the block-system residual
    (inf-norm of K @ (d; y) + (g; c))."""

    d: np.ndarray
    y: np.ndarray
    residual: float


@dataclass(frozen=True)
class StepDecomposition:
    """Split of a step into its null-space component u (J u = 0) and
    row-space component v = d - u."""

    u: np.ndarray
    v: np.ndarray


def assemble_kkt_matrix(H, J):
    """Dense [[H, J^T], [J, 0]] block matrix."""
    n = H.shape[0]
    m = J.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[n:, :n] = J
    K[:n, n:] = J.T
    return K


def _pivot_floor(lf, ipiv):
    """Smallest absolute eigenvalue over the factor's diagonal blocks."""
    n = lf.shape[0]
    floor = math.inf
    k = 0
    while k < n:
        if ipiv[k] > 0:
            floor = min(floor, abs(lf[k, k]))
            k += 1
        else:
            a = lf[k, k]
            b = lf[k + 1, k]
            c = lf[k + 1, k + 1]
            mid = 0.5 * (a + c)
            disc = math.hypot(0.5 * (a - c), b)
            floor = min(floor, abs(mid - disc), abs(mid + disc))
            k += 2
    return floor


class KktFactorization:
    """Factorization of one assembled KKT matrix, reusable across
    right-hand sides (the driver solves the sampled and the exact
    gradient systems against the same factor)."""

    def __init__(self, H, J, pivot_rtol=PIVOT_RTOL):
        self.n = H.shape[0]
        self.m = J.shape[0]
        self.matrix = assemble_kkt_matrix(H, J)
        lf, ipiv, info = backend.ldl_factor(self.matrix)
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        if info != 0 or _pivot_floor(lf, ipiv) <= pivot_rtol * scale:
            raise SingularSystem(
                "KKT factorization pivot below threshold "
                "(rank-deficient Jacobian or curvature failure)"
            )
        self._lf = lf
        self._ipiv = ipiv

    def solve(self, rhs, tol=DEFAULT_SOLVE_TOL, max_refine=2):
        """Solve K z = rhs; returns (z, residual_inf_norm).

        Applies iterative refinement while the residual exceeds tol;
        raises SingularSystem if refinement cannot reach it.
        """
        z = backend.ldl_solve(self._lf, self._ipiv, rhs)
        r = self.matrix @ z - rhs
        res = float(np.max(np.abs(r))) if r.size else 0.0
        for _ in range(max_refine):
            if res <= tol:
                break
            z = z - backend.ldl_solve(self._lf, self._ipiv, r)
            r = self.matrix @ z - rhs
            res = float(np.max(np.abs(r)))
        if res > tol:
            raise SingularSystem(
                "KKT solve residual %.3e exceeds tolerance %.3e" % (res, tol)
            )
        return z, res


def solve_kkt(system, tol=DEFAULT_SOLVE_TOL):
    """Solve [[H, J^T], [J, 0]] (d; y) = -(g; c).

    Returns a KktSolution whose residual is the inf-norm of
    K @ (d; y) + (g; c).  Raises SingularSystem when pivots collapse
    or the residual cannot be refined below tol.
    """
    fac = KktFactorization(system.H, system.J)
    rhs = -np.concatenate([system.g, system.c])
    z, res = fac.solve(rhs, tol)
    n = system.n
    return KktSolution(d=z[:n], y=z[n:], residual=res)


def decompose_step(d, J, tol=1e-10):
    """Split d into u + v with J u = 0 and v in the row space of J.

    v is the orthogonal projection of d onto range(J^T), computed from
    an orthogonal factorization of J^T.  Raises SingularSystem when J
    is row rank deficient.  The returned parts satisfy
    ||J u||_inf <= tol * max(1, ||J||_inf ||d||_inf).
    """
    d = _as_float_vector(d, "d")
    J = _as_float_matrix(J, "J")
    if J.shape[1] != d.shape[0]:
        raise DimensionMismatch(
            "J has %d columns but d has length %d" % (J.shape[1], d.shape[0])
        )
    q, r = np.linalg.qr(J.T)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or np.min(diag) <= RANK_RTOL * np.max(diag):
        raise SingularSystem("Jacobian is row rank deficient")
    v = q @ (q.T @ d)
    u = d - v
    scale = max(1.0, float(np.max(np.abs(J))) * float(np.max(np.abs(d), initial=0.0)))
    if float(np.max(np.abs(J @ u))) > tol * scale:
        raise SingularSystem("step decomposition residual exceeds tolerance")
    return StepDecomposition(u=u, v=v)


def nullspace_basis(J):
    """Orthonormal basis of the null space of J (columns; may be empty)."""
    J = _as_float_matrix(J, "J")
    m, n = J.shape
    if m > n:
        raise DimensionMismatch("J has more rows than columns")
    q = np.linalg.qr(J.T, mode="complete")[0]
    return q[:, m:]


def check_reduced_curvature(H, J, zeta):
    """True iff the Hessian model has eigenvalues >= zeta on null(J).

    Computed from an orthonormal null-space basis; the verdict is
    basis independent because the reduced matrix's spectrum is.
    Vacuously true when the null space is trivial (m = n).
    """
    H = _as_float_matrix(H, "H")
    J = _as_float_matrix(J, "J")
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatch("H must be square, got %s" % (H.shape,))
    if J.shape[1] != H.shape[0]:
        raise DimensionMismatch(
            "J has %d columns, expected %d" % (J.shape[1], H.shape[0])
        )
    Z = nullspace_basis(J)
    if Z.shape[1] == 0:
        return True
    red = Z.T @ H @ Z
    red = 0.5 * (red + red.T)
    eigs = np.linalg.eigvalsh(red)
    return bool(eigs[0] >= zeta)
