"""Newton-KKT block solves, step decomposition, reduced curvature."""

import numpy as np
import pytest

from stosqp import (
    DimensionMismatch,
    KktSystem,
    SingularSystem,
    assemble_kkt_matrix,
    check_reduced_curvature,
    decompose_step,
    nullspace_basis,
    solve_kkt,
)
from stosqp.kkt import KktFactorization


def _random_instance(rng, definite=True):
    n = int(rng.integers(2, 51))
    m = int(rng.integers(1, n + 1))
    if definite:
        a = rng.normal(size=(n, n))
        H = a @ a.T + 0.5 * np.eye(n)
    else:
        # indefinite but positive on null(J) after the diagonal shift
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        eig = rng.uniform(0.5, 2.0, size=n)
        H = (q * eig) @ q.T
        H = 0.5 * (H + H.T)
    J = rng.normal(size=(m, n))
    g = rng.normal(size=n)
    c = rng.normal(size=m)
    return KktSystem(H=H, J=J, g=g, c=c)


def test_solve_hand_examples():
    H = np.eye(2)
    J = np.array([[1.0, 0.0]])

    sol = solve_kkt(KktSystem(H=H, J=J, g=np.zeros(2), c=np.zeros(1)))
    assert np.array_equal(sol.d, np.zeros(2))
    assert np.array_equal(sol.y, np.zeros(1))

    sol = solve_kkt(KktSystem(H=H, J=J, g=np.array([1.0, 1.0]), c=np.zeros(1)))
    assert np.allclose(sol.d, [0.0, -1.0], atol=1e-14)
    assert np.allclose(sol.y, [-1.0], atol=1e-14)

    sol = solve_kkt(KktSystem(H=H, J=J, g=np.array([1.0, 1.0]), c=np.array([1.0])))
    assert np.allclose(sol.d, [-1.0, -1.0], atol=1e-14)
    assert np.allclose(sol.y, [0.0], atol=1e-14)


def test_solve_random_residuals():
    rng = np.random.default_rng(0)
    for trial in range(60):
        sys_ = _random_instance(rng, definite=bool(trial % 2))
        sol = solve_kkt(sys_)
        K = assemble_kkt_matrix(sys_.H, sys_.J)
        z = np.concatenate([sol.d, sol.y])
        rhs = np.concatenate([sys_.g, sys_.c])
        assert sol.residual <= 1e-10
        assert np.max(np.abs(K @ z + rhs)) <= 1e-10


def test_solution_first_block_is_stationarity():
    # H d + J^T y = -g row by row
    rng = np.random.default_rng(4)
    sys_ = _random_instance(rng)
    sol = solve_kkt(sys_)
    r = sys_.H @ sol.d + sys_.J.T @ sol.y + sys_.g
    assert np.max(np.abs(r)) <= 1e-10
    assert np.max(np.abs(sys_.J @ sol.d + sys_.c)) <= 1e-10


def test_factorization_reuse_multiple_rhs():
    rng = np.random.default_rng(8)
    n, m = 12, 4
    a = rng.normal(size=(n, n))
    H = a @ a.T + np.eye(n)
    J = rng.normal(size=(m, n))
    fac = KktFactorization(H, J)
    K = assemble_kkt_matrix(H, J)
    rhs = rng.normal(size=(n + m, 7))
    z, res = fac.solve(rhs)
    assert res <= 1e-10
    assert np.max(np.abs(K @ z - rhs)) <= 1e-9


def test_singular_jacobian_raises():
    H = np.eye(3)
    J = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    sys_ = KktSystem(H=H, J=J, g=np.zeros(3), c=np.zeros(2))
    with pytest.raises(SingularSystem):
        sys_.validate_rank()
    with pytest.raises(SingularSystem):
        solve_kkt(sys_)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        KktSystem(H=np.eye(2), J=np.ones((1, 3)), g=np.zeros(2), c=np.zeros(1))
    with pytest.raises(DimensionMismatch):
        KktSystem(H=np.eye(2), J=np.ones((3, 2)), g=np.zeros(2), c=np.zeros(3))
    with pytest.raises(DimensionMismatch):
        KktSystem(H=np.eye(2), J=np.ones((1, 2)), g=np.zeros(3), c=np.zeros(1))
    with pytest.raises(ValueError):
        KktSystem(
            H=np.array([[1.0, 2.0], [0.0, 1.0]]),
            J=np.ones((1, 2)),
            g=np.zeros(2),
            c=np.zeros(1),
        )


def test_decompose_hand_examples():
    dec = decompose_step(np.array([2.0, 3.0]), np.array([[1.0, 0.0]]))
    assert np.allclose(dec.v, [2.0, 0.0], atol=1e-14)
    assert np.allclose(dec.u, [0.0, 3.0], atol=1e-14)

    s = 1.0 / np.sqrt(2.0)
    dec = decompose_step(np.array([1.0, 0.0]), np.array([[s, s]]))
    assert np.allclose(dec.v, [0.5, 0.5], atol=1e-12)
    assert np.allclose(dec.u, [0.5, -0.5], atol=1e-12)

    dec = decompose_step(np.zeros(4), np.ones((1, 4)))
    assert np.array_equal(dec.u, np.zeros(4))
    assert np.array_equal(dec.v, np.zeros(4))


def test_decompose_random_invariants():
    rng = np.random.default_rng(13)
    for _ in range(40):
        n = int(rng.integers(2, 40))
        m = int(rng.integers(1, n))
        J = rng.normal(size=(m, n))
        d = rng.normal(size=n)
        dec = decompose_step(d, J)
        dscale = max(1.0, float(np.max(np.abs(d))))
        assert np.max(np.abs(dec.u + dec.v - d)) <= 1e-10 * dscale
        assert np.max(np.abs(J @ dec.u)) <= 1e-10 * max(
            1.0, np.max(np.abs(J)) * dscale
        )
        assert abs(dec.u @ dec.v) <= 1e-10 * max(1.0, d @ d)
        # v lies in range(J^T): projecting it once more changes nothing
        coef, *_ = np.linalg.lstsq(J.T, dec.v, rcond=None)
        assert np.max(np.abs(J.T @ coef - dec.v)) <= 1e-8 * dscale


def test_decompose_of_kkt_step_feasible_case():
    # with c = 0 the step solves J d = 0, so its row-space part vanishes
    rng = np.random.default_rng(17)
    n, m = 10, 3
    a = rng.normal(size=(n, n))
    sys_ = KktSystem(
        H=a @ a.T + np.eye(n),
        J=rng.normal(size=(m, n)),
        g=rng.normal(size=n),
        c=np.zeros(m),
    )
    sol = solve_kkt(sys_)
    dec = decompose_step(sol.d, sys_.J)
    assert np.max(np.abs(dec.v)) <= 1e-9 * max(1.0, np.max(np.abs(sol.d)))


def test_decompose_rank_deficient_raises():
    J = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(SingularSystem):
        decompose_step(np.ones(3), J)


def test_nullspace_basis_properties():
    rng = np.random.default_rng(29)
    for _ in range(20):
        n = int(rng.integers(2, 25))
        m = int(rng.integers(1, n + 1))
        J = rng.normal(size=(m, n))
        Z = nullspace_basis(J)
        assert Z.shape == (n, n - m)
        if n > m:
            assert np.max(np.abs(J @ Z)) <= 1e-10 * max(1.0, np.max(np.abs(J)))
            assert np.max(np.abs(Z.T @ Z - np.eye(n - m))) <= 1e-12


def test_reduced_curvature_examples():
    J = np.array([[1.0, 0.0]])
    assert check_reduced_curvature(np.eye(2), J, 0.5) is True
    assert check_reduced_curvature(np.diag([1.0, -1.0]), J, 0.1) is False
    # square Jacobian: null space trivial, vacuously true
    assert check_reduced_curvature(np.diag([-5.0, -5.0]), np.eye(2), 1.0) is True


def test_reduced_curvature_matches_direct_spectrum():
    rng = np.random.default_rng(31)
    for _ in range(20):
        n = int(rng.integers(3, 20))
        m = int(rng.integers(1, n))
        J = rng.normal(size=(m, n))
        H = rng.normal(size=(n, n))
        H = 0.5 * (H + H.T)
        zeta = float(rng.uniform(0.05, 1.0))
        # reference basis from the SVD rather than the QR used inside
        _, _, vt = np.linalg.svd(J)
        Z = vt[m:].T
        lam = np.linalg.eigvalsh(Z.T @ H @ Z)[0]
        if abs(lam - zeta) < 1e-9:
            continue
        assert check_reduced_curvature(H, J, zeta) is bool(lam >= zeta)


def test_assemble_kkt_matrix_blocks():
    H = np.arange(9.0).reshape(3, 3)
    H = 0.5 * (H + H.T)
    J = np.arange(6.0).reshape(2, 3)
    K = assemble_kkt_matrix(H, J)
    assert K.shape == (5, 5)
    assert np.array_equal(K[:3, :3], H)
    assert np.array_equal(K[3:, :3], J)
    assert np.array_equal(K[:3, 3:], J.T)
    assert np.array_equal(K[3:, 3:], np.zeros((2, 2)))
