"""Solver kernels checked against brute-force oracles."""

import itertools

import numpy as np
import pytest

from bcsradar.numerics import (
    LinearProgramError,
    least_squares,
    eig_sym,
    solve_lp,
    solve_qp,
)


# ---------------------------------------------------------------- oracles
def lp_vertex_oracle(c, A, b):
    """Enumerate basic feasible solutions of min c'x, Ax=b, x>=0."""
    m, n = A.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if xb.min() < -1e-10:
            continue
        x = np.zeros(n)
        x[list(cols)] = xb
        val = c @ x
        if best is None or val < best[0]:
            best = (val, x)
    return best


def qp_active_set_oracle(Q, A, b, lb):
    """Enumerate active bound patterns of min x'Qx, Ax=b, x>=lb."""
    n = Q.shape[0]
    m = A.shape[0]
    P = Q + Q.T
    best = None
    for pattern in itertools.product([False, True], repeat=n):
        act = np.array(pattern)
        free = ~act
        nf = int(free.sum())
        # KKT on free coords with x_act = lb_act
        K = np.zeros((nf + m, nf + m))
        K[:nf, :nf] = P[np.ix_(free, free)]
        K[:nf, nf:] = -A[:, free].T
        K[nf:, :nf] = A[:, free]
        rhs = np.concatenate(
            [-P[np.ix_(free, act)] @ lb[act], b - A[:, act] @ lb[act]]
        )
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            continue
        x = np.where(act, lb, 0.0)
        x[free] = sol[:nf]
        if x.min() < lb.min() - 1e-9 or np.any(x[free] < lb[free] - 1e-9):
            continue
        if np.linalg.norm(A @ x - b) > 1e-8:
            continue
        val = x @ Q @ x
        if best is None or val < best[0] - 1e-12:
            best = (val, x)
    return best


# ---------------------------------------------------------- least squares
def test_lstsq_square_nonsingular():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    b = rng.standard_normal(6)
    x, rep = least_squares(A, b)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-10)
    assert rep.ok and not rep.rank_deficient


def test_lstsq_tall_in_range():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((12, 4)) + 1j * rng.standard_normal((12, 4))
    xtrue = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x, rep = least_squares(A, A @ xtrue)
    assert np.allclose(x, xtrue, atol=1e-10)
    assert rep.primal_residual < 1e-10


def test_lstsq_matches_normal_equations():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((20, 5))
    b = rng.standard_normal(20)
    x, _ = least_squares(A, b)
    x_ne = np.linalg.inv(A.T @ A) @ (A.T @ b)
    assert np.allclose(x, x_ne, atol=1e-8)


def test_lstsq_orthogonality_contract():
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.standard_normal((15, 6)) + 1j * rng.standard_normal((15, 6))
        b = rng.standard_normal(15) + 1j * rng.standard_normal(15)
        x, rep = least_squares(A, b)
        bound = 1e-8 * np.linalg.norm(A) * np.linalg.norm(b)
        assert rep.dual_residual <= bound


def test_lstsq_rank_deficient_min_norm():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    b = np.array([1.0, 2.0])
    x, rep = least_squares(A, b)
    assert rep.rank_deficient
    # minimum-norm solution of the consistent singular system
    assert np.allclose(x, [0.5, 0.5], atol=1e-10)


# ------------------------------------------------------------------ eigen
def test_eig_sym_diag():
    w, V = eig_sym(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [3.0, 2.0, 1.0])
    assert np.allclose(np.abs(V), np.eye(3)[:, [0, 2, 1]], atol=1e-12)


def test_eig_sym_identity():
    w, V = eig_sym(np.eye(5))
    assert np.allclose(w, 1.0)
    assert np.allclose(V.T @ V, np.eye(5), atol=1e-9)


def test_eig_sym_reconstruction():
    rng = np.random.default_rng(4)
    for _ in range(10):
        B = rng.standard_normal((8, 8))
        S = B + B.T
        w, V = eig_sym(S)
        assert np.all(np.diff(w) <= 1e-12)
        assert np.linalg.norm(V @ np.diag(w) @ V.T - S) < 1e-8
        assert np.linalg.norm(V.T @ V - np.eye(8)) < 1e-9


def test_eig_sym_rejects_asymmetric():
    with pytest.raises(ValueError):
        eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))


# --------------------------------------------------------------------- LP
def test_lp_trivial():
    x, rep = solve_lp(np.array([1.0, 0.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
    assert rep.ok
    assert np.allclose(x, [0.0, 1.0], atol=1e-7)
    assert abs(rep.objective) < 1e-7


def test_lp_equality_determined():
    A = np.eye(2)
    b = np.array([1.0, 2.0])
    for c in (np.array([5.0, -3.0]), np.array([0.0, 1.0])):
        x, rep = solve_lp(c, A, b)
        assert rep.ok
        assert np.allclose(x, b, atol=1e-7)


def test_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(5)
    for trial in range(30):
        m, n = 3, rng.integers(4, 9)
        A = rng.standard_normal((m, n))
        x_feas = rng.uniform(0.5, 1.5, n)
        b = A @ x_feas  # feasible by construction
        c = rng.standard_normal(n)
        oracle = lp_vertex_oracle(c, A, b)
        if oracle is None:
            continue
        # skip unbounded instances: oracle only sees vertices
        ray = np.linalg.lstsq(A, np.zeros(m), rcond=None)[0]
        try:
            x, rep = solve_lp(c, A, b)
        except LinearProgramError:
            continue
        if rep.status == "unbounded":
            continue
        if not rep.ok:
            continue
        if rep.objective < oracle[0] - 1e-6:
            continue  # unbounded below along the recession cone
        assert abs(rep.objective - oracle[0]) <= 1e-8 * (1 + abs(oracle[0]))


def test_lp_feasibility_tolerance():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((4, 10))
    b = A @ rng.uniform(0.1, 1.0, 10)
    c = rng.uniform(0.0, 1.0, 10)
    x, rep = solve_lp(c, A, b)
    assert rep.ok
    assert np.linalg.norm(A @ x - b) <= 1e-6 * (1 + np.linalg.norm(b))
    assert x.min() >= -1e-12


def test_lp_rank_deficient_consistent():
    # duplicated constraint rows must not break the solve
    A = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    b = np.array([1.0, 1.0, 1.0])
    c = np.array([1.0, 2.0, 0.5])
    x, rep = solve_lp(c, A, b)
    assert rep.ok
    assert np.linalg.norm(A @ x - b) < 1e-7


def test_lp_infeasible_raises():
    # x1 + x2 = -1 has no nonnegative solution
    with pytest.raises(LinearProgramError):
        solve_lp(np.array([1.0, 1.0]), np.array([[1.0, 1.0]]), np.array([-1.0]))


# --------------------------------------------------------------------- QP
def test_qp_equality_only():
    x, rep = solve_qp(np.eye(2), np.array([[1.0, 1.0]]), np.array([2.0]))
    assert rep.ok
    assert np.allclose(x, [1.0, 1.0], atol=1e-8)


def test_qp_bound_active():
    x, rep = solve_qp(np.array([[1.0]]), None, None, np.array([1.0]))
    assert rep.ok
    assert np.allclose(x, [1.0], atol=1e-8)
    assert abs(rep.objective - 1.0) < 1e-8


def test_qp_matches_active_set_enumeration():
    rng = np.random.default_rng(7)
    for trial in range(25):
        n = 4
        B = rng.standard_normal((n, n))
        Q = B.T @ B + 0.1 * np.eye(n)
        A = rng.standard_normal((1, n))
        lb = rng.uniform(-1.0, 0.5, n)
        x_feas = lb + rng.uniform(0.2, 1.0, n)
        b = A @ x_feas
        oracle = qp_active_set_oracle(Q, A, b, lb)
        assert oracle is not None
        x, rep = solve_qp(Q, A, b, lb)
        assert rep.ok
        assert abs(rep.objective - oracle[0]) <= 1e-8 + 1e-8 * abs(oracle[0])
        assert np.all(x >= lb - 1e-9)


def test_qp_kkt_residuals():
    rng = np.random.default_rng(8)
    n = 6
    B = rng.standard_normal((n, n))
    Q = B.T @ B
    A = rng.standard_normal((2, n))
    lb = np.zeros(n)
    b = A @ rng.uniform(0.5, 1.0, n)
    x, rep = solve_qp(Q, A, b, lb)
    assert rep.ok
    # independent KKT check: stationarity with recovered multipliers
    z = rep.extras["bound_dual"]
    y = rep.extras["dual"]
    grad = (Q + Q.T) @ x - A.T @ y - z
    scale = 1 + np.abs(Q).max()
    assert np.linalg.norm(grad) <= 1e-6 * scale
    assert np.linalg.norm(A @ x - b) <= 1e-6 * (1 + np.linalg.norm(b))
    assert np.all(z >= -1e-9)
    assert abs(np.dot(x - 0.0, z)) <= 1e-6 * scale  # complementarity at lb=0


def test_qp_deterministic():
    rng = np.random.default_rng(9)
    Q = np.eye(3)
    A = rng.standard_normal((1, 3))
    b = np.array([1.0])
    x1, _ = solve_qp(Q, A, b, np.zeros(3))
    x2, _ = solve_qp(Q, A, b, np.zeros(3))
    assert np.array_equal(x1, x2)
