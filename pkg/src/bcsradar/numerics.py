"""Dense numerical kernels: least squares, symmetric eigen, LP and QP solvers.

The LP and QP solvers are primal-dual interior-point methods written for the
small, dense problems this package produces (a few thousand variables at
most). Tolerances are part of the public contract:

* ``least_squares``: residual orthogonality ``||A^H (b - A x)|| <= 1e-8 ||A|| ||b||``.
* ``eig_sym``: ``S v = w v`` within ``1e-8 ||S||``, eigenvalues descending.
* ``solve_lp``: primal feasibility ``<= 1e-6 (1 + ||b||)``, relative duality
  gap ``<= 1e-6`` (normally far tighter).
* ``solve_qp``: scaled KKT residuals ``<= 1e-6``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MAX_ITER = 200


@dataclass
class SolverReport:
    """Outcome of a solver call."""

    status: str  # "optimal" | "max_iter" | "infeasible" | "unbounded"
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    rank_deficient: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def least_squares(A: np.ndarray, b: np.ndarray):
    """Minimum-norm least-squares solution of ``A x ~ b``.

    Works for real or complex systems. Rank deficiency is flagged in the
    report, never fatal.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    resid = b - A @ x
    orth = float(np.linalg.norm(A.conj().T @ resid))
    report = SolverReport(
        status="optimal",
        iterations=1,
        primal_residual=float(np.linalg.norm(resid)),
        dual_residual=orth,
        objective=float(np.linalg.norm(resid)),
        rank_deficient=rank < min(A.shape),
    )
    return x, report


def eig_sym(S: np.ndarray):
    """Eigendecomposition of a (nearly) symmetric real matrix.

    Returns ``(w, V)`` with eigenvalues sorted descending and orthonormal
    eigenvectors as columns of ``V``. The input is symmetrized first; the
    asymmetry must be below ``1e-9 * ||S||``.
    """
    S = np.asarray(S, dtype=float)
    scale = max(1.0, float(np.abs(S).max()))
    asym = float(np.abs(S - S.T).max())
    if asym > 1e-9 * scale:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3e})")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def _chol_solve(M: np.ndarray, rhs: np.ndarray, base_reg: float):
    """Cholesky solve with escalating diagonal regularization."""
    reg = base_reg
    for _ in range(12):
        try:
            cf = np.linalg.cholesky(M + reg * np.eye(M.shape[0]))
            y = np.linalg.solve(cf, rhs)
            return np.linalg.solve(cf.T, y)
        except np.linalg.LinAlgError:
            reg = max(reg * 100.0, 1e-14)
    # last resort: least squares on the regularized system
    return np.linalg.lstsq(M + reg * np.eye(M.shape[0]), rhs, rcond=None)[0]


def solve_lp(c: np.ndarray, Aeq: np.ndarray, beq: np.ndarray, tol: float = 1e-9):
    """Solve ``min c^T x  s.t.  Aeq x = beq, x >= 0``.

    Mehrotra predictor-corrector interior-point method on the dense normal
    equations. Handles rank-deficient (consistent) equality constraints via
    diagonal regularization.
    """
    c = np.asarray(c, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(Aeq, dtype=float))
    b = np.asarray(beq, dtype=float).ravel()
    m, n = A.shape
    if c.size != n or b.size != m:
        raise ValueError("inconsistent LP dimensions")

    scale_b = 1.0 + float(np.linalg.norm(b))
    scale_c = 1.0 + float(np.linalg.norm(c))
    reg = 1e-12 * max(1.0, float(np.abs(A).max()) ** 2)

    # Mehrotra starting point
    AAt = A @ A.T
    x = A.T @ _chol_solve(AAt, b, reg)
    y = _chol_solve(AAt, A @ c, reg)
    s = c - A.T @ y
    dx = max(-1.5 * x.min(initial=0.0), 0.0)
    ds = max(-1.5 * s.min(initial=0.0), 0.0)
    x = x + dx
    s = s + ds
    xs = float(x @ s)
    if xs <= 0:
        x = np.ones(n)
        s = np.ones(n)
    else:
        x = x + 0.5 * xs / max(s.sum(), 1e-12)
        s = s + 0.5 * xs / max(x.sum(), 1e-12)
    x = np.maximum(x, 1e-10)
    s = np.maximum(s, 1e-10)

    status = "max_iter"
    it = 0
    tiny_steps = 0
    for it in range(1, _MAX_ITER + 1):
        rp = b - A @ x
        rd = c - A.T @ y - s
        mu = float(x @ s) / n
        pres = float(np.linalg.norm(rp)) / scale_b
        dres = float(np.linalg.norm(rd)) / scale_c
        gap = float(x @ s) / (1.0 + abs(float(c @ x)))
        if pres <= tol and dres <= tol and gap <= tol:
            status = "optimal"
            break

        d = x / s
        M = (A * d) @ A.T

        def newton(rxs):
            rhs = rp + A @ (d * rd - rxs / s)
            dy = _chol_solve(M, rhs, reg)
            ds_ = rd - A.T @ dy
            dx_ = (rxs - x * ds_) / s
            return dx_, dy, ds_

        # predictor
        dx_a, dy_a, ds_a = newton(-x * s)
        ap = _max_step(x, dx_a)
        ad = _max_step(s, ds_a)
        mu_aff = float((x + ap * dx_a) @ (s + ad * ds_a)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.1
        # corrector
        dx_, dy_, ds_ = newton(-x * s - dx_a * ds_a + sigma * mu)
        ap = min(1.0, 0.995 * _max_step(x, dx_))
        ad = min(1.0, 0.995 * _max_step(s, ds_))
        if max(ap, ad) < 1e-12:
            tiny_steps += 1
            if tiny_steps >= 3:
                status = "infeasible" if pres > 1e-6 else "max_iter"
                break
        else:
            tiny_steps = 0
        x = np.maximum(x + ap * dx_, 1e-300)
        s = np.maximum(s + ad * ds_, 1e-300)
        y = y + ad * dy_
        if float(np.linalg.norm(y)) > 1e13 * scale_c:
            status = "infeasible"  # diverging dual certificate
            break
        if float(np.linalg.norm(x)) > 1e14 * scale_b:
            status = "unbounded"
            break

    rp = b - A @ x
    rd = c - A.T @ y - s
    if status == "max_iter" and float(np.linalg.norm(rp)) > 1e-6 * scale_b:
        status = "infeasible"
    report = SolverReport(
        status=status,
        iterations=it,
        primal_residual=float(np.linalg.norm(rp)),
        dual_residual=float(np.linalg.norm(rd)),
        objective=float(c @ x),
        extras={"gap": float(x @ s) / (1.0 + abs(float(c @ x))), "dual": y, "slack": s},
    )
    if status == "infeasible":
        raise LinearProgramError(report)
    return x, report


class LinearProgramError(RuntimeError):
    """Raised when an LP/QP is declared infeasible; carries the report."""

    def __init__(self, report: SolverReport):
        super().__init__(
            f"solver status {report.status}: primal residual "
            f"{report.primal_residual:.3e}, dual residual {report.dual_residual:.3e}"
        )
        self.report = report


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_qp(
    Q: np.ndarray,
    Aeq: np.ndarray | None,
    beq: np.ndarray | None,
    lower_bounds: np.ndarray | None = None,
    tol: float = 1e-10,
):
    """Solve ``min x^T Q x  s.t.  Aeq x = beq, x >= lower_bounds``.

    ``Q`` must be PSD (eigenvalues above ``-1e-9`` relative). Bounds may be
    ``-inf`` per coordinate or ``None`` for a fully unbounded problem. The
    objective convention is ``x^T Q x`` (no 1/2 factor).
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if Aeq is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    else:
        A = np.atleast_2d(np.asarray(Aeq, dtype=float))
        b = np.atleast_1d(np.asarray(beq, dtype=float)).ravel()
    m = A.shape[0]
    if lower_bounds is None:
        lb = np.full(n, -np.inf)
    else:
        lb = np.broadcast_to(np.asarray(lower_bounds, dtype=float), (n,)).copy()
    bounded = np.isfinite(lb)
    lbf = np.where(bounded, lb, 0.0)  # finite stand-in for arithmetic on free coords

    P = Q + Q.T  # gradient of x^T Q x is (Q + Q^T) x
    scale = 1.0 + float(np.abs(P).max()) + (float(np.abs(A).max()) if m else 0.0)
    reg = 1e-12 * scale

    x = np.where(bounded, lbf + 1.0, 0.0)
    y = np.zeros(m)
    z = np.where(bounded, 1.0, 0.0)  # multipliers for x >= lb

    status = "max_iter"
    it = 0
    for it in range(1, _MAX_ITER + 1):
        g = np.where(bounded, x - lbf, np.inf)  # slack to the bound
        rd = P @ x - (A.T @ y if m else 0.0) - z
        rp = (b - A @ x) if m else np.zeros(0)
        comp = np.where(bounded, (x - lbf) * z, 0.0)
        nb = max(int(bounded.sum()), 1)
        mu = float(comp.sum()) / nb
        pres = float(np.linalg.norm(rp)) / (1.0 + float(np.linalg.norm(b)) if m else 1.0)
        dres = float(np.linalg.norm(rd)) / scale
        if pres <= max(tol, 1e-12) and dres <= max(tol, 1e-12) and mu <= max(tol, 1e-12):
            status = "optimal"
            break

        # KKT with bound multipliers eliminated: (P + G^{-1} Z) dx - A^T dy = rhs
        diag = np.zeros(n)
        gb = np.where(bounded, np.maximum(g, 1e-300), 1.0)
        diag[bounded] = z[bounded] / gb[bounded]

        def kkt_solve(rxs):
            rhs1 = -rd + np.where(bounded, rxs / gb, 0.0)
            K = np.zeros((n + m, n + m))
            K[:n, :n] = P + np.diag(diag + reg)
            if m:
                K[:n, n:] = -A.T
                K[n:, :n] = A
                K[n:, n:] = -reg * np.eye(m)
            rhs = np.concatenate([rhs1, rp])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            dx_ = sol[:n]
            dy_ = sol[n:]
            dz_ = np.where(bounded, (rxs - z * dx_) / gb, 0.0)
            return dx_, dy_, dz_

        # predictor
        rxs_aff = np.where(bounded, -(x - lbf) * z, 0.0)
        dx_a, dy_a, dz_a = kkt_solve(rxs_aff)
        ap = _max_step(g[bounded], dx_a[bounded]) if bounded.any() else 1.0
        ad = _max_step(z[bounded], dz_a[bounded]) if bounded.any() else 1.0
        gf = np.where(bounded, g, 0.0)
        mu_aff = (
            float(np.where(bounded, (gf + ap * dx_a) * (z + ad * dz_a), 0.0).sum()) / nb
        )
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        rxs = np.where(bounded, -(x - lbf) * z - dx_a * dz_a + sigma * mu, 0.0)
        dx_, dy_, dz_ = kkt_solve(rxs)
        if bounded.any():
            ap = min(1.0, 0.995 * _max_step(g[bounded], dx_[bounded]))
            ad = min(1.0, 0.995 * _max_step(z[bounded], dz_[bounded]))
        else:
            ap = ad = 1.0
        x = x + ap * dx_
        y = y + ad * dy_
        z = np.where(bounded, np.maximum(z + ad * dz_, 1e-300), 0.0)
        x[bounded] = np.maximum(x[bounded], lbf[bounded] + 1e-300)

    rd = P @ x - (A.T @ y if m else 0.0) - z
    rp = (b - A @ x) if m else np.zeros(0)
    report = SolverReport(
        status=status,
        iterations=it,
        primal_residual=float(np.linalg.norm(rp)),
        dual_residual=float(np.linalg.norm(rd)),
        objective=float(x @ Q @ x),
        extras={"dual": y, "bound_dual": z},
    )
    if status == "max_iter" and (
        report.primal_residual > 1e-6 * (1.0 + float(np.linalg.norm(b)))
    ):
        report.status = "infeasible"
        raise LinearProgramError(report)
    return x, report
