"""Measurement matrices: random Gaussian sampling and optimal design.

The designed path minimizes the summed within-block Gram l1-norms of the
sensing matrix over the Gram-domain variable F = phi^T phi, subject to unit
diagonal responses for every basis column, then factors the best rank-M
part of F back into a measurement matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matio
from .dictionary import BlockDictionary
from .numerics import SolverReport, eig_sym, solve_lp, solve_qp


@dataclass(frozen=True)
class MeasurementMatrix:
    """Real M x n compression operator applied to the stacked measurements."""

    matrix: np.ndarray
    kind: str = "gaussian"  # "gaussian" | "designed" | "custom"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("measurement matrix must be 2-D")
        if not 1 <= m.shape[0] <= m.shape[1]:
            raise ValueError("need 1 <= M <= row count of the basis")
        object.__setattr__(self, "matrix", m)

    @property
    def n_measurements(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SensingMatrix:
    """Compressed basis (phi @ dictionary), optionally column-normalized."""

    matrix: np.ndarray
    block_len: int
    normalized: bool = False
    column_norms: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape[1] % self.block_len:
            raise ValueError("columns must divide into blocks")
        object.__setattr__(self, "matrix", m)

    @property
    def n_blocks(self) -> int:
        return self.matrix.shape[1] // self.block_len

    def block(self, h: int) -> np.ndarray:
        d = self.block_len
        return self.matrix[:, h * d : (h + 1) * d]


@dataclass(frozen=True)
class DesignProblem:
    """Linearized design data: one constraint column per dictionary column
    (A), nonnegative cost row (g), over the vectorized Gram variable."""

    A: np.ndarray  # (n_rows^2, L*d), real part of the per-column outer products
    g: np.ndarray  # (n_rows^2,)
    n_rows: int

    def __post_init__(self):
        if self.A.shape[0] != self.n_rows**2:
            raise ValueError("A row count must be n_rows^2")
        if self.g.shape != (self.n_rows**2,):
            raise ValueError("g length must be n_rows^2")
        if np.any(self.g < 0):
            raise ValueError("cost entries must be nonnegative")


def sample_gaussian_phi(M: int, cols: int, rng: np.random.Generator) -> MeasurementMatrix:
    """I.i.d. zero-mean unit-variance Gaussian measurement matrix."""
    if not 1 <= M <= cols:
        raise ValueError(f"need 1 <= M <= {cols}, got {M}")
    return MeasurementMatrix(
        matrix=rng.standard_normal((M, cols)), kind="gaussian", provenance={}
    )


def compress(phi: MeasurementMatrix, z: np.ndarray) -> np.ndarray:
    """Project the stacked measurement vector: y = phi @ z."""
    z = np.asarray(z)
    if z.shape[0] != phi.matrix.shape[1]:
        raise ValueError("measurement matrix and vector dimensions disagree")
    return phi.matrix @ z


def sensing_matrix(
    phi: MeasurementMatrix, basis: BlockDictionary, normalize: bool = False
) -> SensingMatrix:
    """Compressed basis, with optional unit column normalization (the norms
    are kept so recovered coefficients can be mapped back)."""
    if phi.matrix.shape[1] != basis.n_rows:
        raise ValueError("measurement matrix and basis dimensions disagree")
    theta = phi.matrix @ basis.matrix
    norms = None
    if normalize:
        norms = np.linalg.norm(theta, axis=0)
        if np.any(norms < 1e-300):
            raise ValueError("degenerate column: zero norm under normalization")
        theta = theta / norms
    return SensingMatrix(
        matrix=theta,
        block_len=basis.block_len,
        normalized=normalize,
        column_norms=norms,
    )


# ------------------------------------------------------------------ design
def build_design_problem(dict_unit: BlockDictionary) -> DesignProblem:
    """Constraint matrix and cost row for the Gram-domain design program.

    Expects the unit-power basis. Constraint column i represents the
    response of basis column i: <A_i, vec(F)> = psi_i^H F psi_i (imaginary
    part drops for symmetric F). The cost row sums the moduli of all
    within-block cross products, so g . vec(F) bounds the off-diagonal mass
    of every within-block Gram for entrywise-nonnegative F.
    """
    psi = dict_unit.matrix
    n, total = psi.shape
    d = dict_unit.block_len
    L = dict_unit.block_count
    A = np.empty((n * n, total))
    for i in range(total):
        c = psi[:, i]
        A[:, i] = np.real(np.outer(np.conj(c), c)).reshape(-1)
    gmat = np.zeros((n, n))
    for h in range(L):
        amp = np.abs(psi[:, h * d : (h + 1) * d])  # (n, d)
        s = amp.sum(axis=1)
        gmat += np.outer(s, s) - amp @ amp.T  # all (k, k') pairs minus k = k'
    return DesignProblem(A=A, g=gmat.reshape(-1), n_rows=n)


def _triangle_maps(n: int):
    iu = np.triu_indices(n)
    mult = np.where(iu[0] == iu[1], 1.0, 2.0)
    return iu, mult


def design_F(problem: DesignProblem, tie_break: bool = True):
    """Solve the design program for the Gram-domain matrix F.

    Minimizes g . vec(F) subject to A^T vec(F) = 1 and vec(F) >= 0 with F
    symmetric (the symmetric halves are folded into one variable each). The
    minimizing set is often a large face; among minimizers the
    least-Frobenius-norm point is returned (deterministic and well spread),
    found by a second equality/nonnegativity-constrained solve restricted to
    the zero-reduced-cost coordinates.

    Returns (F, SolverReport).
    """
    n = problem.n_rows
    iu, mult = _triangle_maps(n)
    # fold symmetric pairs: columns of A and g collapse to upper-triangle coords
    A3 = problem.A.reshape(n, n, -1)
    A_tri = (A3[iu[0], iu[1], :] * mult[:, None]).T  # (L*d, n_tri)
    g3 = problem.g.reshape(n, n)
    g_tri = g3[iu] * mult
    b = np.ones(A_tri.shape[0])

    u_star, lp_report = solve_lp(g_tri, A_tri, b)
    if not lp_report.ok:
        raise RuntimeError(
            f"design program not solved: status {lp_report.status}, max constraint "
            f"violation {np.abs(A_tri @ u_star - 1).max():.3e}"
        )
    v_star = float(g_tri @ u_star)
    u = u_star
    qp_report = None
    if tie_break:
        slack = np.asarray(lp_report.extras["slack"])
        tol = 1e-7 * (1.0 + float(np.abs(g_tri).max()))
        face = slack <= tol
        if face.any():
            try:
                uf, qp_report = solve_qp(
                    np.eye(int(face.sum())),
                    A_tri[:, face],
                    b,
                    np.zeros(int(face.sum())),
                )
                u_face = np.zeros_like(u_star)
                u_face[face] = uf
                # accept only if it stays optimal and feasible
                feas = np.abs(A_tri @ u_face - 1).max()
                if (
                    qp_report.ok
                    and feas <= 1e-6
                    and g_tri @ u_face <= v_star + 1e-6 * (1 + abs(v_star))
                ):
                    u = u_face
            except Exception:
                qp_report = None
    F = np.zeros((n, n))
    F[iu] = u
    F = F + F.T - np.diag(np.diag(F))
    report = SolverReport(
        status="optimal",
        iterations=lp_report.iterations + (qp_report.iterations if qp_report else 0),
        primal_residual=float(np.abs(A_tri @ u - 1).max()),
        dual_residual=lp_report.dual_residual,
        objective=float(g_tri @ u),
        extras={"lp": lp_report, "tie_break": qp_report, "lp_objective": v_star},
    )
    return F, report


def extract_phi(F: np.ndarray, M: int) -> MeasurementMatrix:
    """Factor the best rank-M PSD part of F into an M-row measurement matrix.

    Rows are the top-M eigenvectors scaled by the square roots of their
    (zero-clipped) eigenvalues, so phi^T phi is the closest PSD rank-M
    approximation of the symmetrized F.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= {n}")
    w, V = eig_sym(0.5 * (F + F.T))
    clipped = np.clip(w[:M], 0.0, None)
    n_pos = int(np.count_nonzero(w[:M] > 0))
    if n_pos < M:
        warnings.warn(
            f"only {n_pos} positive eigenvalues for {M} measurement rows; "
            "trailing rows are zero",
            RuntimeWarning,
        )
    phi = np.sqrt(clipped)[:, None] * V[:, :M].T
    return MeasurementMatrix(
        matrix=phi,
        kind="designed",
        provenance={
            "eigenvalues": w,
            "clipped": int(np.count_nonzero(w[:M] < 0)),
            "positive_rows": n_pos,
        },
    )


# ---------------------------------------------------------------------- io
def save_phi(path, phi: MeasurementMatrix, scenario_hash: bytes = b"") -> None:
    matio.write_matrix(
        path,
        phi.matrix,
        kind="phi",
        scenario_hash=scenario_hash,
        row_order=phi.kind,
    )


def load_phi(path, scenario_hash: bytes | None = None) -> MeasurementMatrix:
    mat, meta = matio.read_matrix(path, expect_kind="phi", scenario_hash=scenario_hash)
    return MeasurementMatrix(matrix=mat, kind=meta["row_order"] or "custom")
