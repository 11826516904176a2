"""Transmit energy allocation by minimizing a block-coherence bound.

Two engines are provided. ``allocate_qp`` is the relaxed convex program with
receiver-copy equalization constraints and an amplitude floor; because the
coupling matrix has nonnegative entries its optimum sits at the floor, which
rescales to the uniform split. ``allocate_direct`` minimizes the same
quadratic on the fixed-energy sphere directly by a deterministic grid search
and is the default engine for experiments.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .numerics import eig_sym, solve_qp

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .dictionary import BlockDictionary
    from .measurement import MeasurementMatrix


@dataclass(frozen=True)
class PowerAllocation:
    """Per-transmitter amplitudes p with total energy sum(p_i^2) = Pt."""

    amplitudes: np.ndarray
    total_energy: float | None = None

    def __post_init__(self):
        p = np.asarray(self.amplitudes, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("amplitudes must be a nonempty vector")
        if np.any(p <= 0):
            raise ValueError("amplitudes must be positive")
        energy = float(np.sum(p**2))
        pt = energy if self.total_energy is None else float(self.total_energy)
        if abs(energy - pt) > 1e-9 * max(1.0, pt):
            raise ValueError(f"sum(p^2) = {energy} does not match Pt = {pt}")
        object.__setattr__(self, "amplitudes", p)
        object.__setattr__(self, "total_energy", pt)

    @classmethod
    def uniform(cls, n_tx: int, total_energy: float | None = None) -> "PowerAllocation":
        """Equal split; total energy defaults to the transmitter count."""
        pt = float(n_tx) if total_energy is None else float(total_energy)
        return cls(amplitudes=np.full(n_tx, np.sqrt(pt / n_tx)), total_energy=pt)


@dataclass(frozen=True)
class CouplingMatrix:
    """Nonnegative symmetric d x d matrix coupling the repeated amplitude
    vector to the coherence-bound cost: cost(p) = pbar^T abar pbar."""

    abar: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.abar, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("abar must be square")
        if np.any(a < 0):
            raise ValueError("abar entries must be nonnegative")
        if np.abs(a - a.T).max() > 1e-10 * max(1.0, np.abs(a).max()):
            raise ValueError("abar must be symmetric")
        object.__setattr__(self, "abar", a)

    @property
    def size(self) -> int:
        return self.abar.shape[0]


def build_coupling(dict_unit: "BlockDictionary", phi: "MeasurementMatrix | None" = None) -> CouplingMatrix:
    """Coupling matrix from the unit-power basis and a measurement matrix.

    Sums the entrywise absolute values of the per-block Gram matrices of
    phi @ basis, so that for any positive amplitude profile stacked across
    receivers (pbar), pbar^T abar pbar equals the summed entrywise-l1 norms
    of the amplitude-scaled block Grams exactly.
    """
    mat = dict_unit.matrix if phi is None else phi.matrix @ dict_unit.matrix
    d = dict_unit.block_len
    m, cols = mat.shape
    blocks = mat.reshape(m, cols // d, d)
    grams = np.einsum("mld,mle->lde", blocks.conj(), blocks)
    abar = np.abs(grams).sum(axis=0)
    abar = 0.5 * (abar + abar.T)  # exact symmetry against rounding
    prov = {
        "dictionary": hashlib.sha256(np.ascontiguousarray(dict_unit.matrix).tobytes()).hexdigest()[:16],
        "phi": "identity"
        if phi is None
        else hashlib.sha256(np.ascontiguousarray(phi.matrix).tobytes()).hexdigest()[:16],
    }
    return CouplingMatrix(abar=abar, provenance=prov)


def coupling_cost(coupling: CouplingMatrix, amplitudes: np.ndarray, n_rx: int) -> float:
    """cost = pbar^T abar pbar with pbar the amplitudes tiled across receivers."""
    pbar = np.tile(np.asarray(amplitudes, dtype=float), n_rx)
    return float(pbar @ coupling.abar @ pbar)


def fold_coupling(coupling: CouplingMatrix, n_tx: int, n_rx: int) -> np.ndarray:
    """Fold the d x d coupling to an n_tx x n_tx matrix B so that
    q^T B q = pbar^T abar pbar when pbar repeats q across receivers."""
    a = coupling.abar
    if a.shape[0] != n_tx * n_rx:
        raise ValueError("coupling size does not match n_tx * n_rx")
    B = np.zeros((n_tx, n_tx))
    for r, rp in itertools.product(range(n_rx), repeat=2):
        B += a[r * n_tx : (r + 1) * n_tx, rp * n_tx : (rp + 1) * n_tx]
    return 0.5 * (B + B.T)


def _equalization_rows(n_tx: int, n_rx: int) -> np.ndarray:
    """Rows forcing each receiver copy of the amplitude vector to equal the
    first copy (difference = 0)."""
    rows = []
    for copy in range(1, n_rx):
        for i in range(n_tx):
            row = np.zeros(n_tx * n_rx)
            row[i] = 1.0
            row[copy * n_tx + i] = -1.0
            rows.append(row)
    return np.asarray(rows) if rows else np.zeros((0, n_tx * n_rx))


def allocate_qp(
    coupling: CouplingMatrix,
    p_min: float,
    total_energy: float,
    n_rx: int,
) -> PowerAllocation:
    """Relaxed convex allocation: minimize the coupling quadratic subject to
    receiver-copy equality and an amplitude floor, then rescale to the energy
    budget.

    With a nonnegative coupling matrix the quadratic is increasing on the
    positive orthant, so the optimum lands on the floor and rescales to the
    uniform allocation; kept as the faithful baseline engine.
    """
    if p_min <= 0:
        raise ValueError("p_min must be positive")
    d = coupling.size
    n_tx = d // n_rx
    if n_tx * n_rx != d:
        raise ValueError("coupling size not divisible by receiver count")
    Q = coupling.abar.copy()
    w, _ = eig_sym(Q)
    if w[-1] < -1e-9 * max(1.0, abs(w[0])):
        Q = Q + (abs(w[-1]) + 1e-9) * np.eye(d)  # PSD repair, constant on spheres
    J = _equalization_rows(n_tx, n_rx)
    x, report = solve_qp(Q, J, np.zeros(J.shape[0]), np.full(d, p_min))
    if not report.ok:
        raise RuntimeError(
            f"allocation QP did not converge: status {report.status}, "
            f"primal {report.primal_residual:.2e}, dual {report.dual_residual:.2e}"
        )
    alpha = np.sqrt(total_energy * n_rx) / np.linalg.norm(x)
    # fold receiver copies (equal up to solver tolerance) to Mt amplitudes
    q = alpha * x.reshape(n_rx, n_tx).mean(axis=0)
    q *= np.sqrt(total_energy / np.sum(q**2))
    return PowerAllocation(amplitudes=q, total_energy=total_energy)


def allocate_direct(
    coupling: CouplingMatrix,
    total_energy: float,
    n_rx: int,
    floor_frac: float = None,
    resolution: float = 1e-3,
) -> PowerAllocation:
    """Fixed-energy minimizer of the folded coupling quadratic.

    Searches the positive patch of the energy sphere by a dense angle grid
    (step ``resolution``) with two zoom refinements; the uniform split is
    always evaluated first, so the result never costs more than uniform.
    Supports up to four transmitters.
    """
    d = coupling.size
    n_tx = d // n_rx
    if n_tx * n_rx != d:
        raise ValueError("coupling size not divisible by receiver count")
    if n_tx > 4:
        raise ValueError("direct search supports at most 4 transmitters")
    if floor_frac is None:
        floor_frac = 0.1 / np.sqrt(float(total_energy))
    if not 0 < floor_frac < 1.0 / np.sqrt(n_tx):
        raise ValueError("floor_frac must lie in (0, 1/sqrt(n_tx))")
    B = fold_coupling(coupling, n_tx, n_rx)
    root = np.sqrt(float(total_energy))

    def cost_of(q: np.ndarray) -> float:
        return float(q @ B @ q)

    best_q = np.full(n_tx, root / np.sqrt(n_tx))
    best_c = cost_of(best_q)

    if n_tx == 1:
        return PowerAllocation(amplitudes=best_q, total_energy=float(total_energy))

    n_ang = n_tx - 1
    lo, hi = 0.0, np.pi / 2

    def direction(angles: np.ndarray) -> np.ndarray:
        """Unit vector in the positive orthant from spherical angles."""
        out = np.empty(angles.shape[:-1] + (n_tx,))
        sin_prod = np.ones(angles.shape[:-1])
        for k in range(n_ang):
            out[..., k] = sin_prod * np.cos(angles[..., k])
            sin_prod = sin_prod * np.sin(angles[..., k])
        out[..., n_tx - 1] = sin_prod
        return out

    def scan(centers: np.ndarray, half_width: float, step: float):
        nonlocal best_q, best_c
        axes = [
            np.arange(
                max(lo, c - half_width), min(hi, c + half_width) + step / 2, step
            )
            for c in centers
        ]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n_ang)
        dirs = direction(mesh)
        feasible = np.all(dirs >= floor_frac - 1e-12, axis=1)
        if not np.any(feasible):
            return centers
        dirs = dirs[feasible]
        mesh = mesh[feasible]
        q = root * dirs
        costs = np.einsum("ti,ij,tj->t", q, B, q)
        k = int(np.argmin(costs))
        if costs[k] < best_c:
            best_c = float(costs[k])
            best_q = q[k]
        return mesh[k]

    # stage 1: full patch at a step coarse enough to keep the mesh tractable
    span = hi - lo
    step1 = max(resolution, span / max(8, int(2.5e6 ** (1 / n_ang))))
    centers = scan(np.full(n_ang, (lo + hi) / 2), span / 2, step1)
    # zoom stages down to below the requested resolution
    step = step1
    while step > resolution / 10:
        new_step = step / 10
        centers = scan(centers, 2 * step, new_step)
        step = new_step

    best_q = best_q * root / np.linalg.norm(best_q)
    if np.any(best_q < floor_frac * root - 1e-9):
        raise RuntimeError("feasible set empty after refinement")
    return PowerAllocation(amplitudes=best_q, total_energy=float(total_energy))
