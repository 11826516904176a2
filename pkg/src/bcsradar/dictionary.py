"""Delay-Doppler basis matrix for the stacked matched-filter measurements.

Each grid point contributes one block of d = Mt*Nr columns, one per
transmitter-receiver channel. A column is the unit-modulus phase history of
its channel at the grid point's delay and Doppler, scaled by the transmit
amplitude, and is nonzero only on the rows of its own channel.

Row order: sample-major over (pulse m, sample n), each time slice stacked
receiver-major then transmitter-minor. Column order within a block matches
the attenuation stacking (receiver-major, transmitter-minor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matio
from .scene import BlockSparseVector, Scenario, WaveformParams, enumerate_grid, noise_variance

SPEED_OF_LIGHT = 299_792_458.0

ROW_ORDER = "pulse,sample;rx-major,tx-minor"


@dataclass(frozen=True)
class BlockDictionary:
    """Basis matrix with L blocks of width d (= Mt*Nr)."""

    matrix: np.ndarray
    block_count: int
    block_len: int
    row_order: str = ROW_ORDER
    powers: np.ndarray | None = None
    scenario_hash: bytes = b""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape[1] != self.block_count * self.block_len:
            raise ValueError("column count must equal block_count * block_len")
        object.__setattr__(self, "matrix", m)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def block(self, h: int) -> np.ndarray:
        d = self.block_len
        return self.matrix[:, h * d : (h + 1) * d]


def doppler_shift(
    target_velocity,
    target_pos,
    tx,
    rx,
    fc: float,
    c: float = SPEED_OF_LIGHT,
) -> float:
    """Bistatic Doppler: projection of the velocity on the receive direction
    minus its projection on the transmit-to-target direction, times fc/c."""
    v = np.asarray(target_velocity, dtype=float)
    p = np.asarray(target_pos, dtype=float)
    t = np.asarray(tx, dtype=float)
    r = np.asarray(rx, dtype=float)
    d_t = p - t
    d_r = r - p
    nt = np.linalg.norm(d_t)
    nr = np.linalg.norm(d_r)
    if nt == 0.0 or nr == 0.0:
        raise ValueError("degenerate geometry: target coincides with a radar")
    u_t = d_t / nt
    u_r = d_r / nr
    return fc / c * (float(v @ u_r) - float(v @ u_t))


def path_delay(target_pos, tx, rx, c: float = SPEED_OF_LIGHT) -> float:
    """Two-leg propagation delay (tx -> target -> rx) in seconds."""
    p = np.asarray(target_pos, dtype=float)
    return float(
        (np.linalg.norm(p - np.asarray(tx, float)) + np.linalg.norm(p - np.asarray(rx, float)))
        / c
    )


def atom_entry(
    amplitude: float,
    f: float,
    tau: float,
    m: int,
    n: int,
    wf: WaveformParams,
) -> complex:
    """Single matched-filter sample value for pulse m (1-based) and sample n
    (0-based): amplitude times a unit phasor."""
    if not (1 <= m <= wf.Np and 0 <= n < wf.Ns):
        raise IndexError("pulse or sample index out of range")
    t = (m - 1) * wf.slow_time_step + n * wf.Ts
    return amplitude * np.exp(2j * np.pi * (f * t - wf.fc * tau))


def _grid_channel_params(scenario: Scenario):
    """Doppler (L, d) and delay (L, d) tables over grid points and channels."""
    geo = scenario.geometry
    wf = scenario.waveform
    pts = np.asarray(enumerate_grid(scenario.grid))  # (L, 4)
    pos = pts[:, :2]
    vel = pts[:, 2:]
    txs = geo.tx_array()
    rxs = geo.rx_array()
    L = pts.shape[0]
    d = geo.pair_count
    dop = np.empty((L, d))
    tau = np.empty((L, d))
    for l_rx in range(geo.n_rx):
        for i_tx in range(geo.n_tx):
            j = l_rx * geo.n_tx + i_tx
            d_t = pos - txs[i_tx]
            d_r = rxs[l_rx] - pos
            nt = np.linalg.norm(d_t, axis=1)
            nr = np.linalg.norm(d_r, axis=1)
            if np.any(nt == 0) or np.any(nr == 0):
                raise ValueError("degenerate geometry: grid point on a radar")
            u_t = d_t / nt[:, None]
            u_r = d_r / nr[:, None]
            dop[:, j] = wf.fc / SPEED_OF_LIGHT * (
                np.sum(vel * u_r, axis=1) - np.sum(vel * u_t, axis=1)
            )
            tau[:, j] = (
                np.linalg.norm(pos - txs[i_tx], axis=1)
                + np.linalg.norm(pos - rxs[l_rx], axis=1)
            ) / SPEED_OF_LIGHT
    return dop, tau


def build_basis(scenario: Scenario, powers: np.ndarray | None = None) -> BlockDictionary:
    """Assemble the full basis matrix for a scenario.

    ``powers`` is the per-transmitter amplitude vector; defaults to the
    scenario's allocation. Construction is deterministic.
    """
    geo = scenario.geometry
    wf = scenario.waveform
    if powers is None:
        powers = scenario.powers.amplitudes
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (geo.n_tx,):
        raise ValueError("powers must have one amplitude per transmitter")

    d = geo.pair_count
    L = scenario.grid.size
    n_t = wf.Np * wf.Ns
    dop, tau = _grid_channel_params(scenario)
    tvec = wf.sample_times()  # (n_t,)

    # phases[t, h, j] for sample t, grid point h, channel j
    phases = 2.0 * np.pi * (tvec[:, None, None] * dop[None, :, :] - wf.fc * tau[None, :, :])
    amp = np.tile(powers, geo.n_rx)  # channel j = rx*Mt + tx carries p_tx
    vals = amp[None, None, :] * np.exp(1j * phases)

    mat = np.zeros((n_t * d, L * d), dtype=complex)
    rows = (np.arange(n_t)[:, None, None] * d + np.arange(d)[None, None, :])
    cols = (np.arange(L)[None, :, None] * d + np.arange(d)[None, None, :])
    mat[np.broadcast_to(rows, vals.shape), np.broadcast_to(cols, vals.shape)] = vals
    return BlockDictionary(
        matrix=mat,
        block_count=L,
        block_len=d,
        powers=amp,
        scenario_hash=scenario.canonical_hash(),
    )


def unit_power_basis(scenario: Scenario) -> BlockDictionary:
    """Basis with every transmit amplitude set to one."""
    return build_basis(scenario, powers=np.ones(scenario.geometry.n_tx))


def synthesize_received(
    scenario: Scenario,
    basis: BlockDictionary,
    truth: BlockSparseVector,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noisy stacked measurement: basis @ truth + circular complex Gaussian
    noise at the scenario's energy-to-noise level."""
    if truth.values.size != basis.matrix.shape[1]:
        raise ValueError("truth length does not match basis columns")
    var_n = noise_variance(scenario.enr_db, scenario.geometry.n_rx)
    n = basis.n_rows
    noise = np.sqrt(var_n / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return basis.matrix @ truth.values + noise


# ------------------------------------------------------------------- cache
def save_dictionary(path, basis: BlockDictionary) -> None:
    matio.write_matrix(
        path,
        basis.matrix,
        kind="dictionary",
        scenario_hash=basis.scenario_hash,
        block_count=basis.block_count,
        block_len=basis.block_len,
        row_order=basis.row_order,
    )


def load_dictionary(path, scenario: Scenario | None = None) -> BlockDictionary:
    """Load a cached basis; verifies the scenario hash when one is given."""
    digest = scenario.canonical_hash() if scenario is not None else None
    mat, meta = matio.read_matrix(path, expect_kind="dictionary", scenario_hash=digest)
    return BlockDictionary(
        matrix=mat,
        block_count=meta["block_count"],
        block_len=meta["block_len"],
        row_order=meta["row_order"],
        scenario_hash=meta["scenario_hash"],
    )
