"""Radar scenario: geometry, waveform timing, estimation grid, targets, noise.

All types are immutable after construction and safe to share across workers.
The scenario file format is JSON; see ``Scenario.from_file``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .power import PowerAllocation


@dataclass(frozen=True)
class RadarGeometry:
    """Transmitter and receiver positions on a 2-D Cartesian plane (meters)."""

    tx_positions: tuple  # of (x, y) pairs
    rx_positions: tuple

    def __post_init__(self):
        tx = tuple(tuple(float(c) for c in p) for p in self.tx_positions)
        rx = tuple(tuple(float(c) for c in p) for p in self.rx_positions)
        if not tx or not rx:
            raise ValueError("need at least one transmitter and one receiver")
        if any(len(p) != 2 for p in tx + rx):
            raise ValueError("positions must be 2-D points")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    @property
    def pair_count(self) -> int:
        """Channels per grid point: one per transmitter-receiver pair."""
        return self.n_tx * self.n_rx

    def tx_array(self) -> np.ndarray:
        return np.asarray(self.tx_positions, dtype=float)

    def rx_array(self) -> np.ndarray:
        return np.asarray(self.rx_positions, dtype=float)


@dataclass(frozen=True)
class WaveformParams:
    """Pulse timing: carrier fc (Hz), PRI T (s), pulse width Tp (s),
    sample period Ts (s), Ns samples per PRI, Np pulses.

    ``doppler_time_base`` selects the slow-time step of the phase model:
    "Tp" uses the pulse width, "T" uses the PRI.
    """

    fc: float
    T: float
    Tp: float
    Ts: float
    Ns: int
    Np: int
    doppler_time_base: str = "Tp"

    def __post_init__(self):
        if self.fc <= 0 or self.Ts <= 0:
            raise ValueError("fc and Ts must be positive")
        if not (0 < self.Tp <= self.T):
            raise ValueError("need 0 < Tp <= T")
        if self.Ns < 1 or self.Np < 1:
            raise ValueError("Ns and Np must be >= 1")
        if self.Ns * self.Ts > self.T * (1 + 1e-12):
            raise ValueError("samples must fit in one PRI (Ns*Ts <= T)")
        if self.doppler_time_base not in ("Tp", "T"):
            raise ValueError("doppler_time_base must be 'Tp' or 'T'")

    @property
    def slow_time_step(self) -> float:
        return self.Tp if self.doppler_time_base == "Tp" else self.T

    def sample_times(self) -> np.ndarray:
        """Times of all Np*Ns samples, pulse-major."""
        m = np.repeat(np.arange(self.Np), self.Ns)
        n = np.tile(np.arange(self.Ns), self.Np)
        return m * self.slow_time_step + n * self.Ts


@dataclass(frozen=True)
class EstimationGrid:
    """Discretized position/velocity search space.

    Point h is the tuple (x, y, vx, vy) in the canonical enumeration order:
    x slowest, then y, then vx, then vy fastest. Indices are 0-based.
    """

    x_vals: tuple
    y_vals: tuple
    vx_vals: tuple
    vy_vals: tuple

    def __post_init__(self):
        for name in ("x_vals", "y_vals", "vx_vals", "vy_vals"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, vals)

    @property
    def size(self) -> int:
        return (
            len(self.x_vals) * len(self.y_vals) * len(self.vx_vals) * len(self.vy_vals)
        )

    def axes(self):
        return (self.x_vals, self.y_vals, self.vx_vals, self.vy_vals)

    def point(self, h: int):
        """Grid tuple for 0-based index h (inverse of index_of)."""
        nx, ny, nvx, nvy = (len(a) for a in self.axes())
        if not 0 <= h < self.size:
            raise IndexError(f"grid index {h} out of range")
        ivy = h % nvy
        ivx = (h // nvy) % nvx
        iy = (h // (nvy * nvx)) % ny
        ix = h // (nvy * nvx * ny)
        return (self.x_vals[ix], self.y_vals[iy], self.vx_vals[ivx], self.vy_vals[ivy])

    def index_of(self, point) -> int:
        """0-based index of an exact grid tuple."""
        idx = []
        for val, axis in zip(point, self.axes()):
            hits = [i for i, a in enumerate(axis) if _close(a, val)]
            if not hits:
                raise ValueError(f"value {val} is not a grid tick")
            idx.append(hits[0])
        ix, iy, ivx, ivy = idx
        return ((ix * len(self.y_vals) + iy) * len(self.vx_vals) + ivx) * len(
            self.vy_vals
        ) + ivy


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class BetaDistribution:
    """Per-quadrature Gaussian law for target attenuation coefficients."""

    mean: float
    var: float

    def draw(self, n_tx: int, n_rx: int, rng: np.random.Generator) -> np.ndarray:
        s = np.sqrt(self.var)
        re = rng.normal(self.mean, s, size=(n_tx, n_rx))
        im = rng.normal(self.mean, s, size=(n_tx, n_rx))
        return re + 1j * im


@dataclass(frozen=True)
class Target:
    """Point scatterer: position (m), velocity (m/s), and per-channel
    attenuation, either a fixed (n_tx, n_rx) complex matrix or a
    distribution to draw from per trial."""

    position: tuple
    velocity: tuple
    attenuation: np.ndarray | None = None
    beta_dist: BetaDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "velocity", tuple(float(c) for c in self.velocity))
        if self.attenuation is not None:
            a = np.asarray(self.attenuation, dtype=complex)
            if a.ndim != 2:
                raise ValueError("attenuation must be an (n_tx, n_rx) matrix")
            object.__setattr__(self, "attenuation", a)
        if self.attenuation is None and self.beta_dist is None:
            raise ValueError("target needs attenuation or beta_dist")

    def materialize(self, n_tx: int, n_rx: int, rng: np.random.Generator) -> "Target":
        """Return a target with concrete attenuation (drawn if needed)."""
        if self.attenuation is not None:
            if self.attenuation.shape != (n_tx, n_rx):
                raise ValueError(
                    f"attenuation shape {self.attenuation.shape} != ({n_tx}, {n_rx})"
                )
            return self
        beta = self.beta_dist.draw(n_tx, n_rx, rng)
        return dataclasses.replace(self, attenuation=beta, beta_dist=None)

    def beta_block(self) -> np.ndarray:
        """Attenuations stacked receiver-major, transmitter-minor (length d)."""
        if self.attenuation is None:
            raise ValueError("target attenuation not materialized")
        return self.attenuation.T.reshape(-1)


@dataclass(frozen=True)
class BlockSparseVector:
    """Length L*d complex vector with d-wide blocks; support = blocks with
    nonzero Euclidean norm."""

    values: np.ndarray
    block_len: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size % self.block_len:
            raise ValueError("length must be a multiple of block_len")
        object.__setattr__(self, "values", v)

    @property
    def n_blocks(self) -> int:
        return self.values.size // self.block_len

    def block(self, h: int) -> np.ndarray:
        return self.values[h * self.block_len : (h + 1) * self.block_len]

    @property
    def support(self) -> frozenset:
        norms = np.linalg.norm(self.values.reshape(-1, self.block_len), axis=1)
        return frozenset(int(i) for i in np.nonzero(norms > 0)[0])


@dataclass(frozen=True)
class Scenario:
    """Complete simulation scenario binding geometry, waveform, grid,
    targets, the noise level, and the transmit power allocation."""

    geometry: RadarGeometry
    waveform: WaveformParams
    grid: EstimationGrid
    targets: tuple
    enr_db: float
    powers: PowerAllocation = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.powers is None:
            object.__setattr__(
                self, "powers", PowerAllocation.uniform(self.geometry.n_tx)
            )
        if self.powers.amplitudes.size != self.geometry.n_tx:
            raise ValueError("power vector length must equal transmitter count")
        if len(self.targets) > self.grid.size:
            raise ValueError("more targets than grid points")
        radars = self.geometry.tx_positions + self.geometry.rx_positions
        for x in self.grid.x_vals:
            for y in self.grid.y_vals:
                if any(_close(x, px) and _close(y, py) for px, py in radars):
                    raise ValueError(f"grid point ({x}, {y}) coincides with a radar")

    # -------------------------------------------------------------- sizes
    @property
    def block_len(self) -> int:
        return self.geometry.pair_count

    @property
    def n_rows(self) -> int:
        """Stacked matched-filter sample count Np*Ns*Mt*Nr."""
        wf = self.waveform
        return wf.Np * wf.Ns * self.geometry.pair_count

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    # ------------------------------------------------------------ helpers
    def materialize_targets(self, rng: np.random.Generator) -> "Scenario":
        """Draw concrete attenuation for every distribution-specified target."""
        geo = self.geometry
        tgts = tuple(t.materialize(geo.n_tx, geo.n_rx, rng) for t in self.targets)
        return dataclasses.replace(self, targets=tgts)

    def with_waveform(self, **changes) -> "Scenario":
        return dataclasses.replace(
            self, waveform=dataclasses.replace(self.waveform, **changes)
        )

    def with_powers(self, powers: PowerAllocation) -> "Scenario":
        return dataclasses.replace(self, powers=powers)

    def with_enr(self, enr_db: float) -> "Scenario":
        return dataclasses.replace(self, enr_db=float(enr_db))

    # ----------------------------------------------------------------- io
    def to_dict(self) -> dict:
        tgts = []
        for t in self.targets:
            entry = {"p": list(t.position), "v": list(t.velocity)}
            if t.attenuation is not None:
                entry["beta"] = [
                    [[float(c.real), float(c.imag)] for c in row]
                    for row in t.attenuation
                ]
            if t.beta_dist is not None:
                entry["beta_dist"] = {"mean": t.beta_dist.mean, "var": t.beta_dist.var}
            tgts.append(entry)
        wf = self.waveform
        return {
            "geometry": {
                "tx": [list(p) for p in self.geometry.tx_positions],
                "rx": [list(p) for p in self.geometry.rx_positions],
            },
            "waveform": {
                "fc": wf.fc,
                "T": wf.T,
                "Tp": wf.Tp,
                "Ts": wf.Ts,
                "Ns": wf.Ns,
                "Np": wf.Np,
                "doppler_time_base": wf.doppler_time_base,
            },
            "grid": {
                "x": list(self.grid.x_vals),
                "y": list(self.grid.y_vals),
                "vx": list(self.grid.vx_vals),
                "vy": list(self.grid.vy_vals),
            },
            "targets": tgts,
            "enr_db": self.enr_db,
            "powers": {
                "p": [float(v) for v in self.powers.amplitudes],
                "pt": self.powers.total_energy,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        geo = RadarGeometry(
            tx_positions=data["geometry"]["tx"], rx_positions=data["geometry"]["rx"]
        )
        wf = dict(data["waveform"])
        waveform = WaveformParams(
            fc=float(wf["fc"]),
            T=float(wf["T"]),
            Tp=float(wf["Tp"]),
            Ts=float(wf["Ts"]),
            Ns=int(wf["Ns"]),
            Np=int(wf["Np"]),
            doppler_time_base=wf.get("doppler_time_base", "Tp"),
        )
        grid = EstimationGrid(
            x_vals=data["grid"]["x"],
            y_vals=data["grid"]["y"],
            vx_vals=data["grid"]["vx"],
            vy_vals=data["grid"]["vy"],
        )
        targets = []
        for t in data.get("targets", []):
            beta = None
            if "beta" in t:
                beta = np.array(
                    [[complex(re, im) for re, im in row] for row in t["beta"]]
                )
            dist = None
            if "beta_dist" in t:
                dist = BetaDistribution(
                    mean=float(t["beta_dist"]["mean"]), var=float(t["beta_dist"]["var"])
                )
            targets.append(
                Target(position=t["p"], velocity=t["v"], attenuation=beta, beta_dist=dist)
            )
        powers = None
        pw = data.get("powers")
        if pw:
            pt = pw.get("pt")
            if "p" in pw:
                powers = PowerAllocation(
                    amplitudes=np.asarray(pw["p"], dtype=float),
                    total_energy=float(pt) if pt is not None else None,
                )
            elif pt is not None:
                powers = PowerAllocation.uniform(geo.n_tx, total_energy=float(pt))
        return cls(
            geometry=geo,
            waveform=waveform,
            grid=grid,
            targets=tuple(targets),
            enr_db=float(data["enr_db"]),
            powers=powers,
        )

    @classmethod
    def from_file(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def canonical_hash(self) -> bytes:
        """SHA-256 over the canonical JSON form; used by binary caches."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).digest()


# ------------------------------------------------------------- operations
def enumerate_grid(grid: EstimationGrid) -> list:
    """All grid tuples in canonical order (x, then y, then vx, then vy)."""
    return [
        (x, y, vx, vy)
        for x in grid.x_vals
        for y in grid.y_vals
        for vx in grid.vx_vals
        for vy in grid.vy_vals
    ]


def ground_truth_vector(scenario: Scenario) -> BlockSparseVector:
    """Block-sparse coefficient vector with each target's attenuation in its
    grid block. Every target must sit exactly on a distinct grid point."""
    d = scenario.block_len
    values = np.zeros(scenario.grid.size * d, dtype=complex)
    seen = set()
    for t in scenario.targets:
        try:
            h = scenario.grid.index_of(t.position + t.velocity)
        except ValueError as exc:
            raise ValueError(f"target not on grid: {t.position}, {t.velocity}") from exc
        if h in seen:
            raise ValueError(f"two targets share grid block {h}")
        seen.add(h)
        values[h * d : (h + 1) * d] = t.beta_block()
    return BlockSparseVector(values=values, block_len=d)


def noise_variance(enr_db: float, n_rx: int) -> float:
    """Per-complex-sample noise variance for a given energy-to-noise ratio
    in dB (split equally between quadratures)."""
    if n_rx < 1:
        raise ValueError("n_rx must be >= 1")
    return 1.0 / (n_rx * 10.0 ** (enr_db / 10.0))


def axis_scales(grid: EstimationGrid) -> np.ndarray:
    """Per-axis normalization for nearest-point search: the tick spacing,
    or 1 for singleton axes."""
    scales = []
    for axis in grid.axes():
        if len(axis) > 1:
            scales.append(float(np.median(np.diff(axis))))
        else:
            scales.append(1.0)
    return np.asarray(scales)


def nearest_grid_block(grid: EstimationGrid, target: Target) -> int:
    """Grid index minimizing the per-axis-normalized Euclidean distance to
    the target's (position, velocity); ties go to the smallest index."""
    pts = np.asarray(enumerate_grid(grid))
    query = np.asarray(target.position + target.velocity)
    dist = np.sum(((pts - query) / axis_scales(grid)) ** 2, axis=1)
    return int(np.argmin(dist))
