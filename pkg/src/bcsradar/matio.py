"""Binary matrix cache files: fixed header + row-major payload.

Header layout (little endian):
    8s  magic ``BCSMAT1\\0``
    16s kind tag (zero padded ascii)
    B   dtype code (0=complex128, 1=complex64, 2=float64)
    7x  padding
    4Q  rows, cols, block_count, block_len
    32s row-order tag (zero padded ascii)
    32s scenario hash (sha256 digest)
"""

from __future__ import annotations

import struct

import numpy as np

_MAGIC = b"BCSMAT1\x00"
_HEADER = struct.Struct("<8s16sB7x4Q32s32s")
_DTYPES = {0: np.complex128, 1: np.complex64, 2: np.float64}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def write_matrix(
    path,
    matrix: np.ndarray,
    kind: str,
    scenario_hash: bytes = b"",
    block_count: int = 0,
    block_len: int = 0,
    row_order: str = "",
) -> None:
    mat = np.ascontiguousarray(matrix)
    if mat.dtype not in _CODES:
        raise ValueError(f"unsupported dtype {mat.dtype}")
    header = _HEADER.pack(
        _MAGIC,
        kind.encode().ljust(16, b"\x00"),
        _CODES[mat.dtype],
        mat.shape[0],
        mat.shape[1],
        block_count,
        block_len,
        row_order.encode().ljust(32, b"\x00"),
        scenario_hash.ljust(32, b"\x00"),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(mat.tobytes())


def read_matrix(path, expect_kind: str | None = None, scenario_hash: bytes | None = None):
    """Load a matrix file, returning (matrix, meta dict).

    Verifies the magic, the kind tag when given, and the scenario hash when
    given (mismatch raises ValueError).
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError("truncated matrix file")
        magic, kind, code, rows, cols, bc, bl, order, digest = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError("not a matrix cache file")
        kind = kind.rstrip(b"\x00").decode()
        order = order.rstrip(b"\x00").decode()
        if expect_kind is not None and kind != expect_kind:
            raise ValueError(f"expected kind {expect_kind!r}, found {kind!r}")
        if scenario_hash is not None and digest != scenario_hash.ljust(32, b"\x00"):
            raise ValueError("scenario hash mismatch: file built for another scenario")
        dtype = _DTYPES[code]
        data = np.frombuffer(fh.read(), dtype=dtype)
        if data.size != rows * cols:
            raise ValueError("payload size mismatch")
    meta = {
        "kind": kind,
        "rows": rows,
        "cols": cols,
        "block_count": bc,
        "block_len": bl,
        "row_order": order,
        "scenario_hash": digest,
    }
    return data.reshape(rows, cols).copy(), meta
