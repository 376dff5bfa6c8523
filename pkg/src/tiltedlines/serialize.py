"""Versioned binary checkpoints and CSV export for ensemble states."""

import io
import json
import struct

import numpy as np

from .model import (BoundaryKind, BoundarySpec, EnsembleState, GridInterval,
                    TiltParams)

MAGIC = b"TLCK"
VERSION = 1


class CheckpointError(IOError):
    pass


def _header_dict(state: EnsembleState, extra: dict) -> dict:
    b = state.boundary
    hdr = {
        "version": VERSION,
        "n_lines": state.n_lines,
        "grid": {"ell": state.grid.ell, "r": state.grid.r, "steps": state.grid.steps},
        "tilt": {"a": state.tilt.a, "lam": state.tilt.lam,
                 "diagnostic": state.tilt.diagnostic},
        "boundary": {"kind": b.kind.value,
                     "left": None if b.left is None else list(map(float, b.left)),
                     "right": None if b.right is None else list(map(float, b.right))},
        "extra": extra or {},
    }
    return hdr


def dump_state(state: EnsembleState, path, extra: dict = None) -> None:
    """Write a checkpoint: magic, version, JSON header, then raw float64 arrays."""
    hdr = json.dumps(_header_dict(state, extra), sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(hdr)))
        f.write(hdr)
        for arr in (state.heights, state.floor, state.ceiling):
            f.write(np.ascontiguousarray(arr, np.float64).tobytes())
        f.write(np.ascontiguousarray(state.frozen_cols, np.uint8).tobytes())


def load_state(path):
    """Read a checkpoint; returns (EnsembleState, extra dict)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        hdr = json.loads(f.read(hlen).decode())
        n = hdr["n_lines"]
        grid = GridInterval(**hdr["grid"])
        tilt = TiltParams(**hdr["tilt"])
        bk = hdr["boundary"]
        left = None if bk["left"] is None else np.asarray(bk["left"], float)
        right = None if bk["right"] is None else np.asarray(bk["right"], float)
        boundary = BoundarySpec(BoundaryKind(bk["kind"]), left, right)
        npts = grid.npoints
        heights = np.frombuffer(f.read(8 * n * npts)).reshape(n, npts).copy()
        floor = np.frombuffer(f.read(8 * npts)).copy()
        ceiling = np.frombuffer(f.read(8 * npts)).copy()
        frozen = np.frombuffer(f.read(npts), np.uint8).astype(bool)
    state = EnsembleState(grid, heights, boundary, tilt, floor, ceiling, frozen)
    return state, hdr["extra"]


def state_to_csv(state: EnsembleState) -> str:
    """CSV rows (line_index, t, height); line_index is 1-based."""
    t = state.grid.times()
    buf = io.StringIO()
    buf.write("line_index,t,height\n")
    for i in range(state.n_lines):
        for j in range(state.grid.npoints):
            buf.write(f"{i + 1},{t[j]!r},{state.heights[i, j]!r}\n")
    return buf.getvalue()


def write_state_csv(state: EnsembleState, path) -> None:
    with open(path, "w") as f:
        f.write(state_to_csv(state))
