"""Binary checkpoint format with bit-exact round trip.

Layout (all little-endian):

    magic   4 bytes  b"NSCH"
    version u16      currently 1
    dim     u16
    modes   u32      modes_per_dim of the grid
    m       u32      velocity Galerkin order
    n       u32      concentration Galerkin order
    K       u32      noise truncation
    t       f64      simulation time
    rho     complex128 block, band layout, C order
    w       complex128 block, (dim,) + band layout
    c       complex128 block, band layout
    rng     PCG64 position: state u128, inc u128, has_uint32 u32, uinteger u32

The generator block captures the exact stream position, so a restart replays
the remaining increments bit-identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .scheme import SchemeState, recover_velocity
from .spectral import SpectralField, TorusGrid, norm_l2, zeros

__all__ = ["CheckpointMeta", "save_checkpoint", "load_checkpoint"]

MAGIC = b"NSCH"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIId")


@dataclass(frozen=True)
class CheckpointMeta:
    dim: int
    modes_per_dim: int
    m: int
    n: int
    noise_modes: int


def _coeff_bytes(f: SpectralField) -> bytes:
    return np.ascontiguousarray(f.coeffs).astype("<c16", copy=False).tobytes()


def save_checkpoint(path, state: SchemeState, rng: np.random.Generator, m: int, n: int, noise_modes: int):
    grid = state.rho.grid
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise CheckpointError(f"unsupported generator {st['bit_generator']}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.dim, grid.modes_per_dim, m, n, noise_modes, state.t))
        fh.write(_coeff_bytes(state.rho))
        fh.write(_coeff_bytes(state.w))
        fh.write(_coeff_bytes(state.c))
        fh.write(st["state"]["state"].to_bytes(16, "little"))
        fh.write(st["state"]["inc"].to_bytes(16, "little"))
        fh.write(struct.pack("<II", st["has_uint32"], st["uinteger"]))


def _read_block(fh, shape) -> np.ndarray:
    count = int(np.prod(shape))
    raw = fh.read(count * 16)
    if len(raw) != count * 16:
        raise CheckpointError("truncated coefficient block")
    return np.frombuffer(raw, dtype="<c16").astype(np.complex128).reshape(shape)


def load_checkpoint(path) -> tuple[SchemeState, np.random.Generator, CheckpointMeta]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CheckpointError("truncated header")
        magic, version, dim, modes, m, n, noise_modes, t = _HEADER.unpack(head)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CheckpointError(f"unsupported version {version}")
        grid = TorusGrid(dim=dim, modes_per_dim=modes)
        band = grid.band_shape
        rho = SpectralField(grid, _read_block(fh, (1,) + band))
        w = SpectralField(grid, _read_block(fh, (dim,) + band))
        c = SpectralField(grid, _read_block(fh, (1,) + band))
        raw = fh.read(40)
        if len(raw) != 40:
            raise CheckpointError("truncated generator state")
        state_int = int.from_bytes(raw[:16], "little")
        inc_int = int.from_bytes(raw[16:32], "little")
        has_uint32, uinteger = struct.unpack("<II", raw[32:40])
        if fh.read(1):
            raise CheckpointError("trailing bytes after checkpoint payload")
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": state_int, "inc": inc_int},
        "has_uint32": has_uint32,
        "uinteger": uinteger,
    }
    rng = np.random.Generator(bg)
    # the velocity is not stored: it is the unique order-m solution of
    # P_m(rho u) = w, and the recovery is deterministic, so a restart is
    # bit-identical to the uninterrupted run
    if norm_l2(w) == 0.0:
        u = zeros(grid, grid.dim)
    else:
        u, _ = recover_velocity(rho, w, m)
    state = SchemeState(t=t, rho=rho, w=w, u=u, c=c)
    return state, rng, CheckpointMeta(dim, modes, m, n, noise_modes)
