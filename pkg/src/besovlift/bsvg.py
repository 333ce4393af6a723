"""Binary grid file format.

Layout (little endian): ``b"BSVG"``, u16 version (=1), u8 dim, u8 level,
u8 domain (0 torus, 1 cube), u8 dtype (0 real, 1 complex), two zero bytes,
then float64 payload, complex values interleaved as (re, im), lexicographic
order with the last coordinate fastest.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BSVGFormatError
from .grid import Domain, GridFunction, make_grid

MAGIC = b"BSVG"
VERSION = 1
_HEADER = struct.Struct("<4sHBBBB2s")


def encode(f: GridFunction, *, force_complex: bool = False) -> bytes:
    cplx = f.is_complex or force_complex
    header = _HEADER.pack(MAGIC, VERSION, f.dim, f.level, int(f.grid.domain), int(cplx), b"\x00\x00")
    if cplx:
        payload = np.ascontiguousarray(f.values, dtype="<c16").reshape(-1).view("<f8")
    else:
        payload = np.ascontiguousarray(f.values, dtype="<f8").reshape(-1)
    return header + payload.tobytes()


def decode(data: bytes) -> GridFunction:
    if len(data) < _HEADER.size:
        raise BSVGFormatError("file shorter than the BSVG header")
    magic, version, dim, level, domain, dtype, reserved = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BSVGFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BSVGFormatError(f"unsupported version {version}")
    if reserved != b"\x00\x00":
        raise BSVGFormatError("reserved header bytes must be zero")
    if dtype not in (0, 1) or domain not in (0, 1):
        raise BSVGFormatError("bad dtype or domain byte")
    grid = make_grid(dim, level, Domain(domain))
    count = grid.size * (2 if dtype else 1)
    body = data[_HEADER.size :]
    if len(body) != 8 * count:
        raise BSVGFormatError(f"payload has {len(body)} bytes, expected {8 * count}")
    vals = np.frombuffer(body, dtype="<f8")
    if dtype:
        vals = vals.view("<c16")
    return GridFunction(grid, vals.astype(np.complex128 if dtype else np.float64))


def write(path, f: GridFunction, *, force_complex: bool = False) -> None:
    Path(path).write_bytes(encode(f, force_complex=force_complex))


def read(path) -> GridFunction:
    return decode(Path(path).read_bytes())
