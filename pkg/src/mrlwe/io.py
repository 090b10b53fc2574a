"""File formats: the MRLW container for keys/ciphertexts, PGM (P5) and raw3d signals.

MRLW container (all integers little-endian)::

    b"MRLW" | version u16 | m u64 | degrees m*u64 | q u64 | t u64
    | gamma u64 | gamma arrays of n u64 residues (row-major) | extension words u64*

Ciphertexts, secret keys (gamma=1) and public keys (gamma=2) carry no
extension words. Relinearization keys store (a_i, b_i) interleaved and the
extension ``[T]``; structure keys store (a_ji, b_ji) with j outer, i inner,
under the source ring header, and the extension
``[T, k, target degrees (k words), perm (n words)]``.
"""
from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import WireFormatError
from .relin import RelinKey, StructureKey
from .ring import MultiPoly, RingMapping, RingParams, num_digits
from .she import Ciphertext, PublicKey, SecretKey

MAGIC = b"MRLW"
VERSION = 1
_LE = np.dtype("<u8")


def pack_container(params: RingParams, polys: Sequence[np.ndarray], extension: Sequence[int] = ()) -> bytes:
    head = [MAGIC, struct.pack("<H", VERSION), struct.pack("<Q", params.m)]
    head += [struct.pack("<Q", d) for d in params.degrees]
    head += [struct.pack("<QQQ", params.q, params.t, len(polys))]
    body = [np.ascontiguousarray(np.asarray(p, dtype=np.uint64).reshape(-1), dtype=_LE).tobytes() for p in polys]
    ext = np.asarray(list(extension), dtype=_LE).tobytes()
    return b"".join(head + body) + ext


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.buf):
            raise WireFormatError("truncated MRLW data")
        out = self.buf[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def unpack_container(buf: bytes):
    """-> (params, list of flat uint64 arrays, extension words)."""
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise WireFormatError("bad magic, not an MRLW file")
    (version,) = struct.unpack("<H", r.take(2))
    if version != VERSION:
        raise WireFormatError(f"unsupported MRLW version {version}")
    m = r.u64()
    if not 1 <= m <= 64:
        raise WireFormatError(f"implausible variable count {m}")
    degrees = tuple(r.u64() for _ in range(m))
    q, t = r.u64(), r.u64()
    try:
        params = RingParams(degrees, q, t)
    except ValueError as exc:
        raise WireFormatError(f"invalid ring parameters: {exc}") from exc
    gamma = r.u64()
    n = params.n
    if gamma * n * 8 > len(buf) - r.pos:
        raise WireFormatError("truncated MRLW payload")
    polys = []
    for _ in range(gamma):
        arr = np.frombuffer(r.take(8 * n), dtype=_LE).astype(np.uint64)
        if arr.size and int(arr.max()) >= q:
            raise WireFormatError("residue not reduced modulo q")
        polys.append(arr)
    rest = buf[r.pos:]
    if len(rest) % 8:
        raise WireFormatError("trailing bytes are not whole 8-byte words")
    ext = [int(v) for v in np.frombuffer(rest, dtype=_LE)]
    return params, polys, ext


def _poly(params: RingParams, arr: np.ndarray) -> MultiPoly:
    return MultiPoly(params.shape, params.q, arr)


def dump_ciphertext(ct: Ciphertext) -> bytes:
    return pack_container(ct.params, [c.data for c in ct.comps])


def load_ciphertext(buf: bytes) -> Ciphertext:
    params, polys, ext = unpack_container(buf)
    if len(polys) < 2 or ext:
        raise WireFormatError("not a ciphertext container")
    # depth is not serialized; a chain of unrelinearized products has gamma - 2
    return Ciphertext(tuple(_poly(params, p) for p in polys), params, len(polys) - 2)


def dump_secret_key(sk: SecretKey) -> bytes:
    return pack_container(sk.params, [sk.s.data])


def load_secret_key(buf: bytes) -> SecretKey:
    params, polys, ext = unpack_container(buf)
    if len(polys) != 1 or ext:
        raise WireFormatError("not a secret key container")
    return SecretKey(_poly(params, polys[0]), params)


def dump_public_key(pk: PublicKey) -> bytes:
    return pack_container(pk.params, [pk.a0.data, pk.a1.data])


def load_public_key(buf: bytes) -> PublicKey:
    params, polys, ext = unpack_container(buf)
    if len(polys) != 2 or ext:
        raise WireFormatError("not a public key container")
    return PublicKey(_poly(params, polys[0]), _poly(params, polys[1]), params)


def dump_relin_key(rk: RelinKey) -> bytes:
    polys = [p.data for pair in rk.hom for p in pair]
    return pack_container(rk.params, polys, [rk.base])


def load_relin_key(buf: bytes) -> RelinKey:
    params, polys, ext = unpack_container(buf)
    if len(ext) != 1 or len(polys) % 2:
        raise WireFormatError("not a relinearization key container")
    T = ext[0]
    if len(polys) != 2 * num_digits(params.q, T):
        raise WireFormatError("relinearization key has the wrong number of digits")
    hom = tuple((_poly(params, polys[2 * i]), _poly(params, polys[2 * i + 1])) for i in range(len(polys) // 2))
    return RelinKey(T, hom, params)


def dump_structure_key(stk: StructureKey) -> bytes:
    n, L = stk.source.n, stk.digits
    pairs = np.stack([stk.a_grid.reshape(n, L, -1), stk.b_grid.reshape(n, L, -1)], axis=2)
    polys = list(pairs.reshape(-1, stk.target.n))
    ext = [stk.base, stk.target.m, *stk.target.degrees, *[int(v) for v in stk.mapping.perm]]
    return pack_container(stk.source, polys, ext)


def load_structure_key(buf: bytes) -> StructureKey:
    src, polys, ext = unpack_container(buf)
    if len(ext) < 2:
        raise WireFormatError("not a structure key container")
    T, k = ext[0], ext[1]
    if len(ext) != 2 + k + src.n:
        raise WireFormatError("structure key extension has the wrong length")
    tdeg = tuple(ext[2:2 + k])
    perm = np.array(ext[2 + k:], dtype=np.int64)
    try:
        dst = RingParams(tdeg, src.q, src.t)
        mapping = RingMapping(src.shape, tdeg, perm)
    except ValueError as exc:
        raise WireFormatError(f"invalid structure key: {exc}") from exc
    L = num_digits(src.q, T)
    if len(polys) != 2 * src.n * L:
        raise WireFormatError("structure key grid has the wrong size")
    grid = np.stack(polys).reshape((src.n, L, 2) + tdeg)
    return StructureKey(T, mapping, src, dst, np.ascontiguousarray(grid[:, :, 0]),
                        np.ascontiguousarray(grid[:, :, 1]))


# signals ---------------------------------------------------------------------

def _pgm_tokens(buf: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 2
    while len(tokens) < count:
        if pos >= len(buf):
            raise WireFormatError("truncated PGM header")
        c = buf[pos:pos + 1]
        if c == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise WireFormatError("truncated PGM header")
            pos = end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(buf) and not buf[pos:pos + 1].isspace():
                pos += 1
            tokens.append(buf[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte before the raster


def parse_pgm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P5":
        raise WireFormatError("not a binary PGM (P5) file")
    tokens, pos = _pgm_tokens(buf, 3)
    try:
        w, h, maxval = (int(tok) for tok in tokens)
    except ValueError as exc:
        raise WireFormatError("malformed PGM header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise WireFormatError("PGM dimensions or maxval out of range")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = w * h * dtype.itemsize
    if len(buf) - pos < need:
        raise WireFormatError("truncated PGM raster")
    return np.frombuffer(buf[pos:pos + need], dtype=dtype).reshape(h, w).astype(np.int64)


def format_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0 or img.min() < 0 or img.max() > 65535:
        raise WireFormatError("PGM needs a 2-D array with values in [0, 65535]")
    maxval = max(int(img.max()), 1)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    h, w = img.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode() + img.astype(dtype).tobytes()


def parse_raw3d(buf: bytes) -> np.ndarray:
    if len(buf) < 12:
        raise WireFormatError("truncated raw3d header")
    dims = struct.unpack("<III", buf[:12])
    if 0 in dims:
        raise WireFormatError("raw3d dimension is zero")
    need = 2 * math.prod(dims)
    if len(buf) - 12 < need:
        raise WireFormatError("truncated raw3d samples")
    return np.frombuffer(buf[12:12 + need], dtype="<u2").reshape(dims).astype(np.int64)


def format_raw3d(vol: np.ndarray) -> bytes:
    vol = np.asarray(vol)
    if vol.ndim != 3 or vol.min() < 0 or vol.max() > 65535:
        raise WireFormatError("raw3d needs a 3-D array with values in [0, 65535]")
    return struct.pack("<III", *vol.shape) + vol.astype("<u2").tobytes()


def ingest(path, fmt: str | None = None, t: int | None = None) -> np.ndarray:
    """Read a PGM or raw3d signal; values must lie below t when t is given."""
    path = Path(path)
    fmt = fmt or ("pgm" if path.suffix.lower() == ".pgm" else "raw3d")
    buf = path.read_bytes()
    if fmt == "pgm":
        arr = parse_pgm(buf)
    elif fmt == "raw3d":
        arr = parse_raw3d(buf)
    else:
        raise WireFormatError(f"unknown signal format {fmt!r}")
    if t is not None and arr.size and int(arr.max()) >= t:
        raise WireFormatError(f"sample value {int(arr.max())} is not below t={t}")
    return arr


def write_signal(path, arr: np.ndarray, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or {".pgm": "pgm", ".npy": "npy", ".raw": "raw3d", ".raw3d": "raw3d"}.get(path.suffix.lower(), "txt")
    if fmt == "pgm":
        path.write_bytes(format_pgm(arr))
    elif fmt == "raw3d":
        path.write_bytes(format_raw3d(arr))
    elif fmt == "npy":
        np.save(path, np.asarray(arr))
    else:
        np.savetxt(path, np.asarray(arr).reshape(np.asarray(arr).shape[0], -1), fmt="%d")
