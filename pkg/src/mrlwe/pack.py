"""Slot packing along one "index" variable.

A block tensor has shape ``(block dims..., N)``. Pre-processing maps the N
blocks through a length-N number theoretic transform over Z_t followed by a
twist with powers of a 2N-th root eta (eta^N = -1), so that one negacyclic ring
product of two pre-processed tensors, followed by post-processing, yields the
independent block-wise products (linear convolutions in the block variables).

    pre:   X[k] = eta^k * N^-1 * sum_l x[l] alpha^{lk}       alpha = eta^2
    post:  x[l] = sum_k eta^-k X[k] alpha^{-lk}
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy

from .errors import ExistenceError, StructureError
from .ring import MultiPoly, find_root

U64 = np.uint64


@dataclass(frozen=True)
class SlotLayout:
    index_axis: int
    N: int
    t: int
    eta: int
    alpha: int
    N_inv: int

    def __post_init__(self):
        t, N = self.t, self.N
        if pow(self.eta, N, t) != t - 1:
            raise ExistenceError(f"eta={self.eta} is not an N-th root of -1 mod {t}")
        if self.alpha != self.eta * self.eta % t:
            raise ExistenceError("alpha must equal eta^2")
        if N * self.N_inv % t != 1:
            raise ExistenceError("N_inv is not the inverse of N")

    def _matrices(self):
        t, N = self.t, self.N
        eta_inv = pow(self.eta, -1, t)
        alpha_inv = pow(self.alpha, -1, t)
        fwd = [[pow(self.eta, k, t) * self.N_inv * pow(self.alpha, l * k, t) % t for l in range(N)]
               for k in range(N)]
        inv = [[pow(eta_inv, k, t) * pow(alpha_inv, l * k, t) % t for k in range(N)]
               for l in range(N)]
        return np.array(fwd, dtype=object), np.array(inv, dtype=object)


def _check_alpha(alpha: int, N: int, t: int) -> None:
    if math.gcd(alpha, t) != 1 or math.gcd(N, t) != 1:
        raise ExistenceError(f"gcd(alpha, t) or gcd(N, t) is not 1 for t={t}, N={N}")
    for i in range(1, N):
        if math.gcd(pow(alpha, i, t) - 1, t) != 1:
            raise ExistenceError(f"gcd(alpha^{i} - 1, {t}) != 1")


def _brute_eta(t: int, N: int) -> int:
    # composite t: scan residues directly
    for eta in range(2, t):
        if math.gcd(eta, t) != 1 or pow(eta, N, t) != t - 1:
            continue
        try:
            _check_alpha(eta * eta % t, N, t)
        except ExistenceError:
            continue
        return eta
    raise ExistenceError(f"no twist root of order 2*{N} with valid slot transform mod {t}")


def make_layout(t: int, N: int, index_axis: int = -1) -> SlotLayout:
    if N < 1 or N & (N - 1):
        raise ExistenceError(f"slot count N={N} must be a power of two")
    if sympy.isprime(t):
        eta = find_root(t, N, "neg_one")
    elif t < 1 << 20:
        eta = _brute_eta(t, N)
    else:
        raise ExistenceError(f"t={t} is composite and too large to search for slot roots")
    alpha = eta * eta % t
    _check_alpha(alpha, N, t)
    if math.gcd(N, t) != 1:
        raise ExistenceError(f"gcd(N, t) != 1 for N={N}, t={t}")
    return SlotLayout(index_axis, N, t, eta, alpha, pow(N, -1, t))


def _apply_matrix(mat: np.ndarray, x: np.ndarray, t: int) -> np.ndarray:
    """(M x) along the last axis of x, exact mod t."""
    N = mat.shape[0]
    if N * (t - 1) ** 2 < 2 ** 63:
        out = np.tensordot(x.astype(np.int64), mat.astype(np.int64).T, axes=([-1], [0]))
        return np.mod(out, t).astype(np.int64)
    out = np.tensordot(x.astype(object), mat.T, axes=([-1], [0]))
    return np.mod(out, t).astype(np.int64)


def _ring_axis(layout: SlotLayout, ndim: int) -> int:
    return layout.index_axis % ndim


def pre_process(x: np.ndarray, layout: SlotLayout, shape: Sequence[int] | None = None) -> MultiPoly:
    """Block tensor (..., N) -> plaintext polynomial mod t.

    ``shape`` is the ring shape; block dims are zero-padded up to it and the
    slot axis is moved to ``layout.index_axis``.
    """
    x = np.asarray(x)
    if x.shape[-1] != layout.N:
        raise StructureError(f"last axis has {x.shape[-1]} slots, layout expects {layout.N}")
    t = layout.t
    fwd, _ = layout._matrices()
    X = _apply_matrix(fwd, np.mod(x.astype(object), t), t)
    X = np.moveaxis(X, -1, _ring_axis(layout, X.ndim))
    if shape is None:
        shape = X.shape
    shape = tuple(shape)
    if len(shape) != X.ndim or any(a > b for a, b in zip(X.shape, shape)):
        raise StructureError(f"block tensor {X.shape} does not fit ring shape {shape}")
    if shape[_ring_axis(layout, len(shape))] != layout.N:
        raise StructureError("ring degree of the index axis must equal N")
    data = np.zeros(shape, dtype=U64)
    data[tuple(slice(0, s) for s in X.shape)] = X.astype(U64)
    return MultiPoly(shape, t, data)


def post_process(p: MultiPoly, layout: SlotLayout) -> np.ndarray:
    """Plaintext polynomial -> block tensor (..., N) with entries in [0, t)."""
    if p.modulus != layout.t:
        raise StructureError(f"polynomial modulus {p.modulus} != t={layout.t}")
    ax = _ring_axis(layout, len(p.shape))
    if p.shape[ax] != layout.N:
        raise StructureError(f"index axis has degree {p.shape[ax]}, layout expects {layout.N}")
    _, inv = layout._matrices()
    X = np.moveaxis(p.data.astype(np.int64), ax, -1)
    return _apply_matrix(inv, X, layout.t)


def broadcast_block(block: np.ndarray, N: int) -> np.ndarray:
    """Same filter for every slot."""
    block = np.asarray(block)
    return np.repeat(block[..., None], N, axis=-1)


def pack_blocks(image: np.ndarray, block_h: int, block_w: int, pad: bool = False) -> np.ndarray:
    """Tile a 2-D image into non-overlapping blocks, raster order on the last axis."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise StructureError("pack_blocks expects a 2-D image")
    H, W = image.shape
    if H % block_h or W % block_w:
        if not pad:
            raise StructureError(f"image {image.shape} not divisible into {block_h}x{block_w} blocks")
        H2 = -(-H // block_h) * block_h
        W2 = -(-W // block_w) * block_w
        image = np.pad(image, ((0, H2 - H), (0, W2 - W)))
        H, W = H2, W2
    rows, cols = H // block_h, W // block_w
    tiles = image.reshape(rows, block_h, cols, block_w).transpose(1, 3, 0, 2)
    return tiles.reshape(block_h, block_w, rows * cols)


def unpack_blocks(bt: np.ndarray, image_dims: Sequence[int]) -> np.ndarray:
    bt = np.asarray(bt)
    H, W = image_dims
    bh, bw, N = bt.shape
    if H % bh or W % bw or (H // bh) * (W // bw) != N:
        raise StructureError(f"{N} blocks of {bh}x{bw} cannot form a {H}x{W} image")
    rows, cols = H // bh, W // bw
    return bt.reshape(bh, bw, rows, cols).transpose(2, 0, 3, 1).reshape(H, W)
