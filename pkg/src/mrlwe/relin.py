"""Key homomorphisms: relinearization and unattended ring-structure switching.

A key homomorphism from ``s`` to ``s'`` with base T is the list of pairs

    h_i = (a_i, b_i = -(s' a_i + t e_i) + T^i s),   i < ceil(log_T q)

so that for the base-T digits d_i of any c, sum_i d_i (b_i + a_i s') = c s - t sum_i d_i e_i.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._modarith import modulus as _montgomery, tree_sum
from .errors import ParameterError, StructureError
from .ring import (MultiPoly, RingMapping, RingParams, decompose_array, negacyclic_mul,
                   ntt_array, num_digits, remap, remap_array, scalar_mul)
from .she import Ciphertext, NoiseParams, SecretKey, sample_integers, sample_noise

U64 = np.uint64


def _default_base(params: RingParams, T: int | None) -> int:
    T = params.t if T is None else int(T)
    if not 2 <= T < params.q:
        raise ParameterError(f"base T={T} outside [2, q)")
    return T


def _hom_dot(digits: np.ndarray, hom_ntt: np.ndarray, q: int, shape) -> np.ndarray:
    """sum_k digits[k] * hom[k] over the leading axis; hom given in NTT form."""
    fd = ntt_array(digits, q, shape)
    prods = _montgomery(q).mul(fd, hom_ntt)
    return tree_sum(prods, q)


@dataclass(frozen=True, eq=False)
class RelinKey:
    base: int
    hom: tuple[tuple[MultiPoly, MultiPoly], ...]
    params: RingParams

    @cached_property
    def _ntt(self):
        q, shape = self.params.q, self.params.shape
        a = np.stack([p[0].data for p in self.hom])
        b = np.stack([p[1].data for p in self.hom])
        return ntt_array(a, q, shape), ntt_array(b, q, shape)

    @property
    def size_coeffs(self) -> int:
        return 2 * len(self.hom) * self.params.n


def square_key(sk: SecretKey) -> MultiPoly:
    return negacyclic_mul(sk.s, sk.s)


def gen_relin_key(sk_src, sk_dst: SecretKey, T: int | None = None,
                  noise: NoiseParams | None = None, rng: np.random.Generator | None = None) -> RelinKey:
    """Pseudo-encrypt ``sk_src`` (a SecretKey or a raw polynomial such as s^2) under ``sk_dst``."""
    params = sk_dst.params
    src = sk_src.s if isinstance(sk_src, SecretKey) else sk_src
    if isinstance(sk_src, SecretKey) and sk_src.params != params:
        raise StructureError("relinearization keys must share one ring")
    if src.shape != params.shape or src.modulus != params.q:
        raise StructureError("source key does not live in the destination ring")
    noise = noise or NoiseParams()
    rng = rng if rng is not None else np.random.default_rng()
    T = _default_base(params, T)
    q = params.q
    hom = []
    for i in range(num_digits(q, T)):
        a = MultiPoly.uniform(params.shape, q, rng)
        e = sample_noise(noise, params, rng)
        b = scalar_mul(src, pow(T, i, q)) - (negacyclic_mul(a, sk_dst.s) + scalar_mul(e, params.t))
        hom.append((a, b))
    return RelinKey(T, tuple(hom), params)


def gen_mult_key(sk: SecretKey, T: int | None = None, noise: NoiseParams | None = None,
                 rng: np.random.Generator | None = None) -> RelinKey:
    """Relinearization key for s^2 -> s."""
    return gen_relin_key(square_key(sk), sk, T, noise, rng)


def relinearize(ct: Ciphertext, rk: RelinKey) -> Ciphertext:
    """Three components -> two, same plaintext, additive noise t * sum d_i e_i."""
    if ct.gamma != 3:
        raise StructureError(f"relinearize expects 3 components, got {ct.gamma}")
    if ct.params != rk.params:
        raise StructureError("ciphertext and relinearization key live in different rings")
    params = ct.params
    q, shape = params.q, params.shape
    c0, c1, c2 = ct.comps
    digits = decompose_array(c2.data, q, rk.base)
    a_ntt, b_ntt = rk._ntt
    sa = _hom_dot(digits, a_ntt, q, shape)
    sb = _hom_dot(digits, b_ntt, q, shape)
    # both accumulators share one inverse transform call
    back = ntt_array(np.stack([sb, sa]), q, shape, inverse=True)
    new0 = c0 + MultiPoly(shape, q, back[0])
    new1 = c1 + MultiPoly(shape, q, back[1])
    return Ciphertext((new0, new1), params, ct.depth)


# structure switching ------------------------------------------------------------

def skew_columns(c: np.ndarray, js: np.ndarray, q: int) -> np.ndarray:
    """Columns j of the block skew-circulant matrix of c, i.e. c * x^j for flat
    indices ``js``; wrap signs apply per axis. Returns shape (len(js),) + c.shape."""
    shape = c.shape
    m = len(shape)
    js = np.asarray(js, dtype=np.int64)
    multi = np.unravel_index(js, shape)
    idx = []
    neg = np.zeros((len(js),) + shape, dtype=bool)
    for a, n in enumerate(shape):
        k = np.arange(n)
        ja = multi[a][:, None]
        bshape = [len(js)] + [1] * m
        bshape[1 + a] = n
        idx.append(((k[None, :] - ja) % n).reshape(bshape))
        neg ^= (k[None, :] < ja).reshape(bshape)
    vals = c[tuple(idx)]
    return np.where(neg & (vals != 0), U64(q) - vals, vals)


@dataclass(frozen=True, eq=False)
class StructureKey:
    """Grid of key homomorphisms: entry (j, i) pseudo-encrypts T^i * s_j under remap(s).

    ``a_grid`` and ``b_grid`` have shape (n, L) + target shape, j outer, i inner.
    """

    base: int
    mapping: RingMapping
    source: RingParams
    target: RingParams
    a_grid: np.ndarray = field(repr=False)
    b_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        L = num_digits(self.source.q, self.base)
        want = (self.source.n, L) + self.target.shape
        for g in (self.a_grid, self.b_grid):
            if g.shape != want:
                raise StructureError(f"hom grid shape {g.shape} != {want}")

    @property
    def digits(self) -> int:
        return self.a_grid.shape[1]

    @property
    def size_coeffs(self) -> int:
        return 2 * self.source.n * self.digits * self.target.n

    def pair(self, j: int, i: int) -> tuple[MultiPoly, MultiPoly]:
        q = self.target.q
        return (MultiPoly(self.target.shape, q, self.a_grid[j, i]),
                MultiPoly(self.target.shape, q, self.b_grid[j, i]))

    @cached_property
    def _ntt(self):
        q, shape = self.target.q, self.target.shape
        return ntt_array(self.a_grid, q, shape), ntt_array(self.b_grid, q, shape)


def target_params(source: RingParams, mapping: RingMapping) -> RingParams:
    if mapping.source != source.shape:
        raise StructureError(f"mapping source {mapping.source} != ring shape {source.shape}")
    return RingParams(mapping.target, source.q, source.t)


def remap_secret_key(sk: SecretKey, mapping: RingMapping) -> SecretKey:
    return SecretKey(remap(sk.s, mapping), target_params(sk.params, mapping))


def gen_structure_key(sk_src: SecretKey, sk_dst: SecretKey, mapping: RingMapping,
                      T: int | None = None, noise: NoiseParams | None = None,
                      rng: np.random.Generator | None = None) -> StructureKey:
    src, dst = sk_src.params, sk_dst.params
    if mapping.source != src.shape or mapping.target != dst.shape:
        raise StructureError("mapping shapes do not match the two keys")
    if (src.q, src.t) != (dst.q, dst.t):
        raise StructureError("source and target rings must share q and t")
    if sk_dst.s != remap(sk_src.s, mapping):
        raise StructureError("destination key must be the remapped source key")
    noise = noise or NoiseParams()
    rng = rng if rng is not None else np.random.default_rng()
    T = _default_base(src, T)
    q, t = src.q, src.t
    n, L = src.n, num_digits(q, T)
    tshape = dst.shape
    mod = _montgomery(q)
    a_grid = rng.integers(0, q, size=(n, L) + tshape, dtype=U64)
    e = sample_integers(noise, (n, L) + tshape, rng).astype(np.int64)
    te = np.where(e < 0, e * t + q, e * t).astype(U64)
    s_ntt = ntt_array(sk_dst.s.data, q, tshape)
    as_prod = ntt_array(mod.mul(ntt_array(a_grid, q, tshape), s_ntt), q, tshape, inverse=True)
    b_grid = mod.neg(mod.add(as_prod, te))
    # add the scalar T^i * s_j to the constant coefficient
    s_coeffs = [int(v) for v in sk_src.s.coeffs]
    const = np.array([[s_coeffs[j] * pow(T, i, q) % q for i in range(L)] for j in range(n)],
                     dtype=U64).reshape((n, L) + (1,) * len(tshape))
    origin = (slice(None), slice(None)) + (slice(0, 1),) * len(tshape)
    b_grid[origin] = mod.add(b_grid[origin], const)
    return StructureKey(T, mapping, src, dst, a_grid, b_grid)


def switch_structure(ct: Ciphertext, stk: StructureKey, chunk: int = 64) -> Ciphertext:
    """Re-express a 2-component ciphertext over the target ring of ``stk``.

    The result decrypts under remap(s) to remap(m).
    """
    if ct.gamma != 2:
        raise StructureError(f"structure switching needs 2 components (relinearize first), got {ct.gamma}")
    if ct.params != stk.source:
        raise StructureError("ciphertext ring does not match the structure key source")
    q = ct.params.q
    tshape = stk.target.shape
    c0, c1 = ct.comps
    a_ntt, b_ntt = stk._ntt
    mod = _montgomery(q)
    acc_a = acc_b = None
    for start in range(0, ct.params.n, chunk):
        js = np.arange(start, min(start + chunk, ct.params.n))
        cols = remap_array(skew_columns(c1.data, js, q), stk.mapping)
        digits = decompose_array(cols, q, stk.base)          # (L, k, *tshape)
        digits = np.swapaxes(digits, 0, 1).reshape((-1,) + tshape)
        fa = a_ntt[js].reshape((-1,) + tshape)
        fb = b_ntt[js].reshape((-1,) + tshape)
        sa = _hom_dot(digits, fa, q, tshape)
        sb = _hom_dot(digits, fb, q, tshape)
        acc_a = sa if acc_a is None else mod.add(acc_a, sa)
        acc_b = sb if acc_b is None else mod.add(acc_b, sb)
    back = ntt_array(np.stack([acc_b, acc_a]), q, tshape, inverse=True)
    new0 = remap(c0, stk.mapping) + MultiPoly(tshape, q, back[0])
    new1 = MultiPoly(tshape, q, back[1])
    return Ciphertext((new0, new1), stk.target, ct.depth)
