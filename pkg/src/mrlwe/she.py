"""Somewhat-homomorphic encryption over R_q[x_1..x_m] with a BGV-style plaintext in the low bits.

KeyGen:  s, e <- chi;  a1 <- R_q;  pk = (a0 = -(a1 s + t e), a1)
Enc:     (c0, c1) = (a0 u + t g + m, a1 u + t f),  u, f, g <- chi
Dec:     [[sum_i c_i s^i]_q]_t  with a centered lift before reducing mod t
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DepthError, ParameterError, StructureError
from .ring import (MultiPoly, RingParams, negacyclic_mul, ntt_array, pointwise_mul_array,
                   reduce_mod, scalar_mul)

U64 = np.uint64


@dataclass(frozen=True)
class NoiseParams:
    """Truncated discrete Gaussian: P(x) ~ exp(-x^2 / 2 sigma^2), |x| <= trunc_B * sigma."""

    sigma: float = 1.0
    trunc_B: float = 6.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not self.trunc_B > 0:
            raise ParameterError(f"trunc_B must be positive, got {self.trunc_B}")

    @property
    def s(self) -> float:
        return self.sigma * math.sqrt(2 * math.pi)

    @property
    def bound(self) -> int:
        return int(math.floor(self.trunc_B * self.sigma))

    @classmethod
    def from_s(cls, s: float, trunc_B: float = 6.0) -> "NoiseParams":
        return cls(s / math.sqrt(2 * math.pi), trunc_B)


@lru_cache(maxsize=32)
def _cdt(sigma: float, bound: int):
    support = np.arange(-bound, bound + 1)
    w = np.exp(-support.astype(float) ** 2 / (2 * sigma * sigma))
    return support, w / w.sum()


def sample_integers(noise: NoiseParams, size, rng: np.random.Generator) -> np.ndarray:
    """Signed int64 samples from the truncated discrete Gaussian."""
    support, p = _cdt(noise.sigma, noise.bound)
    return rng.choice(support, size=size, p=p)


def sample_noise(noise: NoiseParams, params: RingParams, rng: np.random.Generator) -> MultiPoly:
    vals = sample_integers(noise, params.shape, rng)
    return _signed_poly(vals, params.q)


def _signed_poly(vals: np.ndarray, q: int) -> MultiPoly:
    v = vals.astype(np.int64)
    data = np.where(v < 0, (v + q), v).astype(U64)
    return MultiPoly(vals.shape, q, data)


@dataclass(frozen=True)
class SecretKey:
    s: MultiPoly
    params: RingParams


@dataclass(frozen=True)
class PublicKey:
    a0: MultiPoly
    a1: MultiPoly
    params: RingParams


@dataclass(frozen=True)
class Ciphertext:
    comps: tuple[MultiPoly, ...]
    params: RingParams
    depth: int = 0

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(self.comps))
        if len(self.comps) < 2:
            raise StructureError("a ciphertext has at least two components")
        for c in self.comps:
            if c.shape != self.params.shape or c.modulus != self.params.q:
                raise StructureError("component does not live in R_q of the ciphertext params")

    @property
    def gamma(self) -> int:
        return len(self.comps)

    def __add__(self, other):
        return he_add(self, other)

    def __mul__(self, other):
        return he_mul(self, other)


def keygen(params: RingParams, noise: NoiseParams, rng: np.random.Generator):
    s = sample_noise(noise, params, rng)
    e = sample_noise(noise, params, rng)
    a1 = MultiPoly.uniform(params.shape, params.q, rng)
    a0 = -(negacyclic_mul(a1, s) + scalar_mul(e, params.t))
    return SecretKey(s, params), PublicKey(a0, a1, params)


def lift_plaintext(msg: MultiPoly, params: RingParams) -> MultiPoly:
    """Embed a plaintext in R_q through its centered representative mod t."""
    if msg.modulus != params.t:
        raise StructureError(f"plaintext modulus {msg.modulus} != t={params.t}")
    if msg.shape != params.shape:
        raise StructureError(f"plaintext shape {msg.shape} != ring shape {params.shape}")
    return reduce_mod(msg, params.q, centered=True)


def encrypt(pk: PublicKey, msg: MultiPoly, noise: NoiseParams, rng: np.random.Generator) -> Ciphertext:
    params = pk.params
    m = lift_plaintext(msg, params)
    u = sample_noise(noise, params, rng)
    f = sample_noise(noise, params, rng)
    g = sample_noise(noise, params, rng)
    t = params.t
    c0 = negacyclic_mul(pk.a0, u) + scalar_mul(g, t) + m
    c1 = negacyclic_mul(pk.a1, u) + scalar_mul(f, t)
    return Ciphertext((c0, c1), params, 0)


def _check_key(sk: SecretKey, ct: Ciphertext) -> None:
    if sk.params != ct.params:
        raise StructureError("ciphertext and key live in different rings")


def decryption_value(sk: SecretKey, ct: Ciphertext) -> MultiPoly:
    """sum_i c_i s^i mod q, by Horner's rule."""
    _check_key(sk, ct)
    acc = ct.comps[-1]
    for c in reversed(ct.comps[:-1]):
        acc = negacyclic_mul(acc, sk.s) + c
    return acc


def decrypt(sk: SecretKey, ct: Ciphertext) -> MultiPoly:
    return reduce_mod(decryption_value(sk, ct), ct.params.t, centered=True)


def he_add(c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    if c1.params != c2.params:
        raise StructureError("ciphertexts live in different rings")
    long_, short = (c1, c2) if c1.gamma >= c2.gamma else (c2, c1)
    comps = [a + b for a, b in zip(long_.comps, short.comps)]
    comps += list(long_.comps[short.gamma:])
    return Ciphertext(tuple(comps), c1.params, max(c1.depth, c2.depth))


def he_mul(c1: Ciphertext, c2: Ciphertext, max_depth: int | None = None) -> Ciphertext:
    """Product as polynomials in a symbolic variable v: gamma1 + gamma2 - 1 components."""
    if c1.params != c2.params:
        raise StructureError("ciphertexts live in different rings")
    depth = max(c1.depth, c2.depth) + 1
    if max_depth is not None and depth > max_depth:
        raise DepthError(f"product would reach depth {depth} > max {max_depth}")
    params = c1.params
    q, shape = params.q, params.shape
    fa = [ntt_array(c.data, q, shape) for c in c1.comps]
    fb = [ntt_array(c.data, q, shape) for c in c2.comps]
    gamma = c1.gamma + c2.gamma - 1
    acc = [None] * gamma
    for i, x in enumerate(fa):
        for j, y in enumerate(fb):
            prod = pointwise_mul_array(x, y, q)
            acc[i + j] = prod if acc[i + j] is None else _addq(acc[i + j], prod, q)
    comps = tuple(MultiPoly(shape, q, ntt_array(a, q, shape, inverse=True)) for a in acc)
    return Ciphertext(comps, params, depth)


def _addq(a, b, q):
    s = a + b
    return np.where(s >= U64(q), s - U64(q), s)


def he_add_plain(ct: Ciphertext, msg: MultiPoly) -> Ciphertext:
    m = lift_plaintext(msg, ct.params)
    return Ciphertext((ct.comps[0] + m,) + ct.comps[1:], ct.params, ct.depth)


def he_mul_plain(ct: Ciphertext, msg: MultiPoly) -> Ciphertext:
    """Multiply by a public plaintext (centered lift keeps noise growth small)."""
    m = lift_plaintext(msg, ct.params)
    return Ciphertext(tuple(negacyclic_mul(c, m) for c in ct.comps), ct.params, ct.depth)


def noise_norm(sk: SecretKey, ct: Ciphertext, msg: MultiPoly | None = None) -> int:
    """Infinity norm of [sum c_i s^i]_q - m, centered.

    Decryption is correct while this stays below q/2 - t/2; values near q/2
    indicate the noise has wrapped (and the reported norm is meaningless).
    """
    v = decryption_value(sk, ct).centered()
    if msg is None:
        msg = reduce_mod(decryption_value(sk, ct), ct.params.t)
    return int(np.abs(v - msg.centered()).max())
