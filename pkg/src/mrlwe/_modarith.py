"""Vectorized exact arithmetic modulo an odd q < 2**62 on uint64 arrays.

Products are formed as 128-bit values from 32-bit limbs and reduced with
Montgomery's REDC (R = 2**64), so nothing ever leaves uint64.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

U64 = np.uint64
_M32 = U64(0xFFFFFFFF)
_S32 = U64(32)
_ONE = U64(1)

MAX_MODULUS = 1 << 62


def mul_wide(a, b):
    """Full 128-bit product of uint64 arrays as (hi, lo)."""
    a0 = a & _M32
    a1 = a >> _S32
    b0 = b & _M32
    b1 = b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _S32) + (p01 & _M32) + (p10 & _M32)
    lo = (mid << _S32) | (p00 & _M32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, lo


def mul_hi(a, b):
    a0 = a & _M32
    a1 = a >> _S32
    b0 = b & _M32
    b1 = b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    mid = (p00 >> _S32) + (p01 & _M32) + (p10 & _M32)
    return a1 * b1 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)


class Modulus:
    """Precomputed constants for Montgomery arithmetic modulo ``q``."""

    def __init__(self, q: int):
        if q % 2 == 0 or not 2 < q < MAX_MODULUS:
            raise ValueError(f"Montgomery modulus must be odd and below 2**62, got {q}")
        self.q = q
        self.qu = U64(q)
        self.qneg_inv = U64((-pow(q, -1, 1 << 64)) % (1 << 64))
        self.r_mod = (1 << 64) % q
        self.r2 = U64(pow(2, 128, q))

    def to_mont(self, values) -> np.ndarray:
        """Exact x*R mod q for python ints (table construction only)."""
        return np.array([(int(v) << 64) % self.q for v in values], dtype=U64)

    def redc(self, hi, lo):
        m = lo * self.qneg_inv
        t = hi + mul_hi(m, self.qu) + (lo != 0).astype(U64)
        return np.where(t >= self.qu, t - self.qu, t)

    def montmul(self, a, b):
        """a*b*R^-1 mod q; with b stored in Montgomery form this is a*b mod q."""
        return self.redc(*mul_wide(a, b))

    def mul(self, a, b):
        return self.montmul(self.montmul(a, b), self.r2)

    def add(self, a, b):
        s = a + b
        return np.where(s >= self.qu, s - self.qu, s)

    def sub(self, a, b):
        return np.where(a >= b, a - b, a + (self.qu - b))

    def neg(self, a):
        return np.where(a == 0, a, self.qu - a)


@lru_cache(maxsize=None)
def modulus(q: int) -> Modulus:
    return Modulus(q)


def tree_sum(terms: np.ndarray, q: int) -> np.ndarray:
    """Sum residues along axis 0 with a fixed pairwise reduction order."""
    mod = modulus(q)
    while terms.shape[0] > 1:
        half = terms.shape[0] // 2
        paired = mod.add(terms[:half], terms[half:2 * half])
        if terms.shape[0] % 2:
            paired = np.concatenate([paired, terms[2 * half:]], axis=0)
        terms = paired
    return terms[0]


def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class NttPlan:
    """Negacyclic transform of length n modulo prime q.

    forward(a)[k] = a(psi^(2k+1)) where psi is the smallest primitive 2n-th
    root of unity: weight by psi^i, then a cyclic transform with psi^2.
    """

    def __init__(self, q: int, n: int, psi: int):
        self.q = q
        self.n = n
        self.psi = psi
        mod = modulus(q)
        self.mod = mod
        psi_inv = pow(psi, -1, q)
        n_inv = pow(n, -1, q)
        self.weights = mod.to_mont([pow(psi, i, q) for i in range(n)])
        self.unweights = mod.to_mont([pow(psi_inv, i, q) * n_inv % q for i in range(n)])
        omega = psi * psi % q
        omega_inv = pow(omega, -1, q)
        self.stages = self._stage_twiddles(omega)
        self.inv_stages = self._stage_twiddles(omega_inv)
        self.rev = _bitrev(n)

    def _stage_twiddles(self, omega: int):
        tables = []
        m = self.n
        while m >= 2:
            half = m // 2
            w = pow(omega, self.n // m, self.q)
            tables.append(self.mod.to_mont([pow(w, j, self.q) for j in range(half)]))
            m = half
        return tables

    def _dif(self, a: np.ndarray, stages) -> np.ndarray:
        # Gentleman-Sande: natural order in, bit-reversed out.
        mod = self.mod
        lead = a.shape[:-1]
        m = self.n
        for tw in stages:
            half = m // 2
            x = a.reshape(lead + (self.n // m, 2, half))
            u = x[..., 0, :]
            v = x[..., 1, :]
            top = mod.add(u, v)
            bot = mod.montmul(mod.sub(u, v), tw)
            a = np.stack([top, bot], axis=-2).reshape(lead + (self.n,))
            m = half
        return a[..., self.rev]

    def forward(self, a: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return a.copy()
        return self._dif(self.mod.montmul(a, self.weights), self.stages)

    def inverse(self, a: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return a.copy()
        return self.mod.montmul(self._dif(a, self.inv_stages), self.unweights)
