"""Multivariate negacyclic polynomial rings Z_M[x_1..x_m]/(x_i^{n_i} + 1).

Coefficients are stored as uint64 tensors of shape ``(n_1, ..., n_m)``,
row-major with x_1 slowest, residues canonical in ``[0, modulus)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy

from ._modarith import MAX_MODULUS, NttPlan, modulus as _montgomery
from .errors import ExistenceError, ParameterError, StructureError

U64 = np.uint64


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class RingParams:
    """The ciphertext ring R_q[x_1..x_m] together with the plaintext modulus t."""

    degrees: tuple[int, ...]
    q: int
    t: int

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        if not self.degrees:
            raise ParameterError("at least one variable is required")
        for d in self.degrees:
            if not _is_pow2(d):
                raise ParameterError(f"degree {d} is not a power of two")
        if not 2 < self.q < MAX_MODULUS:
            raise ParameterError(f"q={self.q} outside (2, 2**62)")
        if not sympy.isprime(self.q):
            raise ParameterError(f"q={self.q} is not prime")
        if (self.q - 1) % (2 * max(self.degrees)):
            raise ParameterError(f"q={self.q} is not 1 mod {2 * max(self.degrees)}")
        if self.t < 2 or math.gcd(self.t, self.q) != 1 or self.t >= self.q:
            raise ParameterError(f"t={self.t} must satisfy 2 <= t < q and gcd(t, q) = 1")

    @property
    def m(self) -> int:
        return len(self.degrees)

    @property
    def n(self) -> int:
        return math.prod(self.degrees)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.degrees


@dataclass(frozen=True, eq=False)
class MultiPoly:
    shape: tuple[int, ...]
    modulus: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        data = np.asarray(self.data)
        if data.dtype != U64:
            data = data.astype(U64)
        if data.size != math.prod(shape):
            raise StructureError(f"{data.size} coefficients for shape {shape}")
        data = data.reshape(shape)
        if data.size and int(data.max()) >= self.modulus:
            raise StructureError("residue not reduced below modulus")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    # construction -------------------------------------------------------
    @classmethod
    def from_ints(cls, values, modulus: int, shape: Sequence[int] | None = None) -> "MultiPoly":
        """Reduce arbitrary (possibly negative, possibly huge) integers."""
        arr = np.asarray(values, dtype=object)
        if shape is None:
            shape = arr.shape
        red = np.vectorize(lambda v: int(v) % modulus, otypes=[object])(arr.reshape(-1)) if arr.size else arr
        return cls(tuple(shape), modulus, np.asarray(red, dtype=object).astype(U64))

    @classmethod
    def zeros(cls, shape: Sequence[int], modulus: int) -> "MultiPoly":
        return cls(tuple(shape), modulus, np.zeros(tuple(shape), dtype=U64))

    @classmethod
    def constant(cls, value: int, shape: Sequence[int], modulus: int) -> "MultiPoly":
        data = np.zeros(tuple(shape), dtype=U64)
        data.reshape(-1)[0] = int(value) % modulus
        return cls(tuple(shape), modulus, data)

    @classmethod
    def monomial(cls, index: Sequence[int], shape: Sequence[int], modulus: int, coeff: int = 1) -> "MultiPoly":
        """coeff * x^index, folding exponents with x_i^{n_i} = -1."""
        data = np.zeros(tuple(shape), dtype=U64)
        sign = 1
        pos = []
        for e, n in zip(index, shape):
            wraps, r = divmod(int(e), n)
            sign *= -1 if wraps % 2 else 1
            pos.append(r)
        data[tuple(pos)] = (sign * int(coeff)) % modulus
        return cls(tuple(shape), modulus, data)

    @classmethod
    def uniform(cls, shape: Sequence[int], modulus: int, rng: np.random.Generator) -> "MultiPoly":
        return cls(tuple(shape), modulus, rng.integers(0, modulus, size=tuple(shape), dtype=U64))

    # views ---------------------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self.data.reshape(-1)

    @property
    def n(self) -> int:
        return self.data.size

    def centered(self) -> np.ndarray:
        """Centered representatives in (-M/2, M/2] as int64."""
        half = self.modulus // 2
        v = self.data.astype(np.int64)
        return np.where(self.data > U64(half), v - self.modulus, v)

    def to_list(self) -> list[int]:
        return [int(v) for v in self.coeffs]

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return (self.shape == other.shape and self.modulus == other.modulus
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.modulus, self.data.tobytes()))

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, MultiPoly):
            return negacyclic_mul(self, other)
        return scalar_mul(self, int(other))

    __rmul__ = __mul__


def _check_pair(a: MultiPoly, b: MultiPoly) -> None:
    if a.shape != b.shape:
        raise StructureError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.modulus != b.modulus:
        raise StructureError(f"modulus mismatch {a.modulus} vs {b.modulus}")


# elementwise modular helpers on raw arrays; any modulus < 2**62
def _add_arr(a, b, q):
    s = a + b
    qu = U64(q)
    return np.where(s >= qu, s - qu, s)


def _sub_arr(a, b, q):
    return np.where(a >= b, a - b, a + (U64(q) - b))


def add(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    _check_pair(a, b)
    return MultiPoly(a.shape, a.modulus, _add_arr(a.data, b.data, a.modulus))


def sub(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    _check_pair(a, b)
    return MultiPoly(a.shape, a.modulus, _sub_arr(a.data, b.data, a.modulus))


def neg(a: MultiPoly) -> MultiPoly:
    return MultiPoly(a.shape, a.modulus, np.where(a.data == 0, a.data, U64(a.modulus) - a.data))


def scalar_mul(a: MultiPoly, c: int) -> MultiPoly:
    c %= a.modulus
    if a.modulus % 2 and a.modulus > 2:
        out = _montgomery(a.modulus).mul(a.data, np.full(a.shape, c, dtype=U64))
    else:
        out = (a.data.astype(object) * c % a.modulus).astype(U64)
    return MultiPoly(a.shape, a.modulus, out)


def reduce_mod(a: MultiPoly, new_modulus: int, centered: bool = True) -> MultiPoly:
    """Reinterpret coefficients modulo another modulus (centered lift first)."""
    vals = a.centered() if centered else a.data.astype(object)
    return MultiPoly(a.shape, new_modulus, np.mod(vals.astype(object), new_modulus).astype(U64))


# roots of unity ---------------------------------------------------------------

def _element_of_order(p: int, order: int) -> int:
    """Some element of exact multiplicative order ``order`` in Z_p^*."""
    cofactor = (p - 1) // order
    primes = list(sympy.factorint(order))
    for x in range(2, p):
        w = pow(x, cofactor, p)
        if all(pow(w, order // r, p) != 1 for r in primes):
            return w
    raise ExistenceError(f"no element of order {order} mod {p}")


@lru_cache(maxsize=256)
def find_root(modulus: int, order: int, kind: str = "unity") -> int:
    """Smallest primitive ``order``-th root of unity (kind="unity") or the smallest
    root of -1 of exact order 2*order (kind="neg_one") modulo a prime.

    The returned root also satisfies gcd(root, p) = gcd(order, p) = 1 and
    gcd(root^i - 1, p) = 1 for 0 < i < order (automatic for a primitive root
    modulo a prime, checked anyway).
    """
    if kind not in ("unity", "neg_one"):
        raise ValueError(f"unknown root kind {kind!r}")
    if order < 1:
        raise ParameterError("order must be positive")
    if not sympy.isprime(modulus):
        raise ParameterError(f"modulus {modulus} is not prime")
    p = modulus
    full = order if kind == "unity" else 2 * order
    if (p - 1) % full:
        raise ExistenceError(f"{full} does not divide {p} - 1; no {kind} root of order {order}")
    if math.gcd(order, p) != 1:
        raise ExistenceError(f"gcd({order}, {p}) != 1")
    if full == 1:
        return 1
    w = _element_of_order(p, full)
    # every primitive full-th root is w^k with gcd(k, full) = 1
    best = None
    cur = 1
    for k in range(1, full):
        cur = cur * w % p
        if math.gcd(k, full) == 1 and (best is None or cur < best):
            best = cur
    root = best
    base = root if kind == "unity" else root * root % p
    for i in range(1, order):
        if math.gcd(pow(base, i, p) - 1, p) != 1:
            raise ExistenceError(f"gcd(alpha^{i} - 1, {p}) != 1")
    return root


def supports_ntt(modulus: int, shape: Sequence[int]) -> bool:
    if modulus % 2 == 0 or not 2 < modulus < MAX_MODULUS:
        return False
    if any(not _is_pow2(n) for n in shape):
        return False
    if (modulus - 1) % (2 * max(shape)):
        return False
    return bool(sympy.isprime(modulus))


@lru_cache(maxsize=128)
def _plan(q: int, n: int) -> NttPlan:
    return NttPlan(q, n, find_root(q, n, "neg_one"))


def _require_ntt(modulus: int, shape: Sequence[int]) -> None:
    if not supports_ntt(modulus, shape):
        raise ParameterError(
            f"modulus {modulus} has no negacyclic NTT for shape {tuple(shape)}"
            " (needs a prime = 1 mod 2*max degree); request method='schoolbook'")


def ntt_array(data: np.ndarray, q: int, shape: Sequence[int], inverse: bool = False,
              axes: Sequence[int] | None = None) -> np.ndarray:
    """Transform the trailing ``len(shape)`` axes of ``data`` (leading axes are batch)."""
    shape = tuple(shape)
    lead = data.ndim - len(shape)
    if axes is None:
        axes = range(len(shape))
    out = data
    for ax in axes:
        n = shape[ax]
        if n == 1:
            continue
        plan = _plan(q, n)
        moved = np.moveaxis(out, lead + ax, -1)
        res = plan.inverse(moved) if inverse else plan.forward(moved)
        out = np.moveaxis(res, -1, lead + ax)
    return np.ascontiguousarray(out)


def axis_ntt(p: MultiPoly, axis: int, direction: str = "forward") -> MultiPoly:
    """Negacyclic NTT along one axis: output k is the evaluation at psi^(2k+1)."""
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    if not 0 <= axis < len(p.shape):
        raise StructureError(f"axis {axis} out of range for shape {p.shape}")
    n = p.shape[axis]
    if n > 1:
        _require_ntt(p.modulus, (n,))
    out = ntt_array(p.data, p.modulus, p.shape, inverse=direction == "inverse", axes=[axis])
    return MultiPoly(p.shape, p.modulus, out)


def pointwise_mul_array(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    return _montgomery(q).mul(a, b)


def _schoolbook(a: np.ndarray, b: np.ndarray, modulus: int) -> np.ndarray:
    shape = a.shape
    full = np.zeros(tuple(2 * n - 1 for n in shape), dtype=object)
    bo = b.astype(object)
    for idx in zip(*np.nonzero(a)):
        c = int(a[idx])
        sl = tuple(slice(i, i + n) for i, n in zip(idx, shape))
        full[sl] += c * bo
    # fold x_i^{n_i + k} = -x_i^k axis by axis
    for ax, n in enumerate(shape):
        head = [slice(None)] * full.ndim
        head[ax] = slice(0, n)
        folded = full[tuple(head)].copy()
        dst = [slice(None)] * full.ndim
        dst[ax] = slice(0, n - 1)
        src = [slice(None)] * full.ndim
        src[ax] = slice(n, 2 * n - 1)
        folded[tuple(dst)] -= full[tuple(src)]
        full = folded
    return (full % modulus).astype(U64)


def negacyclic_mul(a: MultiPoly, b: MultiPoly, method: str = "ntt") -> MultiPoly:
    """Ring product. ``method="schoolbook"`` works for any modulus in O(n^2)."""
    _check_pair(a, b)
    if method == "schoolbook":
        return MultiPoly(a.shape, a.modulus, _schoolbook(a.data, b.data, a.modulus))
    if method != "ntt":
        raise ValueError(f"unknown method {method!r}")
    _require_ntt(a.modulus, a.shape)
    q = a.modulus
    fa = ntt_array(a.data, q, a.shape)
    fb = ntt_array(b.data, q, b.shape)
    out = ntt_array(pointwise_mul_array(fa, fb, q), q, a.shape, inverse=True)
    return MultiPoly(a.shape, q, out)


def ring_mul(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    """NTT when the modulus allows it, schoolbook otherwise (plaintext helper)."""
    method = "ntt" if supports_ntt(a.modulus, a.shape) else "schoolbook"
    return negacyclic_mul(a, b, method=method)


# base-T decomposition ----------------------------------------------------------

def num_digits(q: int, T: int) -> int:
    """ceil(log_T q): the least L with T^L >= q."""
    L, acc = 0, 1
    while acc < q:
        acc *= T
        L += 1
    return L


@dataclass(frozen=True)
class BaseDecomposition:
    base: int
    digits: tuple[MultiPoly, ...]

    def reconstruct(self) -> MultiPoly:
        q = self.digits[0].modulus
        acc = MultiPoly.zeros(self.digits[0].shape, q)
        for i, d in enumerate(self.digits):
            acc = add(acc, scalar_mul(d, pow(self.base, i, q)))
        return acc


def decompose_array(data: np.ndarray, q: int, T: int) -> np.ndarray:
    """Digits along a new leading axis, each in [0, T)."""
    L = num_digits(q, T)
    out = np.empty((L,) + data.shape, dtype=U64)
    rest = data.copy()
    Tu = U64(T)
    for i in range(L):
        out[i] = rest % Tu
        rest = rest // Tu
    return out


def base_decompose(p: MultiPoly, T: int) -> BaseDecomposition:
    if not 2 <= T < p.modulus:
        raise ParameterError(f"base T={T} outside [2, {p.modulus})")
    digits = decompose_array(p.data, p.modulus, T)
    return BaseDecomposition(T, tuple(MultiPoly(p.shape, p.modulus, d) for d in digits))


# coefficient reordering ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RingMapping:
    """Reordering of the n coefficients between two shapes of equal size:
    output coefficient j (flat, row-major) is input coefficient perm[j]."""

    source: tuple[int, ...]
    target: tuple[int, ...]
    perm: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(int(s) for s in self.source))
        object.__setattr__(self, "target", tuple(int(s) for s in self.target))
        n = math.prod(self.source)
        if math.prod(self.target) != n:
            raise StructureError(f"shapes {self.source} and {self.target} differ in size")
        perm = np.asarray(self.perm, dtype=np.int64).reshape(-1)
        if perm.size != n or not np.array_equal(np.sort(perm), np.arange(n)):
            raise StructureError("perm is not a bijection on {0..n-1}")
        perm.flags.writeable = False
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, source: Sequence[int], target: Sequence[int] | None = None) -> "RingMapping":
        target = source if target is None else target
        return cls(tuple(source), tuple(target), np.arange(math.prod(source)))

    @classmethod
    def reshape(cls, source: Sequence[int], target: Sequence[int]) -> "RingMapping":
        """Row-major split/merge: flat index is preserved."""
        return cls.identity(source, target)

    @classmethod
    def random(cls, source: Sequence[int], target: Sequence[int], rng: np.random.Generator) -> "RingMapping":
        return cls(tuple(source), tuple(target), rng.permutation(math.prod(source)))

    def inverse(self) -> "RingMapping":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return RingMapping(self.target, self.source, inv)

    def then(self, other: "RingMapping") -> "RingMapping":
        """Apply self first, then other."""
        if other.source != self.target:
            raise StructureError("mappings do not compose")
        return RingMapping(self.source, other.target, self.perm[other.perm])

    def __eq__(self, other):
        if not isinstance(other, RingMapping):
            return NotImplemented
        return (self.source == other.source and self.target == other.target
                and np.array_equal(self.perm, other.perm))

    def __hash__(self):
        return hash((self.source, self.target, self.perm.tobytes()))


def remap_array(data: np.ndarray, mapping: RingMapping) -> np.ndarray:
    """Apply the mapping to the trailing axes of a batch of coefficient tensors."""
    k = len(mapping.source)
    lead = data.shape[: data.ndim - k]
    flat = data.reshape(lead + (-1,))
    return flat[..., mapping.perm].reshape(lead + mapping.target)


def remap(p: MultiPoly, mapping: RingMapping) -> MultiPoly:
    if p.shape != mapping.source:
        raise StructureError(f"polynomial shape {p.shape} != mapping source {mapping.source}")
    return MultiPoly(mapping.target, p.modulus, remap_array(p.data, mapping))
