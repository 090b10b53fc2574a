"""Signal and fixed-point encodings into plaintext polynomials mod t."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ParameterError, SizingError, StructureError
from .ring import MultiPoly

U64 = np.uint64


def _fit_shape(shape: Sequence[int], ndim: int) -> tuple[int, ...]:
    shape = tuple(shape)
    if ndim > len(shape):
        raise SizingError(f"{ndim}-D signal does not fit a {len(shape)}-variate ring")
    return shape


def encode_signal(x, shape: Sequence[int], t: int, mode: str = "convolution",
                  kernel_dims: Sequence[int] | None = None) -> MultiPoly:
    """One sample per coefficient at the origin; signed values are reduced mod t.

    In correlation mode the tensor is index-reversed on every axis, so that the
    ring product with a plain encoding yields the full correlation. Passing
    ``kernel_dims`` checks that the full linear output (dims + kernel - 1) fits.
    """
    if mode not in ("convolution", "correlation"):
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(x)
    shape = _fit_shape(shape, x.ndim)
    x = x.reshape(x.shape + (1,) * (len(shape) - x.ndim))
    need = list(x.shape)
    if kernel_dims is not None:
        kd = tuple(kernel_dims) + (1,) * (len(shape) - len(tuple(kernel_dims)))
        need = [a + b - 1 for a, b in zip(x.shape, kd)]
    for axis, (d, n) in enumerate(zip(need, shape)):
        if d > n:
            raise SizingError(f"axis {axis}: support {d} exceeds ring degree {n}")
    half = t // 2
    xi = x.astype(object)
    if any(v > half or v <= -t + half for v in xi.reshape(-1)):
        raise SizingError(f"sample outside (-t/2, t/2] for t={t}")
    if mode == "correlation":
        xi = xi[tuple(slice(None, None, -1) for _ in range(xi.ndim))]
    data = np.zeros(shape, dtype=U64)
    data[tuple(slice(0, s) for s in xi.shape)] = np.mod(xi, t).astype(U64)
    return MultiPoly(shape, t, data)


def decode_signal(p: MultiPoly, dims: Sequence[int], signed: bool = True) -> np.ndarray:
    dims = tuple(dims)
    if len(dims) > len(p.shape) or any(d > n for d, n in zip(dims, p.shape)):
        raise SizingError(f"dims {dims} exceed ring shape {p.shape}")
    vals = p.centered() if signed else p.data.astype(np.int64)
    sl = tuple(slice(0, d) for d in dims) + (0,) * (len(p.shape) - len(dims))
    return np.array(vals[sl])


@dataclass(frozen=True)
class FixedPointEncoding:
    """Base-b digits in one variable of degree n_v.

    Integer digit k (0 <= k < n_plus) sits at v^k; fractional digit b_{-k}
    (1 <= k <= n_minus) is stored negated at v^{n_v - k}, since v^{-k} = -v^{n_v - k}
    in Z[v]/(v^{n_v} + 1). ``n_plus``/``n_minus`` are the digit capacities a
    decoded value (including a product) may occupy.
    """

    base: int
    n_v: int
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.base < 2:
            raise ParameterError("base must be at least 2")
        if self.n_plus < 1 or self.n_minus < 0:
            raise ParameterError("need n_plus >= 1 and n_minus >= 0")
        if self.n_plus + self.n_minus >= self.n_v:
            raise ParameterError(
                f"n_plus + n_minus = {self.n_plus + self.n_minus} must be below n_v = {self.n_v}")


def fixed_digits(x, enc: FixedPointEncoding) -> tuple[int, list[int], list[int]]:
    """(sign, integer digits low->high, fractional digits b_-1, b_-2, ...)."""
    x = Fraction(x)
    sign = -1 if x < 0 else 1
    scaled = abs(x) * enc.base ** enc.n_minus
    if scaled.denominator != 1:
        raise ParameterError(f"{x} needs more than {enc.n_minus} fractional base-{enc.base} digits")
    v = scaled.numerator
    if v >= enc.base ** (enc.n_plus + enc.n_minus):
        raise ParameterError(f"{x} needs more than {enc.n_plus} integer digits")
    frac = []
    for _ in range(enc.n_minus):
        v, d = divmod(v, enc.base)
        frac.append(d)
    ints = []
    for _ in range(enc.n_plus):
        v, d = divmod(v, enc.base)
        ints.append(d)
    return sign, ints, frac[::-1]


def encode_fixed(x, enc: FixedPointEncoding, t: int) -> MultiPoly:
    sign, ints, frac = fixed_digits(x, enc)
    coeffs = [0] * enc.n_v
    for k, d in enumerate(ints):
        coeffs[k] = sign * d
    for k, d in enumerate(frac, start=1):
        coeffs[enc.n_v - k] = -sign * d
    return MultiPoly.from_ints(coeffs, t, (enc.n_v,))


def decode_fixed(p: MultiPoly, enc: FixedPointEncoding) -> Fraction:
    if p.shape != (enc.n_v,):
        raise StructureError(f"expected a univariate polynomial of degree {enc.n_v}, got {p.shape}")
    c = [int(v) for v in p.centered()]
    split = enc.n_v - enc.n_minus
    total = Fraction(0)
    for k in range(split):
        total += c[k] * Fraction(enc.base) ** k
    for k in range(split, enc.n_v):
        total -= c[k] * Fraction(1, enc.base ** (enc.n_v - k))
    return total
