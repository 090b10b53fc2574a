"""Modulus sizing, lattice security estimates and operation-count models.

Correctness bound for D successive fresh products and A sums:

    q >= 4 (2 t sigma^2 sqrt(n))^(D+1) (2n)^(D/2) sqrt(A)

Distinguishing-attack estimate:

    log2(delta) = log2(c q / s)^2 / (4 n log2 q),   c = sqrt(ln(1/eps) / pi)
    bits        = 1.8 / log2(delta) - 110
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import sympy

from ._modarith import MAX_MODULUS
from .errors import ParameterError

_PREC = 160  # bits of mantissa for every estimator evaluation

DEFAULT_EPSILON = mpmath.mpf(2) ** -32


def _mp():
    ctx = mpmath.mp.clone()
    ctx.prec = _PREC
    return ctx


@dataclass(frozen=True)
class QBound:
    value: mpmath.mpf
    bits: int

    @property
    def ceil(self) -> int:
        return int(mpmath.ceil(self.value))


def min_q_bound(t: int, sigma: float, n: int, D: int = 1, A: int = 1) -> QBound:
    if min(t, sigma, n, A) <= 0 or D < 0 or int(D) != D:
        raise ParameterError("t, sigma, n, A must be positive and D a non-negative integer")
    mp = _mp()
    t, sigma, n, A = mp.mpf(t), mp.mpf(sigma), mp.mpf(n), mp.mpf(A)
    val = 4 * (2 * t * sigma ** 2 * mp.sqrt(n)) ** (D + 1) * (2 * n) ** (mp.mpf(D) / 2) * mp.sqrt(A)
    return QBound(val, int(mp.ceil(mp.log(val, 2))))


def choose_prime(bound, degrees: Sequence[int]) -> int:
    """Smallest prime q >= bound with q = 1 mod 2 max(degrees)."""
    if isinstance(bound, QBound):
        bound = bound.ceil
    lo = int(mpmath.ceil(bound))
    if lo < 2:
        raise ParameterError("bound must be at least 2")
    step = 2 * max(degrees)
    q = lo + ((1 - lo) % step)
    while q < MAX_MODULUS:
        if sympy.isprime(q):
            return q
        q += step
    raise ParameterError(f"no admissible prime below 2**62 for bound {bound}")


def epsilon_constant(epsilon=DEFAULT_EPSILON):
    mp = _mp()
    return mp.sqrt(mp.log(1 / mp.mpf(epsilon)) / mp.pi)


def hermite_factor(n: int, q: int, s: float, epsilon=DEFAULT_EPSILON):
    mp = _mp()
    if not (0 < s < q) or not (0 < epsilon < 1):
        raise ParameterError("need 0 < s < q and 0 < epsilon < 1")
    c = epsilon_constant(epsilon)
    lq = mp.log(mp.mpf(q), 2)
    log_delta = mp.log(c * q / mp.mpf(s), 2) ** 2 / (4 * n * lq)
    return mp.power(2, log_delta)


def bit_security(delta):
    mp = _mp()
    delta = mp.mpf(delta)
    if delta <= 1:
        raise ParameterError("root Hermite factor must exceed 1")
    return 1.8 / mp.log(delta, 2) - 110


@dataclass(frozen=True)
class SecurityEstimate:
    delta: mpmath.mpf
    bit_sec: mpmath.mpf
    epsilon: mpmath.mpf
    c: mpmath.mpf


def estimate(n: int, q: int, s: float, epsilon=DEFAULT_EPSILON) -> SecurityEstimate:
    d = hermite_factor(n, q, s, epsilon)
    return SecurityEstimate(d, bit_security(d), mpmath.mpf(epsilon), epsilon_constant(epsilon))


# operation-count models ---------------------------------------------------------

SCHEMES = ("RLWE", "2-RLWE", "3-RLWE")


@dataclass(frozen=True)
class CostModel:
    scenario: str
    n: tuple[int, int, int]
    ciphertexts: tuple[int, int, int]
    products: tuple[int, int, int]
    degrees: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]


def _h3(h) -> tuple[int, int, int]:
    if isinstance(h, int):
        return (h, h, h)
    h = tuple(h)
    if len(h) != 3:
        raise ParameterError("slack h must be one value or three (RLWE, 2-RLWE, 3-RLWE)")
    return h


def cost_model(scenario: str, N: int, F: int = 1, I: int = 1, h=1, Nz: int = 1) -> CostModel:
    """Closed-form sizes for I image pairs of N x N (filters F x F).

    ``volume`` describes one N x N x Nz volume smoothed by a public F^3 kernel:
    RLWE encodes one row per ciphertext, 2-RLWE one slice, 3-RLWE the volume.
    """
    h1, h2, h3 = _h3(h)
    if min(N, F, I, h1, h2, h3, Nz) < 1:
        raise ParameterError("dimensions must be positive")
    if scenario == "correlation":
        L = 2 * N - 1
        cts = (2 * N * I, 2 * I, 2)
        prods = (N * N * I, I, 1)
        deg3 = (L, L, h3 * I)
    elif scenario == "filtering":
        if F >= N:
            raise ParameterError("filtering expects F < N")
        L = N + F - 1
        cts = ((N + F) * I, 2 * I, 2)
        prods = (N * F * I, I, 1)
        deg3 = (L, L, h3 * I)
    elif scenario == "volume":
        L = N + F - 1
        Lz = Nz + F - 1
        cts = (N * Nz, Nz, 1)
        prods = (N * Nz * F * F, Nz * F, 1)
        deg3 = (L, L, h3 * Lz)
    else:
        raise ParameterError(f"unknown scenario {scenario!r}")
    degrees = ((L * h1,), (L, L * h2), deg3)
    n = tuple(math.prod(d) for d in degrees)
    return CostModel(scenario, n, cts, prods, degrees)


@dataclass(frozen=True)
class ParamRow:
    scheme: str
    n: int
    degrees: tuple[int, ...]
    log2_q_bound: float
    q: int
    q_bits: int
    delta: float
    bit_security: float
    ciphertexts: int
    products: int
    enc_size_bits: float

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme, "n": self.n, "degrees": list(self.degrees),
            "q": self.q, "log2_q": self.q_bits, "delta": self.delta,
            "bit_security": self.bit_security, "ciphertexts": self.ciphertexts,
            "products": self.products, "enc_size_bits": self.enc_size_bits,
        }


def _pow2_degrees(degrees: Sequence[int]) -> tuple[int, ...]:
    return tuple(1 << max(0, math.ceil(math.log2(d))) for d in degrees)


def parameter_rows(scenario: str, N: int, F: int, I: int = 1, h=1, Nz: int = 1, t: int = 12289,
                   sigma: float = 1.0, D: int = 1, A: int = 1, epsilon=DEFAULT_EPSILON) -> list[ParamRow]:
    """min_q_bound -> choose_prime -> hermite_factor -> bit_security per scheme.

    Ring degrees are rounded up to powers of two. Encrypted size counts two
    ring elements per ciphertext at log2(q) bits per coefficient.
    """
    model = cost_model(scenario, N, F, I, h, Nz)
    s = sigma * math.sqrt(2 * math.pi)
    rows = []
    for k, scheme in enumerate(SCHEMES):
        degrees = _pow2_degrees(model.degrees[k])
        n = math.prod(degrees)
        qb = min_q_bound(t, sigma, n, D, A)
        q = choose_prime(qb, degrees)
        est = estimate(n, q, s, epsilon)
        log2q = math.log2(q)
        rows.append(ParamRow(
            scheme, n, degrees, float(mpmath.log(qb.value, 2)), q, math.ceil(log2q),
            float(est.delta), float(est.bit_sec), model.ciphertexts[k], model.products[k],
            model.ciphertexts[k] * 2 * n * log2q))
    return rows
