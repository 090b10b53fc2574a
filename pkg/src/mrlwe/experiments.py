"""Experiment runners: encrypted filtering, correlation and Sobel gradients.

Every run decrypts its result and compares it with a plaintext reference; a
mismatch raises :class:`ReferenceMismatch` with noise diagnostics. Homomorphic
operations go through an :class:`OpCounter` so the ciphertext-product counts of
the three schemes can be checked directly.

Schemes: 1 = univariate rows (each image row is one ciphertext), 2 = one
bivariate ciphertext per image, 3 = all I images packed into slots of a
trivariate ciphertext.
"""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .codec import encode_signal
from .errors import ExistenceError, ParameterError, ReferenceMismatch, SizingError
from .pack import make_layout, post_process, pre_process
from .params import DEFAULT_EPSILON, choose_prime, min_q_bound, parameter_rows
from .ring import MultiPoly, RingParams
from .she import (Ciphertext, NoiseParams, decrypt, encrypt, he_add, he_mul, he_mul_plain,
                  keygen, noise_norm)

SCENARIOS = ("filtering", "correlation", "sobel", "volume")
MAX_RING_N = 1 << 20

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
SOBEL_Y = SOBEL_X.T.copy()


def _pow2(x: int) -> int:
    return 1 << max(0, math.ceil(math.log2(x)))


@dataclass
class ExperimentConfig:
    """Knobs shared by the CLI, the config file and the scripts.

    ``h`` is the slack factor per scheme (RLWE, 2-RLWE, 3-RLWE); a single value
    applies to all three. ``pixel_max``/``kernel_max`` bound random inputs.
    """

    scenario: str = "filtering"
    N: int = 64
    Nz: int = 1
    F: int = 11
    I: int = 1
    scheme: int = 2
    t: int = 12289
    sigma: float = 1.0
    D: int = 1
    A: int = 1
    epsilon: float = float(DEFAULT_EPSILON)
    h: tuple = (1, 1, 1)
    seed: int | None = None
    public_kernel: bool = False
    pixel_max: int = 255
    kernel_max: int = 1
    input: str | None = None
    kernel: str | None = None
    output: str | None = None
    report: str | None = None

    def __post_init__(self):
        if isinstance(self.h, int):
            self.h = (self.h,) * 3
        elif isinstance(self.h, str):
            self.h = parse_h(self.h)
        else:
            self.h = tuple(int(v) for v in self.h)

    def kernel_size(self) -> int:
        return self.N if self.scenario == "correlation" else (3 if self.scenario == "sobel" else self.F)

    def out_size(self) -> int:
        return self.N + self.kernel_size() - 1

    def problems(self, run: bool = True, drawn: bool = True) -> list[str]:
        """Every violated precondition.

        ``run`` adds the checks for executing (not just sizing); ``drawn`` adds the
        worst-case output range of randomly drawn inputs.
        """
        errs = []
        if self.scenario not in SCENARIOS:
            errs.append(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.scheme not in (1, 2, 3):
            errs.append(f"scheme must be 1, 2 or 3, got {self.scheme}")
        for name in ("N", "Nz", "F", "I", "A"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be at least 1")
        if self.D < 0:
            errs.append("D must be non-negative")
        if len(self.h) != 3 or min(self.h, default=0) < 1:
            errs.append("h must be one positive value or three")
        if self.t < 2:
            errs.append("t must be at least 2")
        if not self.sigma > 0:
            errs.append("sigma must be positive")
        if not 0 < self.epsilon < 1:
            errs.append("epsilon must lie in (0, 1)")
        if self.scenario == "filtering" and self.F >= self.N:
            errs.append("filtering expects F < N")
        if errs or not run:
            return errs
        if self.scenario == "volume":
            errs.append("volume is a sizing-only scenario (params/bench rows), not an executable run")
        if self.scenario == "sobel" and self.scheme != 2:
            errs.append("sobel runs in the bivariate scheme (scheme=2)")
        n = math.prod(self.degrees())
        if n > MAX_RING_N:
            errs.append(f"ring dimension {n} exceeds the desk-scale limit 2**20")
        if self.scheme == 3 and self.scenario != "volume":
            try:
                make_layout(self.t, self.slots())
            except ExistenceError as exc:
                errs.append(f"slot layout: {exc}")
        if drawn and self.input is None:
            k = self.kernel_size()
            kmax = 2 if self.scenario == "sobel" else (self.pixel_max if self.scenario == "correlation"
                                                       else self.kernel_max)
            terms = 4 if self.scenario == "sobel" else k * k
            if self.pixel_max * kmax * terms > self.t // 2:
                errs.append(f"outputs up to {self.pixel_max * kmax * terms} do not fit in (-t/2, t/2] "
                            f"for t={self.t}; lower pixel_max/kernel_max or raise t")
        return errs

    def validate(self, run: bool = True, drawn: bool = True) -> "ExperimentConfig":
        errs = self.problems(run, drawn)
        if errs:
            raise ParameterError("invalid experiment config:\n  " + "\n  ".join(errs))
        return self

    def slots(self) -> int:
        return _pow2(self.I * self.h[2])

    def degrees(self) -> tuple[int, ...]:
        L = self.out_size()
        if self.scheme == 1:
            return (_pow2(L * self.h[0]),)
        if self.scheme == 2:
            return (_pow2(L), _pow2(L * self.h[1]))
        return (_pow2(L), _pow2(L), self.slots())

    def additions(self) -> int:
        """Products summed into one output coefficient block (the A of the modulus bound)."""
        if self.scheme == 1:
            return max(self.A, min(self.N, self.kernel_size()))
        return self.A


def parse_h(text: str) -> tuple[int, int, int]:
    vals = tuple(int(v) for v in str(text).replace("x", ",").split(",") if v.strip())
    if len(vals) == 1:
        return vals * 3
    if len(vals) != 3:
        raise ParameterError("h takes one value or three comma-separated values")
    return vals


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def coerce_field(name: str, value: str):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise ParameterError(f"unknown config key {name!r}")
    kind = str(kinds[name])
    if value in ("", "none", "None") and "None" in kind:
        return None
    if name == "h":
        return parse_h(value)
    if kind.startswith("bool"):
        if value.lower() not in _BOOL:
            raise ParameterError(f"{name}: expected a boolean, got {value!r}")
        return _BOOL[value.lower()]
    if kind.startswith("int"):
        return int(value)
    if kind.startswith("float"):
        return float(value)
    return value


def load_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys are ExperimentConfig fields."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce_field(key, value)
    return out


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = []
    for k, v in asdict(cfg).items():
        if k == "h":
            v = ",".join(str(x) for x in v)
        lines.append(f"{k} = {'' if v is None else v}")
    return "\n".join(lines) + "\n"


# plaintext references -----------------------------------------------------------

def linear_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of two integer tensors, exact in int64."""
    x = np.asarray(x, dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    out = np.zeros(tuple(a + b - 1 for a, b in zip(x.shape, h.shape)), dtype=np.int64)
    for idx in np.ndindex(*h.shape):
        if h[idx]:
            sl = tuple(slice(i, i + s) for i, s in zip(idx, x.shape))
            out[sl] += h[idx] * x
    return out


def linear_correlate(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full correlation; entry k holds lag k - (dims(h) - 1)."""
    h = np.asarray(h)
    return linear_convolve(x, h[tuple(slice(None, None, -1) for _ in range(h.ndim))])


# encrypted runs -----------------------------------------------------------------

@dataclass
class OpCounter:
    ciphertexts: int = 0
    products: int = 0
    plain_products: int = 0
    additions: int = 0


class _Session:
    """Keys plus counted homomorphic operations over one ring."""

    def __init__(self, params: RingParams, noise: NoiseParams, rng: np.random.Generator):
        self.params, self.noise, self.rng = params, noise, rng
        self.count = OpCounter()
        self.timing: dict[str, float] = {}
        with self.timed("keygen"):
            self.sk, self.pk = keygen(params, noise, rng)

    @contextmanager
    def timed(self, stage: str):
        t0 = time.perf_counter()
        yield
        self.timing[stage] = self.timing.get(stage, 0.0) + time.perf_counter() - t0

    def encrypt(self, msg: MultiPoly) -> Ciphertext:
        self.count.ciphertexts += 1
        with self.timed("encrypt"):
            return encrypt(self.pk, msg, self.noise, self.rng)

    def mul(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self.count.products += 1
        with self.timed("evaluate"):
            return he_mul(a, b)

    def mul_plain(self, a: Ciphertext, m: MultiPoly) -> Ciphertext:
        self.count.plain_products += 1
        with self.timed("evaluate"):
            return he_mul_plain(a, m)

    def add(self, a: Ciphertext | None, b: Ciphertext) -> Ciphertext:
        if a is None:
            return b
        self.count.additions += 1
        with self.timed("evaluate"):
            return he_add(a, b)

    def decrypt(self, ct: Ciphertext) -> MultiPoly:
        with self.timed("decrypt"):
            return decrypt(self.sk, ct)


@dataclass
class RunResult:
    output: np.ndarray
    reference: np.ndarray
    params: RingParams
    counter: OpCounter
    timing: dict = field(default_factory=dict)
    noise_max: int = 0

    @property
    def exact(self) -> bool:
        return self.output.shape == self.reference.shape and bool(np.array_equal(self.output, self.reference))

    def record(self, cfg: ExperimentConfig, timing: bool = True) -> dict:
        rec = {
            "scenario": cfg.scenario, "scheme": cfg.scheme, "N": cfg.N, "F": cfg.kernel_size(), "I": cfg.I,
            "degrees": list(self.params.degrees), "n": self.params.n, "q": self.params.q,
            "log2_q": math.ceil(math.log2(self.params.q)), "t": self.params.t, "sigma": cfg.sigma,
            "ciphertexts": self.counter.ciphertexts, "products": self.counter.products,
            "plain_products": self.counter.plain_products, "additions": self.counter.additions,
            "noise_max": self.noise_max, "noise_budget": self.params.q // 2,
            "exact": self.exact, "seed": cfg.seed,
        }
        if timing:
            rec["timing_s"] = {k: round(v, 6) for k, v in sorted(self.timing.items())}
        return rec


def _centered(vals: np.ndarray, t: int) -> np.ndarray:
    v = np.mod(np.asarray(vals, dtype=np.int64), t)
    return np.where(v > t // 2, v - t, v)


def ring_for(cfg: ExperimentConfig) -> RingParams:
    degrees = cfg.degrees()
    n = math.prod(degrees)
    q = choose_prime(min_q_bound(cfg.t, cfg.sigma, n, cfg.D, cfg.additions()), degrees)
    return RingParams(degrees, q, cfg.t)


def _rngs(seed):
    data_ss, key_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(data_ss), np.random.default_rng(key_ss)


def random_inputs(cfg: ExperimentConfig, rng: np.random.Generator):
    """(images (I, N, N), kernels (I, K, K)) drawn from the config ranges."""
    N, K, I = cfg.N, cfg.kernel_size(), cfg.I
    images = rng.integers(0, cfg.pixel_max + 1, size=(I, N, N), dtype=np.int64)
    if cfg.scenario == "correlation":
        kernels = rng.integers(0, cfg.pixel_max + 1, size=(I, K, K), dtype=np.int64)
    else:
        kernels = rng.integers(-cfg.kernel_max, cfg.kernel_max + 1, size=(I, K, K), dtype=np.int64)
    return images, kernels


def _check_fits(images, kernels, t: int) -> None:
    bound = int(np.abs(images).max(initial=0)) * int(np.abs(kernels).max(initial=0)) * kernels[0].size
    if bound > t // 2:
        raise SizingError(f"outputs may reach {bound}, beyond the (-t/2, t/2] range for t={t}")


def _fail(result: RunResult, what: str):
    bad = int(np.sum(result.output != result.reference)) if result.output.shape == result.reference.shape else -1
    raise ReferenceMismatch(
        f"{what}: decrypted output differs from the plaintext reference in {bad} entries; "
        f"max noise {result.noise_max} vs budget q/2 = {result.params.q // 2} "
        f"(q={result.params.q}, degrees={result.params.degrees})")


def _run_bivariate(s: _Session, images, kernels, out: int, correlation: bool, public: bool):
    params, t = s.params, s.params.t
    mode = "correlation" if correlation else "convolution"
    outs, noise = [], 0
    for x, k in zip(images, kernels):
        px = encode_signal(_centered(x, t), params.shape, t)
        pk = encode_signal(_centered(k, t), params.shape, t, mode=mode)
        cx = s.encrypt(px)
        if public:
            cy = s.mul_plain(cx, pk)
        else:
            cy = s.mul(cx, s.encrypt(pk))
        dec = s.decrypt(cy)
        noise = max(noise, noise_norm(s.sk, cy, dec))
        outs.append(dec.centered()[:out, :out])
    return np.stack(outs), noise


def _run_univariate(s: _Session, images, kernels, out: int, correlation: bool, public: bool):
    params, t = s.params, s.params.t
    shape = params.shape
    outs, noise = [], 0
    for x, k in zip(images, kernels):
        if correlation:
            k = k[::-1, ::-1]
        rows_x = [s.encrypt(encode_signal(_centered(r, t), shape, t)) for r in x]
        rows_k = [encode_signal(_centered(r, t), shape, t) for r in k]
        if not public:
            rows_k = [s.encrypt(p) for p in rows_k]
        acc: list[Ciphertext | None] = [None] * out
        for a, cx in enumerate(rows_x):
            for b, hk in enumerate(rows_k):
                prod = s.mul_plain(cx, hk) if public else s.mul(cx, hk)
                acc[a + b] = s.add(acc[a + b], prod)
        img = np.zeros((out, out), dtype=np.int64)
        for r, ct in enumerate(acc):
            dec = s.decrypt(ct)
            noise = max(noise, noise_norm(s.sk, ct, dec))
            img[r] = dec.centered()[:out]
        outs.append(img)
    return np.stack(outs), noise


def _run_packed(s: _Session, images, kernels, out: int, correlation: bool, public: bool, slots: int):
    params, t = s.params, s.params.t
    layout = make_layout(t, slots)
    I = images.shape[0]
    if correlation:
        kernels = kernels[:, ::-1, ::-1]
    bx = np.zeros(images.shape[1:] + (slots,), dtype=np.int64)
    bk = np.zeros(kernels.shape[1:] + (slots,), dtype=np.int64)
    bx[..., :I] = np.moveaxis(images, 0, -1)
    bk[..., :I] = np.moveaxis(kernels, 0, -1)
    with s.timed("encode"):
        px = pre_process(bx, layout, params.shape)
        pk = pre_process(bk, layout, params.shape)
    cx = s.encrypt(px)
    cy = s.mul_plain(cx, pk) if public else s.mul(cx, s.encrypt(pk))
    dec = s.decrypt(cy)
    noise = noise_norm(s.sk, cy, dec)
    with s.timed("decode"):
        blocks = post_process(dec, layout)
    res = _centered(blocks[:out, :out, :I], t)
    return np.moveaxis(res, -1, 0), noise


def run_linear(cfg: ExperimentConfig, images: np.ndarray | None = None, kernels: np.ndarray | None = None,
               check: bool = True) -> RunResult:
    """Encrypted filtering (``scenario=filtering``) or correlation of I image pairs.

    ``images`` has shape (I, N, N) and ``kernels`` (I, K, K). Missing inputs are
    drawn from the seeded data stream.
    """
    cfg.validate(drawn=images is None or kernels is None)
    data_rng, key_rng = _rngs(cfg.seed)
    if images is None or kernels is None:
        ri, rk = random_inputs(cfg, data_rng)
        images = ri if images is None else images
        kernels = rk if kernels is None else kernels
    images = np.asarray(images, dtype=np.int64)
    kernels = np.asarray(kernels, dtype=np.int64)
    K = cfg.kernel_size()
    if images.shape != (cfg.I, cfg.N, cfg.N) or kernels.shape != (cfg.I, K, K):
        raise SizingError(f"expected images {(cfg.I, cfg.N, cfg.N)} and kernels {(cfg.I, K, K)}, "
                          f"got {images.shape} and {kernels.shape}")
    _check_fits(images, kernels, cfg.t)
    correlation = cfg.scenario == "correlation"
    ref_fn = linear_correlate if correlation else linear_convolve
    reference = np.stack([ref_fn(x, k) for x, k in zip(images, kernels)])
    params = ring_for(cfg)
    s = _Session(params, NoiseParams(cfg.sigma), key_rng)
    out = cfg.out_size()
    if cfg.scheme == 1:
        output, noise = _run_univariate(s, images, kernels, out, correlation, cfg.public_kernel)
    elif cfg.scheme == 2:
        output, noise = _run_bivariate(s, images, kernels, out, correlation, cfg.public_kernel)
    else:
        output, noise = _run_packed(s, images, kernels, out, correlation, cfg.public_kernel, cfg.slots())
    result = RunResult(output, reference, params, s.count, s.timing, noise)
    if check and not result.exact:
        _fail(result, f"{cfg.scenario} (scheme {cfg.scheme})")
    return result


def run_sobel(cfg: ExperimentConfig, image: np.ndarray | None = None, check: bool = True) -> RunResult:
    """Horizontal and vertical Sobel gradients of one image with public kernels.

    ``output``/``reference`` have shape (2, N+2, N+2): the x and y gradient maps.
    """
    cfg.validate(drawn=image is None)
    data_rng, key_rng = _rngs(cfg.seed)
    if image is None:
        image = data_rng.integers(0, cfg.pixel_max + 1, size=(cfg.N, cfg.N), dtype=np.int64)
    image = np.asarray(image, dtype=np.int64)
    if image.shape != (cfg.N, cfg.N):
        raise SizingError(f"expected a {cfg.N}x{cfg.N} image, got {image.shape}")
    kernels = np.stack([SOBEL_X, SOBEL_Y])
    _check_fits(image[None], kernels, cfg.t)
    reference = np.stack([linear_convolve(image, k) for k in kernels])
    params = ring_for(cfg)
    s = _Session(params, NoiseParams(cfg.sigma), key_rng)
    t = cfg.t
    out = cfg.out_size()
    cx = s.encrypt(encode_signal(_centered(image, t), params.shape, t))
    maps, noise = [], 0
    for k in kernels:
        cy = s.mul_plain(cx, encode_signal(k, params.shape, t))
        dec = s.decrypt(cy)
        noise = max(noise, noise_norm(s.sk, cy, dec))
        maps.append(dec.centered()[:out, :out])
    result = RunResult(np.stack(maps), reference, params, s.count, s.timing, noise)
    if check and not result.exact:
        _fail(result, "sobel")
    return result


def run_experiment(cfg: ExperimentConfig, **kw) -> RunResult:
    if cfg.scenario == "sobel":
        return run_sobel(cfg, **kw)
    return run_linear(cfg, **kw)


def params_report(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate(run=False)
    rows = parameter_rows(cfg.scenario if cfg.scenario != "sobel" else "filtering", cfg.N,
                          cfg.kernel_size(), cfg.I, cfg.h, cfg.Nz, cfg.t, cfg.sigma, cfg.D, cfg.A,
                          cfg.epsilon)
    out = []
    for r in rows:
        d = r.as_dict()
        d["delta"] = round(d["delta"], 9)
        d["bit_security"] = round(d["bit_security"], 3)
        d["enc_size_bits"] = round(d["enc_size_bits"], 1)
        out.append({"scenario": cfg.scenario, **d})
    return out


def ascii_degrees(degrees: Sequence[int]) -> str:
    return "x".join(str(d) for d in degrees)
