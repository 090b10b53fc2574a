"""Command-line harness.

    mrlwe params    --scenario filtering --N 246 --F 11 --I 4 --h 8,2,1
    mrlwe keygen    --degrees 128x128 --t 12289 --seed 1 --out-dir keys
    mrlwe encrypt   --pk keys/pk.mrlw --input img.pgm --out img.ct --seed 2
    mrlwe decrypt   --sk keys/sk.mrlw --ct out.ct --dims 74x74 --out out.txt
    mrlwe filter    --N 64 --F 11 --seed 3 [--scheme 3 --I 4] [--public-kernel]
    mrlwe correlate --N 32 --I 2 --scheme 3 --seed 4
    mrlwe switch    --ct in.ct --stk keys/stk.mrlw --out out.ct [--verify-sk keys/sk.mrlw]
    mrlwe bench     --seed 5 --N 32 --F 5 --I 4

Experiment flags mirror :class:`ExperimentConfig`; ``--config FILE`` reads
flat ``key = value`` defaults that explicit flags override.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io as wire
from .codec import decode_signal, encode_signal
from .errors import MRLWEError, ParameterError, StructureError
from .experiments import (ExperimentConfig, ascii_degrees, coerce_field, load_config_file,
                          params_report, run_experiment)
from .params import choose_prime, min_q_bound
from .relin import gen_mult_key, gen_structure_key, remap_secret_key, switch_structure
from .ring import RingMapping, RingParams, remap
from .she import NoiseParams, decrypt, encrypt, keygen


def _dims(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.lower().replace(",", "x").split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad dimensions {text!r}, expected e.g. 64x64") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"bad dimensions {text!r}")
    return vals


# reports ------------------------------------------------------------------------

def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = _io.StringIO()
    flat = [{k: ascii_degrees(v) if isinstance(v, list) else
             (json.dumps(v, sort_keys=True) if isinstance(v, dict) else v) for k, v in r.items()} for r in rows]
    writer = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2, sort_keys=False) + "\n"


def emit(rows: list[dict], fmt: str, out: str | None) -> None:
    """Print (or write next to ``out``) CSV and/or JSON renderings of the rows."""
    texts = {}
    if fmt in ("csv", "both"):
        texts["csv"] = rows_to_csv(rows)
    if fmt in ("json", "both"):
        texts["json"] = rows_to_json(rows)
    if out:
        base = Path(out)
        for ext, text in texts.items():
            path = base if len(texts) == 1 and base.suffix else base.with_suffix("." + ext)
            path.write_text(text)
    else:
        for text in texts.values():
            sys.stdout.write(text)


# config plumbing ----------------------------------------------------------------

_CONFIG_FLAGS = {
    "scenario": "filtering | correlation | sobel | volume",
    "N": "image side length", "Nz": "volume depth (volume scenario)", "F": "filter side length",
    "I": "number of image pairs", "scheme": "1 = univariate rows, 2 = bivariate, 3 = trivariate packed",
    "t": "plaintext modulus", "sigma": "noise standard deviation", "D": "multiplicative depth",
    "A": "additions per output", "epsilon": "attacker advantage for the security estimate",
    "h": "slack factor, one value or RLWE,2-RLWE,3-RLWE", "seed": "RNG seed",
    "pixel_max": "largest random pixel value", "kernel_max": "largest random |kernel| value",
    "input": "input image (PGM) or stacked images (.npy)", "kernel": "kernel file (.npy or PGM)",
    "output": "output path for the result", "report": "report path (CSV/JSON by extension)",
}


def _add_config_flags(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--config", help="flat key = value file with ExperimentConfig defaults")
    for f in fields(ExperimentConfig):
        if f.name == "public_kernel":
            p.add_argument("--public-kernel", dest="public_kernel", action="store_const", const=True,
                           default=None, help="multiply by an unencrypted kernel")
            continue
        kw = {"dest": f.name, "default": None, "help": _CONFIG_FLAGS.get(f.name)}
        if f.name == "seed" and seed_required:
            kw["required"] = True
        p.add_argument("--" + f.name.replace("_", "-"), **kw)
    p.add_argument("--no-timing", action="store_true", help="omit timing fields (byte-stable reports)")
    p.add_argument("--format", choices=("csv", "json", "both"), default="json")


def config_from_args(args, **overrides) -> ExperimentConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(ExperimentConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        values[f.name] = raw if isinstance(raw, bool) else coerce_field(f.name, str(raw))
    values.update(overrides)
    return ExperimentConfig(**values)


def _load_array(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path).astype(np.int64)
    return wire.ingest(path)


# subcommands --------------------------------------------------------------------

def cmd_params(args) -> int:
    cfg = config_from_args(args)
    emit(params_report(cfg), args.format, cfg.report)
    return 0


def _ring_from_args(args) -> RingParams:
    degrees = args.degrees
    n = int(np.prod(degrees))
    q = args.q or choose_prime(min_q_bound(args.t, args.sigma, n, args.D, args.A), degrees)
    return RingParams(degrees, q, args.t)


def cmd_keygen(args) -> int:
    params = _ring_from_args(args)
    noise = NoiseParams(args.sigma)
    rng = np.random.default_rng(args.seed)
    sk, pk = keygen(params, noise, rng)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sk.mrlw").write_bytes(wire.dump_secret_key(sk))
    (out / "pk.mrlw").write_bytes(wire.dump_public_key(pk))
    written = ["sk.mrlw", "pk.mrlw"]
    if args.relin:
        rk = gen_mult_key(sk, args.base, noise, rng)
        (out / "rk.mrlw").write_bytes(wire.dump_relin_key(rk))
        written.append("rk.mrlw")
    if args.target:
        if args.mapping == "reshape":
            mapping = RingMapping.reshape(params.shape, args.target)
        else:
            mapping = RingMapping.random(params.shape, args.target, rng)
        sk2 = remap_secret_key(sk, mapping)
        stk = gen_structure_key(sk, sk2, mapping, args.base, noise, rng)
        (out / "stk.mrlw").write_bytes(wire.dump_structure_key(stk))
        (out / "sk_target.mrlw").write_bytes(wire.dump_secret_key(sk2))
        written += ["stk.mrlw", "sk_target.mrlw"]
    print(json.dumps({"degrees": list(params.degrees), "q": params.q, "t": params.t, "files": written}))
    return 0


def cmd_encrypt(args) -> int:
    pk = wire.load_public_key(Path(args.pk).read_bytes())
    params = pk.params
    x = _load_array(args.input) if args.input.endswith(".npy") else wire.ingest(args.input, t=params.t)
    while x.ndim > params.m and x.shape[0] == 1:
        x = x[0]   # drop leading singleton axes, e.g. a 1x1xL raw3d volume for a univariate ring
    t = params.t
    xc =np.where(np.mod(x, t) > t // 2, np.mod(x, t) - t, np.mod(x, t))
    msg = encode_signal(xc, params.shape, t, mode=args.mode)
    ct = encrypt(pk, msg, NoiseParams(args.sigma), np.random.default_rng(args.seed))
    Path(args.out).write_bytes(wire.dump_ciphertext(ct))
    return 0


def cmd_decrypt(args) -> int:
    sk = wire.load_secret_key(Path(args.sk).read_bytes())
    ct = wire.load_ciphertext(Path(args.ct).read_bytes())
    plain = decrypt(sk, ct)
    dims = args.dims or plain.shape
    vals = decode_signal(plain, dims, signed=not args.unsigned)
    if args.out:
        wire.write_signal(args.out, vals)
    else:
        np.savetxt(sys.stdout, vals.reshape(vals.shape[0], -1), fmt="%d")
    return 0


def cmd_experiment(args, scenario: str | None = None) -> int:
    overrides = {"scenario": scenario} if scenario and args.scenario is None else {}
    cfg = config_from_args(args, **overrides)
    kw = {}
    if cfg.input:
        arr = _load_array(cfg.input)
        if cfg.scenario == "sobel":
            kw["image"] = arr
        else:
            kw["images"] = arr if arr.ndim == 3 else arr[None]
    if cfg.kernel and cfg.scenario != "sobel":
        k = _load_array(cfg.kernel)
        kw["kernels"] = k if k.ndim == 3 else k[None]
    result = run_experiment(cfg, **kw)
    rec = result.record(cfg, timing=not args.no_timing)
    if cfg.output:
        out = result.output
        wire.write_signal(cfg.output, out[0] if out.shape[0] == 1 else out.reshape(-1, out.shape[-1]))
    emit([rec], args.format, cfg.report)
    return 0


def cmd_switch(args) -> int:
    stk = wire.load_structure_key(Path(args.stk).read_bytes())
    ct = wire.load_ciphertext(Path(args.ct).read_bytes())
    if ct.params != stk.source:
        raise StructureError("ciphertext ring does not match the structure key source ring")
    out = switch_structure(ct, stk)
    Path(args.out).write_bytes(wire.dump_ciphertext(out))
    rec = {"source": list(stk.source.degrees), "target": list(stk.target.degrees)}
    if args.verify_sk:
        sk = wire.load_secret_key(Path(args.verify_sk).read_bytes())
        if sk.params != stk.source:
            raise StructureError("verification key does not belong to the source ring")
        want = remap(decrypt(sk, ct), stk.mapping)
        got = decrypt(remap_secret_key(sk, stk.mapping), out)
        rec["verified"] = bool(got == want)
        if not rec["verified"]:
            print(json.dumps(rec))
            raise MRLWEError("switched ciphertext does not decrypt to the remapped plaintext")
    print(json.dumps(rec))
    return 0


def cmd_bench(args) -> int:
    """Run the configured scenario in every scheme that fits at desk scale."""
    base = config_from_args(args)
    rows = []
    for sizing in params_report(base):
        scheme = {"RLWE": 1, "2-RLWE": 2, "3-RLWE": 3}[sizing["scheme"]]
        cfg = ExperimentConfig(**{**base.__dict__, "scheme": scheme})
        row = dict(sizing)
        if cfg.problems():
            row.update({"ran": False, "reason": "; ".join(cfg.problems())})
        else:
            res = run_experiment(cfg)
            rec = res.record(cfg, timing=not args.no_timing)
            row.update({"ran": True, "run_degrees": rec["degrees"], "run_log2_q": rec["log2_q"],
                        "run_products": rec["products"], "run_ciphertexts": rec["ciphertexts"],
                        "exact": rec["exact"]})
            if "timing_s" in rec:
                row["timing_s"] = rec["timing_s"]
        rows.append(row)
    emit(rows, args.format, base.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrlwe", description="Multivariate RLWE homomorphic toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="modulus and security rows per scheme")
    _add_config_flags(p)
    p.set_defaults(func=cmd_params)

    def ring_flags(q):
        q.add_argument("--degrees", type=_dims, required=True, help="ring degrees, e.g. 128x128")
        q.add_argument("--t", type=int, default=12289)
        q.add_argument("--q", type=int, default=None, help="ciphertext modulus (default: from the bound)")
        q.add_argument("--sigma", type=float, default=1.0)
        q.add_argument("--D", type=int, default=1)
        q.add_argument("--A", type=int, default=1)

    p = sub.add_parser("keygen", help="secret/public keys, optional relinearization and structure keys")
    ring_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--relin", action="store_true", help="also write a relinearization key (s^2 -> s)")
    p.add_argument("--base", type=int, default=None, help="decomposition base T (default t)")
    p.add_argument("--target", type=_dims, default=None, help="target ring shape for a structure key")
    p.add_argument("--mapping", choices=("reshape", "random"), default="reshape")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt a PGM/raw3d signal")
    p.add_argument("--pk", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("convolution", "correlation"), default="convolution")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt and decode a ciphertext")
    p.add_argument("--sk", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--unsigned", action="store_true", help="residues in [0, t) instead of centered")
    p.add_argument("--out", default=None, help=".pgm, .raw3d, .npy or text")
    p.set_defaults(func=cmd_decrypt)

    for name, helptext in (("filter", "encrypted filtering (or --scenario sobel)"),
                           ("correlate", "encrypted correlation")):
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
        p.set_defaults(func=lambda a, s=("filtering" if name == "filter" else "correlation"): cmd_experiment(a, s))

    p = sub.add_parser("switch", help="switch a ciphertext to another ring structure")
    p.add_argument("--ct", required=True)
    p.add_argument("--stk", required=True, help="structure key file")
    p.add_argument("--out", required=True)
    p.add_argument("--verify-sk", default=None, help="source secret key: check the remapped plaintext")
    p.set_defaults(func=cmd_switch)

    p = sub.add_parser("bench", help="run and size the scenario for all three schemes")
    _add_config_flags(p, seed_required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MRLWEError, OSError) as exc:
        print(f"mrlwe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
