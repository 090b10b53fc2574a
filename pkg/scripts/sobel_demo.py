"""Encrypted Sobel gradients of a PGM image (or a synthetic disc) with public kernels.

    python3 scripts/sobel_demo.py [--input img.pgm] [--out grad.pgm] [--seed 1]
"""
import argparse

import numpy as np

from mrlwe.experiments import ExperimentConfig, run_sobel
from mrlwe.io import ingest, write_signal


def synthetic(N: int) -> np.ndarray:
    yy, xx = np.mgrid[:N, :N]
    return np.where((yy - N / 2) ** 2 + (xx - N / 2) ** 2 < (N / 3) ** 2, 200, 30).astype(np.int64)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", default=None, help="square 8-bit PGM")
    ap.add_argument("--N", type=int, default=32, help="side of the synthetic image")
    ap.add_argument("--t", type=int, default=12289)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default=None, help="gradient magnitude as PGM")
    args = ap.parse_args()
    img = ingest(args.input) if args.input else synthetic(args.N)
    cfg = ExperimentConfig(scenario="sobel", N=img.shape[0], t=args.t, seed=args.seed)
    res = run_sobel(cfg, image=img)
    gx, gy = res.output
    mag = np.hypot(gx, gy)
    print(f"ring {res.params.degrees}, log2 q {res.params.q.bit_length()}, exact {res.exact}, "
          f"noise {res.noise_max / (res.params.q // 2):.2e} of q/2")
    if args.out:
        write_signal(args.out, np.round(255 * mag / max(mag.max(), 1)).astype(np.int64), "pgm")


if __name__ == "__main__":
    main()
