"""Filter every block of a tiled image with one trivariate ciphertext product.

    python3 scripts/packed_blocks.py [--size 32] [--block 16] [--seed 2]
"""
import argparse

import numpy as np

from mrlwe.experiments import ExperimentConfig, linear_convolve, run_linear
from mrlwe.pack import pack_blocks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--block", type=int, default=16)
    ap.add_argument("--F", type=int, default=3)
    ap.add_argument("--t", type=int, default=12289)
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    img = rng.integers(0, 256, size=(args.size, args.size))
    blocks = np.moveaxis(pack_blocks(img, args.block, args.block), -1, 0)   # (I, b, b)
    I = blocks.shape[0]
    kernels = rng.integers(-2, 3, size=(I, args.F, args.F))
    cfg = ExperimentConfig(N=args.block, F=args.F, I=I, scheme=3, t=args.t, kernel_max=2, seed=args.seed)
    res = run_linear(cfg, blocks, kernels)
    for k in range(I):
        assert np.array_equal(res.output[k], linear_convolve(blocks[k], kernels[k]))
    print(f"{I} blocks of {args.block}x{args.block} in ring {res.params.degrees}: "
          f"{res.counter.products} ciphertext product, {res.counter.ciphertexts} ciphertexts, exact {res.exact}")


if __name__ == "__main__":
    main()
