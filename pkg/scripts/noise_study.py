"""Decryption failure rate of one ciphertext product as the modulus moves around the bound.

    python3 scripts/noise_study.py [--shape 8x8] [--trials 2000] [--slack 0.5,1,2]
"""
import argparse
import math

import numpy as np

from mrlwe.params import choose_prime, min_q_bound
from mrlwe.ring import MultiPoly, RingParams, ring_mul
from mrlwe.she import NoiseParams, decrypt, encrypt, he_mul, keygen, noise_norm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shape", default="8x8")
    ap.add_argument("--t", type=int, default=257)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--slack", default="0.5,1,2", help="multiples of the modulus bound")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    shape = tuple(int(v) for v in args.shape.split("x"))
    noise = NoiseParams(args.sigma)
    bound = min_q_bound(args.t, args.sigma, math.prod(shape))
    print("slack,log2_q,failures,trials,rate,worst_noise_over_half_q")
    for slack in (float(v) for v in args.slack.split(",")):
        q = choose_prime(max(3, int(bound.value * slack)), shape)
        params = RingParams(shape, q, args.t)
        rng = np.random.default_rng(args.seed)
        fails, worst = 0, 0
        for i in range(args.trials):
            if i % 100 == 0:
                sk, pk = keygen(params, noise, rng)
            a, b = (MultiPoly.uniform(shape, args.t, rng) for _ in range(2))
            c = he_mul(encrypt(pk, a, noise, rng), encrypt(pk, b, noise, rng))
            want = ring_mul(a, b)
            fails += decrypt(sk, c) != want
            worst = max(worst, noise_norm(sk, c, want))
        print(f"{slack},{q.bit_length()},{fails},{args.trials},{fails / args.trials:.4f},{worst / (q // 2):.3f}")


if __name__ == "__main__":
    main()
