"""Software throughput of the pipelined Toeplitz hash (informative only)."""
import argparse
import time

import numpy as np

from sdiqrng.extractor import ToeplitzPipeline, ToeplitzSeed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=int, default=9600)
    ap.add_argument("--l", type=int, default=4155)
    ap.add_argument("--k", type=int, default=96)
    ap.add_argument("--blocks", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--target-bps", type=float, default=1.55e9 * 12, help="R_data * b for reference")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    seed = ToeplitzSeed.random(args.h, args.l, rng)
    t0 = time.perf_counter()
    pipe = ToeplitzPipeline(seed, args.k)
    setup = time.perf_counter() - t0
    blocks = rng.integers(0, 2, (args.blocks, args.h), dtype=np.uint8)
    best = np.inf
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        pipe.hash_blocks(blocks)
        best = min(best, time.perf_counter() - t0)
    bps = args.blocks * args.h / best
    print(f"h={args.h} l={args.l} k={args.k}: table setup {setup:.3f} s, "
          f"{bps / 1e6:.1f} Mb/s in, {bps / args.h * args.l / 1e6:.1f} Mb/s out "
          f"({bps / args.target_bps:.2%} of {args.target_bps / 1e9:.1f} Gb/s)")


if __name__ == "__main__":
    main()
