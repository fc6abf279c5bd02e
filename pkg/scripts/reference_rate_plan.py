"""Extraction budget and bit rates at the 9600 x 4155 reference geometry.

Back-solves kappa from the target eps_hash, then prints the planner record
for the long-string (t = R_hash) and single-string settings.
"""
import argparse
import json
import math
import time

from sdiqrng.extractor import plan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps-hash", type=float, default=9.0e-17, help="target eps_hash used to back-solve kappa")
    ap.add_argument("--l", type=int, default=4155)
    ap.add_argument("--m", type=int, default=800)
    ap.add_argument("--b", type=int, default=12)
    ap.add_argument("--r-hash", type=float, default=1_937_500)
    ap.add_argument("--r-data", type=float, default=1.55e9)
    ap.add_argument("--eps-c", type=float, default=0.005)
    ap.add_argument("--eps-fail", type=float, default=1.6e-19)
    args = ap.parse_args()

    kappa = args.l - 2 - 2 * math.log2(args.eps_hash)
    t0 = time.perf_counter()
    hp = plan(kappa, args.m, args.b, l=args.l, t=int(args.r_hash), R_hash=args.r_hash, R_data=args.r_data,
              eps_c=args.eps_c, eps_fail=args.eps_fail)
    elapsed = time.perf_counter() - t0
    rec = hp.to_record()
    rec["kappa_per_sample"] = kappa / args.m
    rec["R_d_exact"] = str(hp.R_d)
    rec["planner_seconds"] = elapsed
    print(json.dumps(rec, indent=2, default=str))
    print(f"R_d = {float(hp.R_d) / 1e9:.4f} Gb/s, R_avg = {hp.R_avg / 1e9:.4f} Gb/s, "
          f"eps_hash = {hp.eps_hash:.3g}, eps_total = {hp.eps_total:.3g}")


if __name__ == "__main__":
    main()
