"""Certified photon number n_R^- and per-sample min-entropy versus the
position of a fixed-width certification window and the failure target.

Writes CSV rows (v_minus_mV, eps_fail_log10, n_R_minus, kappa_bits, reason).
"""
import argparse
import csv
import math
import sys

import numpy as np

from sdiqrng.certifier import CertThresholds, certify
from sdiqrng.config import default_params, load_config
from sdiqrng.photon_core import LogProb


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--v-lo-mv", type=float, nargs=3, default=[2.0, 40.0, 20], metavar=("START", "STOP", "N"))
    ap.add_argument("--width-mv", type=float, default=None,
                    help="window width v_plus - v_minus; default: the config's window, else 2 mV")
    ap.add_argument("--eps-fail-log10", type=float, nargs="+", default=[-6, -10, -20, -40])
    ap.add_argument("--m", type=int, default=800)
    ap.add_argument("--out")
    args = ap.parse_args()

    params = load_config(args.config) if args.config else default_params()
    ex = params.extras
    if args.width_mv is not None:
        width = args.width_mv * 1e-3
    elif "threshold_lo_volts" in ex and "threshold_hi_volts" in ex:
        width = ex["threshold_hi_volts"] - ex["threshold_lo_volts"]
    else:
        width = 2e-3
    start, stop, n = args.v_lo_mv
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["v_minus_mV", "eps_fail_log10", "n_R_minus", "kappa_bits", "reason"])
    for v_lo in np.linspace(start, stop, int(n)) * 1e-3:
        th = CertThresholds.from_voltages(v_lo, v_lo + width, params.adc_c)
        for e in args.eps_fail_log10:
            cert = certify(params, th, LogProb(e / math.log10(2.0)), args.m)
            w.writerow([f"{th.v_minus * 1e3:.4f}", e, cert.n_R_minus, f"{cert.kappa_per_sample:.6f}",
                        cert.reason or ""])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
