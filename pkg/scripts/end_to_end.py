"""Desk-scale run: simulate, certify, plan, extract and smoke-test."""
import argparse
import json
import math
from pathlib import Path

import numpy as np

from sdiqrng.certifier import CertThresholds, certify
from sdiqrng.config import load_config
from sdiqrng.extractor import ToeplitzSeed, extract_stream, plan, smoke_tests
from sdiqrng.photon_core import LogProb
from sdiqrng.simulator import RunConfig, SourceModel, pack_codes, run_protocol

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk_e2e.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    ap.add_argument("--rounds", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--eps-hash-log10", type=float, default=-20.0)
    ap.add_argument("--out", help="write the extracted bytes here")
    args = ap.parse_args()

    params = load_config(args.config)
    ex = params.extras
    th = CertThresholds.from_voltages(ex["threshold_lo_volts"], ex["threshold_hi_volts"], params.adc_c)
    rec = run_protocol(RunConfig(args.rounds, args.seed, params,
                                 SourceModel(ex["source_kind"], ex["source_mean_photons"]), th))
    m = int(ex["samples_per_block"])
    cert = certify(params, th, LogProb(ex["eps_fail_log10"] / math.log10(2.0)), m)
    if not cert.ok:
        raise SystemExit(f"certificate zeroed: {cert.reason}")
    b = params.adc_d.bit_depth
    hp = plan(cert.kappa_per_sample * m, m, b, eps_hash=LogProb(args.eps_hash_log10 / math.log10(2.0)),
              eps_fail=cert.budget.eps_fail)
    seed = ToeplitzSeed.random(hp.h, hp.l, np.random.default_rng(args.seed + 1))
    out, report = extract_stream(hp, seed, pack_codes(rec.code_D[rec.passed], b), kappa_source="certify")
    smoke = smoke_tests(out)
    if args.out:
        Path(args.out).write_bytes(out)
    print(json.dumps({
        "pass_fraction": float(rec.passed.mean()),
        "n_R_minus": cert.n_R_minus,
        "kappa_per_sample_bits": cert.kappa_per_sample,
        "h": hp.h, "l": hp.l, "blocks": report.blocks, "bits_out": report.bits_out,
        "eps_total_log10": report.eps_total_log10,
        "monobit_p": smoke.monobit_p, "runs_p": smoke.runs_p, "smoke_pass": smoke.passed,
    }, indent=2))


if __name__ == "__main__":
    main()
