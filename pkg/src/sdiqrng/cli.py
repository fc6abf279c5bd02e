"""Command-line front end: ``sdiqrng {certify,simulate,extract,plan,compare,seed}``.

All epsilon values are passed and reported as log10. Every output file
carries the SHA-256 digest of the configuration that produced it.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import compare as cmp
from .certifier import CertThresholds, certify
from .config import ConfigError, ProtocolParams, default_params, digest_of, load_config
from .extractor import (InfeasiblePlan, ToeplitzSeed, extract_stream, plan, read_seed_file,
                        write_seed_file)
from .photon_core import LogProb
from .simulator import RunConfig, SourceModel, pack_codes, run_protocol, write_records_csv

log = logging.getLogger("sdiqrng")

EXIT_OK, EXIT_ZEROED, EXIT_USAGE = 0, 1, 2


def _params(args) -> ProtocolParams:
    return load_config(args.config) if args.config else default_params()


def _log10_prob(x: float) -> LogProb:
    return LogProb(x / math.log10(2.0))


def _thresholds(args, params: ProtocolParams) -> CertThresholds:
    lo = args.threshold_mv_lo * 1e-3 if args.threshold_mv_lo is not None else params.extras.get("threshold_lo_volts")
    hi = args.threshold_mv_hi * 1e-3 if args.threshold_mv_hi is not None else params.extras.get("threshold_hi_volts")
    if lo is None or hi is None:
        raise ConfigError("thresholds required: --threshold-mv-lo/--threshold-mv-hi or threshold_*_volts in config")
    return CertThresholds.from_voltages(lo, hi, params.adc_c)


def _write_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    return str(o)


def cmd_certify(args) -> int:
    params = _params(args)
    thresholds = _thresholds(args, params)
    eps_list = args.eps_fail_log10 or [params.extras.get("eps_fail_log10", -10.0)]
    m = args.samples_per_block or int(params.extras.get("samples_per_block", 800))
    records = []
    for e in eps_list:
        cert = certify(params, thresholds, _log10_prob(e), m, split=args.split)
        rec = cert.to_record()
        rec["config_sha256"] = params.digest()
        rec["target_eps_fail_log10"] = e
        records.append(rec)
        log.info("eps_fail=1e%g: n_R_minus=%d kappa=%.4f reason=%s", e, cert.n_R_minus,
                 cert.kappa_per_sample, cert.reason)
    _write_json(records[0] if len(records) == 1 else records, args.out)
    return EXIT_OK if all(r["ok"] for r in records) else EXIT_ZEROED


def _source(args, params: ProtocolParams) -> SourceModel:
    kind = args.source or params.extras.get("source_kind", "coherent")
    if args.fock_schedule:
        schedule = [int(tok) for tok in Path(args.fock_schedule).read_text().split()]
        return SourceModel.adversarial(schedule)
    mean = args.mean_photons if args.mean_photons is not None else params.extras.get("source_mean_photons", 0.0)
    if kind == "vacuum":
        return SourceModel.vacuum()
    if kind == "fock":
        return SourceModel.fock(int(mean))
    return SourceModel(kind, float(mean))


def cmd_simulate(args) -> int:
    params = _params(args)
    try:
        thresholds = _thresholds(args, params)
    except ConfigError:
        thresholds = CertThresholds.from_bins(0, params.adc_c.n_bins - 1, params.adc_c)
    config = RunConfig(args.rounds, args.seed, params, _source(args, params), thresholds)
    records = run_protocol(config)
    digest = digest_of({"params": params.to_flat(), "source": repr(config.source), "seed": args.seed,
                        "rounds": args.rounds, "thresholds": thresholds.__dict__})
    if args.out:
        write_records_csv(records, args.out, digest)
    if args.stream_out:
        codes = records.code_D[records.passed]
        Path(args.stream_out).write_bytes(pack_codes(codes, params.adc_d.bit_depth))
        meta = {"config_sha256": digest, "bits_per_sample": params.adc_d.bit_depth,
                "samples": int(codes.size), "rounds": args.rounds}
        Path(str(args.stream_out) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    log.info("simulated %d rounds, %d passed", len(records), int(records.passed.sum()))
    return EXIT_OK


def _plan_from_args(args):
    kappa_source = "flag"
    kappa_per_sample = args.kappa_per_sample
    eps_fail_log10 = args.eps_fail_log10[0] if args.eps_fail_log10 else None
    if args.certificate:
        cert = json.loads(Path(args.certificate).read_text())
        if isinstance(cert, list):
            cert = cert[0]
        if not cert.get("ok", False):
            raise InfeasiblePlan("certificate", f"zeroed certificate: {cert.get('reason')}")
        kappa_per_sample = cert["kappa_per_sample_bits"]
        eps_fail_log10 = cert["eps_fail_log10"] if eps_fail_log10 is None else eps_fail_log10
        kappa_source = f"certificate {args.certificate} ({cert.get('input_digest', '')[:16]})"
    if kappa_per_sample is None:
        raise InfeasiblePlan("kappa", "give --kappa-per-sample or --certificate")
    eps_fail = _log10_prob(eps_fail_log10) if eps_fail_log10 is not None else 0.0
    eps_hash = _log10_prob(args.eps_hash_log10) if args.eps_hash_log10 is not None else None
    hp = plan(kappa_per_sample * args.samples_per_block, args.samples_per_block, args.bits_per_sample,
              l=args.output_bits, eps_hash=eps_hash, t=args.blocks_per_string, k=args.step_bits,
              R_hash=args.r_hash, R_data=args.r_data, eps_c=args.eps_c, eps_fail=eps_fail)
    return hp, kappa_source


def cmd_plan(args) -> int:
    hp, source = _plan_from_args(args)
    rec = hp.to_record()
    rec["kappa_source"] = source
    _write_json(rec, args.out)
    return EXIT_OK


def cmd_extract(args) -> int:
    if not Path(args.seed_file).is_file():
        raise FileNotFoundError(f"seed file not found: {args.seed_file}")
    hp, source = _plan_from_args(args)
    seed = read_seed_file(args.seed_file)
    data = Path(args.input).read_bytes()
    out, report = extract_stream(hp, seed, data, kappa_source=source)
    Path(args.out).write_bytes(out)
    rec = report.__dict__.copy()
    rec["input_sha256"] = digest_of(data.hex())
    rec["seed_file"] = str(args.seed_file)
    _write_json(rec, args.report)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = cmp.HomodyneConfig(n_LO=args.n_lo, p_X=args.p_x)
    sdi = cmp.SdiConfig(r1=args.r1, eps_fail=10.0 ** args.eps_fail_log10[0] if args.eps_fail_log10 else 1e-10,
                        target_pass=args.pass_prob)
    grid = cmp.log_grid(args.grid_min, args.grid_max, args.points)
    points = cmp.sweep(cmp.PANELS[args.panel], grid, cfg, sdi)
    digest = digest_of({"panel": args.panel, "cfg": cfg.__dict__, "sdi": sdi.__dict__, "grid": grid.tolist()})
    if args.out:
        cmp.write_curve_csv(points, args.out, digest)
    else:
        _print_curve(points, digest)
    return EXIT_OK


def _print_curve(points, digest):
    print(f"# config_sha256={digest}")
    print("model,mean_n,bits")
    for p in points:
        print(f"{p.model},{p.mean_n!r},{p.bits!r}")


def cmd_seed(args) -> int:
    n = args.h + args.l - 1
    raw = np.frombuffer(secrets.token_bytes(-(-n // 8)), dtype=np.uint8)
    write_seed_file(args.out, ToeplitzSeed(np.unpackbits(raw)[:n], args.h, args.l))
    return EXIT_OK


def _plan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa-per-sample", type=float, help="certified min-entropy per sample (bits)")
    p.add_argument("--certificate", help="certificate JSON providing kappa and eps_fail")
    p.add_argument("--samples-per-block", type=int, default=800, help="m")
    p.add_argument("--bits-per-sample", type=int, default=12, help="b")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--output-bits", type=int, help="l")
    g.add_argument("--eps-hash-log10", type=float)
    p.add_argument("--blocks-per-string", type=int, default=1, help="t")
    p.add_argument("--step-bits", type=int, help="k (pipeline step width)")
    p.add_argument("--r-hash", type=float, default=1.0, help="hashes per second")
    p.add_argument("--r-data", type=float, default=1.0, help="samples per second")
    p.add_argument("--eps-c", type=float, default=0.0)
    p.add_argument("--eps-fail-log10", type=float, nargs=1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML configuration file")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--out", help="output path")
    common.add_argument("--log-level", default="WARNING")

    parser = argparse.ArgumentParser(prog="sdiqrng", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", parents=[common], help="certify a photon range from thresholds")
    p.add_argument("--threshold-mv-lo", type=float)
    p.add_argument("--threshold-mv-hi", type=float)
    p.add_argument("--eps-fail-log10", type=float, nargs="+")
    p.add_argument("--samples-per-block", type=int)
    p.add_argument("--split", type=float, default=0.5, help="fraction of eps_fail assigned to noise")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo protocol run")
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--source", choices=["vacuum", "coherent", "thermal", "fock"])
    p.add_argument("--mean-photons", type=float)
    p.add_argument("--fock-schedule", help="whitespace-separated photon numbers, one per round")
    p.add_argument("--threshold-mv-lo", type=float)
    p.add_argument("--threshold-mv-hi", type=float)
    p.add_argument("--stream-out", help="raw difference-code bitstream of passed rounds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", parents=[common], help="Toeplitz extraction of a raw stream")
    p.add_argument("--seed-file", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report")
    _plan_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("plan", parents=[common], help="extraction geometry and epsilon budget")
    _plan_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", parents=[common], help="per-round rate comparison curves")
    p.add_argument("--panel", choices=sorted(cmp.PANELS), default="coherent")
    p.add_argument("--grid-min", type=float, default=1e3)
    p.add_argument("--grid-max", type=float, default=1e9)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--n-lo", type=float, default=1e7)
    p.add_argument("--p-x", type=float, default=cmp.P_X_PRESETS[0])
    p.add_argument("--r1", type=float, default=0.0965)
    p.add_argument("--pass-prob", type=float, default=0.995)
    p.add_argument("--eps-fail-log10", type=float, nargs=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("seed", parents=[common], help="write a Toeplitz seed file from OS entropy")
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.set_defaults(func=cmd_seed)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("extract", "seed") and not args.out:
        parser.error("--out is required")
    try:
        return args.func(args)
    except (ConfigError, InfeasiblePlan, FileNotFoundError, ValueError) as exc:
        print(f"sdiqrng {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
