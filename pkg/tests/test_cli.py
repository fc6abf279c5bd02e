import json

import numpy as np
import pytest

from sdiqrng.cli import EXIT_OK, EXIT_USAGE, EXIT_ZEROED, main
from sdiqrng.config import ConfigError, default_params, dump_config, load_config, parse_config, realtime_params
from sdiqrng.extractor import ToeplitzSeed, hash_naive, read_seed_file

from scenarios import CONFIGS

DESK = str(CONFIGS / "desk_e2e.yaml")


class TestConfig:
    @pytest.mark.parametrize("params", [default_params(), realtime_params()])
    def test_round_trip(self, params):
        assert parse_config(dump_config(params)) == params

    def test_shipped_files_load(self):
        for path in CONFIGS.glob("*.yaml"):
            load_config(path)

    def test_bad_number_names_line_and_field(self):
        text = dump_config(default_params()).replace("r1: 0.0965", "r1: abc")
        with pytest.raises(ConfigError, match=r"line 2, field 'r1'"):
            parse_config(text)

    def test_unknown_and_missing(self):
        text = dump_config(default_params())
        with pytest.raises(ConfigError, match="unknown field 'colour'"):
            parse_config(text + "colour: red\n")
        with pytest.raises(ConfigError, match="missing"):
            parse_config("\n".join(line for line in text.splitlines() if not line.startswith("r1:")))

    def test_nested_rejected(self):
        with pytest.raises(ConfigError, match="nested"):
            parse_config(dump_config(default_params()) + "extra:\n  a: 1\n")

    def test_yaml_syntax_error_has_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("r0: 0.5\nr1: [0.1\n")

    def test_physical_validation(self):
        with pytest.raises(ConfigError):
            parse_config(dump_config(default_params()).replace("r1: 0.0965", "r1: 1.5"))


class TestCertify:
    def test_json_and_digest(self, tmp_path):
        out = tmp_path / "cert.json"
        assert main(["certify", "--config", DESK, "--out", str(out)]) == EXIT_OK
        rec = json.loads(out.read_text())
        assert rec["ok"] and rec["kappa_per_sample_bits"] > 11
        assert rec["config_sha256"] == load_config(DESK).digest()
        assert rec["eps_fail_log10"] <= -10 + 1e-9

    def test_several_targets(self, tmp_path):
        out = tmp_path / "cert.json"
        assert main(["certify", "--config", DESK, "--eps-fail-log10", "-6", "-12", "--out", str(out)]) == EXIT_OK
        recs = json.loads(out.read_text())
        assert [r["target_eps_fail_log10"] for r in recs] == [-6, -12]
        assert recs[0]["n_R_minus"] >= recs[1]["n_R_minus"]

    def test_vacuum_window_is_zeroed(self, tmp_path):
        out = tmp_path / "cert.json"
        code = main(["certify", "--config", DESK, "--threshold-mv-lo", "-1", "--threshold-mv-hi", "1",
                     "--out", str(out)])
        assert code == EXIT_ZEROED
        assert not json.loads(out.read_text())["ok"]

    def test_missing_thresholds(self, capsys):
        assert main(["certify"]) == EXIT_USAGE
        assert "thresholds required" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("r0: 0.5\n")
        assert main(["certify", "--config", str(bad)]) == EXIT_USAGE
        assert "missing" in capsys.readouterr().err


class TestSimulate:
    def test_same_seed_same_bytes(self, tmp_path):
        paths = []
        for name in ("a", "b"):
            csv, raw = tmp_path / f"{name}.csv", tmp_path / f"{name}.bin"
            assert main(["simulate", "--config", DESK, "--rounds", "2000", "--seed", "5",
                         "--out", str(csv), "--stream-out", str(raw)]) == EXIT_OK
            paths.append((csv, raw))
        (ca, ra), (cb, rb) = paths
        assert ca.read_bytes() == cb.read_bytes()
        assert ra.read_bytes() == rb.read_bytes()
        meta = json.loads((tmp_path / "a.bin.json").read_text())
        assert meta["bits_per_sample"] == 16 and len(ra.read_bytes()) == meta["samples"] * 2

    def test_different_seed(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--rounds", "500", "--seed", "1", "--source", "coherent", "--mean-photons", "1e5",
              "--out", str(a)])
        main(["simulate", "--rounds", "500", "--seed", "2", "--source", "coherent", "--mean-photons", "1e5",
              "--out", str(b)])
        assert a.read_text() != b.read_text()

    def test_fock_schedule(self, tmp_path):
        sched = tmp_path / "s.txt"
        sched.write_text("5 6 7\n8 9\n")
        out = tmp_path / "r.csv"
        assert main(["simulate", "--rounds", "5", "--fock-schedule", str(sched), "--out", str(out)]) == EXIT_OK
        header = [line for line in out.read_text().splitlines() if not line.startswith("#")][0].split(",")
        col = header.index("n_E")
        rows = [line.split(",") for line in out.read_text().splitlines()[2:]]
        assert [int(r[col]) for r in rows] == [5, 6, 7, 8, 9]

    def test_schedule_too_short(self, tmp_path):
        sched = tmp_path / "s.txt"
        sched.write_text("5 6\n")
        assert main(["simulate", "--rounds", "5", "--fock-schedule", str(sched)]) == EXIT_USAGE


class TestPlanExtract:
    def test_plan_short_string_geometry(self, capsys):
        code = main(["plan", "--kappa-per-sample", "5.3354", "--output-bits", "4210",
                     "--r-hash", "1937500", "--r-data", "1.55e9", "--eps-fail-log10", "-9.9586"])
        assert code == EXIT_OK
        rec = json.loads(capsys.readouterr().out)
        assert rec["string_bits"] == 4210 and rec["h"] == 9600
        assert rec["R_d"] == pytest.approx(8.16e9, rel=1e-3)

    def test_plan_infeasible(self, capsys):
        assert main(["plan", "--kappa-per-sample", "0.001", "--eps-hash-log10", "-30"]) == EXIT_USAGE
        assert "l >= 1" in capsys.readouterr().err

    def test_plan_refuses_zeroed_certificate(self, tmp_path):
        cert = tmp_path / "c.json"
        cert.write_text(json.dumps({"ok": False, "reason": "vacuum"}))
        assert main(["plan", "--certificate", str(cert)]) == EXIT_USAGE

    def test_missing_seed_file(self, tmp_path, capsys):
        raw = tmp_path / "in.bin"
        raw.write_bytes(b"\0" * 100)
        code = main(["extract", "--seed-file", str(tmp_path / "nope.txt"), "--in", str(raw),
                     "--out", str(tmp_path / "o.bin"), "--kappa-per-sample", "5", "--output-bits", "100"])
        assert code == EXIT_USAGE
        assert "seed file not found" in capsys.readouterr().err

    def test_pipeline(self, tmp_path):
        """simulate -> certify -> seed -> extract, checked against the naive hash."""
        raw, cert = tmp_path / "raw.bin", tmp_path / "cert.json"
        seed, out, rep = tmp_path / "seed.txt", tmp_path / "out.bin", tmp_path / "rep.json"
        assert main(["simulate", "--config", DESK, "--rounds", "3000", "--seed", "3",
                     "--stream-out", str(raw)]) == EXIT_OK
        assert main(["certify", "--config", DESK, "--out", str(cert)]) == EXIT_OK
        flags = ["--certificate", str(cert), "--bits-per-sample", "16", "--eps-hash-log10", "-20"]
        assert main(["plan", *flags, "--out", str(tmp_path / "plan.json")]) == EXIT_OK
        hp = json.loads((tmp_path / "plan.json").read_text())
        assert main(["seed", "--h", str(hp["h"]), "--l", str(hp["l"]), "--out", str(seed)]) == EXIT_OK
        assert main(["extract", *flags, "--seed-file", str(seed), "--in", str(raw), "--out", str(out),
                     "--report", str(rep)]) == EXIT_OK
        report = json.loads(rep.read_text())
        s = read_seed_file(seed)
        bits = np.unpackbits(np.frombuffer(raw.read_bytes(), np.uint8))
        blocks = bits[: report["blocks"] * s.h].reshape(-1, s.h)
        expected = hash_naive(ToeplitzSeed(s.bits, s.h, s.l), blocks).ravel()
        assert report["blocks"] > 0
        assert np.array_equal(np.unpackbits(np.frombuffer(out.read_bytes(), np.uint8))[: expected.size], expected)


class TestCompareSeed:
    def test_empty_grid(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["compare", "--points", "0", "--out", str(out)]) == EXIT_OK
        lines = [line for line in out.read_text().splitlines() if not line.startswith("#")]
        assert lines == ["model,mean_n,bits"]

    def test_stdout(self, capsys):
        assert main(["compare", "--panel", "thermal", "--points", "3"]) == EXIT_OK
        body = capsys.readouterr().out.splitlines()
        assert body[0].startswith("# config_sha256=") and len(body) > 3

    def test_seed_geometry(self, tmp_path):
        out = tmp_path / "s.txt"
        assert main(["seed", "--h", "40", "--l", "9", "--out", str(out)]) == EXIT_OK
        s = read_seed_file(out)
        assert (s.h, s.l, s.bits.size) == (40, 9, 48)
