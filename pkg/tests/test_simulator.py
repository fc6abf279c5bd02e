import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import binom, chisquare

from sdiqrng.certifier import CertThresholds, completeness_coherent
from sdiqrng.config import default_params
from sdiqrng.detector_model import AdcSpec, effective_resolution
from sdiqrng.simulator import (CHUNK, Records, RunConfig, SourceModel, _run_chunk, dd_min_entropy_models,
                               empirical_min_entropy, max_bin_entropy, pack_codes, read_records_csv,
                               rng_stream, run_protocol, sample_source, split_beamsplitter,
                               unpack_codes, write_records_csv)

from scenarios import all_pass, fock_code_chi2, noiseless, shot_noise_ratio

PARAMS = default_params()


def config(m, seed=1, source=SourceModel.coherent(1e6), params=PARAMS, thresholds=None):
    return RunConfig(m, seed, params, source, thresholds or all_pass(params))


class TestSources:
    def test_vacuum(self):
        assert not sample_source(SourceModel.vacuum(), 100, rng_stream(0, "source", 0)).any()

    def test_coherent_moments(self):
        x = sample_source(SourceModel.coherent(4.0), 10**6, rng_stream(1, "source", 0))
        assert abs(x.mean() - 4) < 3 * 2 / 1e3
        assert x.var() == pytest.approx(4.0, rel=0.01)

    def test_thermal_ground_weight(self):
        x = sample_source(SourceModel.thermal(2.0), 10**6, rng_stream(2, "source", 0))
        p0 = np.mean(x == 0)
        assert abs(p0 - 1 / 3) < 3 * math.sqrt(2 / 9 / 1e6)
        assert x.mean() == pytest.approx(2.0, rel=0.01)

    def test_fock_and_schedule(self):
        assert (sample_source(SourceModel.fock(7), 5, rng_stream(0, "source", 0)) == 7).all()
        sched = SourceModel.adversarial([3, 1, 4, 1, 5, 9])
        assert list(sample_source(sched, 3, None, start=2)) == [4, 1, 5]

    def test_validation(self):
        with pytest.raises(ValueError):
            SourceModel("squeezed", 1.0)
        with pytest.raises(ValueError):
            SourceModel.coherent(-1.0)
        with pytest.raises(ValueError):
            RunConfig(10, 0, PARAMS, SourceModel.adversarial([1, 2]), all_pass(PARAMS))


class TestBeamsplitter:
    def test_zero(self):
        a, b = split_beamsplitter(np.zeros(5, int), 0.3, rng_stream(0, "bs1", 0))
        assert not a.any() and not b.any()

    def test_moments(self):
        a, b = split_beamsplitter(np.full(10**5, 10**6), 0.0965, rng_stream(3, "bs1", 0))
        assert (a + b == 10**6).all()
        sd = math.sqrt(1e6 * 0.0965 * 0.9035)
        assert abs(a.mean() - 9.65e4) < 3 * sd / math.sqrt(1e5)
        assert a.var() == pytest.approx(sd**2, rel=0.02)

    def test_small_n_chi2(self):
        a, _ = split_beamsplitter(np.full(10**6, 5), 0.5, rng_stream(4, "bs0", 0))
        obs = np.bincount(a, minlength=6)
        assert chisquare(obs, binom.pmf(np.arange(6), 5, 0.5) * 1e6).pvalue > 0.01


class TestRunProtocol:
    def test_deterministic(self):
        assert run_protocol(config(3000)).equals(run_protocol(config(3000)))
        assert not run_protocol(config(3000)).equals(run_protocol(config(3000, seed=2)))

    def test_chunk_order_independent(self):
        cfg = config(2 * CHUNK + 17)
        parts = [_run_chunk(cfg, c) for c in (2, 0, 1)]
        shuffled = Records.concat([parts[1], parts[2], parts[0]])
        assert shuffled.equals(run_protocol(cfg))

    def test_prefix_stable(self):
        short, long = run_protocol(config(CHUNK + 5)), run_protocol(config(CHUNK + 500))
        assert short.equals(long.select(np.arange(len(short))))

    def test_photon_bookkeeping(self):
        rec = run_protocol(config(5000))
        assert (rec.n_C + rec.n_R == rec.n_E).all()
        assert (rec.n_A + rec.n_B == rec.n_R).all()
        assert rec[0].n_E == rec.n_E[0]

    def test_vacuum_never_passes_positive_window(self):
        th = CertThresholds.from_voltages(10e-3, 30e-3, PARAMS.adc_c)
        rec = run_protocol(config(5000, source=SourceModel.vacuum(), thresholds=th))
        assert not rec.passed.any()

    def test_pass_fraction_matches_completeness(self):
        # window edge placed where roughly a fifth of rounds fail
        th = CertThresholds.from_voltages(10e-3, 40e-3, PARAMS.adc_c)
        mean_n = (th.v_minus + 0.2e-3) / (PARAMS.alpha_c * PARAMS.r1)
        eps_c = completeness_coherent(math.sqrt(mean_n), th, PARAMS)
        assert 0.05 < eps_c < 0.95
        rec = run_protocol(config(50_000, source=SourceModel.coherent(mean_n), thresholds=th))
        fail = 1 - rec.passed.mean()
        assert abs(fail - eps_c) < 4 * math.sqrt(eps_c * (1 - eps_c) / 50_000)

    def test_shot_noise(self):
        assert shot_noise_ratio(200_000, 1e4, seed=3) == pytest.approx(1.0, abs=0.01)

    def test_fock_codes(self):
        _, p, bins = fock_code_chi2(30, 200_000, seed=9)
        assert p > 0.01 and bins > 5

    def test_saturation(self):
        p = noiseless(PARAMS)
        rec = run_protocol(config(100, params=p, source=SourceModel.fock(30_000_000)))
        # both arms clamp at the top of the linear range, so the difference vanishes
        assert (rec.v_D == 0).all()
        assert np.allclose(rec.v_C, p.alpha_c * rec.n_C)


class TestEntropyEstimators:
    def test_identical_samples(self, caplog):
        adc = PARAMS.adc_d
        with caplog.at_level(logging.WARNING):
            assert empirical_min_entropy(np.full(1000, 7), adc) == 0.0
        assert "degenerate" in caplog.text

    def test_gaussian_synthetic(self):
        adc = AdcSpec(16, 16, -1.0, 1.0)
        dv = effective_resolution(adc)
        sigma = 10 * dv
        v = np.random.default_rng(0).normal(0.0, sigma, 10**6)
        codes = np.searchsorted(adc.v_min + dv * np.arange(1, adc.n_bins), v, side="right")
        expected = -math.log2(dv / math.sqrt(2 * math.pi * sigma**2))
        assert empirical_min_entropy(codes, adc) == pytest.approx(expected, rel=0.02)

    def test_records_input_uses_passed_rounds(self):
        rec = run_protocol(config(20_000))
        rec_half = Records(**{**rec.columns(), "passed": np.arange(len(rec)) % 2 == 0})
        assert empirical_min_entropy(rec_half, PARAMS.adc_d) == empirical_min_entropy(
            rec.code_D[::2], PARAMS.adc_d)

    def test_dd_models(self):
        curves = dd_min_entropy_models([0.0, 1e5, 1e7], PARAMS)
        assert curves.h_x_given_e[0] == 0
        assert np.all(np.diff(curves.h_x) > 0)
        quiet = replace(PARAMS, detector_diff=replace(PARAMS.detector_diff, noise_sigma=1e-12))
        q = dd_min_entropy_models([1e6], quiet)
        assert q.h_x_given_e[0] == pytest.approx(q.h_x[0], abs=1e-6)

    def test_max_bin_entropy_zero_width(self):
        assert max_bin_entropy(0.0, 0.0, PARAMS.adc_d) == 0.0


class TestFiles:
    def test_csv_round_trip(self, tmp_path):
        rec = run_protocol(config(300))
        path = tmp_path / "r.csv"
        write_records_csv(rec, path, digest="abc")
        assert path.read_text().startswith("# config_sha256=abc")
        assert read_records_csv(path).equals(rec)

    def test_pack_round_trip(self):
        codes = np.random.default_rng(0).integers(0, 2**12, 1001)
        assert np.array_equal(unpack_codes(pack_codes(codes, 12), 12), codes)

    def test_pack_msb_first(self):
        assert pack_codes([0b1010_0000_0001], 12) == bytes([0b1010_0000, 0b0001_0000])
