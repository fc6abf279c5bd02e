"""Seeded Monte-Carlo model of the optical setup and the entropy estimators.

Every random draw is taken from a Philox counter-based stream keyed by
``(rng_seed, site, chunk)`` where ``chunk = round_index // CHUNK``. A round's
draws therefore depend only on the seed and its index, so chunks can be
generated in any order or in parallel and reassembled in round order.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtr

from .certifier import CertThresholds
from .config import ProtocolParams
from .detector_model import AdcSpec, bin_edges, conversion_factor, detect

log = logging.getLogger(__name__)

CHUNK = 1 << 16
SITES = {"source": 0, "bs1": 1, "noise_c": 2, "bs0": 3, "noise_d": 4}


@dataclass(frozen=True)
class SourceModel:
    kind: str                       # vacuum | coherent | thermal | fock | adversarial_fock
    mean_n: float = 0.0
    schedule: Sequence[int] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("vacuum", "coherent", "thermal", "fock", "adversarial_fock"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.mean_n < 0:
            raise ValueError("mean_n must be non-negative")
        if self.kind == "adversarial_fock" and self.schedule is None:
            raise ValueError("adversarial_fock needs a schedule")

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def coherent(cls, mean_n):
        return cls("coherent", mean_n)

    @classmethod
    def thermal(cls, mean_n):
        return cls("thermal", mean_n)

    @classmethod
    def fock(cls, n):
        return cls("fock", n)

    @classmethod
    def adversarial(cls, schedule):
        return cls("adversarial_fock", 0.0, tuple(int(n) for n in schedule))


@dataclass(frozen=True)
class SampleRecord:
    n_E: int
    n_C: int
    n_R: int
    n_A: int
    n_B: int
    v_C: float
    v_D: float
    code_C: int
    code_D: int
    passed: bool


RECORD_FIELDS = [f.name for f in fields(SampleRecord)]


@dataclass
class Records:
    """Column-oriented store of SampleRecord rows."""

    n_E: np.ndarray
    n_C: np.ndarray
    n_R: np.ndarray
    n_A: np.ndarray
    n_B: np.ndarray
    v_C: np.ndarray
    v_D: np.ndarray
    code_C: np.ndarray
    code_D: np.ndarray
    passed: np.ndarray

    def __len__(self) -> int:
        return len(self.n_E)

    def __getitem__(self, i: int) -> SampleRecord:
        return SampleRecord(*(getattr(self, name)[i].item() for name in RECORD_FIELDS))

    def __iter__(self) -> Iterator[SampleRecord]:
        return (self[i] for i in range(len(self)))

    def columns(self):
        return {name: getattr(self, name) for name in RECORD_FIELDS}

    def select(self, mask) -> "Records":
        return Records(**{k: v[mask] for k, v in self.columns().items()})

    @classmethod
    def concat(cls, parts: Sequence["Records"]) -> "Records":
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in RECORD_FIELDS})

    def equals(self, other: "Records") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in RECORD_FIELDS)


@dataclass(frozen=True)
class RunConfig:
    m: int
    rng_seed: int
    params: ProtocolParams
    source: SourceModel
    thresholds: CertThresholds

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.source.schedule is not None and len(self.source.schedule) < self.m:
            raise ValueError("adversarial schedule shorter than the run")


def rng_stream(rng_seed: int, site: str, chunk: int) -> np.random.Generator:
    """Philox stream for one (seed, site, chunk) triple."""
    seq = np.random.SeedSequence(entropy=int(rng_seed) & (2**64 - 1), spawn_key=(SITES[site], int(chunk)))
    return np.random.Generator(np.random.Philox(seq))


def sample_source(model: SourceModel, size: int, rng: np.random.Generator, start: int = 0) -> np.ndarray:
    """Photon numbers for ``size`` consecutive rounds beginning at ``start``."""
    if model.kind == "vacuum":
        return np.zeros(size, dtype=np.int64)
    if model.kind == "coherent":
        return rng.poisson(model.mean_n, size).astype(np.int64)
    if model.kind == "thermal":
        return rng.geometric(1.0 / (model.mean_n + 1.0), size).astype(np.int64) - 1
    if model.kind == "fock":
        return np.full(size, int(model.mean_n), dtype=np.int64)
    return np.asarray(model.schedule[start:start + size], dtype=np.int64)


def split_beamsplitter(n, r: float, rng: np.random.Generator):
    """Binomial routing of each photon: returns (n_refl, n_trans)."""
    n = np.asarray(n, dtype=np.int64)
    n_refl = rng.binomial(n, r).astype(np.int64)
    return n_refl, n - n_refl


def _run_chunk(config: RunConfig, chunk: int) -> Records:
    p = config.params
    start = chunk * CHUNK
    size = min(CHUNK, config.m - start)
    seed = config.rng_seed
    n_e = sample_source(config.source, size, rng_stream(seed, "source", chunk), start)
    n_c, n_r = split_beamsplitter(n_e, p.r1, rng_stream(seed, "bs1", chunk))
    noise_c = rng_stream(seed, "noise_c", chunk).normal(0.0, 1.0, size) * p.sigma_c
    v_c, code_c = detect(n_c, p.detector_c, p.adc_c, noise_c)
    n_a, n_b = split_beamsplitter(n_r, p.r0, rng_stream(seed, "bs0", chunk))
    rng_d = rng_stream(seed, "noise_d", chunk)
    noise_d = rng_d.normal(0.0, 1.0, size) * p.sigma_d
    arm = p.detector_diff.linear_range
    v_d = conversion_factor(p.detector_diff) * (arm.clamp(n_a) - arm.clamp(n_b)) + noise_d
    _, code_d = detect(0, p.detector_diff, p.adc_d, v_d)
    return Records(n_e, n_c, n_r, n_a, n_b, v_c, v_d, code_c.astype(np.int64), code_d.astype(np.int64),
                   config.thresholds.passes(code_c))


def run_protocol(config: RunConfig) -> Records:
    """Simulate ``config.m`` rounds; output is a deterministic function of the config."""
    n_chunks = -(-config.m // CHUNK)
    return Records.concat([_run_chunk(config, c) for c in range(n_chunks)])


# -- entropy estimators ----------------------------------------------------------------

def _bin_masses(mean: float, sd: float, adc: AdcSpec) -> np.ndarray:
    edges = bin_edges(adc)
    if sd == 0:
        idx = np.searchsorted(edges[1:-1], mean, side="right")
        out = np.zeros(len(edges) - 1)
        out[idx] = 1.0
        return out
    return np.diff(ndtr((edges - mean) / sd))


def max_bin_entropy(mean: float, sd: float, adc: AdcSpec) -> float:
    """-log2 of the largest bin mass of N(mean, sd^2) on the ADC grid."""
    return float(-math.log2(_bin_masses(mean, sd, adc).max()))


def empirical_min_entropy(data, adc: AdcSpec) -> float:
    """Gaussian fit to the code histogram, then -log2 of its max bin mass.

    ``data`` is either a ``Records`` run (passed rounds' difference codes are
    used) or an array of codes. The fit uses the histogram's moments with
    Sheppard's correction for grouping; end bins are represented by their
    inner edge plus half a bin.
    """
    codes = data.code_D[data.passed] if isinstance(data, Records) else np.asarray(data)
    counts = np.bincount(codes, minlength=adc.n_bins).astype(float)
    if np.count_nonzero(counts) <= 1:
        log.warning("degenerate histogram: single occupied bin")
        return 0.0
    dv = (adc.v_max - adc.v_min) / 2.0**adc.enob
    centres = adc.v_min + dv * (np.arange(adc.n_bins) + 0.5)
    w = counts / counts.sum()
    mean = float(np.dot(w, centres))
    var = float(np.dot(w, (centres - mean) ** 2)) - dv * dv / 12.0
    if var <= 0:
        return 0.0
    return max_bin_entropy(mean, math.sqrt(var), adc)


@dataclass(frozen=True)
class DDCurves:
    mean_n: np.ndarray
    h_x: np.ndarray            # device-dependent H_min(X)
    h_x_given_e: np.ndarray    # shifted down by the electronic-noise min-entropy
    h_noise: float


def dd_min_entropy_models(power_grid, params: ProtocolParams) -> DDCurves:
    """Device-dependent min-entropy for coherent light of mean photon number n
    entering the difference detector (variance alpha_D^2 n + sigma_D^2)."""
    grid = np.asarray(power_grid, dtype=float)
    a, s = params.alpha_d, params.sigma_d
    h_x = np.array([max_bin_entropy(0.0, math.sqrt(a * a * n + s * s), params.adc_d) for n in grid])
    h_noise = max_bin_entropy(0.0, s, params.adc_d) if s > 0 else 0.0
    return DDCurves(grid, h_x, np.maximum(h_x - h_noise, 0.0), h_noise)


# -- file formats -------------------------------------------------------------------------

def write_records_csv(records: Records, path: str | Path, digest: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if digest:
            fh.write(f"# config_sha256={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        cols = [records.columns()[k] for k in RECORD_FIELDS]
        for row in zip(*cols):
            writer.writerow([repr(float(x)) if isinstance(x, np.floating) else int(x) for x in row])


def read_records_csv(path: str | Path) -> Records:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    if header != RECORD_FIELDS:
        raise ValueError(f"unexpected columns {header}")
    data = np.array(body, dtype=object).T if body else np.empty((len(header), 0), dtype=object)
    cols = {}
    for name, col in zip(header, data):
        if name in ("v_C", "v_D"):
            cols[name] = col.astype(float)
        elif name == "passed":
            cols[name] = col.astype(int).astype(bool)
        else:
            cols[name] = col.astype(np.int64)
    return Records(**cols)


def pack_codes(codes, bits: int) -> bytes:
    """Concatenate fixed-width codes MSB first and pack into bytes (zero padded)."""
    codes = np.asarray(codes, dtype=np.uint64)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    bitarr = ((codes[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitarr.ravel()).tobytes()


def unpack_codes(data: bytes, bits: int) -> np.ndarray:
    bitarr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    n = len(bitarr) // bits
    weights = (1 << np.arange(bits - 1, -1, -1)).astype(np.int64)
    return bitarr[: n * bits].reshape(n, bits).astype(np.int64) @ weights
