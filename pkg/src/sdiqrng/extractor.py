"""Toeplitz-hash randomness extraction and the epsilon/bit-rate planner.

Bit layout contract
-------------------
* Toeplitz matrix: ``T[i][j] = seed[i - j + h - 1]`` for output bit i < l and
  input bit j < h. Column j is therefore the contiguous seed window
  ``seed[h-1-j : h-1-j+l]``.
* Input block: bit 0 is the most significant bit of the first sample.
* Output bytes: the first extracted bit is the most significant bit of byte 0.
* Seed file: first line ``"h l"``, then the h+l-1 seed bits as hex, most
  significant nibble first, zero padded at the end.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .photon_core import LogProb

_NIBBLE_WEIGHTS = np.array([8, 4, 2, 1], dtype=np.uint8)


class InfeasiblePlan(ValueError):
    """The requested extraction geometry or security target cannot be met."""

    def __init__(self, constraint: str, detail: str):
        super().__init__(f"infeasible plan ({constraint}): {detail}")
        self.constraint = constraint


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    h: int
    l: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size != self.h + self.l - 1:
            raise ValueError(f"seed needs h + l - 1 = {self.h + self.l - 1} bits, got {bits.size}")
        if np.any(bits > 1):
            raise ValueError("seed bits must be 0/1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, h: int, l: int, rng: np.random.Generator) -> "ToeplitzSeed":
        return cls(rng.integers(0, 2, h + l - 1, dtype=np.uint8), h, l)

    def matrix(self) -> np.ndarray:
        i = np.arange(self.l)[:, None]
        j = np.arange(self.h)[None, :]
        return self.bits[i - j + self.h - 1]

    def columns_packed(self) -> np.ndarray:
        """(h, W) uint64 array; row j holds column j of T packed MSB first."""
        windows = sliding_window_view(self.bits, self.l)[::-1]
        packed = np.packbits(windows, axis=1)
        return _pad_to_words(packed)


def _pad_to_words(packed: np.ndarray) -> np.ndarray:
    nbytes = packed.shape[-1]
    pad = (-nbytes) % 8
    if pad:
        packed = np.concatenate([packed, np.zeros(packed.shape[:-1] + (pad,), np.uint8)], axis=-1)
    return np.ascontiguousarray(packed).view(np.uint64)


def _words_to_bits(words: np.ndarray, l: int) -> np.ndarray:
    return np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=-1)[..., :l]


def _as_blocks(blocks, h: int) -> np.ndarray:
    arr = np.asarray(blocks, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != h:
        raise ValueError(f"input blocks must have h = {h} bits, got {arr.shape[-1]}")
    return arr


def hash_naive(seed: ToeplitzSeed, blocks) -> np.ndarray:
    """Reference GF(2) matrix-vector product, one row of output bits per block."""
    x = _as_blocks(blocks, seed.h)
    t = seed.matrix().astype(np.float32)
    out = (x.astype(np.float32) @ t.T).astype(np.int64) & 1
    out = out.astype(np.uint8)
    return out[0] if np.asarray(blocks).ndim == 1 else out


class ToeplitzPipeline:
    """Step-wise Toeplitz hashing with word-packed XOR accumulation.

    The h input bits are consumed in h/k steps. Step s multiplies its k bits
    against the k x l slice of T (columns s*k ... s*k+k-1) and XORs the result
    into an l-bit accumulator. Within a step, columns are grouped in fours and
    each group's 16 possible XOR combinations are tabulated once per seed.
    """

    def __init__(self, seed: ToeplitzSeed, k: int):
        if k < 1 or seed.h % k:
            raise ValueError(f"step width k={k} must divide h={seed.h}")
        self.seed, self.k = seed, k
        self.steps = seed.h // k
        self.groups = -(-k // 4)
        cols = seed.columns_packed()                      # (h, W)
        w = cols.shape[1]
        cols = cols.reshape(self.steps, k, w)
        pad = 4 * self.groups - k
        if pad:
            cols = np.concatenate([cols, np.zeros((self.steps, pad, w), np.uint64)], axis=1)
        cols4 = cols.reshape(self.steps * self.groups, 4, w)
        table = np.zeros((self.steps * self.groups, 16, w), np.uint64)
        for v in range(1, 16):
            low = v & -v
            pos = 3 - (low.bit_length() - 1)
            table[:, v] = table[:, v ^ low] ^ cols4[:, pos]
        self.table = table.reshape(self.steps, self.groups, 16, w)
        self.words = w

    def _nibbles(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        x = x.reshape(n, self.steps, self.k)
        pad = 4 * self.groups - self.k
        if pad:
            x = np.concatenate([x, np.zeros((n, self.steps, pad), np.uint8)], axis=2)
        return x.reshape(n, self.steps, self.groups, 4) @ _NIBBLE_WEIGHTS

    def hash_words(self, blocks, batch: int = 256) -> np.ndarray:
        x = _as_blocks(blocks, self.seed.h)
        out = np.empty((x.shape[0], self.words), np.uint64)
        g_idx = np.arange(self.groups)
        for b0 in range(0, x.shape[0], batch):
            nib = self._nibbles(x[b0:b0 + batch])
            acc = np.zeros((nib.shape[0], self.words), np.uint64)
            for s in range(self.steps):
                acc ^= np.bitwise_xor.reduce(self.table[s][g_idx, nib[:, s, :]], axis=1)
            out[b0:b0 + batch] = acc
        return out

    def hash_blocks(self, blocks) -> np.ndarray:
        bits = _words_to_bits(self.hash_words(blocks), self.seed.l)
        return bits[0] if np.asarray(blocks).ndim == 1 else bits


def hash_pipeline(seed: ToeplitzSeed, blocks, k: int) -> np.ndarray:
    return ToeplitzPipeline(seed, k).hash_blocks(blocks)


# -- planning --------------------------------------------------------------------------------

@dataclass(frozen=True)
class HashPlan:
    h: int
    l: int
    m: int
    b: int
    k: int
    t: int
    kappa: float
    eps_hash_log2: float
    eps_fail_m_log2: float
    eps_l_log2: float
    eps_total_log2: float
    r: Fraction
    R_hash: Fraction
    R_data: Fraction
    eps_c: float
    R_h: Fraction
    R_d: Fraction
    R_avg: float

    @property
    def eps_hash(self) -> float:
        return 2.0 ** self.eps_hash_log2

    @property
    def eps_l(self) -> float:
        return 2.0 ** self.eps_l_log2

    @property
    def eps_total(self) -> float:
        return 2.0 ** self.eps_total_log2

    @property
    def string_bits(self) -> int:
        return self.t * self.l

    def to_record(self) -> dict:
        rec = asdict(self)
        for key in ("r", "R_hash", "R_data", "R_h", "R_d"):
            rec[key] = float(rec[key])
        for key in ("eps_hash", "eps_fail_m", "eps_l", "eps_total"):
            rec[f"{key}_log10"] = rec[f"{key}_log2"] * math.log10(2.0)
        rec["eps_total"] = self.eps_total
        rec["string_bits"] = self.string_bits
        return rec


def _default_k(h: int, b: int) -> int:
    for k in (96, 8 * b, b):
        if k % b == 0 and h % k == 0:
            return k
    return h


def plan(kappa: float, m: int, b: int, *, l: int | None = None, eps_hash=None, t: int = 1,
         k: int | None = None, R_hash=1, R_data=1, eps_c: float = 0.0, eps_fail=0.0) -> HashPlan:
    """Fill in the extraction geometry, epsilon budget and bit rates.

    Exactly one of ``l`` and ``eps_hash`` must be given. ``kappa`` is the
    block min-entropy in bits, ``eps_fail`` the per-round certification
    failure probability (float or LogProb), ``R_hash`` hashes per second and
    ``R_data`` samples per second.
    """
    if (l is None) == (eps_hash is None):
        raise ValueError("give exactly one of l and eps_hash")
    if kappa < 0 or m < 1 or b < 1 or t < 1:
        raise ValueError("need kappa >= 0, m, b, t >= 1")
    h = m * b
    if l is None:
        target = eps_hash if isinstance(eps_hash, LogProb) else LogProb.from_prob(eps_hash)
        l = math.floor(kappa + 2 + 2 * target.log2_value)
        if l < 1:
            floor_log2 = (1 - kappa - 2) / 2
            raise InfeasiblePlan("l >= 1", f"smallest achievable eps_hash is 2^{floor_log2:.3f} at this block size")
    if l < 1:
        raise InfeasiblePlan("l >= 1", f"l = {l}")
    if l > h:
        raise InfeasiblePlan("l <= h", f"cannot output {l} bits from a {h}-bit block")
    k = _default_k(h, b) if k is None else k
    if h % k or k % b:
        raise InfeasiblePlan("k | h and b | k", f"k={k}, h={h}, b={b}")

    eps_hash_log2 = min(0.0, (l - kappa - 2) / 2)
    fail = eps_fail if isinstance(eps_fail, LogProb) else LogProb.from_prob(eps_fail)
    eps_fail_m_log2 = fail.times(m)
    eps_l_log2 = float(np.logaddexp2(eps_hash_log2, eps_fail_m_log2))
    eps_total_log2 = eps_l_log2 + math.log2(t)

    r = Fraction(l, h)
    R_hash, R_data = Fraction(R_hash), Fraction(R_data)
    R_h = R_hash * l
    R_d = R_data * b * r
    R_avg = (1 - eps_c) * float(min(R_h, R_d))
    return HashPlan(h, l, m, b, k, t, float(kappa), eps_hash_log2, eps_fail_m_log2, eps_l_log2,
                    eps_total_log2, r, R_hash, R_data, eps_c, R_h, R_d, R_avg)


# -- streaming ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class RunReport:
    blocks: int
    strings: int
    bits_in: int
    bits_out: int
    discarded_bits: int
    eps_total_log2: float
    eps_total_log10: float
    seconds: float
    throughput_in_bps: float
    kappa_source: str
    plan: dict


def bits_from_bytes(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def extract_stream(hplan: HashPlan, seed: ToeplitzSeed, stream, kappa_source: str = "unspecified",
                   batch: int = 256) -> tuple[bytes, RunReport]:
    """Hash consecutive h-bit blocks of ``stream`` (bytes or a 0/1 array).

    Trailing bits that do not fill a block are discarded and reported.
    """
    if (seed.h, seed.l) != (hplan.h, hplan.l):
        raise ValueError(f"seed geometry {(seed.h, seed.l)} does not match plan {(hplan.h, hplan.l)}")
    bits = bits_from_bytes(stream) if isinstance(stream, (bytes, bytearray)) else np.asarray(stream, np.uint8)
    n_blocks = bits.size // hplan.h
    t0 = time.perf_counter()
    if n_blocks:
        pipe = ToeplitzPipeline(seed, hplan.k)
        blocks = bits[: n_blocks * hplan.h].reshape(n_blocks, hplan.h)
        out_bits = pipe.hash_blocks(blocks).ravel()
    else:
        out_bits = np.zeros(0, np.uint8)
    seconds = time.perf_counter() - t0
    report = RunReport(
        blocks=n_blocks,
        strings=-(-n_blocks // hplan.t),
        bits_in=n_blocks * hplan.h,
        bits_out=int(out_bits.size),
        discarded_bits=int(bits.size - n_blocks * hplan.h),
        eps_total_log2=hplan.eps_total_log2,
        eps_total_log10=hplan.eps_total_log2 * math.log10(2.0),
        seconds=seconds,
        throughput_in_bps=(n_blocks * hplan.h / seconds) if seconds > 0 else math.inf,
        kappa_source=kappa_source,
        plan=hplan.to_record(),
    )
    return np.packbits(out_bits).tobytes(), report


# -- seed files ----------------------------------------------------------------------------------

def write_seed_file(path: str | Path, seed: ToeplitzSeed) -> None:
    bits = seed.bits
    pad = (-bits.size) % 4
    nib = np.concatenate([bits, np.zeros(pad, np.uint8)]).reshape(-1, 4) @ _NIBBLE_WEIGHTS
    hexstr = "".join("0123456789abcdef"[v] for v in nib)
    Path(path).write_text(f"{seed.h} {seed.l}\n{hexstr}\n")


def read_seed_file(path: str | Path) -> ToeplitzSeed:
    lines = Path(path).read_text().split()
    if len(lines) < 3:
        raise ValueError(f"{path}: expected 'h l' header followed by hex bits")
    h, l = int(lines[0]), int(lines[1])
    nib = np.array([int(c, 16) for c in "".join(lines[2:])], dtype=np.uint8)
    bits = ((nib[:, None] >> np.array([3, 2, 1, 0], np.uint8)) & 1).ravel()
    n = h + l - 1
    if bits.size < n or np.any(bits[n:]):
        raise ValueError(f"{path}: seed must contain exactly {n} bits")
    return ToeplitzSeed(bits[:n], h, l)


# -- statistical smoke tests ------------------------------------------------------------------

@dataclass(frozen=True)
class SmokeReport:
    n_bits: int
    monobit_p: float
    runs_p: float
    alpha: float

    @property
    def monobit_pass(self) -> bool:
        return self.monobit_p >= self.alpha

    @property
    def runs_pass(self) -> bool:
        return self.runs_p >= self.alpha

    @property
    def passed(self) -> bool:
        return self.monobit_pass and self.runs_pass


def smoke_tests(bits, alpha: float = 0.01, min_bits: int = 1_000_000) -> SmokeReport:
    """Frequency (monobit) and runs tests in the SP 800-22 formulation."""
    bits = bits_from_bytes(bits) if isinstance(bits, (bytes, bytearray)) else np.asarray(bits, np.uint8)
    n = bits.size
    if n < min_bits:
        raise ValueError(f"need at least {min_bits} bits, got {n}")
    s_obs = abs(int(2 * np.count_nonzero(bits)) - n) / math.sqrt(n)
    p_mono = math.erfc(s_obs / math.sqrt(2.0))
    pi = np.count_nonzero(bits) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        p_runs = 0.0
    else:
        v_obs = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
        num = abs(v_obs - 2.0 * n * pi * (1 - pi))
        p_runs = math.erfc(num / (2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)))
    return SmokeReport(n, p_mono, p_runs, alpha)


__all__ = [
    "HashPlan", "InfeasiblePlan", "RunReport", "SmokeReport", "ToeplitzPipeline",
    "ToeplitzSeed", "extract_stream", "hash_naive", "hash_pipeline", "plan", "read_seed_file",
    "smoke_tests", "write_seed_file",
]
