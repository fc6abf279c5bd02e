"""Per-round min-entropy of homodyne protocols versus the certified scheme.

Three families are compared as functions of the source's mean photon number:
device-dependent homodyne (trusted Gaussian statistics), homodyne certified by
an entropic uncertainty relation (EUR), and the source-device-independent
(SDI) expected rate of the beam-splitter scheme.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .certifier import n_R_minus_real
from .photon_core import ideal_min_entropy

# randomness-round probability: both values appear in the literature source
P_X_PRESETS = (0.9, 0.1)


@dataclass(frozen=True)
class HomodyneConfig:
    n_LO: float = 1e7
    p_X: float = 0.9

    def __post_init__(self):
        if not self.n_LO > 0:
            raise ValueError("n_LO must be positive")
        if not 0 <= self.p_X <= 1:
            raise ValueError("p_X must lie in [0, 1]")


@dataclass(frozen=True)
class SdiConfig:
    r1: float = 0.0965
    eps_fail: float = 1e-10
    target_pass: float = 0.995


@dataclass(frozen=True)
class RateCurvePoint:
    mean_n: float
    model: str
    bits: float


# -- device-dependent homodyne ------------------------------------------------------------

def dd_vacuum(cfg: HomodyneConfig) -> float:
    return 0.5 * math.log2(2 * math.pi * cfg.n_LO)


def dd_coherent(n_s: float, cfg: HomodyneConfig) -> float:
    return 0.5 * math.log2(2 * math.pi * (n_s + cfg.n_LO))


def thermal_conditional_variance(mean_n: float) -> float:
    """Quadrature variance of one TMSV arm conditioned on the other.

    sech(2 asinh sqrt(n)) simplifies to 1 / (1 + 2n), which stays finite for any n.
    """
    return 1.0 / (1.0 + 2.0 * mean_n)


def dd_thermal(mean_n: float, cfg: HomodyneConfig) -> float:
    return 0.5 * math.log2(2 * math.pi * (cfg.n_LO * thermal_conditional_variance(mean_n) + mean_n))


# -- EUR-certified homodyne ------------------------------------------------------------------

def theta3_series(tau: float, terms: int) -> float:
    """Direct partial sum 1 + 2 sum_{n=1}^{terms} tau^(n^2)."""
    n = np.arange(1, terms + 1, dtype=float)
    return float(1.0 + 2.0 * np.sum(np.exp(n * n * math.log(tau)))) if tau > 0 else 1.0


def _theta_tail_sum(s: float) -> float:
    """sum_{n>=1} exp(-s n^2), stopping once terms drop below 1e-18 of the total."""
    total, n = 0.0, 1
    while True:
        term = math.exp(-s * n * n)
        total += term
        if term < 1e-18 * max(total, 1e-300):
            return total
        n += 1


def jacobi_theta3(tau: float) -> float:
    """theta_3(0, tau) = sum over all integers n of tau^(n^2), for 0 <= tau < 1.

    For tau close to 1 the modular relation
    theta_3(e^-s) = sqrt(pi/s) * theta_3(e^(-pi^2/s)) is used; its leading term
    sqrt(pi/s) is the asymptotic form and the bracket's correction is
    2 exp(-pi^2/s) relative.
    """
    if not 0 <= tau < 1:
        raise ValueError("nome must satisfy 0 <= tau < 1")
    if tau == 0:
        return 1.0
    s = -math.log(tau)
    if s < math.pi:
        return math.sqrt(math.pi / s) * (1.0 + 2.0 * _theta_tail_sum(math.pi**2 / s))
    return 1.0 + 2.0 * _theta_tail_sum(s)


def eur_rate(V: float, cfg: HomodyneConfig) -> float:
    """EUR-certified min-entropy for normalised quadrature variance V (vacuum: V = 1)."""
    nv = cfg.n_LO * V
    theta = jacobi_theta3(math.exp(-1.0 / (4.0 * nv)))
    bits = cfg.p_X * (math.log2(2 * math.pi * cfg.n_LO) - math.log2(theta**2 / math.sqrt(2 * math.pi * nv)))
    return max(0.0, bits)


def eur_variance_coherent(n_s: float, cfg: HomodyneConfig) -> float:
    """Photon-difference variance n_LO + n_s, normalised by n_LO."""
    return 1.0 + n_s / cfg.n_LO


def eur_variance_thermal(mean_n: float, cfg: HomodyneConfig) -> float:
    """Conditional variance n_LO V_x + n, normalised by n_LO."""
    return thermal_conditional_variance(mean_n) + mean_n / cfg.n_LO


def eur_coherent(n_s: float, cfg: HomodyneConfig) -> float:
    return eur_rate(eur_variance_coherent(n_s, cfg), cfg)


def eur_thermal(mean_n: float, cfg: HomodyneConfig) -> float:
    return eur_rate(eur_variance_thermal(mean_n, cfg), cfg)


# -- SDI expected rate -------------------------------------------------------------------

def n_C_minus_for_pass(mean_n_c: float, source_kind: str, target_pass: float) -> float:
    """Lower threshold on n_C met with probability ``target_pass``."""
    if not 0 < target_pass < 1:
        raise ValueError("target_pass must lie in (0, 1)")
    if mean_n_c <= 0:
        return 0.0
    if source_kind == "coherent":
        return mean_n_c - float(ndtri(target_pass)) * math.sqrt(mean_n_c)
    if source_kind == "thermal":
        # (n/(n+1))^(k-1) = target_pass
        return 1.0 + math.log(target_pass) / -math.log1p(1.0 / mean_n_c)
    raise ValueError(f"unknown source kind {source_kind!r}")


def sdi_n_R_minus(mean_n: float, source_kind: str, sdi: SdiConfig = SdiConfig()) -> int:
    n_c = n_C_minus_for_pass(sdi.r1 * mean_n, source_kind, sdi.target_pass)
    return math.floor(n_R_minus_real(math.log(sdi.eps_fail), n_c, sdi.r1))


def sdi_expected(mean_n: float, source_kind: str, sdi: SdiConfig = SdiConfig()) -> float:
    """Expected certified min-entropy per round: pass probability x 0.5 log2(pi n_R/2)."""
    if mean_n <= 0:
        return 0.0
    n_r = sdi_n_R_minus(mean_n, source_kind, sdi)
    if n_r < 1:
        return 0.0
    return max(0.0, sdi.target_pass * ideal_min_entropy(n_r))


# -- sweeps ---------------------------------------------------------------------------------

PANELS = {
    "coherent": ("dd_vac", "dd_coh", "eur_coh", "sdi_coh"),
    "thermal": ("dd_vac", "dd_therm", "eur_therm", "sdi_therm"),
}


def model_functions(cfg: HomodyneConfig, sdi: SdiConfig) -> dict[str, Callable[[float], float]]:
    return {
        "dd_vac": lambda n: dd_vacuum(cfg),
        "dd_coh": lambda n: dd_coherent(n, cfg),
        "dd_therm": lambda n: dd_thermal(n, cfg),
        "eur_coh": lambda n: eur_coherent(n, cfg),
        "eur_therm": lambda n: eur_thermal(n, cfg),
        "sdi_coh": lambda n: sdi_expected(n, "coherent", sdi),
        "sdi_therm": lambda n: sdi_expected(n, "thermal", sdi),
    }


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points <= 0:
        return np.zeros(0)
    return np.logspace(math.log10(lo), math.log10(hi), points)


def sweep(models: Sequence[str], grid: Iterable[float], cfg: HomodyneConfig = HomodyneConfig(),
          sdi: SdiConfig = SdiConfig()) -> list[RateCurvePoint]:
    funcs = model_functions(cfg, sdi)
    unknown = [m for m in models if m not in funcs]
    if unknown:
        raise ValueError(f"unknown model(s) {unknown}")
    return [RateCurvePoint(float(n), m, max(0.0, funcs[m](float(n)))) for m in models for n in grid]


def curve(points: Sequence[RateCurvePoint], model: str) -> tuple[np.ndarray, np.ndarray]:
    sel = [p for p in points if p.model == model]
    return np.array([p.mean_n for p in sel]), np.array([p.bits for p in sel])


def crossing_point(grid, a, b) -> float | None:
    """First mean_n where a - b changes sign, interpolated linearly in log(mean_n)."""
    grid, d = np.asarray(grid, float), np.asarray(a, float) - np.asarray(b, float)
    for i in range(len(d) - 1):
        if d[i] == 0:
            return float(grid[i])
        if d[i] * d[i + 1] < 0:
            x0, x1 = math.log(grid[i]), math.log(grid[i + 1])
            x = x0 + (x1 - x0) * d[i] / (d[i] - d[i + 1])
            return math.exp(x)
    return None


def write_curve_csv(points: Sequence[RateCurvePoint], path: str | Path, digest: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if digest:
            fh.write(f"# config_sha256={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(["model", "mean_n", "bits"])
        for p in points:
            writer.writerow([p.model, repr(p.mean_n), repr(p.bits)])


def read_curve_csv(path: str | Path) -> list[RateCurvePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
    return [RateCurvePoint(float(n), m, float(b)) for m, n, b in rows[1:]]
