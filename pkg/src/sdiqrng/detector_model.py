"""Photodiode, transimpedance amplifier and ADC chain.

Photon numbers are converted to volts with a flat-response conversion factor,
clamped to the detector's linear range, smeared by Gaussian electronic noise
and binned by an ADC whose resolution is set by its effective number of bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .photon_core import FockRange


@dataclass(frozen=True)
class PhotodiodeSpec:
    bandwidth: float          # Hz
    responsivity: float       # A/W
    gain: float               # ohm
    wavelength: float         # m
    noise_sigma: float        # V
    linear_range: FockRange

    def __post_init__(self):
        for name in ("bandwidth", "responsivity", "gain", "wavelength"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not self.linear_range.n_lo < self.linear_range.n_hi:
            raise ValueError("linear range must be non-degenerate")

    @classmethod
    def from_alpha(cls, alpha: float, noise_sigma: float = 0.0,
                   linear_range: FockRange = FockRange(0, math.inf)) -> "PhotodiodeSpec":
        """Spec with a prescribed conversion factor (unit bandwidth/responsivity)."""
        wavelength = 1.55e-6
        gain = alpha * wavelength / (PLANCK * SPEED_OF_LIGHT)
        return cls(1.0, 1.0, gain, wavelength, noise_sigma, linear_range)


@dataclass(frozen=True)
class AdcSpec:
    bit_depth: int            # b
    enob: float               # effective number of bits
    v_min: float              # V
    v_max: float              # V
    sample_rate: float = 1.0  # samples/s

    def __post_init__(self):
        if not 0 < self.enob <= self.bit_depth:
            raise ValueError("need 0 < enob <= bit_depth")
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")

    @property
    def n_bins(self) -> int:
        return 2 ** math.ceil(self.enob)


@dataclass(frozen=True)
class VoltageBin:
    index: int
    v_lo: float
    v_hi: float


def conversion_factor(spec: PhotodiodeSpec) -> float:
    """Volts per photon: h c BW eta G / lambda."""
    return PLANCK * SPEED_OF_LIGHT * spec.bandwidth * spec.responsivity * spec.gain / spec.wavelength


def photons_per_window(power_watts: float, spec: PhotodiodeSpec) -> float:
    """Mean photon number per detector response time 1/BW for a CW power."""
    return power_watts * spec.wavelength / (PLANCK * SPEED_OF_LIGHT * spec.bandwidth)


def effective_resolution(adc: AdcSpec) -> float:
    return (adc.v_max - adc.v_min) / 2.0**adc.enob


def bin_edges(adc: AdcSpec) -> np.ndarray:
    """The J+1 bin edges, with the two outer edges at -inf and +inf."""
    dv = effective_resolution(adc)
    inner = adc.v_min + dv * np.arange(1, adc.n_bins)
    return np.concatenate(([-np.inf], inner, [np.inf]))


def bin_index(v, adc: AdcSpec):
    """Vectorised bin lookup; boundaries belong to the upper bin."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("voltage must be finite")
    return np.searchsorted(bin_edges(adc)[1:-1], v, side="right")


def voltage_bin(index: int, adc: AdcSpec) -> VoltageBin:
    if not 0 <= index < adc.n_bins:
        raise ValueError(f"bin index {index} outside [0, {adc.n_bins})")
    edges = bin_edges(adc)
    return VoltageBin(int(index), float(edges[index]), float(edges[index + 1]))


def bin_of_voltage(v: float, adc: AdcSpec) -> VoltageBin:
    return voltage_bin(int(bin_index(v, adc)), adc)


def detect(n, spec: PhotodiodeSpec, adc: AdcSpec, noise_draw=0.0):
    """Voltage and ADC code for photon number ``n`` (array-friendly).

    Returns ``(voltage, code)``; ``voltage_bin(code, adc)`` gives the interval.
    """
    n_clamped = spec.linear_range.clamp(np.asarray(n, dtype=float))
    v = conversion_factor(spec) * n_clamped + noise_draw
    return v, bin_index(v, adc)


def support_set(delta_v: float, alpha_d: float) -> range:
    """Integers x with |x| <= floor(delta_v / (2 alpha_d))."""
    if not alpha_d > 0:
        raise ValueError("alpha_d must be positive")
    # the guard rounds an exact-integer ratio up rather than down (conservative)
    w = math.floor(delta_v / (2.0 * alpha_d) * (1 + 1e-12))
    return range(-w, w + 1)
