"""Protocol configuration: dataclasses, presets and the flat config format.

Config files are flat YAML mappings whose keys carry their unit, e.g.
``sigma_c_volts: 0.25e-3``. No unit inference is performed.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .detector_model import AdcSpec, PhotodiodeSpec, conversion_factor, effective_resolution
from .photon_core import FockRange


class ConfigError(ValueError):
    """Malformed configuration; message names the line and/or field."""


@dataclass(frozen=True)
class ProtocolParams:
    r1: float
    detector_c: PhotodiodeSpec
    detector_diff: PhotodiodeSpec
    adc_c: AdcSpec
    adc_d: AdcSpec
    n_R_plus: int
    r0: float = 0.5
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.r0 != 0.5:
            raise ValueError("the randomness splitter must be balanced (r0 = 1/2)")
        if not 0 < self.r1 < 1:
            raise ValueError("r1 must lie in (0, 1)")
        if self.n_R_plus < 1:
            raise ValueError("n_R_plus must be positive")

    @property
    def alpha_c(self) -> float:
        return conversion_factor(self.detector_c)

    @property
    def alpha_d(self) -> float:
        return conversion_factor(self.detector_diff)

    @property
    def sigma_c(self) -> float:
        return self.detector_c.noise_sigma

    @property
    def sigma_d(self) -> float:
        return self.detector_diff.noise_sigma

    @property
    def delta_v_c(self) -> float:
        return effective_resolution(self.adc_c)

    @property
    def delta_v_d(self) -> float:
        return effective_resolution(self.adc_d)

    def to_flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {"r0": self.r0, "r1": self.r1, "n_r_plus_photons": self.n_R_plus}
        for tag, det in (("c", self.detector_c), ("d", self.detector_diff)):
            out[f"bandwidth_{tag}_hz"] = det.bandwidth
            out[f"responsivity_{tag}_a_per_w"] = det.responsivity
            out[f"gain_{tag}_ohm"] = det.gain
            out[f"wavelength_{tag}_m"] = det.wavelength
            out[f"sigma_{tag}_volts"] = det.noise_sigma
            out[f"n_min_{tag}_photons"] = det.linear_range.n_lo
            out[f"n_max_{tag}_photons"] = det.linear_range.n_hi
        for tag, adc in (("c", self.adc_c), ("d", self.adc_d)):
            out[f"adc_{tag}_bit_depth_bits"] = adc.bit_depth
            out[f"adc_{tag}_enob_bits"] = adc.enob
            out[f"adc_{tag}_v_min_volts"] = adc.v_min
            out[f"adc_{tag}_v_max_volts"] = adc.v_max
            out[f"adc_{tag}_sample_rate_hz"] = adc.sample_rate
        out.update(self.extras)
        return out

    def digest(self) -> str:
        return digest_of(self.to_flat())


def digest_of(obj: Any) -> str:
    text = json.dumps(obj, sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    return str(o)


# Optional keys understood by the CLI; anything else is rejected.
OPTIONAL_KEYS = {
    "source_kind": str,
    "source_mean_photons": float,
    "threshold_lo_volts": float,
    "threshold_hi_volts": float,
    "eps_fail_log10": float,
    "samples_per_block": int,
}

_DETECTOR_KEYS = ("bandwidth_{}_hz", "responsivity_{}_a_per_w", "gain_{}_ohm", "wavelength_{}_m",
                  "sigma_{}_volts", "n_min_{}_photons", "n_max_{}_photons")
_ADC_KEYS = ("adc_{}_bit_depth_bits", "adc_{}_enob_bits", "adc_{}_v_min_volts", "adc_{}_v_max_volts",
             "adc_{}_sample_rate_hz")
REQUIRED_KEYS = (["r0", "r1", "n_r_plus_photons"]
                 + [k.format(t) for t in "cd" for k in _DETECTOR_KEYS]
                 + [k.format(t) for t in "cd" for k in _ADC_KEYS])


def _number(value, key: str, line: int | None, kind=float):
    where = f"line {line}, " if line else ""
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        value = math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}field '{key}': expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}field '{key}': expected an integer, got {value!r}")
        return int(value)
    return float(value)


def params_from_flat(flat: dict[str, Any], lines: dict[str, int] | None = None) -> ProtocolParams:
    lines = lines or {}
    missing = [k for k in REQUIRED_KEYS if k not in flat]
    if missing:
        raise ConfigError(f"missing field(s): {', '.join(missing)}")
    unknown = [k for k in flat if k not in REQUIRED_KEYS and k not in OPTIONAL_KEYS]
    if unknown:
        k = unknown[0]
        raise ConfigError(f"line {lines.get(k, '?')}, unknown field '{k}'")

    def num(key, kind=float):
        return _number(flat[key], key, lines.get(key), kind)

    def detector(t):
        n_hi = num(f"n_max_{t}_photons")
        return PhotodiodeSpec(
            bandwidth=num(f"bandwidth_{t}_hz"),
            responsivity=num(f"responsivity_{t}_a_per_w"),
            gain=num(f"gain_{t}_ohm"),
            wavelength=num(f"wavelength_{t}_m"),
            noise_sigma=num(f"sigma_{t}_volts"),
            linear_range=FockRange(num(f"n_min_{t}_photons", int), n_hi if math.isinf(n_hi) else int(n_hi)),
        )

    def adc(t):
        return AdcSpec(
            bit_depth=num(f"adc_{t}_bit_depth_bits", int),
            enob=num(f"adc_{t}_enob_bits"),
            v_min=num(f"adc_{t}_v_min_volts"),
            v_max=num(f"adc_{t}_v_max_volts"),
            sample_rate=num(f"adc_{t}_sample_rate_hz"),
        )

    extras = {}
    for key, kind in OPTIONAL_KEYS.items():
        if key in flat:
            extras[key] = flat[key] if kind is str else _number(flat[key], key, lines.get(key), kind)
    try:
        return ProtocolParams(
            r0=num("r0"), r1=num("r1"),
            detector_c=detector("c"), detector_diff=detector("d"),
            adc_c=adc("c"), adc_d=adc("d"),
            n_R_plus=num("n_r_plus_photons", int),
            extras=extras,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> ProtocolParams:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        flat = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{where}{exc}") from exc
    if not isinstance(flat, dict) or node is None:
        raise ConfigError("config must be a flat key: value mapping")
    lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    for key, value in flat.items():
        if isinstance(value, (dict, list)):
            raise ConfigError(f"line {lines.get(key, '?')}, field '{key}': nested values are not allowed")
    return params_from_flat(flat, lines)


def load_config(path: str | Path) -> ProtocolParams:
    return parse_config(Path(path).read_text())


def dump_config(params: ProtocolParams) -> str:
    flat = {k: (".inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in params.to_flat().items()}
    return "".join(f"{k}: {v}\n" for k, v in flat.items())


def default_params(**overrides) -> ProtocolParams:
    """Device values of the offline (oscilloscope) characterisation run.

    The 80 mV oscilloscope full scale is an assumption, not a published value.
    """
    scope = AdcSpec(bit_depth=8, enob=4.772, v_min=-40e-3, v_max=40e-3, sample_rate=10e9)
    params = ProtocolParams(
        r1=0.0965,
        detector_c=PhotodiodeSpec(5e9, 1.04, 50.0, 1550e-9, 0.25e-3, FockRange(0, math.inf)),
        detector_diff=PhotodiodeSpec(1.6e9, 0.95, 16000.0, 1550e-9, 3.05e-3, FockRange(0, 10_600_000)),
        adc_c=scope,
        adc_d=scope,
        n_R_plus=10_600_000,
    )
    return replace(params, **overrides) if overrides else params


def realtime_params(**overrides) -> ProtocolParams:
    """Same optics read out by the 12-bit real-time ADC (ENOB 9.2, +-1 V assumed)."""
    adc = AdcSpec(bit_depth=12, enob=9.2, v_min=-1.0, v_max=1.0, sample_rate=2.5e9)
    return default_params(adc_d=adc, **overrides)

