"""Run configuration: defaults are the experimental values, files and flags override them.

Fraction fields also accept a ``<name>_percent`` spelling and variance
fields a ``<name>_db`` spelling (dB below shot noise, ``V = 10**(-dB/10)``,
so anti-squeezing is negative).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .epr_entangler import EntanglerParams
from .kerr_sagnac import SagnacParams
from .quadrature_core import db_to_variance
from .trace_analysis import AnalysisConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass
class SagnacSection:
    reflectivity: float = 0.90
    kappa_rad_per_pJ: Optional[float] = None
    loop_loss: Optional[float] = None
    excess_phase_noise: float = 0.0
    phase_bias_rad: float = 0.0
    target_v_amp: float = db_to_variance(4.1)

    def params(self, kappa: float | None = None, loop_loss: float | None = None) -> SagnacParams:
        if kappa is None:
            kappa = self.kappa_rad_per_pJ or 0.0
        if loop_loss is None:
            loop_loss = self.loop_loss or 0.0
        return SagnacParams(reflectivity=self.reflectivity, kappa=kappa, loop_loss=loop_loss,
                            excess_phase_noise=self.excess_phase_noise, phase_bias=self.phase_bias_rad)

    @property
    def calibrated(self) -> bool:
        return self.kappa_rad_per_pJ is not None and self.loop_loss is not None


@dataclass
class EntanglerSection:
    optics: str = "ideal"
    reflectivity: float = 0.515
    visibility: float = 0.96
    rel_phase_rad: float = 0.0
    detector_efficiency: float = 0.92

    def params(self) -> EntanglerParams:
        if self.optics == "ideal":
            return EntanglerParams.ideal(self.rel_phase_rad)
        return EntanglerParams(self.reflectivity, self.visibility, self.rel_phase_rad, self.detector_efficiency)


@dataclass
class InputsSection:
    source: str = "measured"
    v_plus_s: float = db_to_variance(3.9)
    v_plus_p: float = db_to_variance(4.1)
    v_minus_s: Optional[float] = None
    v_minus_p: Optional[float] = None


@dataclass
class AnalysisSection:
    center_freq_hz: float = 10e6
    rbw_hz: float = 300e3
    window: str = "hann"
    segment_overlap: float = 0.5
    electronic_noise_level: float = 0.0

    def config(self) -> AnalysisConfig:
        return AnalysisConfig(self.center_freq_hz, self.rbw_hz, self.window, self.segment_overlap,
                              self.electronic_noise_level)


@dataclass
class SweepSection:
    e_min_pJ: float = 0.0
    e_max_pJ: float = 200.0
    steps: int = 2001


@dataclass
class PhaseScanSection:
    phi_min_rad: float = -math.pi / 2
    phi_max_rad: float = math.pi / 2
    steps: int = 181


@dataclass
class SynthSection:
    n_samples: int = 1_000_000
    shot_n_samples: int = 4_000_000
    sample_rate_hz: float = 21e6
    shot_noise_level: float = 1.0
    electronic_noise: float = 0.0


@dataclass
class RunConfig:
    sagnac_s: SagnacSection = field(default_factory=lambda: SagnacSection(reflectivity=0.91,
                                                                          target_v_amp=db_to_variance(3.9)))
    sagnac_p: SagnacSection = field(default_factory=SagnacSection)
    entangler: EntanglerSection = field(default_factory=EntanglerSection)
    inputs: InputsSection = field(default_factory=InputsSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    phase_scan: PhaseScanSection = field(default_factory=PhaseScanSection)
    synth: SynthSection = field(default_factory=SynthSection)
    energy_pJ: float = 110.0
    calibration_energy_pJ: float = 110.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


FRACTION_FIELDS = {"reflectivity", "visibility", "detector_efficiency", "loop_loss", "segment_overlap"}
VARIANCE_FIELDS = {"v_plus_s", "v_plus_p", "v_minus_s", "v_minus_p", "target_v_amp"}
CHOICES = {("entangler", "optics"): ("ideal", "lab"), ("inputs", "source"): ("measured", "sagnac")}


def _normalise_key(key: str, value: Any) -> tuple[str, Any]:
    if key.endswith("_percent"):
        base = key[: -len("_percent")]
        if base not in FRACTION_FIELDS:
            raise ConfigError(f"{key}: {base!r} is not a fraction field")
        return base, None if value is None else float(value) / 100.0
    if key.endswith("_db") and key[:-3] in VARIANCE_FIELDS:
        return key[:-3], None if value is None else db_to_variance(float(value))
    return key, value


def _coerce(section: str, f, value: Any) -> Any:
    if value is None:
        return None
    kind = str(f.type)
    try:
        if "int" in kind and "float" not in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{section}.{f.name} must be an integer")
            return int(value)
        if "float" in kind:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{f.name}: cannot interpret {value!r}") from None


def _apply_section(obj, section: str, data: dict) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for raw_key, raw_val in data.items():
        key, val = _normalise_key(str(raw_key), raw_val)
        if key not in known:
            raise ConfigError(f"unknown key {section}.{raw_key}")
        if (section, key) in CHOICES and val not in CHOICES[(section, key)]:
            raise ConfigError(f"{section}.{key} must be one of {CHOICES[(section, key)]}, got {val!r}")
        updates[key] = _coerce(section, known[key], val)
    return replace(obj, **updates)


def apply_overrides(cfg: RunConfig, data: dict) -> RunConfig:
    known = {f.name: f for f in fields(cfg)}
    updates = {}
    for key, val in (data or {}).items():
        key = str(key)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
        current = getattr(cfg, key)
        if hasattr(current, "__dataclass_fields__"):
            updates[key] = _apply_section(current, key, val)
        else:
            updates[key] = _coerce("config", known[key], val)
    return validate(replace(cfg, **updates))


def validate(cfg: RunConfig) -> RunConfig:
    """Delegate physical invariants to the domain objects."""
    try:
        for sec in (cfg.sagnac_s, cfg.sagnac_p):
            sec.params()
            if sec.kappa_rad_per_pJ is not None and sec.kappa_rad_per_pJ < 0:
                raise ValueError("kappa must be non-negative")
            if not 0 < sec.target_v_amp < 1:
                raise ValueError("target_v_amp must be a squeezed variance in (0, 1)")
        EntanglerParams(cfg.entangler.reflectivity, cfg.entangler.visibility,
                        cfg.entangler.rel_phase_rad, cfg.entangler.detector_efficiency)
        cfg.analysis.config()
        inp = cfg.inputs
        for vp, vm in ((inp.v_plus_s, inp.v_minus_s), (inp.v_plus_p, inp.v_minus_p)):
            if vp <= 0 or (vm is not None and vp * vm < 1 - 1e-9):
                raise ValueError(f"unphysical input variances ({vp}, {vm})")
        if cfg.energy_pJ < 0 or cfg.calibration_energy_pJ <= 0:
            raise ValueError("energies must be positive")
        if not 0 <= cfg.sweep.e_min_pJ < cfg.sweep.e_max_pJ or cfg.sweep.steps < 2:
            raise ValueError("sweep grid needs 0 <= e_min < e_max and steps >= 2")
        if cfg.phase_scan.steps < 1 or cfg.phase_scan.phi_min_rad >= cfg.phase_scan.phi_max_rad:
            raise ValueError("phase scan grid is empty")
        if cfg.synth.n_samples < 1 or cfg.synth.shot_n_samples < 1:
            raise ValueError("sample counts must be positive")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return validate(cfg)
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return validate(cfg)
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    return apply_overrides(cfg, data)


def parse_assignment(text: str) -> dict:
    """``section.key=value`` (value parsed as YAML) to a nested override mapping."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    value = yaml.safe_load(raw)
    parts = key.strip().split(".")
    out: dict = {}
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out
