"""Two-channel photocurrent records and their band-variance analysis.

Trace files are UTF-8 text: ``# key=value`` header lines
(``sample_rate_hz``, ``power_a``, ``power_b``, ``label``, ``seed``), a
column header ``t_index,ch_a,ch_b`` and one CSV row per sample in raw
detector units.
"""

from __future__ import annotations

import io
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal

from .epr_entangler import VarianceSet

log = logging.getLogger(__name__)

COMBOS = ("sum", "difference", "single-A", "single-B")
REQUIRED_COLUMNS = ("t_index", "ch_a", "ch_b")
POWER_MISMATCH = 0.05


class TraceError(ValueError):
    """Malformed trace file or incompatible analysis request."""


@dataclass(frozen=True)
class TraceRecord:
    sample_rate: float
    ch_a: np.ndarray = field(repr=False)
    ch_b: np.ndarray = field(repr=False)
    power_a: float = 1.0
    power_b: float = 1.0
    label: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        a = np.asarray(self.ch_a, dtype=float)
        b = np.asarray(self.ch_b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise TraceError(f"channels must be equal-length 1-D arrays, got {a.shape} and {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise TraceError("trace contains NaN or infinite samples")
        if not self.sample_rate > 0:
            raise TraceError("sample_rate must be positive")
        object.__setattr__(self, "ch_a", a)
        object.__setattr__(self, "ch_b", b)

    def __len__(self) -> int:
        return self.ch_a.size

    def combo(self, name: str) -> np.ndarray:
        if name == "sum":
            return self.ch_a + self.ch_b
        if name == "difference":
            return self.ch_a - self.ch_b
        if name == "single-A":
            return self.ch_a
        if name == "single-B":
            return self.ch_b
        raise TraceError(f"unknown combination {name!r}; expected one of {COMBOS}")

    def combo_power(self, name: str) -> float:
        if name == "single-A":
            return self.power_a
        if name == "single-B":
            return self.power_b
        return self.power_a + self.power_b


@dataclass(frozen=True)
class AnalysisConfig:
    """Spectrum-analyser settings.

    ``electronic_noise_level`` is the dark-noise band variance of one
    channel in raw units; a ``dark`` trace, when given, is analysed
    instead. ``nperseg`` defaults to the smallest power of two giving at
    least eight bins per RBW.
    """

    center_freq: float = 10e6
    rbw: float = 300e3
    window: str = "hann"
    segment_overlap: float = 0.5
    electronic_noise_level: float = 0.0
    dark: Optional[TraceRecord] = None
    nperseg: Optional[int] = None
    floor: float = 1e-6

    def __post_init__(self):
        if not 0 < self.rbw < self.center_freq:
            raise TraceError("need 0 < rbw < center_freq")
        if not 0 <= self.segment_overlap < 1:
            raise TraceError("segment_overlap must lie in [0, 1)")
        if self.electronic_noise_level < 0:
            raise TraceError("electronic_noise_level must be non-negative")

    def segment_length(self, sample_rate: float) -> int:
        if self.nperseg is not None:
            return int(self.nperseg)
        return 1 << math.ceil(math.log2(8 * sample_rate / self.rbw))

    def check(self, trace: TraceRecord) -> None:
        if trace.sample_rate <= 2 * self.center_freq:
            raise TraceError(f"sample rate {trace.sample_rate:g} Hz violates Nyquist for "
                             f"{self.center_freq:g} Hz analysis (need > {2 * self.center_freq:g} Hz)")
        if self.center_freq + self.rbw / 2 >= trace.sample_rate / 2:
            raise TraceError("analysis band extends past the Nyquist frequency")


@dataclass(frozen=True)
class SpectralEstimate:
    freq: float
    variance: float
    n_segments: int
    statistical_err: float

    def to_dict(self) -> dict:
        return asdict(self)


def save_trace(trace: TraceRecord, path: str | Path) -> None:
    Path(path).write_text(trace_to_text(trace), encoding="utf-8")


def trace_to_text(trace: TraceRecord) -> str:
    buf = io.StringIO()
    buf.write(f"# sample_rate_hz={trace.sample_rate!r}\n")
    buf.write(f"# power_a={trace.power_a!r}\n")
    buf.write(f"# power_b={trace.power_b!r}\n")
    buf.write(f"# label={trace.label}\n")
    if trace.seed is not None:
        buf.write(f"# seed={trace.seed}\n")
    buf.write(",".join(REQUIRED_COLUMNS) + "\n")
    data = np.column_stack([np.arange(len(trace)), trace.ch_a, trace.ch_b])
    np.savetxt(buf, data, fmt=("%d", "%.10e", "%.10e"), delimiter=",")
    return buf.getvalue()


def load_trace(path: str | Path) -> TraceRecord:
    text = Path(path).read_text(encoding="utf-8")
    meta: dict[str, str] = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        body = lines[k][1:].strip()
        if body:
            if "=" not in body:
                raise TraceError(f"malformed header line {k + 1}: {lines[k]!r}")
            key, val = body.split("=", 1)
            meta[key.strip()] = val.strip()
        k += 1
    if "sample_rate_hz" not in meta:
        raise TraceError("header is missing sample_rate_hz")
    if k >= len(lines):
        raise TraceError("missing column header")
    columns = [c.strip() for c in lines[k].split(",")]
    for col in REQUIRED_COLUMNS:
        if col not in columns:
            raise TraceError(f"missing column {col!r} (found {columns})")
    body = "\n".join(lines[k + 1:])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise TraceError(f"ragged or non-numeric rows: {exc}") from None
    if data.shape[1] != len(columns):
        raise TraceError(f"expected {len(columns)} columns per row, got {data.shape[1]}")
    ia, ib = columns.index("ch_a"), columns.index("ch_b")
    try:
        return TraceRecord(
            sample_rate=float(meta["sample_rate_hz"]),
            ch_a=data[:, ia], ch_b=data[:, ib],
            power_a=float(meta.get("power_a", 1.0)), power_b=float(meta.get("power_b", 1.0)),
            label=meta.get("label", ""),
            seed=int(meta["seed"]) if "seed" in meta else None,
        )
    except ValueError as exc:
        raise TraceError(str(exc)) from None


def synthesize_trace(target: np.ndarray, shot_noise_level: float = 1.0, n_samples: int = 1_000_000,
                     seed: int = 0, sample_rate: float = 21e6, electronic_noise: float = 0.0,
                     power_a: float = 1.0, power_b: float = 1.0, label: str = "synthetic") -> TraceRecord:
    """White Gaussian photocurrents with channel covariance ``shot_noise_level * target``.

    ``target`` is the 2x2 amplitude covariance in single-beam shot-noise
    units (identity for a shot-noise-limited pair). Independent white
    electronic noise of variance ``electronic_noise`` is added per channel.
    The spectrum is flat, so every band carries the same normalised
    variances.
    """
    c = np.asarray(target, dtype=float)
    if c.shape != (2, 2) or not np.allclose(c, c.T):
        raise TraceError("target must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(c).min() < -1e-12:
        raise TraceError("target covariance is not positive semidefinite")
    if shot_noise_level <= 0 or electronic_noise < 0:
        raise TraceError("noise levels must be positive")
    w, v = np.linalg.eigh(shot_noise_level * c)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, 2))
    x = z @ root.T
    if electronic_noise > 0:
        x = x + math.sqrt(electronic_noise) * rng.standard_normal((n_samples, 2))
    return TraceRecord(sample_rate, x[:, 0], x[:, 1], power_a, power_b, label, seed)


def target_from_sum_diff(v_sum: float, v_diff: float) -> np.ndarray:
    """Symmetric channel covariance with the given normalised sum and difference variances."""
    if v_sum < 0 or v_diff < 0:
        raise TraceError("variances must be non-negative")
    v = 0.5 * (v_sum + v_diff)
    c = 0.5 * (v_sum - v_diff)
    return np.array([[v, c], [c, v]])


def band_variance(trace: TraceRecord, combo: str, config: AnalysisConfig) -> SpectralEstimate:
    """Band power of a channel combination in the RBW window around ``center_freq``."""
    config.check(trace)
    x = trace.combo(combo)
    nperseg = config.segment_length(trace.sample_rate)
    if x.size < nperseg:
        raise TraceError(f"trace of {x.size} samples is shorter than one segment ({nperseg})")
    noverlap = int(round(config.segment_overlap * nperseg))
    f, pxx = signal.welch(x, fs=trace.sample_rate, window=config.window, nperseg=nperseg,
                          noverlap=noverlap, detrend="constant", scaling="density")
    df = f[1] - f[0]
    band = np.abs(f - config.center_freq) <= config.rbw / 2
    n_bins = int(band.sum())
    if n_bins == 0:
        raise TraceError("no frequency bins inside the analysis band")
    n_segments = 1 + (x.size - nperseg) // (nperseg - noverlap)
    variance = float(pxx[band].sum() * df)
    return SpectralEstimate(config.center_freq, variance, n_segments,
                            _relative_error(config.window, nperseg, noverlap, n_segments, n_bins))


def _relative_error(window: str, nperseg: int, noverlap: int, n_segments: int, n_bins: int) -> float:
    """Relative standard error of a band-summed Welch estimate of a flat spectrum.

    Accounts for correlations between overlapping segments and between
    neighbouring frequency bins introduced by the taper.
    """
    w = signal.get_window(window, nperseg)
    step = nperseg - noverlap
    w2 = np.sum(w ** 2)
    # correlation of periodogram values between segments offset by j steps
    seg_var = 1.0
    j = 1
    while j * step < nperseg:
        rho = np.sum(w[j * step:] * w[:nperseg - j * step]) ** 2 / w2 ** 2
        seg_var += 2.0 * rho * (1.0 - j / n_segments)
        j += 1
    # correlation between bins k apart within one segment
    bin_var = 1.0
    n = np.arange(nperseg)
    for k in range(1, n_bins):
        rho = np.abs(np.sum(w ** 2 * np.exp(2j * np.pi * k * n / nperseg))) ** 2 / w2 ** 2
        if rho < 1e-6:
            break
        bin_var += 2.0 * rho * (1.0 - k / n_bins)
    return math.sqrt(seg_var * bin_var / (n_segments * n_bins))


def subtract_electronic_noise(raw: float, electronic: float, shot: float, floor: float = 1e-6) -> float:
    """Shot-noise-normalised variance with the detector dark noise removed."""
    if electronic < 0:
        raise TraceError("electronic noise must be non-negative")
    if shot <= electronic:
        raise TraceError(f"shot level {shot:g} does not exceed electronic noise {electronic:g}")
    if raw <= electronic:
        log.warning("raw variance %.4g at or below electronic noise %.4g; clamped to %.1e",
                    raw, electronic, floor)
        return floor
    return max((raw - electronic) / (shot - electronic), floor)


def _electronic(config: AnalysisConfig, combo: str) -> float:
    if config.dark is not None:
        return band_variance(config.dark, combo, config).variance
    channels = 1 if combo.startswith("single") else 2
    return channels * config.electronic_noise_level


def analyze(signal_trace: TraceRecord, shot_trace: TraceRecord, config: AnalysisConfig) -> VarianceSet:
    """Normalised amplitude variances of a signal trace against a shot-noise calibration."""
    if signal_trace.sample_rate != shot_trace.sample_rate:
        raise TraceError(f"sample rates differ: {signal_trace.sample_rate:g} vs {shot_trace.sample_rate:g}")
    out: dict[str, float] = {}
    names = {"single-A": "v_a_plus", "single-B": "v_b_plus", "sum": "v_sum_plus", "difference": "v_diff_plus"}
    for combo, key in names.items():
        raw = band_variance(signal_trace, combo, config)
        shot = band_variance(shot_trace, combo, config)
        el = _electronic(config, combo)
        ratio = signal_trace.combo_power(combo) / shot_trace.combo_power(combo)
        if abs(ratio - 1.0) > POWER_MISMATCH:
            log.warning("%s: optical power differs from the shot calibration by %.1f%%; rescaling",
                        combo, 100 * (ratio - 1))
        shot_level = el + (shot.variance - el) * ratio
        value = subtract_electronic_noise(raw.variance, el, shot_level, config.floor)
        rel_raw = raw.statistical_err * raw.variance / max(raw.variance - el, 1e-300)
        rel_shot = shot.statistical_err * shot.variance / max(shot.variance - el, 1e-300)
        out[key] = value
        out[key + "_err"] = value * math.hypot(rel_raw, rel_shot) if signal_trace is not shot_trace else 0.0
    return VarianceSet(**out)


def estimate_to_json(est: SpectralEstimate) -> str:
    return json.dumps(est.to_dict())
