"""Interference of the two squeezed beams and the resulting variance set."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .quadrature_core import (
    GaussianState,
    StateError,
    apply_beamsplitter,
    apply_loss,
    apply_phase_shift,
    carrier_angle,
    carrier_coefficients,
    quadrature_variance,
    tensor,
)

DARK_POWER = 1e-12


@dataclass(frozen=True)
class EntanglerParams:
    """Settings of the entangling 50/50 splitter and its detectors.

    Defaults are the measured values; ``ideal()`` gives a lossless
    balanced splitter.
    """

    reflectivity: float = 0.515
    visibility: float = 0.96
    rel_phase: float = 0.0
    detector_efficiency: float = 0.92

    def __post_init__(self):
        for name in ("reflectivity", "visibility", "detector_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def ideal(cls, rel_phase: float = 0.0) -> "EntanglerParams":
        return cls(reflectivity=0.5, visibility=1.0, rel_phase=rel_phase, detector_efficiency=1.0)


@dataclass(frozen=True)
class VarianceSet:
    """Carrier-frame variances of the EPR beams.

    Per-beam entries are in single-beam shot-noise units, the sum and
    difference entries are normalised to the two-beam shot-noise level.
    Entries not measured (phase quadratures from direct detection) are
    ``None``.
    """

    v_a_plus: Optional[float] = None
    v_a_minus: Optional[float] = None
    v_b_plus: Optional[float] = None
    v_b_minus: Optional[float] = None
    v_sum_plus: Optional[float] = None
    v_sum_minus: Optional[float] = None
    v_diff_plus: Optional[float] = None
    v_diff_minus: Optional[float] = None
    v_a_plus_err: Optional[float] = None
    v_a_minus_err: Optional[float] = None
    v_b_plus_err: Optional[float] = None
    v_b_minus_err: Optional[float] = None
    v_sum_plus_err: Optional[float] = None
    v_sum_minus_err: Optional[float] = None
    v_diff_plus_err: Optional[float] = None
    v_diff_minus_err: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name.endswith("_err"):
                if v < 0:
                    raise ValueError(f"{f.name} must be non-negative")
            elif not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None or not k.endswith("_err")}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "VarianceSet":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown VarianceSet fields: {sorted(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in data.items()})


def lock_carrier(state: GaussianState, mode: str | None = None) -> GaussianState:
    """Rotate a mode so its mean field is real and positive (path-length lock)."""
    mode = state.modes[0] if mode is None else mode
    return apply_phase_shift(state, mode, -carrier_angle(state, mode))


def entangle(state_s: GaussianState, state_p: GaussianState, params: EntanglerParams,
             lock: bool = True) -> GaussianState:
    """Interfere two single-mode beams; returns the two-mode state ``(a, b)``.

    With ``lock`` both inputs are first brought to a common carrier phase,
    so ``params.rel_phase`` is the phase of ``p`` relative to ``s``.
    Imperfect mode overlap is modelled as a loss ``visibility**2`` on each
    input ahead of the splitter.
    """
    if state_s.n_modes != 1 or state_p.n_modes != 1:
        raise StateError("entangle expects two single-mode inputs")
    for st in (state_s, state_p):
        if st.power(st.modes[0]) <= DARK_POWER:
            raise StateError("input beam has no carrier")
    if lock:
        state_s, state_p = lock_carrier(state_s), lock_carrier(state_p)
    joint = tensor(state_s.relabel({state_s.modes[0]: "a"}), state_p.relabel({state_p.modes[0]: "b"}))
    eta_vis = params.visibility ** 2
    joint = apply_loss(apply_loss(joint, "a", eta_vis), "b", eta_vis)
    joint = apply_beamsplitter(joint, "a", "b", params.reflectivity, params.rel_phase)
    for mode in ("a", "b"):
        if joint.power(mode) <= DARK_POWER * max(1.0, joint.power("a") + joint.power("b")):
            raise StateError(f"output {mode!r} is dark at rel_phase={params.rel_phase}")
        joint = apply_loss(joint, mode, params.detector_efficiency)
    return joint


def _var(state: GaussianState, weights: dict) -> float:
    return quadrature_variance(state, carrier_coefficients(state, weights))


def output_variances(state: GaussianState, mode_a: str = "a", mode_b: str = "b") -> VarianceSet:
    a, b = mode_a, mode_b
    return VarianceSet(
        v_a_plus=_var(state, {(a, "+"): 1.0}),
        v_a_minus=_var(state, {(a, "-"): 1.0}),
        v_b_plus=_var(state, {(b, "+"): 1.0}),
        v_b_minus=_var(state, {(b, "-"): 1.0}),
        v_sum_plus=_var(state, {(a, "+"): 1.0, (b, "+"): 1.0}) / 2.0,
        v_sum_minus=_var(state, {(a, "-"): 1.0, (b, "-"): 1.0}) / 2.0,
        v_diff_plus=_var(state, {(a, "+"): 1.0, (b, "+"): -1.0}) / 2.0,
        v_diff_minus=_var(state, {(a, "-"): 1.0, (b, "-"): -1.0}) / 2.0,
    )


def amplitude_covariance(state: GaussianState, mode_a: str = "a", mode_b: str = "b") -> np.ndarray:
    """2x2 covariance of the carrier-frame amplitude quadratures of two beams."""
    ca = carrier_coefficients(state, {(mode_a, "+"): 1.0})
    cb = carrier_coefficients(state, {(mode_b, "+"): 1.0})
    m = np.vstack([ca, cb])
    return m @ state.cov @ m.T


def difference_excess_db(vs: VarianceSet) -> float:
    """Difference photocurrent noise over a single beam's, in dB.

    Twice the optical power (3 dB) times the variance ratio
    ``v_diff_plus / v_a_plus``.
    """
    return 10.0 * math.log10(2.0 * vs.v_diff_plus / vs.v_a_plus)
