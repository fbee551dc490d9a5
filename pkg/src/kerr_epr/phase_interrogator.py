"""Indirect read-out of the phase-difference correlation.

The EPR beams are mixed on a second balanced splitter. At the
equal-power phase the carrier-frame amplitude of each output is
``(dXa+ + dXb+ + dXa- - dXb-) / 2``, so its variance combines the
amplitude-sum and phase-difference variances plus cross terms that
vanish for a state symmetric under ``a <-> b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .quadrature_core import (
    GaussianState,
    StateError,
    apply_beamsplitter,
    apply_loss,
    apply_phase_shift,
    carrier_coefficients,
    quadrature_covariance,
    quadrature_variance,
)


@dataclass(frozen=True)
class InterrogationPoint:
    phi: float
    v_c_amp: float
    v_d_amp: float
    power_c: float
    power_d: float


def interrogation_state(state: GaussianState, phi: float, reflectivity: float = 0.5,
                        visibility: float = 1.0, mode_a: str = "a", mode_b: str = "b") -> GaussianState:
    """Two-mode output ``(c, d)`` after a phase ``phi`` on ``b`` and the interrogating splitter."""
    st = apply_phase_shift(state, mode_b, phi)
    if visibility < 1.0:
        st = apply_loss(apply_loss(st, mode_a, visibility ** 2), mode_b, visibility ** 2)
    st = apply_beamsplitter(st, mode_a, mode_b, reflectivity).relabel({mode_a: "c", mode_b: "d"})
    total = st.power("c") + st.power("d")
    for mode in ("c", "d"):
        if st.power(mode) <= 1e-12 * max(total, 1.0):
            raise StateError(f"output {mode!r} is dark at phi={phi:.6g}")
    return st


def interrogate(state: GaussianState, phi: float, reflectivity: float = 0.5,
                visibility: float = 1.0, mode_a: str = "a", mode_b: str = "b") -> InterrogationPoint:
    """Mix ``a`` and ``b`` (after a phase ``phi`` on ``b``) and read both output amplitudes."""
    st = interrogation_state(state, phi, reflectivity, visibility, mode_a, mode_b)
    v_c = quadrature_variance(st, carrier_coefficients(st, {("c", "+"): 1.0}))
    v_d = quadrature_variance(st, carrier_coefficients(st, {("d", "+"): 1.0}))
    return InterrogationPoint(float(phi), v_c, v_d, st.power("c"), st.power("d"))


def scan_phase(state: GaussianState, phi_grid: Iterable[float], **kw) -> list[InterrogationPoint]:
    grid = list(phi_grid)
    if not grid:
        raise ValueError("phase grid is empty")
    return [interrogate(state, float(phi), **kw) for phi in grid]


def default_grid(steps: int = 181, phi_min: float = -np.pi / 2, phi_max: float = np.pi / 2) -> np.ndarray:
    """Open grid on ``(phi_min, phi_max)``; the end points are excluded (dark ports at +-pi/2)."""
    return np.linspace(phi_min, phi_max, steps + 2)[1:-1]


def infer_phase_diff_variance(v_c_amp_at_zero: float, v_sum_plus: float) -> float:
    """Two-beam-normalised V_diff- from the output amplitude at phi = 0.

    Uses ``V(Xa- - Xb-) = 4 V(Xc+) - V(Xa+ + Xb+)``.
    """
    if v_c_amp_at_zero <= 0 or v_sum_plus <= 0:
        raise ValueError("variances must be positive")
    out = 2.0 * v_c_amp_at_zero - v_sum_plus
    if out <= 0:
        raise ValueError(f"inferred V_diff- = {out:.6g} <= 0: inputs are inconsistent")
    return out


def cross_term_sum(state: GaussianState, mode_a: str = "a", mode_b: str = "b") -> float:
    """Bias of :func:`infer_phase_diff_variance` caused by a/b asymmetry.

    ``(<dXa+ dXa-> - <dXb+ dXb->) + (<dXb+ dXa-> - <dXa+ dXb->)`` in
    carrier-frame quadratures; zero for exchange-symmetric states.
    """
    q = {(m, s): carrier_coefficients(state, {(m, s): 1.0}) for m in (mode_a, mode_b) for s in "+-"}

    def cv(x, y):
        return quadrature_covariance(state, q[x], q[y])

    a, b = mode_a, mode_b
    return (cv((a, "+"), (a, "-")) - cv((b, "+"), (b, "-"))
            + cv((b, "+"), (a, "-")) - cv((a, "+"), (b, "-")))


def direct_phase_diff_variance(state: GaussianState, mode_a: str = "a", mode_b: str = "b") -> float:
    """V(Xa- - Xb-) / 2 straight from the covariance matrix."""
    c = carrier_coefficients(state, {(mode_a, "-"): 1.0, (mode_b, "-"): -1.0})
    return quadrature_variance(state, c) / 2.0


def curve_csv_rows(points: Sequence[InterrogationPoint]) -> list[str]:
    lines = ["phi_rad,v_c_amp,v_d_amp,power_c,power_d"]
    for p in points:
        lines.append(f"{p.phi:.9g},{p.v_c_amp:.9g},{p.v_d_amp:.9g},{p.power_c:.9g},{p.power_d:.9g}")
    return lines
