"""Asymmetric fibre Sagnac squeezer.

Single-frequency phenomenology: the input pulse is split by the loop
coupler into a strong and a weak counterpropagating pulse, each one gets
a linearised Kerr shear proportional to its own energy, and the two are
recombined on the same coupler. The output port (the one not leading back
to the laser) is returned.

The carrier is normalised to unit input amplitude. Only the fluctuation
algebra matters here and it depends on energy solely through the
nonlinear phase ``kappa * E``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .quadrature_core import (
    GaussianState,
    StateError,
    add_phase_noise,
    apply_beamsplitter,
    apply_kerr_shear,
    apply_loss,
    carrier_frame,
    make_coherent,
    make_vacuum,
    tensor,
)

log = logging.getLogger(__name__)

REGION_II_ENERGY_PJ = 130.0


@dataclass(frozen=True)
class SagnacParams:
    """Loop settings for one polarization.

    kappa is in rad/pJ. excess_phase_noise is the X- variance added per
    rad^2 of nonlinear phase.
    """

    reflectivity: float = 0.90
    kappa: float = 0.0
    loop_loss: float = 0.0
    excess_phase_noise: float = 0.0
    phase_bias: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity must lie in [0, 1], got {self.reflectivity}")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0.0 <= self.loop_loss < 1.0:
            raise ValueError(f"loop_loss must lie in [0, 1), got {self.loop_loss}")
        if self.excess_phase_noise < 0:
            raise ValueError("excess_phase_noise must be non-negative")


@dataclass(frozen=True)
class SweepResult:
    energy: np.ndarray
    v_amp: np.ndarray
    v_phase: np.ndarray
    mean_power: np.ndarray

    def rows(self):
        return zip(self.energy, self.v_amp, self.v_phase, self.mean_power)

    def squeezing_intervals(self) -> list[tuple[int, int]]:
        """Index ranges ``[start, stop)`` where ``v_amp < 1``."""
        below = self.v_amp < 1.0 - 1e-12
        out = []
        k = 0
        n = below.size
        while k < n:
            if below[k]:
                start = k
                while k < n and below[k]:
                    k += 1
                out.append((start, k))
            else:
                k += 1
        return out

    def local_minima(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Indices of strict interior local minima of ``v_amp`` in ``[start, stop)``."""
        v = self.v_amp
        stop = v.size if stop is None else stop
        idx = [k for k in range(max(start, 1), min(stop, v.size - 1))
               if v[k] < v[k - 1] and v[k] <= v[k + 1]]
        return np.array(idx, dtype=int)

    def first_minimum(self) -> tuple[float, float] | None:
        """Energy and depth of the deepest point of the first squeezing interval."""
        intervals = self.squeezing_intervals()
        if not intervals:
            return None
        start, stop = intervals[0]
        k = start + int(np.argmin(self.v_amp[start:stop]))
        return float(self.energy[k]), float(self.v_amp[k])


def check_energy(energy: float) -> bool:
    """Log the region-II validity warning; ``True`` when ``energy`` is in the valid range."""
    if energy > REGION_II_ENERGY_PJ:
        log.warning("energy %.1f pJ exceeds %.0f pJ (region II): stimulated Raman scattering and detector "
                    "nonlinearity dominate there and are not modelled", energy, REGION_II_ENERGY_PJ)
        return False
    return True


def run_sagnac(params: SagnacParams, energy: float, label: str = "out") -> GaussianState:
    """Output port of the loop for a pulse of ``energy`` pJ (single mode)."""
    return loop_ports(params, energy, label).reduce([label])


def loop_ports(params: SagnacParams, energy: float, label: str = "out") -> GaussianState:
    """Both coupler ports after recombination: ``("back", label)``.

    ``back`` leads towards the laser. The joint state is pure when the
    loop is lossless and noiseless; the output port alone generally is not.
    """
    if energy < 0:
        raise ValueError(f"pulse energy must be non-negative, got {energy}")
    r = params.reflectivity
    state = tensor(make_coherent(1.0, "in"), make_vacuum(1, ["vac"]))
    # "in" now carries the weak (1-R) pulse, "vac" the strong (R) pulse
    state = apply_beamsplitter(state, "in", "vac", r)
    for mode, fraction in (("in", 1.0 - r), ("vac", r)):
        phi = params.kappa * energy * fraction
        if state.power(mode) == 0.0:
            continue
        state = apply_kerr_shear(state, mode, phi)
        state = add_phase_noise(state, mode, params.excess_phase_noise * phi ** 2)
    for mode in ("in", "vac"):
        state = apply_loss(state, mode, 1.0 - params.loop_loss)
    # counterpropagating pulses return on the opposite coupler ports
    state = state.permute(("vac", "in")).relabel({"vac": "back", "in": label})
    return apply_beamsplitter(state, "back", label, r, params.phase_bias)


def output_variances(state: GaussianState, mode: str | None = None) -> tuple[float, float]:
    """Carrier-frame ``(V(X+), V(X-))`` of a single mode."""
    mode = state.modes[0] if mode is None else mode
    _, _, c = carrier_frame(state, mode)
    return float(c[0, 0]), float(c[1, 1])


def sweep_energy(params: SagnacParams, e_min: float, e_max: float, steps: int,
                 executor=None) -> SweepResult:
    if not 0.0 <= e_min < e_max:
        raise ValueError("need 0 <= e_min < e_max")
    if steps < 2:
        raise ValueError("need at least two grid points")
    grid = np.linspace(e_min, e_max, steps)
    check_energy(e_max)
    runner = executor.map if executor is not None else map
    points = list(runner(lambda e: _point(params, e), grid))
    v_amp, v_phase, power = (np.array(col) for col in zip(*points))
    return SweepResult(grid, v_amp, v_phase, power)


def _point(params: SagnacParams, energy: float) -> tuple[float, float, float]:
    st = run_sagnac(params, float(energy))
    va, vp = output_variances(st)
    return va, vp, st.power(st.modes[0])


@dataclass(frozen=True)
class CalibrationResult:
    kappa: float
    loop_loss: float
    energy: float
    v_amp: float
    converged: bool

    def params(self, base: SagnacParams) -> SagnacParams:
        return replace(base, kappa=self.kappa, loop_loss=self.loop_loss)


def first_dip_phase(params: SagnacParams, step: float = 0.02, phi_max: float = 200.0) -> tuple[float, float]:
    """Locate the optimum of the first squeezing region in units of ``kappa * E``.

    Marches outward in nonlinear phase until the first interval with
    ``v_amp < 1`` closes, then refines the deepest grid point. Returns
    ``(x, v)`` with ``x = kappa * E`` at the minimum.
    """
    unit = replace(params, kappa=1.0)

    def v_at(x: float) -> float:
        return output_variances(run_sagnac(unit, x))[0]

    best_x, best_v = None, 1.0 - 1e-12
    x = step
    while x <= phi_max:
        v = v_at(x)
        if v < best_v:
            best_x, best_v = x, v
        elif best_x is not None and v >= 1.0 - 1e-12:
            break
        x += step
    if best_x is None:
        raise StateError("no squeezing found for these loop parameters")
    opt = minimize_scalar(v_at, bounds=(best_x - step, best_x + step), method="bounded",
                          options={"xatol": 1e-10})
    return float(opt.x), float(opt.fun)


def calibrate_kappa(params: SagnacParams, target_energy: float, target_v_amp: float,
                    fit_loss: bool = True, v_tol: float = 0.03) -> CalibrationResult:
    """Fit ``kappa`` so the optimum of the first squeezing region sits at ``target_energy``.

    Without loss the dip depth is independent of kappa, so with
    ``fit_loss`` the loop loss is then set in closed form to move the
    depth onto ``target_v_amp`` (uniform loss maps ``v -> eta v + 1 - eta``
    and leaves the dip position unchanged).
    """
    if target_energy <= 0:
        raise ValueError("target energy must be positive")
    if not 0 < target_v_amp < 1:
        raise ValueError(f"target_v_amp must be a squeezed variance in (0, 1), got {target_v_amp}")
    lossless = replace(params, loop_loss=0.0) if fit_loss else params
    x_min, v_min = first_dip_phase(lossless)
    kappa = x_min / target_energy
    loss = params.loop_loss
    if fit_loss:
        if v_min <= target_v_amp:
            loss = 1.0 - (1.0 - target_v_amp) / (1.0 - v_min)
        else:
            loss = 0.0
    fitted = replace(params, kappa=kappa, loop_loss=loss)
    v_hit = output_variances(run_sagnac(fitted, target_energy))[0]
    converged = abs(v_hit - target_v_amp) <= v_tol
    if not converged:
        log.warning("calibration best effort: v_amp %.4f at %.1f pJ (target %.4f)",
                    v_hit, target_energy, target_v_amp)
    return CalibrationResult(kappa, loss, target_energy, v_hit, converged)


def sweep_to_csv_rows(result: SweepResult) -> Sequence[str]:
    lines = ["energy_pJ,v_amp,v_phase,mean_power"]
    for e, va, vp, p in result.rows():
        lines.append(f"{e:.9g},{va:.9g},{vp:.9g},{p:.9g}")
    return lines
