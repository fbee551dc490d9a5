"""Wiring of the modules into the end-to-end chain driven by a RunConfig."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import criteria, epr_entangler, kerr_sagnac, phase_interrogator
from .config import RunConfig, SagnacSection
from .quadrature_core import GaussianState, make_squeezed
from .trace_analysis import TraceRecord, synthesize_trace

CARRIER = 1.0


def calibrate_section(sec: SagnacSection, energy: float) -> kerr_sagnac.CalibrationResult:
    return kerr_sagnac.calibrate_kappa(sec.params(kappa=0.0, loop_loss=0.0), energy, sec.target_v_amp)


def sagnac_params(sec: SagnacSection, energy: float) -> kerr_sagnac.SagnacParams:
    """Loop parameters, calibrated first when kappa or the loss is unset."""
    if sec.calibrated:
        return sec.params()
    return calibrate_section(sec, energy).params(sec.params())


def measured_input(v_plus: float, v_minus: float | None, label: str) -> GaussianState:
    """Amplitude-squeezed bright beam; unset anti-squeezing means a pure state."""
    v_minus = 1.0 / v_plus if v_minus is None else v_minus
    return make_squeezed(v_plus, v_minus, 0.0, CARRIER, label)


def input_states(cfg: RunConfig) -> tuple[GaussianState, GaussianState]:
    if cfg.inputs.source == "measured":
        return (measured_input(cfg.inputs.v_plus_s, cfg.inputs.v_minus_s, "s"),
                measured_input(cfg.inputs.v_plus_p, cfg.inputs.v_minus_p, "p"))
    out = []
    for sec, label in ((cfg.sagnac_s, "s"), (cfg.sagnac_p, "p")):
        params = sagnac_params(sec, cfg.calibration_energy_pJ)
        out.append(kerr_sagnac.run_sagnac(params, cfg.energy_pJ, label))
    return out[0], out[1]


def entangled_state(cfg: RunConfig) -> GaussianState:
    s, p = input_states(cfg)
    return epr_entangler.entangle(s, p, cfg.entangler.params())


def variance_set(cfg: RunConfig) -> epr_entangler.VarianceSet:
    return epr_entangler.output_variances(entangled_state(cfg))


def report(vs: epr_entangler.VarianceSet) -> criteria.CriteriaReport:
    if vs.v_sum_plus is None or vs.v_diff_minus is None:
        raise ValueError("variance set lacks v_sum_plus or v_diff_minus")
    return criteria.evaluate(vs.v_sum_plus, vs.v_diff_minus, vs.v_sum_plus_err or 0.0,
                             vs.v_diff_minus_err or 0.0)


def phase_grid(cfg: RunConfig) -> np.ndarray:
    ps = cfg.phase_scan
    return phase_interrogator.default_grid(ps.steps, ps.phi_min_rad, ps.phi_max_rad)


def synth_traces(cfg: RunConfig, state: GaussianState) -> dict[str, TraceRecord]:
    """Synthetic EPR-pair, interrogation (phi = 0) and shot-noise records for ``state``.

    Channel powers follow the model's mean powers; the shot record is
    taken at the EPR-pair powers.
    """
    sy = cfg.synth
    seed = cfg.seed
    common = dict(shot_noise_level=sy.shot_noise_level, sample_rate=sy.sample_rate_hz,
                  electronic_noise=sy.electronic_noise)
    pair = synthesize_trace(epr_entangler.amplitude_covariance(state), n_samples=sy.n_samples, seed=seed,
                            power_a=state.power("a"), power_b=state.power("b"), label="synthetic-pair", **common)
    st_cd = phase_interrogator.interrogation_state(state, 0.0)
    probe = synthesize_trace(epr_entangler.amplitude_covariance(st_cd, "c", "d"), n_samples=sy.n_samples,
                             seed=seed + 1, power_a=st_cd.power("c"), power_b=st_cd.power("d"),
                             label="synthetic-interrogation", **common)
    shot = synthesize_trace(np.eye(2), n_samples=sy.shot_n_samples, seed=seed + 2,
                            power_a=state.power("a"), power_b=state.power("b"), label="synthetic-shot", **common)
    return {"pair": pair, "interrogation": probe, "shot": shot}


def with_energy(cfg: RunConfig, energy: float) -> RunConfig:
    return replace(cfg, energy_pJ=float(energy))
