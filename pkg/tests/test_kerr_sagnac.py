import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerr_epr.kerr_sagnac import (
    REGION_II_ENERGY_PJ,
    SagnacParams,
    calibrate_kappa,
    check_energy,
    first_dip_phase,
    loop_ports,
    output_variances,
    run_sagnac,
    sweep_energy,
    sweep_to_csv_rows,
)
from kerr_epr.quadrature_core import db_to_variance

V_P = db_to_variance(4.1)


@pytest.mark.parametrize("kw", [dict(reflectivity=1.2), dict(kappa=-1.0), dict(loop_loss=1.5),
                                dict(excess_phase_noise=-0.1)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        SagnacParams(**kw)


def test_zero_energy_is_shot_noise_limited():
    va, vp = output_variances(run_sagnac(SagnacParams(kappa=0.05), 0.0))
    assert va == pytest.approx(1.0, abs=1e-12)
    assert vp == pytest.approx(1.0, abs=1e-12)


def test_linear_loop_transmits_input_power():
    # at kappa = 0 the loop is a linear mirror: the output carries (1 - 2R)^2 of the input power
    r = 0.9
    st_ = run_sagnac(SagnacParams(reflectivity=r), 50.0)
    assert st_.power("out") == pytest.approx((1 - 2 * r) ** 2, rel=1e-12)


def test_negative_energy_rejected():
    with pytest.raises(ValueError):
        run_sagnac(SagnacParams(), -1.0)


@settings(max_examples=40)
@given(st.floats(0.55, 0.95), st.floats(0.0, 0.1), st.floats(0.0, 200.0))
def test_lossless_loop_is_pure(r, kappa, energy):
    st_ = loop_ports(SagnacParams(reflectivity=r, kappa=kappa), energy)
    assert np.linalg.det(st_.cov) == pytest.approx(1.0, rel=1e-8)
    assert st_.symplectic_eigenvalues().min() >= 1 - 1e-9


@settings(max_examples=40)
@given(st.floats(0.55, 0.95), st.floats(0.0, 0.1), st.floats(0.0, 200.0), st.floats(0.0, 0.9),
       st.floats(0.0, 0.2))
def test_loop_output_is_physical(r, kappa, energy, loss, eps):
    st_ = run_sagnac(SagnacParams(reflectivity=r, kappa=kappa, loop_loss=loss, excess_phase_noise=eps), energy)
    assert st_.is_physical()


def test_squeezing_appears():
    unit = SagnacParams(reflectivity=0.9, kappa=1.0)
    best = min(output_variances(run_sagnac(unit, e))[0] for e in np.linspace(0.1, 10, 100))
    assert best < 0.5


def test_balanced_loop_reflects_everything():
    st_ = run_sagnac(SagnacParams(reflectivity=0.5, kappa=1.0), 3.0)
    assert st_.power("out") < 1e-20


def test_first_dip_scales_with_kappa():
    x1, v1 = first_dip_phase(SagnacParams(reflectivity=0.9))
    x2, v2 = first_dip_phase(SagnacParams(reflectivity=0.9, kappa=7.0))
    assert x1 == pytest.approx(x2, rel=1e-9)
    assert v1 == pytest.approx(v2, rel=1e-9)


def test_calibration_hits_working_point(calibrated_p):
    cal, params = calibrated_p
    assert cal.converged
    assert cal.kappa > 0 and 0 <= cal.loop_loss < 1
    assert cal.v_amp == pytest.approx(V_P, abs=1e-6)
    va, _ = output_variances(run_sagnac(params, 110.0))
    assert va == pytest.approx(V_P, abs=1e-6)


def test_calibration_without_loss_fit_keeps_loss():
    base = SagnacParams(reflectivity=0.9, loop_loss=0.2)
    cal = calibrate_kappa(base, 110.0, V_P, fit_loss=False)
    assert cal.loop_loss == 0.2
    x, _ = first_dip_phase(base)
    assert cal.kappa == pytest.approx(x / 110.0)


def test_calibration_rejects_bad_targets():
    with pytest.raises(ValueError):
        calibrate_kappa(SagnacParams(), 110.0, 1.2)
    with pytest.raises(ValueError):
        calibrate_kappa(SagnacParams(), 0.0, 0.4)


def test_calibration_best_effort_warns(caplog):
    # a lossy loop cannot reach deeper squeezing without the loss fit
    base = SagnacParams(reflectivity=0.9, loop_loss=0.6)
    with caplog.at_level(logging.WARNING):
        cal = calibrate_kappa(base, 110.0, 0.2, fit_loss=False)
    assert not cal.converged
    assert "best effort" in caplog.text


def test_sweep_structure(calibrated_p):
    _, params = calibrated_p
    res = sweep_energy(params, 0.0, 120.0, 241)
    assert res.energy.shape == res.v_amp.shape == res.v_phase.shape == (241,)
    assert res.v_amp[0] == pytest.approx(1.0)
    e, v = res.first_minimum()
    assert abs(e - 110.0) <= 0.5
    assert np.all(res.mean_power > 0)


def test_sweep_validation():
    with pytest.raises(ValueError):
        sweep_energy(SagnacParams(), 10.0, 5.0, 10)
    with pytest.raises(ValueError):
        sweep_energy(SagnacParams(), 0.0, 5.0, 1)


def test_region_two_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert check_energy(REGION_II_ENERGY_PJ)
        assert not check_energy(131.0)
    assert "Raman" in caplog.text


def test_sweep_with_executor_matches_serial(calibrated_p):
    from concurrent.futures import ThreadPoolExecutor

    _, params = calibrated_p
    serial = sweep_energy(params, 0.0, 100.0, 51)
    with ThreadPoolExecutor(4) as ex:
        pooled = sweep_energy(params, 0.0, 100.0, 51, executor=ex)
    np.testing.assert_array_equal(serial.v_amp, pooled.v_amp)


def test_excess_noise_degrades_squeezing(calibrated_p):
    _, params = calibrated_p
    from dataclasses import replace

    noisy = replace(params, excess_phase_noise=0.05)
    assert output_variances(run_sagnac(noisy, 110.0))[1] > output_variances(run_sagnac(params, 110.0))[1]


def test_csv_rows(calibrated_p):
    _, params = calibrated_p
    rows = sweep_to_csv_rows(sweep_energy(params, 0.0, 10.0, 3))
    assert rows[0] == "energy_pJ,v_amp,v_phase,mean_power"
    assert len(rows) == 4
    assert rows[1].startswith("0,1,1,")
