import logging

import numpy as np
import pytest

from kerr_epr.trace_analysis import (
    AnalysisConfig,
    TraceError,
    TraceRecord,
    analyze,
    band_variance,
    load_trace,
    save_trace,
    subtract_electronic_noise,
    synthesize_trace,
    target_from_sum_diff,
    trace_to_text,
)

CFG = AnalysisConfig()
FS = 21e6


def band_fraction(cfg=CFG, fs=FS):
    """Fraction of a white spectrum's power inside the analysis bins."""
    nperseg = cfg.segment_length(fs)
    freqs = np.arange(nperseg // 2 + 1) * fs / nperseg
    return np.sum(np.abs(freqs - cfg.center_freq) <= cfg.rbw / 2) * (fs / nperseg) / (fs / 2)


def white(n, seed, scale=1.0):
    return synthesize_trace(scale * np.eye(2), n_samples=n, seed=seed)


def test_trace_text_roundtrip(tmp_path):
    tr = synthesize_trace(np.eye(2), n_samples=2048, seed=4, power_a=0.9, power_b=1.1, label="synthetic")
    path = tmp_path / "t.txt"
    save_trace(tr, path)
    back = load_trace(path)
    assert back.sample_rate == FS and back.seed == 4 and back.label == "synthetic"
    assert back.power_a == 0.9 and back.power_b == 1.1
    np.testing.assert_allclose(back.ch_a, tr.ch_a, rtol=1e-10)
    assert len(back) == 2048


def test_synthesis_is_deterministic(tmp_path):
    a = trace_to_text(synthesize_trace(np.eye(2), n_samples=4096, seed=9))
    b = trace_to_text(synthesize_trace(np.eye(2), n_samples=4096, seed=9))
    c = trace_to_text(synthesize_trace(np.eye(2), n_samples=4096, seed=10))
    assert a == b and a != c


def _write(tmp_path, header, rows):
    p = tmp_path / "bad.txt"
    p.write_text("\n".join(header + rows) + "\n")
    return p


def test_missing_column_named(tmp_path):
    p = _write(tmp_path, ["# sample_rate_hz=21000000", "t_index,ch_a"], ["0,1.0", "1,2.0"])
    with pytest.raises(TraceError, match="ch_b"):
        load_trace(p)


@pytest.mark.parametrize("rows", [["0,1.0,2.0", "1,1.0"], ["0,nan,1.0", "1,1.0,1.0"]])
def test_ragged_or_nan_rejected(tmp_path, rows):
    p = _write(tmp_path, ["# sample_rate_hz=21000000", "t_index,ch_a,ch_b"], rows)
    with pytest.raises(TraceError):
        load_trace(p)


def test_missing_sample_rate(tmp_path):
    p = _write(tmp_path, ["# label=x", "t_index,ch_a,ch_b"], ["0,1,1"])
    with pytest.raises(TraceError):
        load_trace(p)


def test_nyquist_violation():
    tr = synthesize_trace(np.eye(2), n_samples=8192, seed=1, sample_rate=15e6)
    with pytest.raises(TraceError, match="Nyquist"):
        band_variance(tr, "sum", CFG)


def test_trace_too_short():
    with pytest.raises(TraceError, match="shorter"):
        band_variance(white(100, 1), "sum", CFG)


def test_config_validation():
    with pytest.raises(TraceError):
        AnalysisConfig(rbw=20e6)
    with pytest.raises(TraceError):
        AnalysisConfig(segment_overlap=1.0)


def test_default_segment_length():
    assert CFG.segment_length(FS) == 1024


def test_sinusoid_in_band_scales_quadratically():
    n = 1 << 16
    t = np.arange(n) / FS
    est = []
    for amp in (1.0, 2.0):
        x = amp * np.sin(2 * np.pi * 10e6 * t)
        est.append(band_variance(TraceRecord(FS, x, np.zeros(n)), "single-A", CFG).variance)
    assert est[0] == pytest.approx(0.5, rel=0.02)  # all of the sine power sits in the band
    assert est[1] / est[0] == pytest.approx(4.0, rel=1e-9)


def test_white_noise_band_fraction():
    est = band_variance(white(1_000_000, 2), "single-A", CFG)
    assert abs(est.variance / band_fraction() - 1) < 3 * est.statistical_err


def test_common_mode_rejection():
    n = 1 << 16
    x = np.random.default_rng(3).standard_normal(n)
    tr = TraceRecord(FS, x, x.copy())
    assert band_variance(tr, "difference", CFG).variance < 1e-6 * band_variance(tr, "single-A", CFG).variance


def test_unknown_combo():
    with pytest.raises(TraceError):
        white(4096, 1).combo("product")


def test_subtract_electronic_noise_examples(caplog):
    assert subtract_electronic_noise(0.52, 0.10, 1.10) == pytest.approx(0.42)
    assert subtract_electronic_noise(1.10, 0.10, 1.10) == pytest.approx(1.0)
    with caplog.at_level(logging.WARNING):
        assert subtract_electronic_noise(0.05, 0.10, 1.10, floor=1e-4) == 1e-4
    assert "clamped" in caplog.text
    with pytest.raises(TraceError):
        subtract_electronic_noise(0.5, 1.0, 1.0)


def test_shot_self_analysis_is_unity():
    shot = white(1_000_000, 11)
    vs = analyze(shot, shot, CFG)
    for key in ("v_a_plus", "v_b_plus", "v_sum_plus", "v_diff_plus"):
        assert getattr(vs, key) == pytest.approx(1.0, abs=1e-12)


def test_shot_noise_limited_signal_is_unity():
    shot = white(1_000_000, 11)
    vs = analyze(white(1_000_000, 12), shot, CFG)
    for key in ("v_a_plus", "v_b_plus", "v_sum_plus", "v_diff_plus"):
        assert abs(getattr(vs, key) - 1.0) <= 3 * getattr(vs, key + "_err")


def test_headline_loopback():
    shot = white(4_000_000, 101)
    sig = synthesize_trace(target_from_sum_diff(0.40, 1.6), n_samples=1_000_000, seed=100)
    vs = analyze(sig, shot, CFG)
    assert abs(vs.v_sum_plus - 0.40) <= 0.03
    assert abs(vs.v_diff_plus - 1.6) <= 0.03
    assert vs.v_sum_minus is None and vs.v_diff_minus is None


def test_loopback_within_predicted_error():
    rng = np.random.default_rng(2024)
    shot = white(1_000_000, 5000)
    for k in range(20):
        v_sum, v_diff = rng.uniform(0.2, 2.0, size=2)
        vs = analyze(synthesize_trace(target_from_sum_diff(v_sum, v_diff), n_samples=1_000_000, seed=k),
                     shot, CFG)
        assert abs(vs.v_sum_plus - v_sum) <= 3 * vs.v_sum_plus_err
        assert abs(vs.v_diff_plus - v_diff) <= 3 * vs.v_diff_plus_err


def test_electronic_noise_is_removed():
    el = 0.3
    shot = synthesize_trace(np.eye(2), n_samples=1_000_000, seed=21, electronic_noise=el)
    sig = synthesize_trace(target_from_sum_diff(0.5, 1.5), n_samples=1_000_000, seed=22, electronic_noise=el)
    cfg = AnalysisConfig(electronic_noise_level=el * band_fraction())
    assert analyze(sig, shot, cfg).v_sum_plus == pytest.approx(0.5, abs=0.03)
    # leaving the dark noise in biases the result toward shot noise
    assert analyze(sig, shot, CFG).v_sum_plus > 0.55


def test_dark_trace_replaces_level():
    el = 0.3
    dark = synthesize_trace(np.zeros((2, 2)), n_samples=1_000_000, seed=31, electronic_noise=el)
    shot = synthesize_trace(np.eye(2), n_samples=1_000_000, seed=32, electronic_noise=el)
    sig = synthesize_trace(target_from_sum_diff(0.5, 1.5), n_samples=1_000_000, seed=33, electronic_noise=el)
    assert analyze(sig, shot, AnalysisConfig(dark=dark)).v_sum_plus == pytest.approx(0.5, abs=0.03)


def test_power_mismatch_rescales(caplog):
    shot = white(1_000_000, 41)
    # twice the optical power doubles the shot-noise level
    sig = synthesize_trace(2.0 * target_from_sum_diff(0.5, 1.5), n_samples=1_000_000, seed=42,
                           power_a=2.0, power_b=2.0)
    with caplog.at_level(logging.WARNING):
        vs = analyze(sig, shot, CFG)
    assert "rescaling" in caplog.text
    assert vs.v_sum_plus == pytest.approx(0.5, abs=0.03)


def test_sample_rate_mismatch():
    a = synthesize_trace(np.eye(2), n_samples=8192, seed=1)
    b = synthesize_trace(np.eye(2), n_samples=8192, seed=1, sample_rate=25e6)
    with pytest.raises(TraceError, match="sample rates"):
        analyze(a, b, CFG)


def test_invalid_target():
    with pytest.raises(TraceError):
        synthesize_trace(np.array([[1.0, 2.0], [2.0, 1.0]]), n_samples=10)
    with pytest.raises(TraceError):
        synthesize_trace(np.array([[1.0, 0.5], [0.0, 1.0]]), n_samples=10)


def test_estimator_consistency():
    """Doubling the record shrinks the empirical spread by sqrt(2)."""
    n = 1 << 17
    spread = []
    for size in (n, 2 * n):
        vals = [band_variance(white(size, 1000 + s), "single-A", CFG).variance for s in range(50)]
        spread.append(np.std(vals, ddof=1) / np.mean(vals))
    assert spread[0] / spread[1] == pytest.approx(np.sqrt(2), rel=0.2)
    e1 = band_variance(white(n, 1), "single-A", CFG).statistical_err
    e2 = band_variance(white(2 * n, 1), "single-A", CFG).statistical_err
    assert e1 / e2 == pytest.approx(np.sqrt(2), rel=0.2)


def test_predicted_error_matches_spread():
    vals = [band_variance(white(1 << 17, 2000 + s), "single-A", CFG) for s in range(50)]
    v = np.array([e.variance for e in vals])
    assert np.std(v, ddof=1) / v.mean() == pytest.approx(vals[0].statistical_err, rel=0.3)
