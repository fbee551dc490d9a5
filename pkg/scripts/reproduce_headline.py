"""Headline working point: inputs, EPR variances, criteria and the phase scan minimum."""

import argparse

from kerr_epr import pipeline
from kerr_epr.config import load_config
from kerr_epr.epr_entangler import difference_excess_db
from kerr_epr.phase_interrogator import interrogate, scan_phase


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="YAML/JSON run configuration")
    args = ap.parse_args()

    cfg = load_config(args.config)
    state = pipeline.entangled_state(cfg)
    vs = pipeline.variance_set(cfg)
    print(f"V_a+ = {vs.v_a_plus:.4f}  V_b+ = {vs.v_b_plus:.4f}")
    print(f"V_sum+ = {vs.v_sum_plus:.4f}  V_diff- = {vs.v_diff_minus:.4f}  "
          f"V_diff+ excess = {difference_excess_db(vs):.2f} dB")
    print(pipeline.report(vs).table())

    pts = scan_phase(state, pipeline.phase_grid(cfg))
    best = min(pts, key=lambda p: p.v_c_amp)
    zero = interrogate(state, 0.0)
    print(f"phase scan minimum {best.v_c_amp:.4f} at phi = {best.phi:.4f} rad "
          f"(P_c = {zero.power_c:.4f}, P_d = {zero.power_d:.4f} at phi = 0)")


if __name__ == "__main__":
    main()
