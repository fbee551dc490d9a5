"""Synthesize photocurrent traces for known variances and recover them."""

import argparse

import numpy as np

from kerr_epr.trace_analysis import AnalysisConfig, analyze, synthesize_trace, target_from_sum_diff


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--targets", type=int, default=10)
    ap.add_argument("--n-samples", type=int, default=1_000_000)
    ap.add_argument("--shot-samples", type=int, default=4_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = AnalysisConfig()
    rng = np.random.default_rng(args.seed)
    print(f"{'v_sum':>8}{'got':>8}{'err':>8}{'v_diff':>8}{'got':>8}{'err':>8}")
    for k in range(args.targets):
        v_sum, v_diff = rng.uniform(0.2, 1.0, size=2)
        sig = synthesize_trace(target_from_sum_diff(v_sum, v_diff), n_samples=args.n_samples, seed=args.seed + k)
        shot = synthesize_trace(np.eye(2), n_samples=args.shot_samples, seed=args.seed + 10_000 + k)
        vs = analyze(sig, shot, cfg)
        print(f"{v_sum:8.4f}{vs.v_sum_plus:8.4f}{vs.v_sum_plus_err:8.4f}"
              f"{v_diff:8.4f}{vs.v_diff_plus:8.4f}{vs.v_diff_plus_err:8.4f}")


if __name__ == "__main__":
    main()
