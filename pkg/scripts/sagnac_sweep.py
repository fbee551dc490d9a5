"""Calibrate a Sagnac loop at the working point and sweep the pulse energy."""

import argparse

from kerr_epr import kerr_sagnac
from kerr_epr.quadrature_core import db_to_variance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reflectivity", type=float, default=0.90)
    ap.add_argument("--energy-pj", type=float, default=110.0, help="calibration energy")
    ap.add_argument("--target-db", type=float, default=4.1, help="amplitude squeezing at the calibration energy")
    ap.add_argument("--e-max-pj", type=float, default=200.0)
    ap.add_argument("--steps", type=int, default=2001)
    ap.add_argument("--csv", default=None, help="write the sweep to this file")
    args = ap.parse_args()

    base = kerr_sagnac.SagnacParams(reflectivity=args.reflectivity)
    cal = kerr_sagnac.calibrate_kappa(base, args.energy_pj, db_to_variance(args.target_db))
    params = cal.params(base)
    print(f"kappa = {params.kappa:.5f} rad/pJ  loop loss = {params.loop_loss:.4f}")

    res = kerr_sagnac.sweep_energy(params, 0.0, args.e_max_pj, args.steps)
    for a, b in res.squeezing_intervals():
        mins = [f"{res.energy[k]:.1f}" for k in res.local_minima(a, b)]
        print(f"V+ < 1 for {res.energy[a]:.1f}..{res.energy[b - 1]:.1f} pJ, local minima at {', '.join(mins)} pJ")
    e, v = res.first_minimum()
    print(f"first minimum V+ = {v:.4f} at {e:.1f} pJ")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("\n".join(kerr_sagnac.sweep_to_csv_rows(res)) + "\n")


if __name__ == "__main__":
    main()
