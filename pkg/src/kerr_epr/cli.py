"""Command-line front end.

Every artifact carries the resolved configuration and its sha256: JSON
outputs under ``config``/``config_sha256``, CSV outputs as ``#`` comment
lines ahead of the header. Exit status is 0 on success, 1 for invalid
input and 2 for model or runtime failures; errors are reported as JSON on
stderr. ``KERR_EPR_LOG_LEVEL`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import kerr_sagnac, phase_interrogator, pipeline
from .config import ConfigError, RunConfig, apply_overrides, load_config, parse_assignment
from .epr_entangler import VarianceSet
from .quadrature_core import StateError
from .trace_analysis import TraceError, analyze, load_trace, save_trace

log = logging.getLogger("kerr_epr")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
MAX_WORKERS = 8


class UsageError(ValueError):
    """Missing or inconsistent command inputs."""


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="RNG seed for synthetic data")
    common.add_argument("--set", dest="assignments", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a single config entry (repeatable)")
    common.add_argument("--workers", type=int, default=1, help=f"worker threads for grids (max {MAX_WORKERS})")

    p = argparse.ArgumentParser(prog="kerr-epr",
                                description="Gaussian model of Kerr-squeezed EPR beams and their analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", parents=[common], help="squeezing versus pulse energy, one CSV per polarisation")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--e-min-pj", type=float)
    sp.add_argument("--e-max-pj", type=float)

    sp = sub.add_parser("calibrate", parents=[common], help="fit kappa and loop loss to the working point")
    sp.add_argument("--energy-pj", type=float, help="calibration energy")

    sp = sub.add_parser("entangle", parents=[common], help="variance set of the EPR beams")
    sp.add_argument("--energy-pj", type=float)

    sp = sub.add_parser("scan-phase", parents=[common], help="interrogator output versus phase")
    sp.add_argument("--energy-pj", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--phi-min", type=float)
    sp.add_argument("--phi-max", type=float)

    sp = sub.add_parser("criteria", parents=[common], help="entanglement, EPR and fidelity report")
    sp.add_argument("--energy-pj", type=float)
    sp.add_argument("--variances", type=Path, help="VarianceSet JSON (default: run entangle)")

    sp = sub.add_parser("synthesize", parents=[common], help="write synthetic trace files of the modelled state")
    sp.add_argument("--energy-pj", type=float)

    sp = sub.add_parser("analyze", parents=[common], help="variance set from recorded traces")
    sp.add_argument("--trace-a", type=Path, required=True, help="two-channel record of the EPR beams a, b")
    sp.add_argument("--trace-b", type=Path,
                    help="two-channel record of the interrogator outputs c, d at phi = 0 (adds v_diff_minus)")
    sp.add_argument("--trace-shot", type=Path, required=True, help="shot-noise calibration record")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    for text in args.assignments:
        cfg = apply_overrides(cfg, parse_assignment(text))
    flags: dict = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    energy = getattr(args, "energy_pj", None)
    if energy is not None:
        key = "calibration_energy_pJ" if args.command == "calibrate" else "energy_pJ"
        flags[key] = energy
    if args.command == "sweep":
        sweep = {k: v for k, v in (("steps", args.steps), ("e_min_pJ", args.e_min_pj), ("e_max_pJ", args.e_max_pj))
                 if v is not None}
        if sweep:
            flags["sweep"] = sweep
    if args.command == "scan-phase":
        scan = {k: v for k, v in (("steps", args.steps), ("phi_min_rad", args.phi_min), ("phi_max_rad", args.phi_max))
                if v is not None}
        if scan:
            flags["phase_scan"] = scan
    return apply_overrides(cfg, flags) if flags else cfg


def _envelope(cfg: RunConfig, result: dict, **extra) -> dict:
    return {"config_sha256": cfg.digest(), "config": cfg.to_dict(), **extra, "result": result}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("wrote %s", path)


def _csv_preamble(cfg: RunConfig) -> list[str]:
    return [f"# config_sha256={cfg.digest()}",
            f"# config={json.dumps(cfg.to_dict(), sort_keys=True, separators=(',', ':'))}"]


def _write_csv(path: Path, cfg: RunConfig, rows: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(_csv_preamble(cfg) + list(rows)) + "\n", encoding="utf-8")
    log.info("wrote %s", path)


def _executor(args):
    n = max(1, min(MAX_WORKERS, args.workers))
    return ThreadPoolExecutor(max_workers=n) if n > 1 else None


def cmd_sweep(cfg: RunConfig, args) -> dict:
    ex = _executor(args)
    written = {}
    try:
        for sec, tag in ((cfg.sagnac_s, "s"), (cfg.sagnac_p, "p")):
            params = pipeline.sagnac_params(sec, cfg.calibration_energy_pJ)
            res = kerr_sagnac.sweep_energy(params, cfg.sweep.e_min_pJ, cfg.sweep.e_max_pJ, cfg.sweep.steps, ex)
            path = args.out / f"sweep_{tag}.csv"
            _write_csv(path, cfg, kerr_sagnac.sweep_to_csv_rows(res))
            written[tag] = str(path)
    finally:
        if ex is not None:
            ex.shutdown()
    return written


def cmd_calibrate(cfg: RunConfig, args) -> dict:
    fragment = {}
    result = {}
    for sec, key in ((cfg.sagnac_s, "sagnac_s"), (cfg.sagnac_p, "sagnac_p")):
        cal = pipeline.calibrate_section(sec, cfg.calibration_energy_pJ)
        fragment[key] = {"kappa_rad_per_pJ": cal.kappa, "loop_loss": cal.loop_loss}
        result[key] = {"kappa_rad_per_pJ": cal.kappa, "loop_loss": cal.loop_loss, "energy_pJ": cal.energy,
                       "v_amp": cal.v_amp, "converged": cal.converged}
    _write_json(args.out / "calibration.json", _envelope(cfg, result, fragment=fragment))
    # the fragment doubles as a config file for later runs
    (args.out / "calibration_fragment.json").write_text(json.dumps(fragment, indent=2, sort_keys=True) + "\n")
    print(json.dumps(fragment, sort_keys=True))
    return result


def cmd_entangle(cfg: RunConfig, args) -> dict:
    vs = pipeline.variance_set(cfg)
    _write_json(args.out / "variances.json", _envelope(cfg, vs.to_dict(), synthetic=False))
    print(vs.to_json(sort_keys=True))
    return vs.to_dict()


def cmd_scan_phase(cfg: RunConfig, args) -> dict:
    state = pipeline.entangled_state(cfg)
    grid = pipeline.phase_grid(cfg)
    ex = _executor(args)
    try:
        if ex is None:
            points = phase_interrogator.scan_phase(state, grid)
        else:
            points = list(ex.map(lambda phi: phase_interrogator.interrogate(state, float(phi)), grid))
    finally:
        if ex is not None:
            ex.shutdown()
    path = args.out / "phase_scan.csv"
    _write_csv(path, cfg, phase_interrogator.curve_csv_rows(points))
    best = min(points, key=lambda p: p.v_c_amp)
    return {"path": str(path), "phi_min_v_c": best.phi, "v_c_min": best.v_c_amp}


def _load_variances(path: Path) -> VarianceSet:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read variances from {path}: {exc}") from None
    if isinstance(data, dict) and "result" in data and "config_sha256" in data:
        data = data["result"]
    try:
        return VarianceSet.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_criteria(cfg: RunConfig, args) -> dict:
    vs = _load_variances(args.variances) if args.variances else pipeline.variance_set(cfg)
    rep = pipeline.report(vs)
    _write_json(args.out / "criteria.json", _envelope(cfg, rep.to_dict()))
    table = rep.table()
    (args.out / "criteria.txt").write_text(f"# config_sha256={cfg.digest()}\n{table}\n", encoding="utf-8")
    print(table)
    return rep.to_dict()


def cmd_synthesize(cfg: RunConfig, args) -> dict:
    traces = pipeline.synth_traces(cfg, pipeline.entangled_state(cfg))
    paths = {}
    for name, tr in traces.items():
        path = args.out / f"trace_{name}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_trace(tr, path)
        paths[name] = path.name
    _write_json(args.out / "synthesize.json", _envelope(cfg, paths, synthetic=True))
    return paths


def cmd_analyze(cfg: RunConfig, args) -> dict:
    pair = load_trace(args.trace_a)
    shot = load_trace(args.trace_shot)
    acfg = cfg.analysis.config()
    vs = analyze(pair, shot, acfg)
    synthetic = any(t.label.startswith("synthetic") for t in (pair, shot))
    if args.trace_b is not None:
        probe = load_trace(args.trace_b)
        synthetic = synthetic or probe.label.startswith("synthetic")
        v_c = analyze(probe, shot, acfg)
        v_diff = phase_interrogator.infer_phase_diff_variance(v_c.v_a_plus, vs.v_sum_plus)
        err = math.hypot(2.0 * (v_c.v_a_plus_err or 0.0), vs.v_sum_plus_err or 0.0)
        vs = replace(vs, v_diff_minus=v_diff, v_diff_minus_err=err)
    _write_json(args.out / "analysis.json", _envelope(cfg, vs.to_dict(), synthetic=synthetic))
    print(vs.to_json(sort_keys=True))
    return vs.to_dict()


COMMANDS = {
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "entangle": cmd_entangle,
    "scan-phase": cmd_scan_phase,
    "criteria": cmd_criteria,
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
}


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def _setup_logging() -> None:
    level = os.environ.get("KERR_EPR_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = resolve_config(args)
        if args.command in ("entangle", "scan-phase", "criteria", "synthesize"):
            kerr_sagnac.check_energy(cfg.energy_pJ)
        COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError, TraceError, OSError) as exc:
        return _error("validation", exc, EXIT_INVALID)
    except (StateError, ArithmeticError, ValueError, RuntimeError) as exc:
        return _error("runtime", exc, EXIT_RUNTIME)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
