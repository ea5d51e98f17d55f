"""Command-line front end.

Exit codes: 0 success, 1 configuration or usage error, 2 simulation failure,
3 verification failure.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    digest,
    load_perturbation,
    load_scenario,
    perturbation_to_dict,
    scenario_to_dict,
)
from .errors import ConfigError
from .metrics import compute_metrics
from .sim import PerturbationSpec, monte_carlo, run_closed_loop, terminal_norms
from .verify import LEVELS, format_table, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_VERIFY = 0, 1, 2, 3

TRAJECTORY_HEADER = (
    "t,px,py,pz,rx,ry,rz,q1,q2,q3,wx,wy,wz,f1,f2,f3,f4,f5,f6,maxReEig,detX,kappa"
)
RUNS_HEADER = (
    "run,converged,failed,terminal_p_norm_m,terminal_q_norm,max_thrust_N,"
    "median_kappa,median_kappa_random,held_steps"
)

log = logging.getLogger("softdock")


class UsageError(Exception):
    pass


def bundled_scenario(name="nominal_docking.cfg"):
    return resources.files("softdock") / "scenarios" / name


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path, data):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    np.savetxt(path, rows, delimiter=",", fmt="%.17g", header=header, comments="")


def trajectory_rows(record):
    cols = np.column_stack(
        [record.t, record.x, record.f_a, record.max_re_eig, record.det_x, record.kappa]
    )
    assert cols.shape[1] == TRAJECTORY_HEADER.count(",") + 1
    return cols


def _overrides(args):
    out = {}
    if getattr(args, "verbatim_stiffness", False):
        out["verbatim_stiffness"] = True
    if getattr(args, "sample_period", None) is not None:
        out["sample_period"] = args.sample_period
    if getattr(args, "step", None) is not None:
        out["integrator_step"] = args.step
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    return out


def _manifest(command, cfg, resolved, seed, outputs, started):
    return {
        "command": command,
        "version": __version__,
        "config_digest": digest(resolved),
        "config": resolved,
        "seed": seed,
        "outputs": sorted(str(p.name) for p in outputs),
        "wall_time_s": time.perf_counter() - started,
    }


def cmd_run(config_path, out_dir, overrides=None, plots=False):
    """Nominal closed-loop run; writes trajectory.csv, metrics.json, manifest.json."""
    started = time.perf_counter()
    cfg = load_scenario(config_path or bundled_scenario(), overrides)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = run_closed_loop(cfg)
    outputs = [out_dir / "trajectory.csv", out_dir / "metrics.json"]
    _write_csv(outputs[0], TRAJECTORY_HEADER, trajectory_rows(record))
    _write_json(outputs[1], compute_metrics(record))
    if plots:
        outputs += _try_plots(outputs[0], out_dir)
    outputs.append(out_dir / "manifest.json")
    resolved = scenario_to_dict(cfg)
    _write_json(outputs[-1], _manifest("run", cfg, resolved, cfg.seed, outputs, started))
    if record.failed:
        print(f"simulation failed: {record.error} (partial outputs in {out_dir})", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def _try_plots(csv_path, out_dir):
    try:
        from .plots import write_plots
        return write_plots(csv_path, out_dir)
    except ImportError:
        log.warning("matplotlib is not installed; skipping plots")
        return []


def cmd_montecarlo(config_path, perturb_path, n, seed, out_dir, overrides=None, workers=1):
    """Perturbed ensemble; writes runs.csv, envelope.csv, summary.json, manifest.json."""
    started = time.perf_counter()
    if n is None or n < 1:
        raise UsageError("--runs must be at least 1")
    overrides = dict(overrides or {})
    overrides["seed"] = seed
    cfg = load_scenario(config_path or bundled_scenario(), overrides)
    perturb = load_perturbation(perturb_path) if perturb_path else PerturbationSpec()
    cfg = replace(cfg, kappa_baseline_stride=cfg.kappa_baseline_stride or 20)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ens = monte_carlo(cfg, perturb, n, seed, workers=workers)
    s = ens.summary

    rows = []
    for i, r in enumerate(ens.records):
        p_end, q_end = terminal_norms(r)
        f = r.f_a[np.all(np.isfinite(r.f_a), axis=1)]
        rows.append([
            i,
            int(not r.failed and p_end < s["p_tol"] and q_end < s["q_tol"]),
            int(r.failed),
            p_end,
            q_end,
            np.max(np.abs(f)) if f.size else np.nan,
            np.nanmedian(r.sample_kappa),
            np.median(r.baseline_kappa) if r.baseline_kappa.size else np.nan,
            r.held_steps,
        ])
    outputs = [out_dir / "runs.csv", out_dir / "envelope.csv", out_dir / "summary.json"]
    _write_csv(outputs[0], RUNS_HEADER, np.array(rows, dtype=float))
    if "envelope_t" in s:
        env = [s["envelope_t"]]
        env += [s["p_envelope"][k] for k in sorted(s["p_envelope"], key=lambda k: int(k[1:]))]
        env += [s["q_envelope"][k] for k in sorted(s["q_envelope"], key=lambda k: int(k[1:]))]
        head = "t," + ",".join(f"p_norm_{k}" for k in sorted(s["p_envelope"], key=lambda k: int(k[1:])))
        head += "," + ",".join(f"q_norm_{k}" for k in sorted(s["q_envelope"], key=lambda k: int(k[1:])))
        _write_csv(outputs[1], head, np.column_stack(env))
    else:
        outputs[1].write_text("t\n")
    summary = {k: v for k, v in s.items() if k not in ("envelope_t", "p_envelope", "q_envelope")}
    summary["errors"] = {i: r.error for i, r in enumerate(ens.records) if r.failed}
    _write_json(outputs[2], summary)
    outputs.append(out_dir / "manifest.json")
    resolved = scenario_to_dict(cfg)
    resolved.update(perturbation_to_dict(perturb))
    resolved["montecarlo.runs"] = n
    _write_json(outputs[-1], _manifest("montecarlo", cfg, resolved, seed, outputs, started))
    print(f"{s['converged_count']}/{n} runs converged, {s['failed_count']} failed")
    return EXIT_OK if s["failed_count"] == 0 else EXIT_SIM


def cmd_verify(level):
    results = run_suite(level)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="softdock", description="Spacecraft soft-docking simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="scenario file (default: bundled nominal scenario)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed (overrides sim.seed)")
        p.add_argument("--verbatim-stiffness", action="store_true",
                       help="use mu/r^3 - gamma_dot in the stiffness diagonal")
        p.add_argument("--sample-period", type=float, help="controller sample period, s")
        p.add_argument("--step", type=float, help="integrator step, s")

    run = sub.add_parser("run", help="nominal closed-loop simulation")
    common(run)
    run.add_argument("--plots", action="store_true", help="also write SVG figures")

    mc = sub.add_parser("montecarlo", help="perturbed Monte Carlo ensemble")
    common(mc)
    mc.add_argument("--perturb", type=Path, help="perturbation file (default bounds if omitted)")
    mc.add_argument("--runs", type=int, required=True, help="number of runs (>= 1)")
    mc.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")

    ver = sub.add_parser("verify", help="run invariant self-checks")
    ver.add_argument("--level", choices=LEVELS, default="quick")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.command == "run":
            return cmd_run(args.config, args.out, _overrides(args), plots=args.plots)
        if args.command == "montecarlo":
            seed = args.seed if args.seed is not None else 0
            return cmd_montecarlo(
                args.config, args.perturb, args.runs, seed, args.out,
                _overrides(args), workers=max(1, args.workers),
            )
        return cmd_verify(args.level)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
