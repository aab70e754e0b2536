"""Command-line front end: ``dqcomm simulate|scaling|capacity|verify``.

Exit codes: 0 success, 2 configuration/domain error, 3 computation error.
Errors are reported as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import channels, config as cfgmod
from .channels import ChannelError
from .experiments import UNREACHABLE, run_ordered, run_scaling_experiment, scan_propagation_time, synthetic_scaling
from .lattice import LatticeError, build_effective_hamiltonian
from .propagation import PropagationError

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3

TIMESCAN_COLUMNS = ["time", "pickup", "capacity"]
SCALING_COLUMNS = ["delta", "target_p", "w", "transmitter_side", "p_achieved", "t_prop", "capacity"]
THRESHOLD_COLUMNS = ["p", "q", "r", "max_Ic", "verdict", "sigma_rank"]


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind, self.message = code, kind, message


def _num(x) -> str:
    """Shortest round-trip float text; integers stay integers."""
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in r])
    return buf.getvalue()


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json_text(obj) -> str:
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(out_dir: str | Path, files: dict[str, str]) -> list[Path]:
    """Write every file to a temporary sibling first, then rename them all."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((Path(tmp), out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def _load(args, command: str) -> dict:
    if not args.config:
        raise CLIError(EXIT_CONFIG, "config", "--config PATH is required")
    try:
        doc = cfgmod.load_document(args.config)
        return cfgmod.resolve(doc, command, out_dir=args.out, fmt=args.format)
    except cfgmod.ConfigError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from exc


def _emit(doc: dict, files: dict[str, str]) -> None:
    fmts = doc["output"]["formats"]
    chosen = {k: v for k, v in files.items() if k.rsplit(".", 1)[-1] in fmts}
    write_outputs(doc["output"]["dir"], chosen)


# --- simulate -----------------------------------------------------------------

def _simulate_one(task):
    doc, sigma, with_antennas = task
    lattice = cfgmod.build_lattice(doc, with_antennas)
    receiver = cfgmod.build_region(doc["receiver"], lattice)
    state = cfgmod.build_transmitter(doc, lattice, sigma)
    grid = cfgmod.build_time_grid(doc, receiver, lattice)
    return scan_propagation_time(lattice, state, receiver, grid, refine=doc["experiment"]["refine"],
                                 config=cfgmod.build_engine(doc))


def simulate(doc: dict, workers: int = 1) -> dict:
    """Run a resolved simulate config; returns the summary and output file texts."""
    try:
        lattice = cfgmod.build_lattice(doc)
        receiver = cfgmod.build_region(doc["receiver"], lattice)
        cfgmod.build_transmitter(doc, lattice)
        cfgmod.build_time_grid(doc, receiver, lattice)
        engine = cfgmod.build_engine(doc)
        if engine.method == "krylov" or not lattice.is_uniform:
            build_effective_hamiltonian(lattice, krylov_dim=engine.krylov_dim)
    except (LatticeError, ValueError) as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from exc

    sigmas = cfgmod.sigma_candidates(doc)
    try:
        results = run_ordered(_simulate_one, [(doc, s, True) for s in sigmas], workers)
        best_i = max(range(len(results)), key=lambda i: (results[i].p_max, -i))
        best = results[best_i]
        baseline = None
        if doc["experiment"]["compare_without_antennas"]:
            baseline = _simulate_one((doc, sigmas[best_i], False))
    except PropagationError as exc:
        raise CLIError(EXIT_COMPUTE, "compute", str(exc)) from exc

    name = doc["output"]["name"]
    rows = [(t, p, channels.amplitude_damping_capacity(min(1.0, max(0.0, p))))
            for t, p in zip(best.times, best.pickup)]
    sigma_used = sigmas[best_i]
    if sigma_used is None and doc["transmitter"]["kind"] == "wavepacket":
        sigma_used = _default_sigma(doc, lattice)
    summary = {
        "p_max": best.p_max,
        "t_prop": best.t_prop,
        "capacity_at_max": best.capacity_at_max,
        "sigma": sigma_used,
        "sigma_scan": [{"sigma": s, "p_max": r.p_max, "t_prop": r.t_prop} for s, r in zip(sigmas, results)],
        "distance": cfgmod.diagonal_distance(cfgmod.transmitter_center(doc), _receiver_center(doc, lattice, receiver)),
        "metadata": best.metadata,
        "resolved_config": doc,
    }
    if baseline is not None:
        summary["baseline_without_antennas"] = {"p_max": baseline.p_max, "t_prop": baseline.t_prop,
                                                "capacity_at_max": baseline.capacity_at_max}
        summary["antenna_gain"] = best.p_max - baseline.p_max
    files = {f"{name}_timescan.csv": _csv_text(TIMESCAN_COLUMNS, rows),
             f"{name}_summary.json": _json_text(summary)}
    return {"summary": summary, "files": files}


def _default_sigma(doc, lattice):
    crop = cfgmod.build_region(doc["transmitter"]["crop"], lattice)
    return min(crop.size) / 4 if crop.is_box else None


def _receiver_center(doc, lattice, receiver):
    if receiver.is_box:
        return receiver.center()
    coords = [lattice.site_coords(s) for s in sorted(receiver.sites)]
    return tuple(sum(c[a] for c in coords) / len(coords) for a in range(lattice.dims))


def cmd_simulate(args) -> int:
    doc = _load(args, "simulate")
    res = simulate(doc, args.workers)
    _emit(doc, res["files"])
    s = res["summary"]
    print(f"p_max={_num(s['p_max'])} t_prop={_num(s['t_prop'])} capacity={_num(s['capacity_at_max'])}")
    if "antenna_gain" in s:
        print(f"baseline_p_max={_num(s['baseline_without_antennas']['p_max'])} antenna_gain={_num(s['antenna_gain'])}")
    return EXIT_OK


# --- scaling ------------------------------------------------------------------

def scaling(doc: dict, workers: int = 1) -> dict:
    deltas, targets, cfg = cfgmod.build_scaling(doc)
    try:
        result = run_scaling_experiment(deltas, targets, cfg, workers)
    except PropagationError as exc:
        raise CLIError(EXIT_COMPUTE, "compute", str(exc)) from exc
    rows = [(r.delta, r.target_p, r.w if r.reachable else UNREACHABLE, r.transmitter_side,
             r.p_achieved, r.t_prop, r.capacity) for r in result.rows]
    summary = {
        "fitted_slopes": {_num(p): {"slope": s, "intercept": i, "residual": res}
                          for p, (s, i, res) in sorted(result.fitted_slopes.items())},
        "warnings": result.warnings,
        "transmitter_rule": {"c": cfg.c, "formula": "round_to_odd(c * delta**(1/3))"},
        "rows": [{"delta": r.delta, "target_p": r.target_p, "w": r.w, "transmitter_side": r.transmitter_side,
                  "sigma": r.sigma, "p_achieved": r.p_achieved, "t_prop": r.t_prop, "capacity": r.capacity,
                  "monotone": r.monotone} for r in result.rows],
        "resolved_config": doc,
    }
    name = doc["output"]["name"]
    files = {f"{name}_scaling.csv": _csv_text(SCALING_COLUMNS, rows),
             f"{name}_summary.json": _json_text(summary)}
    return {"summary": summary, "files": files, "result": result}


def cmd_scaling(args) -> int:
    if args.self_test:
        slope, intercept, resid = synthetic_scaling()[0.0]
        print(f"self-test slope={_num(slope)} intercept={_num(intercept)} residual={_num(resid)}")
        return EXIT_OK
    doc = _load(args, "scaling")
    res = scaling(doc, args.workers)
    _emit(doc, res["files"])
    for p, fit in res["summary"]["fitted_slopes"].items():
        print(f"target_p={p} slope={_num(fit['slope'])} intercept={_num(fit['intercept'])}")
    for w in res["summary"]["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


# --- capacity -----------------------------------------------------------------

def cmd_capacity(args) -> int:
    if args.multiparticle:
        if args.grid is None or args.grid < 1:
            raise CLIError(EXIT_CONFIG, "domain", "--grid N (N >= 1) is required with --multiparticle")
        report = channels.verify_multiparticle_threshold(channels.simplex_grid(args.grid))
        rows = [(r.p, r.q, r.r, r.max_ic, r.verdict, r.rank) for r in report["rows"]]
        text = _csv_text(THRESHOLD_COLUMNS, rows)
        summary = {"n_points": report["n_points"], "violations": report["violations"],
                   "max_coherence_gain": report["max_coherence_gain"], "grid": args.grid}
        out = args.out or "results"
        fmts = [args.format] if args.format else ["csv", "json"]
        files = {}
        if "csv" in fmts:
            files["threshold.csv"] = text
        if "json" in fmts:
            files["threshold_summary.json"] = _json_text(summary)
        write_outputs(out, files)
        print(f"points={report['n_points']} violations={report['violations']}")
        return EXIT_OK
    if args.p is None:
        raise CLIError(EXIT_CONFIG, "domain", "give --p P or --multiparticle --grid N")
    try:
        q = channels.amplitude_damping_capacity(args.p)
    except ChannelError as exc:
        raise CLIError(EXIT_CONFIG, "domain", str(exc)) from exc
    print(_num(q))
    return EXIT_OK


# --- verify -------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .oracles import run_oracle_suites

    results = run_oracle_suites()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqcomm", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--workers", type=int, default=1, help="process pool size")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--format", choices=["csv", "json"], help="emit only this format")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="pick-up probability time scan").set_defaults(fn=cmd_simulate)
    p = sub.add_parser("scaling", parents=[common], help="receiver-width scaling experiment")
    p.add_argument("--self-test", action="store_true", help="fit an exact delta^(1/3) law")
    p.set_defaults(fn=cmd_scaling)
    p = sub.add_parser("capacity", parents=[common], help="channel capacities")
    p.add_argument("--p", type=float, help="single-particle pick-up probability")
    p.add_argument("--multiparticle", action="store_true", help="scan the (p, q) simplex")
    p.add_argument("--grid", type=int, help="simplex resolution for --multiparticle")
    p.set_defaults(fn=cmd_capacity)
    sub.add_parser("verify", parents=[common], help="run the oracle suites").set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except CLIError as exc:
        print(json.dumps({"error": exc.kind, "message": exc.message}), file=sys.stderr)
        return exc.code
    except (PropagationError, FloatingPointError, MemoryError) as exc:
        print(json.dumps({"error": "compute", "message": str(exc)}), file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
