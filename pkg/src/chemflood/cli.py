"""Command-line front end.

    chemflood validate -m model.json
    chemflood window   -m model.json
    chemflood portrait -m model.json --v 0.71 -o nullclines.csv
    chemflood connect  -m model.json --v 0.71 -o trajectory.csv
    chemflood sweep    -m model.json -n 50 -o curve.csv
    chemflood solve    -m model.json --kappa 2 -o profile.csv
    chemflood lax      -m model.json -o baseline.csv
    chemflood simulate -m model.json --kappa 0.1 2 -o fronts.csv

``-m boomerang`` selects the built-in model. Exit codes: 0 success,
1 usage error, 2 model validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from chemflood import emit
from chemflood.errors import ChemfloodError, ModelValidationError, SolverError
from chemflood.models import boomerang_model, load_model, model_from_config, require_valid, validate_assumptions

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        sys.stderr.write(f"\nerror: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _load(source):
    if source in ("boomerang", "builtin:boomerang"):
        return boomerang_model()
    path = Path(source)
    if not path.exists() and not str(source).lstrip().startswith("{"):
        raise ChemfloodError(f"model file not found: {source}")
    return load_model(source)


def _kind(args):
    from chemflood.twave import SystemKind

    return SystemKind(args.system)


def cmd_validate(args, model):
    report = validate_assumptions(model)
    emit.emit_json(report.to_dict())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_window(args, model):
    from chemflood.twave import velocity_window

    emit.emit_json(velocity_window(model).to_dict())
    return EXIT_OK


def cmd_portrait(args, model):
    from chemflood.twave import TravellingWaveSystem, classify_portrait, nullcline_rows

    if args.v is None:
        raise ChemfloodError("portrait needs --v")
    system = TravellingWaveSystem(model, args.v, args.kappa or 1.0, _kind(args))
    report = classify_portrait(system)
    emit.emit_json(report.to_dict())
    if args.output:
        meta = emit.manifest("portrait", args.model, model.to_config(), [args.output], v=args.v,
                             system=args.system)
        emit.write_csv(args.output, meta, ["c", "s_1", "s_2"], nullcline_rows(system, args.n or 201))
    return EXIT_OK


def cmd_connect(args, model):
    from chemflood.connect import find_kappa_for_v, find_v_for_kappa

    if (args.v is None) == (args.kappa is None):
        raise ChemfloodError("connect needs exactly one of --v or --kappa")
    if args.v is not None:
        res = find_kappa_for_v(model, args.v, _kind(args))
    else:
        res = find_v_for_kappa(model, args.kappa, _kind(args))
    emit.emit_json(res.to_dict())
    if args.output and res.minus is not None:
        c, s = res.samples()
        meta = emit.manifest("connect", args.model, model.to_config(), [args.output], v=args.v,
                             kappa=args.kappa, system=args.system)
        emit.write_csv(args.output, meta, ["c", "s"], zip(c.tolist(), s.tolist()))
    return EXIT_OK


def cmd_sweep(args, model):
    from chemflood.connect import sweep_curve

    n = args.n or 50
    curve = sweep_curve(model, n, args.spacing, _kind(args), jobs=args.jobs)
    summary = {
        "points": len(curve.samples), "kappa_crit": curve.kappa_crit, "window": curve.window.to_dict(),
        "max_rh_residual": max(p.rh_residual for p in curve.samples),
        "max_integral_residual": max(abs(p.integral_residual) for p in curve.samples),
    }
    emit.emit_json(summary)
    if args.output:
        meta = emit.manifest("sweep", args.model, model.to_config(), [args.output], n=n,
                             spacing=args.spacing, system=args.system)
        emit.write_csv(args.output, meta, ["v", "kappa", "s_minus", "s_plus", "rh_residual"], curve.rows())
    return EXIT_OK


def _profile_grid(seq, n):
    lo = min(0.0, seq.speed_chain()[0]) - 0.1
    hi = max(seq.discontinuities() + [seq.speed_chain()[2]]) * 1.15 + 0.05
    return np.linspace(lo, hi, n)


def _emit_sequence(args, model, seq, name):
    from chemflood.riemann import sample_profile

    emit.emit_json(seq.to_dict())
    if args.output:
        prof = sample_profile(seq, _profile_grid(seq, args.n or 1000))
        meta = emit.manifest(name, args.model, model.to_config(), [args.output], kappa=args.kappa,
                             system=args.system)
        emit.write_csv(args.output, meta, ["xi", "s", "c"], prof.rows())
    return EXIT_OK


def cmd_solve(args, model):
    from chemflood.riemann import solve_riemann, solve_with_speed

    if args.kappa is None and args.v is None:
        raise ChemfloodError("solve needs --kappa (or --v)")
    if args.kappa is not None:
        seq = solve_riemann(model, args.kappa, _kind(args))
    else:
        seq = solve_with_speed(model, args.v, _kind(args))
    return _emit_sequence(args, model, seq, "solve")


def cmd_lax(args, model):
    from chemflood.riemann import solve_lax_baseline

    return _emit_sequence(args, model, solve_lax_baseline(model), "lax")


def _simulate_one(job):
    config_dict, kappa, kind, sim_kw = job
    from chemflood.connect import find_v_for_kappa
    from chemflood.pdesim import SimConfig, measure_front_speed, simulate

    model = model_from_config(config_dict)
    cfg = SimConfig.for_kappa(kappa, kind, **sim_kw)
    run = simulate(model, cfg)
    est = measure_front_speed(run)
    v = find_v_for_kappa(model, kappa, kind).v
    rows = [(kappa, t, x) for t, x in zip(run.times.tolist(), run.fronts.tolist())]
    return {"kappa": kappa, "measured_speed": est.speed, "stderr": est.stderr, "predicted_speed": v,
            "relative_error": (est.speed - v) / v, "steps": run.steps, "dt": run.dt}, rows


def cmd_simulate(args, model):
    kappas = args.kappa if isinstance(args.kappa, list) else [args.kappa]
    if not kappas or kappas[0] is None:
        raise ChemfloodError("simulate needs --kappa")
    sim_kw = {"cells": args.n or 4000, "eps_c": args.eps_c}
    if args.t_end is not None:
        sim_kw["t_end"] = args.t_end
    jobs = [(model.to_config(), float(k), _kind(args), sim_kw) for k in kappas]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(j) for j in jobs]
    emit.emit_json([r[0] for r in results])
    if args.output:
        meta = emit.manifest("simulate", args.model, model.to_config(), [args.output], kappa=kappas,
                             system=args.system, **sim_kw)
        emit.write_csv(args.output, meta, ["kappa", "t", "x_front"], [row for r in results for row in r[1]])
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "window": cmd_window, "portrait": cmd_portrait, "connect": cmd_connect,
    "sweep": cmd_sweep, "solve": cmd_solve, "lax": cmd_lax, "simulate": cmd_simulate,
}


def build_parser():
    parser = _Parser(prog="chemflood", description="Riemann solutions with undercompressive c-shocks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-m", "--model", required=True, help="model JSON path, inline JSON, or 'boomerang'")
        p.add_argument("--system", choices=["noneq", "diff"], default="noneq")
        p.add_argument("-o", "--output", help="CSV output path")
        p.add_argument("-n", type=int, default=None, help="point/cell count")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--force", action="store_true", help="skip assumption validation")
        p.add_argument("--v", type=float, default=None)
        if name == "simulate":
            p.add_argument("--kappa", type=float, nargs="+")
            p.add_argument("--eps-c", type=float, default=2e-3)
            p.add_argument("--t-end", type=float, default=None)
        else:
            p.add_argument("--kappa", type=float, default=None)
        if name == "sweep":
            p.add_argument("--spacing", choices=["uniform-in-v", "log-in-kappa"], default="uniform-in-v")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        model = _load(args.model)
        if args.command != "validate":
            require_valid(model, force=args.force)
        return COMMANDS[args.command](args, model)
    except ModelValidationError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except SolverError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    except (ChemfloodError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
