"""Command-line front end.

Commands: run, perturb, converge, compare-solvers, validate, relay-trace.
Exit codes for ``run``: 0 completed, 2 transversality lost, 3 topology
broken, 1 any error.  Other commands: 0 on success, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .errors import RdhystError
from .experiments import compare_solvers, convergence_study, \
    perturbation_study, run_scenario
from .freeboundary import estimate_holder_quotient, validate_dissipativity
from .model import builtin_bacteria_model, dump_model, load_model, \
    validate_model
from .relay import relay_trace
from .scenario import load_scenario
from .solver import STATUS_COMPLETED, STATUS_TOPOLOGY_BROKEN, \
    STATUS_TRANSVERSALITY_LOST

_EXIT_BY_STATUS = {
    STATUS_COMPLETED: 0,
    STATUS_TRANSVERSALITY_LOST: 2,
    STATUS_TOPOLOGY_BROKEN: 3,
    "error": 1,
}


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.floating, float)):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_sanitize(payload), indent=2, sort_keys=True)
                    + "\n", encoding="utf-8")


def _timeseries_rows(report):
    ncombo = report.n_combos
    header = ["t", "b", "margin", "E_m"] + \
        [f"drift{i + 1}" for i in range(ncombo)] + \
        ["status", "a", "sup_u", "sup_v", "box_violation"]
    rows = []
    last = len(report.rows) - 1
    for idx, row in enumerate(report.rows):
        status = report.status if idx == last else "ok"
        out = [row["t"], row["b"], row["margin"], row["em"]]
        out += [row.get(f"drift{i + 1}", math.nan) for i in range(ncombo)]
        out += [status, row.get("a", math.nan), row["sup_u"], row["sup_v"],
                row.get("box_violation", math.nan)]
        rows.append(out)
    return header, rows


def _write_snapshot(path: Path, model, snap_state):
    grid = snap_state.grid
    header = ["x"] + [f"u{i + 1}" for i in range(model.k)] + \
        [f"v{i + 1}" for i in range(model.l)] + ["xi"] + \
        [f"w{i + 1}" for i in range(model.m)]
    rows = []
    for i, xv in enumerate(grid.x):
        row = [xv]
        row += list(snap_state.u.values[i])
        row += list(snap_state.v.values[i])
        row.append(int(snap_state.xi[i]))
        row += list(snap_state.w.values[i])
        rows.append(row)
    _write_csv(path, header, rows)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, message: str):
    if not args.quiet:
        print(message)


# --------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _outdir(args)
    state, report, snapshots = run_scenario(scenario)
    header, rows = _timeseries_rows(report)
    ts_path = out / "timeseries.csv"
    _write_csv(ts_path, header, rows)
    snap_files = []
    for ts, snap in snapshots:
        path = out / f"snapshot_t{ts:g}.csv"
        _write_snapshot(path, scenario.model, snap)
        snap_files.append(str(path))
    margin_col = report.column("margin")
    payload = {
        "scenario": scenario.name,
        "status": report.status,
        "exit_code": _EXIT_BY_STATUS[report.status],
        "t_stop": report.t_stop,
        "message": report.message,
        "rows": len(report.rows),
        "t_final": report.rows[-1]["t"] if report.rows else None,
        "b_final": report.rows[-1]["b"] if report.rows else None,
        "margin_min": float(np.nanmin(margin_col)) if len(margin_col) else None,
        "max_abs_drift": report.max_abs_drift(),
        "near_miss": report.near_miss,
        "wall_time_s": report.wall_time,
        "config": report.config,
        "files": {"timeseries": str(ts_path), "snapshots": snap_files},
    }
    _write_json(out / "report.json", payload)
    _say(args, f"{scenario.name}: {report.status} "
               f"(rows={len(report.rows)}, wall={report.wall_time:.2f}s)")
    return _EXIT_BY_STATUS[report.status]


def cmd_perturb(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _outdir(args)
    eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    rows = perturbation_study(scenario, eps_list, seed=args.seed)
    header = ["eps", "du_sup_T", "db_sup", "dv_lq", "status"]
    table = [[r.eps, r.du_sup, r.db_sup, r.dv_lq,
              "failed:" + r.status if r.failed else r.status] for r in rows]
    _write_csv(out / "perturb.csv", header, table)
    _write_json(out / "perturb.json", {
        "scenario": scenario.name, "seed": args.seed,
        "rows": [vars(r) for r in rows]})
    for r in rows:
        _say(args, f"eps={r.eps:<10g} du={_fmt(r.du_sup):<24} "
                   f"db={_fmt(r.db_sup):<24} dv={_fmt(r.dv_lq):<24} "
                   f"{'FAILED ' + r.status if r.failed else 'ok'}")
    return 0


def cmd_converge(args) -> int:
    if args.levels < 3:
        print("error: --levels must be at least 3", file=sys.stderr)
        return 1
    scenario = load_scenario(args.scenario)
    out = _outdir(args)
    rows = convergence_study(scenario, args.levels)
    header = ["level", "n", "dt", "diff_u", "diff_b", "ratio_u"]
    _write_csv(out / "converge.csv", header,
               [[r["level"], r["n"], r["dt"], r["diff_u"], r["diff_b"],
                 r["ratio_u"]] for r in rows])
    for r in rows:
        _say(args, f"level {r['level']}: n={r['n']:<6} dt={r['dt']:<12g} "
                   f"diff_u={_fmt(r['diff_u']):<24} "
                   f"ratio={_fmt(r['ratio_u'])}")
    return 0


def cmd_compare_solvers(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _outdir(args)
    result = compare_solvers(scenario)
    _write_json(out / "compare.json", dict(result, scenario=scenario.name))
    _say(args, f"splitting={result['splitting_status']} "
               f"picard={result['picard_status']} "
               f"du={_fmt(result['du_sup'])} db={_fmt(result['db_sup'])}")
    if not result["picard_converged"]:
        _say(args, f"picard residuals: {result['residual_history']}")
        return 1
    return 0


def _load_model_arg(args):
    if args.model is not None:
        path = Path(args.model)
        if not path.exists():
            raise RdhystError(f"model file {path} does not exist")
        return load_model(path)
    return builtin_bacteria_model()


def cmd_validate(args) -> int:
    model = _load_model_arg(args)
    out = _outdir(args)
    report = validate_model(model, sample_count=args.samples, seed=args.seed)
    payload = {"model": model.name, "checks": json.loads(report.to_json())}

    if model.u_box is not None and model.v_box is not None:
        diss = validate_dissipativity(model, sample_count=args.samples,
                                      seed=args.seed)
        payload["dissipativity"] = json.loads(diss.to_json())
    else:
        payload["dissipativity"] = {"status": "skip",
                                    "reason": "no invariant boxes declared"}

    quotient = {}
    for which, label in ((1, "w_plus"), (-1, "w_minus")):
        ks = []
        for scale in (1e-3, 1e-4, 1e-5):
            ks.append(estimate_holder_quotient(model, which, args.sigma,
                                               n_pairs=4 * args.samples,
                                               seed=args.seed,
                                               near_scale=scale))
        growing = ks[0] > 0 and ks[-1] / max(ks[0], 1e-300) > 1.8
        quotient[label] = {"sigma": args.sigma, "K_by_density": ks,
                           "status": "warn" if growing else "pass",
                           "note": "quotient grows as sampling densifies "
                                   "toward the threshold; the weighted "
                                   "Hoelder bound likely fails"
                                   if growing else "stable"}
    payload["holder_quotient"] = quotient

    statuses = [payload["checks"]["status"],
                payload["dissipativity"].get("status", "skip")]
    statuses += [q["status"] for q in quotient.values()]
    order = {"pass": 0, "skip": 1, "warn": 2, "fail": 3}
    payload["status"] = max(statuses, key=lambda s: order[s])
    _write_json(out / "validate.json", payload)
    _say(args, f"{model.name}: {payload['status']}")

    if args.dump_model:
        Path(args.dump_model).write_text(dump_model(model), encoding="utf-8")
        _say(args, f"model dumped to {args.dump_model}")
    return 0


def cmd_relay_trace(args) -> int:
    model = _load_model_arg(args)
    out = _outdir(args)
    in_path = Path(args.input)
    if not in_path.exists():
        raise RdhystError(f"input file {in_path} does not exist")
    lines = [ln for ln in in_path.read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    samples = []
    start = 0
    if lines and not _is_number(lines[0].split(",")[0]):
        start = 1  # header row
    for ln in lines[start:]:
        parts = [tok.strip() for tok in ln.split(",")]
        if len(parts) != model.k + 1:
            raise RdhystError(f"{in_path}: expected t,u1..u{model.k}, got "
                              f"{ln!r}")
        samples.append((float(parts[0]),
                        np.array([float(tok) for tok in parts[1:]])))
    trace = relay_trace(model.thresholds, model.branches, args.zeta0, samples)
    header = ["t", "zeta"] + [f"w{i + 1}" for i in range(model.m)]
    rows = [[t, int(z)] + list(np.atleast_1d(w)) for t, z, w in trace]
    _write_csv(out / "trace.csv", header, rows)
    _say(args, f"traced {len(rows)} samples -> {out / 'trace.csv'}")
    return 0


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


# --------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdhyst",
        description="1-D reaction-diffusion systems with spatially "
                    "distributed relay hysteresis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a scenario")
    p.add_argument("--scenario", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("perturb", help="continuous-dependence study")
    p.add_argument("--scenario", required=True)
    p.add_argument("--eps", default="1e-1,5e-2,2.5e-2,1.25e-2",
                   help="comma-separated perturbation sizes")
    _add_common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("converge", help="grid-refinement study")
    p.add_argument("--scenario", required=True)
    p.add_argument("--levels", type=int, default=4)
    _add_common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("compare-solvers",
                       help="splitting vs fixed-point agreement")
    p.add_argument("--scenario", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_compare_solvers)

    p = sub.add_parser("validate", help="model condition checks")
    p.add_argument("--model", help="model file (default: builtin bacteria)")
    p.add_argument("--sigma", type=float, default=0.0,
                   help="exponent for the weighted Hoelder quotient")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--dump-model", help="also write the model file format here")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("relay-trace", help="0-D relay driver over a CSV input")
    p.add_argument("--model", help="model file (default: builtin bacteria)")
    p.add_argument("--input", required=True, help="CSV with columns t,u1..uk")
    p.add_argument("--zeta0", type=int, choices=(1, -1), default=1)
    _add_common(p)
    p.set_defaults(func=cmd_relay_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RdhystError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
