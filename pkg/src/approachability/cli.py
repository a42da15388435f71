"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 assumption violated,
4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adversary import adversary_from_dict
from .config import load_config, load_suite, read_json
from .errors import AssumptionViolated, ModelError, SolverError
from .game_model import check_ergodicity
from .harness import (
    RunConfig, aggregate_row, decay_check, experiment, run, summary_csv, summary_row,
    write_trace_csv,
)
from .solver import check_assumption, scalarize, separating_strategy, solve_average_game

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("approachability")


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ModelError(f"cannot parse point {text!r}: {exc}") from exc


def _adversary(text: str) -> dict:
    """``--adversary`` accepts a kind name or a JSON object."""
    text = text.strip()
    doc = json.loads(text) if text.startswith("{") else {"kind": text}
    adversary_from_dict(doc)
    return doc


def _dump(doc) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    point = _floats(args.point)
    if point.size != cfg.model.dim:
        raise ModelError(f"point has dimension {point.size}, model has {cfg.model.dim}")
    tol = cfg.controller.solver_tol
    if not args.target_from_config:
        # without a target the point is read as a scalarization direction
        sol = solve_average_game(scalarize(cfg.model, point), tol=tol)
        _dump({
            "direction": (point / np.linalg.norm(point)).tolist(),
            "strategy": sol.player_strategy.dist.tolist(),
            "value": sol.value,
            "margin": None,
        })
        return EXIT_OK
    if cfg.target is None:
        raise ModelError("--target-from-config given but the configuration has no target")
    if cfg.target.distance(point) <= cfg.controller.membership_tol:
        raise ModelError("point lies in the target; nothing to separate")
    sep = separating_strategy(cfg.model, cfg.target, point, tol=tol)
    _dump({
        "point": point.tolist(),
        "status": sep.status,
        "strategy": sep.strategy.dist.tolist(),
        "margin": sep.margin,
        "value": sep.value,
        "projection": sep.projection.tolist(),
        "direction": sep.direction.tolist(),
    })
    return EXIT_OK if sep.ok else EXIT_ASSUMPTION


def _exit_for(statuses) -> int:
    statuses = list(statuses)
    if "solver_error" in statuses:
        return EXIT_SOLVER
    if "assumption_violated" in statuses:
        return EXIT_ASSUMPTION
    return EXIT_OK


def _write_decay(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_id", "seed", "windows", "passed"])
        for r in rows:
            writer.writerow([r["config_id"], r["seed"], r["windows"], r["passed"]])


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.target is None:
        raise ModelError("configuration has no target")
    adversary = _adversary(args.adversary) if args.adversary else cfg.adversary
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_id = args.config_id or Path(args.config).stem
    rows, decay = [], []
    for stream in range(args.seeds):
        trace = run(
            RunConfig(
                cfg.model, cfg.target, dict(adversary), args.steps, cfg.controller,
                seed=args.seed, stream=stream, initial_state=cfg.initial_state,
                record_stride=args.stride,
            ),
            config_id=config_id,
        )
        write_trace_csv(trace, out / f"trace_seed{stream}.csv")
        rows.append(summary_row(trace))
        total, passed = decay_check(trace, cfg.target)
        decay.append({"config_id": config_id, "seed": stream, "windows": total, "passed": passed})
        if trace.status != "ok":
            log.error("seed %d: %s", stream, trace.message)
        log.info("seed %d: status %s, final distance %.3g", stream, trace.status, trace.dist_final)
    table = rows + [aggregate_row(config_id, rows)]
    (out / "summary.csv").write_text(summary_csv(table))
    _write_decay(decay, out / "decay.csv")
    sys.stdout.write(summary_csv(table))
    return _exit_for(r["status"] for r in rows)


def cmd_experiment(args) -> int:
    specs, seeds, root_seed = load_suite(args.suite)
    if args.seeds is not None:
        seeds = args.seeds
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result = experiment(specs, seeds, root_seed=root_seed, workers=args.workers, out=out)
    _write_decay(result.decay, out.with_name(out.stem + "_decay.csv"))
    sys.stdout.write(result.csv())
    return _exit_for(r["status"] for r in result.runs())


def _grid_points(path) -> np.ndarray:
    doc = read_json(path)
    if isinstance(doc, dict):
        if set(doc) != {"points"}:
            raise ModelError("grid file must be a list of points or {\"points\": [...]}")
        doc = doc["points"]
    try:
        points = np.array(doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"grid points must be a rectangular numeric array: {exc}") from exc
    if points.ndim != 2 or points.shape[0] == 0:
        raise ModelError("grid points must be a nonempty list of vectors")
    return points


def cmd_check_assumption(args) -> int:
    cfg = load_config(args.config)
    if cfg.target is None:
        raise ModelError("configuration has no target")
    points = _grid_points(args.grid_points)
    if points.shape[1] != cfg.model.dim:
        raise ModelError(f"grid points have dimension {points.shape[1]}, model has {cfg.model.dim}")
    ergodic = check_ergodicity(cfg.model)
    checks = check_assumption(
        cfg.model, cfg.target, points, tol=cfg.controller.solver_tol,
        membership_tol=cfg.controller.membership_tol,
    )
    violated = [c for c in checks if c.status == "assumption_violated"]
    _dump({
        "ergodicity": {
            "status": ergodic.status,
            "reference_state": ergodic.reference_state,
            "horizon": ergodic.horizon,
            "delta": ergodic.delta,
            "message": ergodic.message,
        },
        "points": [
            {"point": c.point.tolist(), "status": c.status, "margin": c.margin, "value": c.value}
            for c in checks
        ],
        "min_margin": min((c.margin for c in checks if c.margin is not None), default=None),
        "violations": len(violated),
    })
    return EXIT_ASSUMPTION if violated else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="approachability",
        description="Two-time-scale approachability on controlled Markov chains.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="separating strategy and margin at a point")
    p.add_argument("--config", required=True)
    p.add_argument("--point", required=True, help="comma separated coordinates")
    p.add_argument("--target-from-config", action="store_true",
                   help="separate the point from the configured target; otherwise the point "
                        "is used as the scalarization direction")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="closed-loop runs over several seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="root seed; run i uses substream i")
    p.add_argument("--adversary", help="adversary kind or JSON object, overrides the config")
    p.add_argument("--stride", type=int, default=None, help="trace record stride")
    p.add_argument("--config-id", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a suite of configurations")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--seeds", type=int, default=None, help="override the suite's seed count")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("check-assumption", help="separation margins on a grid of points")
    p.add_argument("--config", required=True)
    p.add_argument("--grid-points", required=True, help="JSON list of points")
    p.set_defaults(func=cmd_check_assumption)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    for name in ("steps", "seeds", "stride", "workers"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name} must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except (ModelError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolated as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
