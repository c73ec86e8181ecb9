"""Command line front end.

Exit codes:
    0  success
    1  gradient check failed
    2  bad usage, unparsable input
    3  optimization or domain failure
    4  file or address lookup failure
    5  network failure

Errors are reported as a single JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .builder import BuildRecipe, assemble_fibril, axis_routes, build_model, strand_axes
from .errors import ParseError, StericZipError
from .optimizers import (
    OPTIMIZERS,
    OptimizerConfig,
    finite_diff_gradient,
    gradient_relative_error,
    parse_config,
    parse_config_items,
    run_optimizer,
)
from .potentials import (
    LJParams,
    cluster_box,
    curve_csv,
    lj_cluster_objective,
    lj_curve,
    random_cluster,
)
from .problems import (
    PUBLISHED_AXES,
    PUBLISHED_OPTIMA,
    DistanceGeometryProblem,
    axis_handle,
    dg_handle,
    dg_objective,
    dg_search_box,
    edge_distances,
    infeasibility_margins,
    model_problem,
    strand_axis_data,
)
from .structure import read_pdb, write_pdb

EXIT_OK, EXIT_GRAD, EXIT_USAGE, EXIT_OPTIMIZE, EXIT_IO, EXIT_NETWORK = 0, 1, 2, 3, 4, 5
GRAD_TOLERANCE = 1e-6
AXIS_COSINE_TARGET = 0.99
GRAD_OBJECTIVES = ("lj-cluster", "dg-model1", "dg-model2", "dg-model3", "axis-fit")


class UsageError(StericZipError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_config(args) -> OptimizerConfig:
    base = OptimizerConfig(rng_seed=args.seed)
    if getattr(args, "config", None):
        base = parse_config(Path(args.config).read_text(), base)
        if args.seed_given:
            base = base.updated(rng_seed=args.seed)
    return base


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    if args.recipe:
        recipe = BuildRecipe.from_json(_read_json(args.recipe))
    else:
        recipe = BuildRecipe.for_model(args.model)
    changes = {}
    if args.template:
        changes.update(template=args.template, fetch_id=None)
    if args.fetch:
        changes.update(fetch_id=args.fetch, template=None)
    if args.optimizer:
        changes["optimizer"] = args.optimizer
    if args.seed_given:
        changes["seed"] = args.seed
    if args.transform:
        changes["transform"] = args.transform
    if args.config:
        changes["config"] = {**recipe.config, **parse_config_items(Path(args.config).read_text())}
    if changes:
        recipe = BuildRecipe.from_json({**recipe.to_json(), **changes})

    core, report, result = build_model(recipe)
    fibril = assemble_fibril(core)
    stem = f"model{recipe.model}" if recipe.model else "fibril"
    out = args.out or f"{stem}.pdb"
    report_path = args.report or f"{stem}.report.json"
    _write(out, write_pdb(fibril))
    _write(report_path, _dump(report.to_json()))
    if args.trace:
        _write(args.trace, result.trace_csv())
    if out != "-" and report_path != "-":
        sys.stdout.write(report.summary_text())
    return EXIT_OK


def cmd_solve_dg(args) -> int:
    if args.problem:
        problem = DistanceGeometryProblem.from_json(_read_json(args.problem))
    else:
        problem = model_problem(args.builtin)
    cfg = _load_config(args)
    result = run_optimizer(args.optimizer, dg_handle(problem), problem.initial_guess, cfg, bounds=dg_search_box(problem))
    dist = edge_distances(problem, result.x_best)
    margins = infeasibility_margins(problem)
    doc = {
        "schema": "stericzip.dg-solution/1",
        "problem": problem.name,
        "objective": result.f_best,
        "x": [float(v) for v in result.x_best],
        "sensors": {
            label: [float(v) for v in result.x_best[3 * i : 3 * i + 3]] for i, label in enumerate(problem.sensor_labels)
        },
        "edges": [
            {"u": problem.label(e.u), "v": problem.label(e.v), "target": e.d, "distance": float(d)}
            for e, d in zip(problem.edges, dist)
        ],
        "infeasibility": [m.to_json() for m in margins],
        "notes": [
            f"anchors {m.anchors[0]} and {m.anchors[1]} are {m.anchor_gap:.2f} A apart, more than "
            f"{m.reach:.1f} A: {m.sensor} cannot touch both, so the minimum objective is positive"
            for m in margins
            if m.infeasible
        ],
        "optimizer": result.summary(),
    }
    if args.builtin:
        published = PUBLISHED_OPTIMA[args.builtin]
        doc["published_optimum"] = {
            "x": [float(v) for v in published],
            "objective": dg_objective(problem, published)[0],
        }
    _write("-", _dump(doc))
    if args.trace:
        _write(args.trace, result.trace_csv())
    return EXIT_OK


def _cos(a, b) -> float:
    return float(min(1.0, abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))))


def cmd_fit_axis(args) -> int:
    cfg = _load_config(args)
    warnings = []
    if args.builtin_strand:
        axis = axis_routes(strand_axis_data(args.builtin_strand), args.builtin_strand, cfg)
        doc = axis.to_json()
        published = PUBLISHED_AXES[args.builtin_strand]
        cos = _cos(axis.eigen_direction, published)
        doc["published"] = {"w": [float(v) for v in published], "cosine": cos, "target": AXIS_COSINE_TARGET}
        if cos < AXIS_COSINE_TARGET:
            warnings.append(f"direction cosine {cos:.4f} with the published axis is below {AXIS_COSINE_TARGET}")
    else:
        if not (args.pdb and args.chain):
            raise UsageError("fit-axis needs --pdb PATH --chain ID or --builtin-strand A|B")
        doc = strand_axes(read_pdb(args.pdb), [args.chain], cfg)[args.chain].to_json()
    doc["schema"] = "stericzip.axis-fit/1"
    doc["warnings"] = warnings
    _write("-", _dump(doc))
    return EXIT_OK


def cmd_lj(args) -> int:
    if args.curve:
        if args.out is None:
            raise UsageError("lj --curve needs --out CSV")
        params = LJParams(epsilon=args.epsilon, sigma=args.sigma)
        r_min = args.r_min if args.r_min is not None else 0.9 * args.sigma
        r_max = args.r_max if args.r_max is not None else 3.0 * args.sigma
        _write(args.out, curve_csv(lj_curve(params, r_min, r_max, args.samples)))
        return EXIT_OK
    if args.cluster is None:
        raise UsageError("lj needs --cluster N or --curve")
    if args.cluster < 2:
        raise UsageError("--cluster needs at least 2 atoms")
    cfg = _load_config(args)
    x0 = random_cluster(args.cluster, np.random.default_rng(args.seed))
    result = run_optimizer(args.optimizer, lj_cluster_objective(args.cluster), x0, cfg, bounds=cluster_box(args.cluster))
    doc = {
        "schema": "stericzip.lj-cluster/1",
        "n_atoms": args.cluster,
        "energy": result.f_best,
        "coordinates": result.x_best.reshape(-1, 3).tolist(),
        "optimizer": result.summary(),
    }
    _write("-", _dump(doc))
    if args.trace:
        _write(args.trace, result.trace_csv())
    return EXIT_OK


def _grad_cases(name: str, trials: int, rng: np.random.Generator, atoms: int):
    if name == "lj-cluster":
        obj = lj_cluster_objective(atoms)
        return obj, [random_cluster(atoms, rng) for _ in range(trials)]
    if name.startswith("dg-model"):
        p = model_problem(int(name[-1]))
        return dg_handle(p), [p.initial_guess + rng.normal(scale=3.0, size=p.dimension) for _ in range(trials)]
    p = strand_axis_data("A")
    return axis_handle(p), [rng.normal(scale=5.0, size=3) for _ in range(trials)]


def cmd_check_grad(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    rng = np.random.default_rng(args.seed)
    obj, points = _grad_cases(args.objective, args.trials, rng, args.atoms)
    errors = []
    for x in points:
        _, g = obj(x)
        errors.append(gradient_relative_error(g, finite_diff_gradient(obj, x)))
    ok = max(errors) <= GRAD_TOLERANCE
    doc = {
        "schema": "stericzip.grad-check/1",
        "objective": args.objective,
        "trials": args.trials,
        "seed": args.seed,
        "tolerance": GRAD_TOLERANCE,
        "max_relative_error": max(errors),
        "relative_errors": errors,
        "passed": ok,
    }
    _write("-", _dump(doc))
    return EXIT_OK if ok else EXIT_GRAD


# ---------------------------------------------------------------------------


def _add_common(p, optimizer_default):
    p.add_argument("--optimizer", choices=OPTIMIZERS, default=optimizer_default)
    p.add_argument("--seed", type=int, default=None, help="RNG seed for stochastic methods (default 0)")
    p.add_argument("--config", metavar="FILE", help="key = value optimizer settings")
    p.add_argument("--trace", metavar="CSV", help="write the per-iteration trace")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stericzip", description="Steric-zipper fibril models from a beta-sheet template.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="thread, pose and assemble a 12-chain model")
    src = b.add_mutually_exclusive_group()
    src.add_argument("--template", metavar="PDB", help="template file (default: bundled GYVLGS template)")
    src.add_argument("--fetch", metavar="ID", help="download the template by structure id")
    which = b.add_mutually_exclusive_group(required=True)
    which.add_argument("--model", type=int, choices=(1, 2, 3))
    which.add_argument("--recipe", metavar="JSON")
    _add_common(b, None)
    b.add_argument("--transform", choices=("shipped", "derived"))
    b.add_argument("--out", metavar="PDB", help="output model ('-' for stdout)")
    b.add_argument("--report", metavar="JSON", help="contact report ('-' for stdout)")
    b.set_defaults(func=cmd_build)

    d = sub.add_parser("solve-dg", help="solve a sensor/anchor contact problem")
    which = d.add_mutually_exclusive_group(required=True)
    which.add_argument("--problem", metavar="JSON")
    which.add_argument("--builtin", type=int, choices=(1, 2, 3))
    _add_common(d, "lbfgs")
    d.set_defaults(func=cmd_solve_dg)

    f = sub.add_parser("fit-axis", help="best-fit strand axis by two routes")
    f.add_argument("--pdb", metavar="PATH")
    f.add_argument("--chain", metavar="ID")
    f.add_argument("--builtin-strand", choices=("A", "B"))
    _add_common(f, "sd")
    f.set_defaults(func=cmd_fit_axis)

    lj = sub.add_parser("lj", help="LJ cluster minimization or potential curve")
    lj.add_argument("--cluster", type=int, metavar="N")
    lj.add_argument("--curve", action="store_true")
    lj.add_argument("--epsilon", type=float, default=1.0)
    lj.add_argument("--sigma", type=float, default=1.0)
    lj.add_argument("--r-min", type=float)
    lj.add_argument("--r-max", type=float)
    lj.add_argument("--samples", type=int, default=2001)
    lj.add_argument("--out", metavar="CSV")
    _add_common(lj, "sdcg-sa-sdcg")
    lj.set_defaults(func=cmd_lj)

    g = sub.add_parser("check-grad", help="analytic vs finite-difference gradients")
    g.add_argument("--objective", required=True, choices=GRAD_OBJECTIVES)
    g.add_argument("--trials", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--atoms", type=int, default=5, help="cluster size for lj-cluster")
    g.set_defaults(func=cmd_check_grad)
    return ap


def _error_json(exc: BaseException, code: int) -> str:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    status = getattr(exc, "status", None)
    if status is not None:
        doc["status"] = status
    return json.dumps(doc)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if hasattr(args, "seed") and args.command != "check-grad":
            args.seed_given = args.seed is not None
            if args.seed is None:
                args.seed = 0
        return args.func(args)
    except StericZipError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except (ValueError, KeyError) as exc:
        return _fail(exc, EXIT_USAGE)


def _fail(exc: BaseException, code: int) -> int:
    print(_error_json(exc, code), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
