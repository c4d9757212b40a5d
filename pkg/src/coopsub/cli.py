"""Command-line interface: solve, compare, verify, gen.

Exit codes: 0 success, 1 schema / parameter / verification failure,
2 infeasible instance.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .algorithms import E_FACTOR, PieceCountError, pla_coordinate_heuristic, pla_solve, sga_solve
from .core import DegenerateInstanceError, check_submodularity
from .greedy import BRUTE_FORCE_CAP, BruteForceRefused, brute_force
from .io import (Instance, InstanceError, SolverConfig, comparison_rows, error_record, load_instance,
                 result_record, save_instance, write_json, write_table)
from .linear_solvers import InfeasibleError
from .piecewise import build_pl_cost, verify_sandwich

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _emit(record: dict, out: str | None) -> None:
    text = write_json(record, out)
    if out is None:
        print(text)


def _apply_overrides(inst: Instance, args) -> Instance:
    cfg = inst.solver
    changes = {}
    for name in ("epsilon", "workers", "seed", "partial_enumeration", "algorithm"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "heuristic", False):
        changes["heuristic"] = True
    if getattr(args, "early_stop", False):
        changes["early_stop"] = True
    if changes:
        inst = replace(inst, solver=replace(cfg, **changes))
    cfg = inst.solver
    if not cfg.epsilon > 0 or cfg.workers < 1:
        raise InstanceError("epsilon must be positive and workers at least 1", "solver")
    return inst


def run_solver(inst: Instance):
    cfg = inst.solver
    kw = dict(constraint=inst.constraint, g=inst.oracle, target=inst.target, budget=inst.budget,
              partial_enumeration=cfg.partial_enumeration)
    if cfg.algorithm == "sga":
        return sga_solve(inst.problem, inst.cost, max_iter=cfg.max_iter, **kw)
    if cfg.heuristic:
        return pla_coordinate_heuristic(inst.problem, inst.cost, cfg.epsilon, **kw)
    return pla_solve(inst.problem, inst.cost, cfg.epsilon, workers=cfg.workers, early_stop=cfg.early_stop, **kw)


def _guarded(fn, args) -> int:
    out = getattr(args, "out", None)
    try:
        return fn(args)
    except InstanceError as exc:
        _emit(error_record("schema", str(exc), exc.field), None if out is None or Path(out).is_dir() else out)
        return EXIT_ERROR
    except InfeasibleError as exc:
        _emit(error_record("infeasible", str(exc)), None if out is None or Path(out).is_dir() else out)
        return EXIT_INFEASIBLE
    except (ValueError, PieceCountError, BruteForceRefused, DegenerateInstanceError, OSError) as exc:
        _emit(error_record("parameter", str(exc)), None if out is None or Path(out).is_dir() else out)
        return EXIT_ERROR


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    inst = _apply_overrides(load_instance(args.instance), args)
    report = run_solver(inst)
    record = {"status": "ok", **result_record(report, inst.labels)}
    _emit(record, args.out)
    return EXIT_OK


def _realized(problem, report, opt_value):
    """Realized approximation factor (>= 1 means worse than optimal; Problem 3 uses g ratio <= 1)."""
    if problem in (1, 2):
        return report.objective / opt_value if opt_value > 0 else (1.0 if report.objective <= 0 else math.inf)
    if problem == 3:
        return report.g_value / opt_value if opt_value > 0 else 1.0
    return report.ratio / opt_value


def _bound(problem, report):
    gtee = report.guarantee
    if problem == 1:
        return gtee.get("factor")
    if problem == 2:
        return gtee.get("realized_factor", gtee.get("factor"))
    if problem == 3:
        return gtee.get("rho")
    return gtee.get("factor", E_FACTOR)


def cmd_verify(args) -> int:
    inst = _apply_overrides(load_instance(args.instance), args)
    nmax = min(args.nmax, BRUTE_FORCE_CAP)
    if inst.n > nmax:
        raise BruteForceRefused(f"instance has {inst.n} elements, above --nmax {nmax}")
    report = run_solver(inst)
    opt = brute_force(inst.problem, inst.cost, inst.oracle, constraint=inst.constraint,
                      target=inst.target, budget=inst.budget)
    realized = _realized(inst.problem, report, opt.value)
    bound = _bound(inst.problem, report)
    if bound is None or report.heuristic:
        within = None
    elif inst.problem == 3:
        within = realized >= bound * (1 - 1e-9)
    else:
        within = realized <= bound * (1 + 1e-9)
    sub = check_submodularity(inst.cost, exhaustive=inst.n <= 10)
    record = {"status": "ok", "problem": inst.problem, "algorithm": report.algorithm,
              "chosen": list(report.chosen), "optimum": list(opt.chosen), "optimal_value": opt.value,
              "realized_ratio": realized, "guarantee": bound, "within_guarantee": within,
              "cost_submodular": sub.passed}
    if inst.solver.algorithm == "pla":
        # full load range: the sandwich is checked on every subset, not just the feasible family
        plc = build_pl_cost(inst.cost, inst.solver.epsilon)
        sw = verify_sandwich(inst.cost, plc, exhaustive=inst.n <= 14)
        record["sandwich_passed"] = sw.passed
        record["sandwich_max_ratio"] = sw.max_ratio
    _emit(record, args.out)
    if within is False or not sub.passed or record.get("sandwich_passed") is False:
        return EXIT_ERROR
    return EXIT_OK


def cmd_compare(args) -> int:
    seeds = range(args.seed or 0, (args.seed or 0) + args.seeds)
    records = []
    for s in seeds:
        if args.experiment == "matching":
            inst = ex.gen_correspondence(args.n or 30, args.k, seed=s)
            records.append(ex.run_matching_experiment(inst, args.epsilon or 0.25, workers=args.workers or 1))
        else:
            inst = ex.gen_sensor(args.n or 40, args.k, seed=s)
            records.append(ex.run_sensor_experiment(inst, args.epsilon or 0.1,
                                                    partial_enumeration=args.partial_enumeration))
    summary = ex.summarize(records)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_table(comparison_rows(records), out / f"{args.experiment}_rows.csv")
    write_json(summary, out / f"{args.experiment}_summary.json")
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _solver_from_args(args) -> SolverConfig:
    return SolverConfig(algorithm=args.algorithm or "pla", epsilon=args.epsilon or 0.1, workers=args.workers or 1,
                        heuristic=bool(args.heuristic), partial_enumeration=args.partial_enumeration,
                        seed=args.seed or 0)


def cmd_gen(args) -> int:
    seed = args.seed or 0
    solver = _solver_from_args(args)
    if args.kind == "matching":
        ci = ex.gen_correspondence(args.n or 30, args.k, seed=seed)
        labels = [f"a{a}-b{b}" for a, b in ci.edges]
        inst = Instance(1, ci.cost, constraint=ci.constraint, labels=labels, solver=solver)
    elif args.kind == "sensor":
        si = ex.gen_sensor(args.n or 40, args.k, seed=seed)
        inst = Instance(3, si.cost, oracle=si.g, budget=si.budget, solver=solver)
    else:
        rng = np.random.default_rng(seed)
        problem = args.problem
        size = args.n or 8
        if problem == 1:
            constraint = ex.random_constraint(rng, args.constraint, size)
            cost = ex.random_cost(rng, constraint.n, args.k, args.family)
            inst = Instance(1, cost, constraint=constraint, solver=solver)
        else:
            cost = ex.random_cost(rng, size, args.k, args.family)
            g = ex.random_oracle(rng, size)
            V = range(size)
            target = 0.7 * g(V) if problem == 2 else None
            budget = 0.4 * cost(V) if problem == 3 else None
            inst = Instance(problem, cost, oracle=g, target=target, budget=budget, solver=solver)
    if args.out:
        save_instance(inst, args.out)
    else:
        print(json.dumps(inst.to_dict(), indent=1))
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common(p, out_help="output file (default: stdout)"):
    p.add_argument("--epsilon", type=float, help="approximation parameter for PLA")
    p.add_argument("--workers", type=int, help="worker processes for PLA")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--heuristic", action="store_true", help="use the coordinate heuristic instead of full PLA")
    p.add_argument("--partial-enumeration", type=int, dest="partial_enumeration",
                   help="seed size for knapsack partial enumeration (3 gives the 1-1/e scheme)")
    p.add_argument("--out", help=out_help)


class _Parser(argparse.ArgumentParser):
    # usage errors count as parameter errors; 2 is reserved for infeasibility
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopsub", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=["pla", "sga"], help="override the instance's solver")
    p.add_argument("--early-stop", action="store_true", dest="early_stop",
                   help="stop the piece scan at the first solution inside its own segments (no guarantee)")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="compare a solver against brute force on a small instance")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=["pla", "sga"], help="override the instance's solver")
    p.add_argument("--nmax", type=int, default=16, help="largest ground set to brute-force (at most 20)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="run an experiment over several seeds")
    p.add_argument("experiment", choices=["matching", "sensor"])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, default=3)
    _common(p, out_help="output directory (default: current directory)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="write a generated instance file")
    p.add_argument("kind", choices=["random", "matching", "sensor"])
    p.add_argument("--problem", type=int, choices=[1, 2, 3, 4], default=1)
    p.add_argument("--constraint", choices=["cardinality", "matching", "path", "tree"], default="cardinality")
    p.add_argument("--family", choices=["power", "log1p", "truncation", "explicit", "identity"])
    p.add_argument("--n", type=int, help="ground-set size, or vertex count for graph constraints")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--algorithm", choices=["pla", "sga"], help="solver recorded in the instance")
    _common(p)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _guarded(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
