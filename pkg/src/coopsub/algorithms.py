"""PLA and SGA drivers for the four problems, plus curvature analysis.

Problem codes:
  1  min f(X) over a combinatorial family
  2  min f(X) subject to g(X) >= target
  3  max g(X) subject to f(X) <= budget
  4  min f(X) / g(X) over nonempty X

PLA fixes one linear piece per concave component (a piece index J), which
turns f^PL into a modular cost plus a constant, solves that subproblem, and
keeps the candidate with the best true objective.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import CooperativeCost, DegenerateInstanceError, SetFunction, as_index_array, as_sorted_tuple
from .greedy import PieceInfeasible, greedy_knapsack, greedy_ratio, greedy_set_cover
from .linear_solvers import ConstraintSpec, InfeasibleError, solve_linear, solve_linear_batch
from .piecewise import PLCost, build_pl_cost

log = logging.getLogger(__name__)

E_FACTOR = math.e / (math.e - 1)
KNAPSACK_RHO = (1 - 1 / math.e) / 2
PIECE_WARN = 10 ** 7


class PieceCountError(ValueError):
    pass


@dataclass
class CurvatureReport:
    average_curvature: float
    alpha: float
    worst_case_curvature: float
    estimate: bool = True   # alpha is evaluated at a returned set, not at the optimum


@dataclass
class SolveReport:
    problem: int
    algorithm: str
    chosen: tuple[int, ...]
    objective: float                  # true f(X)
    g_value: float | None = None
    ratio: float | None = None
    winning_j: tuple[int, ...] | None = None
    best_surrogate_j: tuple[int, ...] | None = None
    surrogate_value: float | None = None
    loads: list[float] = field(default_factory=list)
    piece_counts: list[int] = field(default_factory=list)
    pieces_total: int = 0
    pieces_evaluated: int = 0
    early_stop_fired: bool = False
    heuristic: bool = False
    guarantee: dict = field(default_factory=dict)
    wall_time: float = 0.0
    history: list[float] = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    candidates: list | None = None

    def selection_value(self) -> float:
        """The quantity each problem optimises (lower is better except Problem 3)."""
        return {1: self.objective, 2: self.objective, 3: self.g_value, 4: self.ratio}[self.problem]


# ---------------------------------------------------------------------------
# helpers


def _check_inputs(problem, f, constraint, g, target, budget):
    if problem == 1:
        if constraint is None:
            raise ValueError("Problem 1 needs a constraint")
        if constraint.n != f.n:
            raise ValueError(f"constraint ground set has {constraint.n} elements, f has {f.n}")
    elif problem in (2, 3, 4):
        if g is None:
            raise ValueError(f"Problem {problem} needs a coverage oracle g")
        if g.n != f.n:
            raise ValueError(f"g has {g.n} elements, f has {f.n}")
        if problem == 2 and target is None:
            raise ValueError("Problem 2 needs a cover target")
        if problem == 3 and budget is None:
            raise ValueError("Problem 3 needs a budget")
    else:
        raise ValueError(f"unknown problem {problem}")


def _true_objective(problem, f, g, X):
    """(score to minimise, f, g) for a candidate set."""
    fx = f(X)
    if problem in (1, 2):
        return fx, fx, (g(X) if g is not None else None)
    gx = g(X)
    if problem == 3:
        return -gx, fx, gx
    return (fx / gx if gx > 0 else math.inf), fx, gx


def _piece_tables(plc: PLCost):
    """Per active component: distinct (slope, intercept) lines and their first piece index.

    Identical lines (a linear psi, or the flat part of a truncation) give the
    same subproblem, so only the first copy is enumerated.
    """
    tables = []
    for i in plc.active:
        env = plc.envelopes[i]
        seen, keep = set(), []
        for j, (s, c) in enumerate(zip(env.slopes.tolist(), env.intercepts.tolist())):
            if (s, c) not in seen:
                seen.add((s, c))
                keep.append(j)
        tables.append(np.array(keep))
    return tables


@dataclass
class _Task:
    problem: int
    W: np.ndarray               # active weight rows (k_eff, n)
    slopes: list                # per active component, array of slopes by piece
    intercepts: list
    constraint: ConstraintSpec | None
    g: SetFunction | None
    target: float | None
    budget: float | None
    partial_enumeration: int | None
    plc: PLCost | None


def _solve_piece(task: _Task, J, w_J=None):
    """Solve the modular subproblem for piece index J.  Returns (X, surrogate, info) or None."""
    s = np.array([task.slopes[a][j] for a, j in enumerate(J)])
    offset = math.fsum(task.intercepts[a][j] for a, j in enumerate(J))
    if w_J is None:
        w_J = s @ task.W
    w_J = np.maximum(w_J, 0.0)
    p = task.problem
    if p == 1:
        X = solve_linear(task.constraint, w_J).chosen
        return X, math.fsum(w_J[list(X)]) + offset, {}
    if p == 2:
        r = greedy_set_cover(task.g, w_J, task.target, offset)
        return r.chosen, r.cost, {"wolsey_ratio": r.extra["wolsey_ratio"]}
    if p == 3:
        if task.budget < offset:
            return None
        plc = task.plc
        try:
            r = greedy_knapsack(task.g, w_J, task.budget, offset, task.partial_enumeration,
                                boundary=lambda Y: plc(Y) <= task.budget)
        except PieceInfeasible:
            return None
        return r.chosen, r.value, {}
    r = greedy_ratio(w_J, offset, task.g)
    return r.chosen, r.value, {}


def _solve_chunk(args):
    task, Js = args
    out = []
    if task.problem == 1 and Js:
        S = np.array([[task.slopes[a][j] for a, j in enumerate(J)] for J in Js])
        rows = np.maximum(S @ task.W, 0.0)
        sets = solve_linear_batch(task.constraint, rows)
        for J, X, w in zip(Js, sets, rows):
            offset = math.fsum(task.intercepts[a][j] for a, j in enumerate(J))
            out.append((J, X, math.fsum(w[list(X)]) + offset, {}))
        return out
    for J in Js:
        res = _solve_piece(task, J)
        if res is not None:
            out.append((J,) + res)
    return out


def pla_early_stop_check(J: Sequence[int], X: Iterable[int], plc: PLCost, tol: float = 1e-12) -> bool:
    """True when every load w_i(X) lies inside the segment of piece J_i.

    ``J`` is indexed over the active components of ``plc``.  The last piece
    extends to infinity because its line is the envelope past the grid.
    """
    loads = plc.f.loads(as_index_array(X))
    for a, i in enumerate(plc.active):
        env = plc.envelopes[i]
        j = J[a]
        lo, hi = env.piece_bounds(j)
        y = loads[i]
        if y < lo * (1 - tol):
            return False
        if j < env.n_pieces - 1 and y > hi * (1 + tol):
            return False
    return True


def _guarantee(problem, plc: PLCost, g, extras, partial_enumeration=None):
    eps_factor = plc.guarantee_factor()
    if problem == 1:
        return {"factor": eps_factor}
    if problem == 2:
        gV = g(range(g.n))
        out = {"sigma": eps_factor, "rho": 1 - 1 / math.e,
               "nonbicriteria_factor": eps_factor * math.log(gV) if gV > 1 else None}
        ratios = [x.get("wolsey_ratio") for x in extras if x.get("wolsey_ratio")]
        if ratios:
            out["realized_factor"] = eps_factor * (1 + math.log(max(ratios)))
        return out
    if problem == 3:
        rho = 1 - 1 / math.e if (partial_enumeration or 0) >= 3 else KNAPSACK_RHO
        return {"rho": rho, "sigma": eps_factor}
    return {"factor": eps_factor * E_FACTOR}


def _candidate_key(problem, score, J):
    # seeded candidates (J=None) lose every tie against enumerated pieces
    return (score, 0 if J is not None else 1, J or ())


def _finish(problem, algorithm, f, g, plc, best, records, start, **kw):
    score, X, J, fx, gx = best
    report = SolveReport(problem, algorithm, X, fx, wall_time=time.perf_counter() - start, winning_j=J, **kw)
    if g is not None:
        report.g_value = gx
    if problem == 4:
        report.ratio = fx / gx if gx > 0 else math.inf
    if isinstance(f, CooperativeCost):
        report.loads = f.loads(as_index_array(X)).tolist()
    if plc is not None:
        report.piece_counts = [plc.envelopes[i].n_pieces for i in plc.active]
        report.pieces_total = plc.total_pieces
    if records:
        if problem == 3:
            sj = max(records, key=lambda r: (r[2], tuple(-x for x in r[0])))
        else:
            sj = min(records, key=lambda r: (r[2], r[0]))
        report.best_surrogate_j = tuple(sj[0])
        report.surrogate_value = float(sj[2])
    return report


def _select(problem, f, g, records, extra_candidates):
    cache = {}
    best = None
    pool = [(r[0], r[1]) for r in records] + [(None, as_sorted_tuple(X)) for X in extra_candidates]
    for J, X in pool:
        if X not in cache:
            cache[X] = _true_objective(problem, f, g, X)
        score, fx, gx = cache[X]
        key = _candidate_key(problem, score, J)
        if best is None or key < best[0]:
            best = (key, (score, X, J, fx, gx))
    return best[1]


# ---------------------------------------------------------------------------
# PLA


def _prepare(problem, f, epsilon, constraint, g, target, budget, max_components, max_pieces, ranges):
    _check_inputs(problem, f, constraint, g, target, budget)
    plc = build_pl_cost(f, epsilon, constraint if problem == 1 else None, ranges=ranges)
    if len(plc.active) > max_components:
        raise PieceCountError(f"{len(plc.active)} active components exceeds the cap of {max_components}")
    tables = _piece_tables(plc)
    count = math.prod(len(t) for t in tables)
    if max_pieces is not None and count > max_pieces:
        raise PieceCountError(f"piece product {count} exceeds max_pieces={max_pieces}")
    if count > PIECE_WARN:
        warnings.warn(f"PLA will enumerate {count} pieces", stacklevel=3)
    return plc, tables, count


def _task(problem, f, plc, constraint, g, target, budget, partial_enumeration):
    envs = [plc.envelopes[i] for i in plc.active]
    return _Task(problem, np.asarray(f.W[plc.active]), [e.slopes for e in envs], [e.intercepts for e in envs],
                 constraint, g, target, budget, partial_enumeration, plc)


def pla_solve(problem: int, f: CooperativeCost, epsilon: float, *, constraint: ConstraintSpec | None = None,
              g: SetFunction | None = None, target: float | None = None, budget: float | None = None,
              workers: int = 1, early_stop: bool = False, partial_enumeration: int | None = None,
              max_components: int = 6, max_pieces: int | None = None, extra_candidates=(),
              keep_candidates: bool = False, ranges=None, chunk_size: int = 256) -> SolveReport:
    """Piecewise-linear approximation algorithm.

    Enumerates every piece index in row-major order, solving the modular
    subproblem for each.  With ``early_stop`` (Problems 1-3) the scan stops
    at the first piece whose solution sits inside its own segments; that
    mode always runs sequentially.  ``extra_candidates`` are extra sets
    scored alongside the piece solutions.
    """
    start = time.perf_counter()
    plc, tables, count = _prepare(problem, f, epsilon, constraint, g, target, budget,
                                  max_components, max_pieces, ranges)
    task = _task(problem, f, plc, constraint, g, target, budget, partial_enumeration)
    Js = [tuple(int(x) for x in J) for J in itertools.product(*tables)]
    records = []
    fired = False
    if early_stop and problem in (1, 2, 3):
        for J in Js:
            res = _solve_piece(task, J)
            if res is None:
                continue
            records.append((J,) + res)
            if pla_early_stop_check(J, res[0], plc):
                fired = True
                break
    elif workers > 1 and len(Js) > 1:
        bounds = np.linspace(0, len(Js), workers + 1).astype(int)
        chunks = [(task, Js[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_solve_chunk, chunks):
                records.extend(part)
    else:
        for a in range(0, len(Js), chunk_size):
            records.extend(_solve_chunk((task, Js[a:a + chunk_size])))
    if fired:
        J, X = records[-1][0], records[-1][1]
        score, fx, gx = _true_objective(problem, f, g, X)
        best = (score, X, J, fx, gx)
    else:
        if not records and not extra_candidates:
            raise InfeasibleError(f"every piece is infeasible for Problem {problem}")
        best = _select(problem, f, g, records, extra_candidates)
    report = _finish(problem, "pla", f, g, plc, best, records, start,
                     pieces_evaluated=len(records) if fired else count, early_stop_fired=fired,
                     guarantee=_guarantee(problem, plc, g, [r[3] for r in records], partial_enumeration))
    if problem == 3:
        report.flags["surrogate_cost"] = plc(report.chosen)
        report.flags["true_cost_exceeds_budget"] = report.objective > budget
    if keep_candidates:
        report.candidates = records
    return report


def pla_coordinate_heuristic(problem: int, f: CooperativeCost, epsilon: float, *,
                             constraint: ConstraintSpec | None = None, g: SetFunction | None = None,
                             target: float | None = None, budget: float | None = None,
                             max_sweeps: int = 20, partial_enumeration: int | None = None,
                             max_components: int = 6, extra_candidates=(), ranges=None) -> SolveReport:
    """Coordinate walk over piece indices driven by where the loads fall.

    Starts at the first regular segment of every component; a load below its
    segment moves that coordinate down, a load above moves it up.  Stops on
    the early-stop condition, a stable J, or after ``max_sweeps``.  The best
    visited candidate is returned; no approximation guarantee applies.
    """
    start = time.perf_counter()
    plc, _, _ = _prepare(problem, f, epsilon, constraint, g, target, budget, max_components, None, ranges)
    task = _task(problem, f, plc, constraint, g, target, budget, partial_enumeration)
    envs = [plc.envelopes[i] for i in plc.active]
    J = [min(1, e.n_pieces - 1) for e in envs]
    solved = {}
    order = []

    def solve(J):
        J = tuple(J)
        if J not in solved:
            solved[J] = _solve_piece(task, J)
            order.append(J)
        return solved[J]

    fired = False
    res = solve(J)
    for _ in range(max_sweeps):
        moved = False
        for a, env in enumerate(envs):
            if res is None:
                break
            if problem != 4 and pla_early_stop_check(J, res[0], plc):
                fired = True
                break
            y = f.loads(as_index_array(res[0]))[plc.active[a]]
            lo, hi = env.piece_bounds(J[a])
            if y < lo and J[a] > 0:
                J[a] -= 1
            elif y > hi and J[a] < env.n_pieces - 1:
                J[a] += 1
            else:
                continue
            moved = True
            res = solve(J)
        if fired or not moved:
            break
        if res is None:
            break
    if not fired and res is not None and problem != 4:
        fired = pla_early_stop_check(J, res[0], plc)
    records = [(Jv,) + solved[Jv] for Jv in order if solved[Jv] is not None]
    if not records and not extra_candidates:
        raise InfeasibleError(f"every visited piece is infeasible for Problem {problem}")
    best = _select(problem, f, g, records, extra_candidates)
    report = _finish(problem, "pla-heuristic", f, g, plc, best, records, start,
                     pieces_evaluated=len(order), early_stop_fired=fired, heuristic=True,
                     guarantee={})
    if problem == 3:
        report.flags["surrogate_cost"] = plc(report.chosen)
        report.flags["true_cost_exceeds_budget"] = report.objective > budget
    return report


# ---------------------------------------------------------------------------
# SGA and curvature


def curvature(f: SetFunction, X: Iterable[int]) -> CurvatureReport:
    """Average curvature at X, the induced alpha factor, and worst-case curvature of f."""
    X = as_sorted_tuple(X)
    if not X:
        raise DegenerateInstanceError("curvature needs a nonempty set")
    n = f.n
    singles = f.gains([], range(n))
    denom = math.fsum(singles[list(X)])
    if denom <= 0:
        raise DegenerateInstanceError("sum of singleton values over X is zero")
    fX = f(X)
    inner = math.fsum(fX - f([y for y in X if y != j]) for j in X)
    kappa_hat = min(1.0, max(0.0, 1.0 - inner / denom))
    size = len(X)
    alpha = size / (1 + (size - 1) * (1 - kappa_hat))
    fV = f(range(n))
    top = np.array([fV - f([y for y in range(n) if y != j]) for j in range(n)])
    pos = singles > 0
    kappa = 1.0 - float(np.min(top[pos] / singles[pos])) if np.any(pos) else 0.0
    return CurvatureReport(kappa_hat, alpha, min(1.0, max(0.0, kappa)))


def _sga_guarantee(problem, f, X):
    try:
        alpha = curvature(f, X).alpha
    except DegenerateInstanceError:
        alpha = 1.0
    if problem == 1:
        return {"factor": alpha, "estimate": True}
    if problem in (2, 3):
        return {"sigma": alpha, "rho": 1 - 1 / math.e if problem == 2 else KNAPSACK_RHO, "estimate": True}
    return {"factor": E_FACTOR * alpha, "estimate": True}


def sga_solve(problem: int, f: SetFunction, *, constraint: ConstraintSpec | None = None,
              g: SetFunction | None = None, target: float | None = None, budget: float | None = None,
              max_iter: int = 50, init: Iterable[int] = (), partial_enumeration: int | None = None) -> SolveReport:
    """Iterated minimisation of the modular upper bound tight at the current set."""
    start = time.perf_counter()
    _check_inputs(problem, f, constraint, g, target, budget)
    n = f.n
    V = list(range(n))
    fV = f(V)
    top = np.array([fV - f([y for y in V if y != j]) for j in V])
    X = as_sorted_tuple(init)
    history, best = [], None
    for _ in range(max_iter):
        inside = np.zeros(n, dtype=bool)
        inside[list(X)] = True
        weights = top.copy()
        out = np.flatnonzero(~inside)
        if len(out):
            weights[out] = f.gains(X, out)
        weights = np.maximum(weights, 0.0)
        const = max(0.0, f(X) - math.fsum(top[list(X)]))
        try:
            Xn = _sga_step(problem, f, g, constraint, target, budget, weights, const, partial_enumeration)
        except PieceInfeasible:
            break
        score, fx, gx = _true_objective(problem, f, g, Xn)
        if best is not None and not score < best[0] - 1e-9 * abs(best[0]):
            break
        best = (score, Xn, None, fx, gx)
        history.append(fx if problem in (1, 2) else score if problem == 4 else gx)
        X = Xn
    if best is None:
        raise InfeasibleError(f"SGA found no feasible iterate for Problem {problem}")
    report = _finish(problem, "sga", f, g, None, best, [], start, history=history,
                     pieces_evaluated=len(history), guarantee=_sga_guarantee(problem, f, best[1]))
    if problem == 3:
        report.flags["true_cost_exceeds_budget"] = report.objective > budget
    return report


def _sga_step(problem, f, g, constraint, target, budget, weights, const, partial_enumeration):
    if problem == 1:
        return solve_linear(constraint, weights).chosen
    if problem == 2:
        return greedy_set_cover(g, weights, target, const).chosen
    if problem == 3:
        return greedy_knapsack(g, weights, budget, const, partial_enumeration,
                               boundary=lambda Y: f(Y) <= budget).chosen
    return greedy_ratio(weights, const, g).chosen
