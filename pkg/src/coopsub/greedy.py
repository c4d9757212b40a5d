"""Greedy solvers for modular-cost subproblems and an exhaustive oracle.

The three greedy rules share one lazy (priority-queue) engine.  Stale heap
entries are upper bounds on the current key because the oracles are
submodular, so a popped entry that still beats the heap top after a refresh
is the eager argmax.  Ties go to the lowest element index.
"""
from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import DegenerateInstanceError, SetFunction, as_sorted_tuple, enumerate_masks
from .linear_solvers import ConstraintSpec, InfeasibleError, enumerate_feasible, subset_indicator

COVER_TOL = 1e-9


class PieceInfeasible(InfeasibleError):
    """Budget is smaller than the constant offset of this modular piece."""


class BruteForceRefused(ValueError):
    pass


@dataclass
class Pick:
    element: int
    gain: float
    cost: float
    cumulative_value: float
    cumulative_cost: float


@dataclass
class GreedyTrace:
    picks: list[Pick] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def elements(self) -> list[int]:
        return [p.element for p in self.picks]


def _ratio_key(gain, cost):
    # zero-cost elements with positive gain rank above every finite ratio
    if cost <= 0:
        return (1, gain)
    return (0, gain / cost)


LAZY_THRESHOLD = 128


def _greedy(g: SetFunction, cost: np.ndarray, key: Callable, *, start: Sequence[int] = (),
            room: float | None = None, boundary: Callable | None = None,
            stop: Callable | None = None, truncate: float | None = None,
            lazy: bool | None = None) -> tuple[list[int], GreedyTrace]:
    """Generic greedy: repeatedly add the admissible element with the largest key.

    ``key(gain, cost)`` ranks candidates.  With ``room`` an element is
    admissible while cost(X + j) <= room; inside a 1e-9 band around ``room``
    the sum is recomputed exactly and ``boundary(X + [j])`` must also hold.
    ``stop(value)`` ends the run and ``truncate`` caps gains at
    truncate - g(X).  ``lazy=None`` picks the lazy queue for large ground sets.
    """
    n = g.n
    if lazy is None:
        lazy = n > LAZY_THRESHOLD
    X = [int(j) for j in start]
    value = g(X) if X else 0.0
    spent = math.fsum(cost[X]) if X else 0.0
    trace = GreedyTrace()
    taken = set(X)
    alive = np.array([j for j in range(n) if j not in taken], dtype=np.int64)
    band = 1e-9 * max(1.0, abs(room)) if room is not None else 0.0

    def admissible(cands):
        if room is None or len(cands) == 0:
            return cands
        c = spent + cost[cands]
        ok = c <= room - band
        for pos in np.flatnonzero(~ok & (c <= room + band)):
            Y = X + [int(cands[pos])]
            ok[pos] = math.fsum(cost[Y]) <= room and (boundary is None or boundary(Y))
        return cands[ok]

    def keyed(gains, cands):
        gains = np.asarray(gains, dtype=float)
        if truncate is not None:
            gains = np.minimum(gains, truncate - value)
        return [(float(gj), key(float(gj), float(cost[j]))) for j, gj in zip(cands.tolist(), gains)]

    def take(j, gain):
        nonlocal value, spent
        X.append(j)
        value = g(X)
        spent = math.fsum(cost[X])
        trace.picks.append(Pick(j, gain, float(cost[j]), value, spent))

    def done():
        if stop is not None and stop(value):
            trace.stop_reason = "cover reached"
            return True
        return False

    if done():
        return X, trace
    if not lazy:
        while len(alive):
            alive = admissible(alive)
            if not len(alive):
                break
            scored = keyed(g.gains(X, alive), alive)
            best = None
            for pos, (gain, k) in enumerate(scored):
                if gain > 0 and (best is None or k > scored[best][1]):
                    best = pos
            if best is None:
                break
            j = int(alive[best])
            take(j, scored[best][0])
            alive = np.delete(alive, best)
            if done():
                return X, trace
        trace.stop_reason = _exhausted(room, X, n)
        return X, trace

    alive = admissible(alive)
    heap = []
    if len(alive):
        for j, (gain, k) in zip(alive.tolist(), keyed(g.gains(X, alive), alive)):
            if gain > 0:
                heap.append(((-k[0], -k[1]), j, len(X), gain))
        heapq.heapify(heap)
    while heap:
        negk, j, stamp, gain = heapq.heappop(heap)
        if not len(admissible(np.array([j]))):
            continue
        if stamp != len(X):
            (gain, k), = keyed(g.gains(X, [j]), np.array([j]))
            if gain <= 0:
                continue
            negk = (-k[0], -k[1])
            if heap and (negk, j) > (heap[0][0], heap[0][1]):
                heapq.heappush(heap, (negk, j, len(X), gain))
                continue
        take(j, gain)
        if done():
            return X, trace
    trace.stop_reason = _exhausted(room, X, n)
    return X, trace


def _exhausted(room, X, n):
    # with a budget, leftover elements mean the budget (not the ground set) ran out
    if room is not None and len(X) < n:
        return "budget exhausted"
    return "ground set exhausted"


def _gain_key(gain, cost):
    return (0, gain)


# ---------------------------------------------------------------------------
# public solvers


@dataclass
class GreedyResult:
    chosen: tuple[int, ...]
    value: float          # g(X) for cover / knapsack, ratio for greedy_ratio
    cost: float           # modular cost + offset
    trace: GreedyTrace
    extra: dict = field(default_factory=dict)


def greedy_set_cover(g: SetFunction, cost, target: float, cost_offset: float = 0.0,
                     lazy: bool | None = None) -> GreedyResult:
    """Cheapest-per-gain greedy until g(X) >= target (within a 1e-9 relative slack).

    ``extra['wolsey_ratio']`` is target / (target - g(X_{T-1})), where X_{T-1}
    is the set before the final pick; 1 + ln of it bounds cost(X) / OPT.
    """
    cost = np.asarray(cost, dtype=float)
    need = target * (1 - COVER_TOL)
    gV = g(range(g.n))
    if need > gV:
        raise InfeasibleError(f"cover target {target} exceeds g(V) = {gV}")
    X, trace = _greedy(g, cost, _ratio_key, stop=lambda v: v >= need, truncate=target, lazy=lazy)
    if trace.stop_reason != "cover reached":
        raise InfeasibleError(f"greedy cover stalled at g = {g(X)} < {target}")
    before = trace.picks[-2].cumulative_value if len(trace.picks) > 1 else 0.0
    ratio = target / (target - before) if trace.picks and target > before else 1.0
    spent = math.fsum(cost[X]) if X else 0.0
    return GreedyResult(as_sorted_tuple(X), g(X), spent + cost_offset, trace,
                        {"wolsey_ratio": ratio, "order": list(X)})


def greedy_knapsack(g: SetFunction, cost, budget: float, cost_offset: float = 0.0,
                    partial_enumeration: int | None = None, boundary: Callable | None = None,
                    lazy: bool | None = None) -> GreedyResult:
    """Maximise g subject to cost(X) + cost_offset <= budget.

    Returns the better of the gain-per-cost greedy and the plain gain greedy.
    With ``partial_enumeration=3`` every feasible set of at most three
    elements also seeds a gain-per-cost completion.  ``boundary(X)`` is an
    extra feasibility test consulted only when cost(X) is within rounding
    distance of the budget.
    """
    cost = np.asarray(cost, dtype=float)
    room = budget - cost_offset
    if room < 0:
        raise PieceInfeasible(f"budget {budget} below offset {cost_offset}")

    def fits(Y):
        m = math.fsum(cost[Y])
        band = 1e-9 * max(1.0, abs(room))
        if m > room:
            return False
        return m <= room - band or boundary is None or boundary(Y)

    runs = []
    for rule in (_ratio_key, _gain_key):
        X, trace = _greedy(g, cost, rule, room=room, boundary=boundary, lazy=lazy)
        runs.append((g(X), X, trace))
    if partial_enumeration:
        for size in range(1, partial_enumeration + 1):
            for seed in itertools.combinations(range(g.n), size):
                seed = list(seed)
                if not fits(seed):
                    continue
                if size < partial_enumeration:
                    runs.append((g(seed), seed, GreedyTrace(stop_reason="enumerated")))
                else:
                    X, trace = _greedy(g, cost, _ratio_key, start=seed, room=room, boundary=boundary, lazy=lazy)
                    runs.append((g(X), X, trace))
    best = max(range(len(runs)), key=lambda r: (runs[r][0], -r))
    value, X, trace = runs[best]
    spent = math.fsum(cost[X]) if X else 0.0
    return GreedyResult(as_sorted_tuple(X), value, spent + cost_offset, trace, {"variant": best})


def greedy_ratio(numerator_cost, numerator_offset: float, g: SetFunction, lazy: bool | None = None) -> GreedyResult:
    """Best prefix, by (cost + offset) / g, of the saturating gain-per-cost greedy."""
    cost = np.asarray(numerator_cost, dtype=float)
    if g(range(g.n)) <= 0:
        raise DegenerateInstanceError("g(V) = 0, every ratio is undefined")
    X, trace = _greedy(g, cost, _ratio_key, lazy=lazy)
    best, best_ratio = None, math.inf
    prefix_ratios = []
    for t, pick in enumerate(trace.picks, start=1):
        if pick.cumulative_value <= 0:
            prefix_ratios.append(math.inf)
            continue
        r = (pick.cumulative_cost + numerator_offset) / pick.cumulative_value
        prefix_ratios.append(r)
        if r < best_ratio:
            best, best_ratio = t, r
    if best is None:
        raise DegenerateInstanceError("greedy found no element with positive gain")
    chosen = as_sorted_tuple(X[:best])
    return GreedyResult(chosen, best_ratio, trace.picks[best - 1].cumulative_cost + numerator_offset, trace,
                        {"prefix_ratios": prefix_ratios, "order": list(X)})


# ---------------------------------------------------------------------------
# exhaustive oracle


@dataclass
class BruteForceResult:
    chosen: tuple[int, ...]
    value: float


BRUTE_FORCE_CAP = 20
BRUTE_FORCE_WARN = 16


def _values(fn, masks):
    return np.asarray(fn.evaluate_masks(masks), dtype=float)


def _pick(masks, scores):
    """Lexicographically first subset among the exact minimisers of ``scores``."""
    best = np.min(scores)
    if not np.isfinite(best):
        return None
    tied = np.flatnonzero(scores == best)
    winner = min((tuple(np.flatnonzero(masks[r]).tolist()) for r in tied))
    return winner, float(best)


def brute_force(problem: int, f, g: SetFunction | None = None, *, constraint: ConstraintSpec | None = None,
                target: float | None = None, budget: float | None = None) -> BruteForceResult:
    """Exact optimum of Problems 1-4 by enumeration (n <= 20).

    Problem 1 enumerates the constraint family; 2 minimises f with
    g >= target; 3 maximises g with f <= budget; 4 minimises f / g over
    nonempty sets.
    """
    n = f.n
    if n > BRUTE_FORCE_CAP:
        raise BruteForceRefused(f"brute force refused: n = {n} > {BRUTE_FORCE_CAP}")
    if n > BRUTE_FORCE_WARN:
        warnings.warn(f"brute force over n = {n} elements may be slow", stacklevel=2)
    if problem == 1:
        sets = list(enumerate_feasible(constraint))
        if not sets:
            raise InfeasibleError("constraint family is empty")
        masks = np.array([subset_indicator(n, X) for X in sets]).reshape(len(sets), n)
        res = _pick(masks, _values(f, masks))
        return BruteForceResult(*res)
    masks = enumerate_masks(n)
    fv = _values(f, masks)
    gv = _values(g, masks)
    if problem == 2:
        scores = np.where(gv >= target * (1 - COVER_TOL), fv, np.inf)
        res = _pick(masks, scores)
        if res is None:
            raise InfeasibleError(f"no subset reaches cover target {target}")
        return BruteForceResult(*res)
    if problem == 3:
        scores = np.where(fv <= budget, -gv, np.inf)
        res = _pick(masks, scores)
        return BruteForceResult(res[0], -res[1])
    if problem == 4:
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(gv > 0, fv / gv, np.inf)
        scores[0] = np.inf
        res = _pick(masks, scores)
        if res is None:
            raise DegenerateInstanceError("g is zero on every subset")
        return BruteForceResult(*res)
    raise ValueError(f"unknown problem {problem}")
