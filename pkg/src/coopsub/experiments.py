"""Synthetic workloads: cooperative matching, grouped-discount sensor placement,
and random instances for the four problems.

Every generator takes an explicit seed and draws from a single
``numpy.random.Generator``; the same seed always yields the same instance.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .algorithms import pla_solve, sga_solve
from .core import (ConcaveSpec, CooperativeCost, ExplicitPL, FacilityLocation, Log1p, Power, SetFunction,
                   Truncation, WeightedCoverage, as_sorted_tuple)
from .linear_solvers import (BipartiteMatching, CardinalityLB, ConstraintSpec, ShortestPath, SpanningTree,
                             solve_linear)

LINEAR = Power(1.0)


# ---------------------------------------------------------------------------
# cooperative matching


@dataclass
class CorrespondenceInstance:
    points_a: np.ndarray            # (n, 2)
    points_b: np.ndarray            # (n, 2)
    truth: np.ndarray               # truth[a] = index in points_b of a's partner
    n_clusters: int
    clusters_a: np.ndarray
    clusters_b: np.ndarray
    edges: list[tuple[int, int]]    # ground set: edge e joins a-point edges[e][0] to b-point edges[e][1]
    weights: np.ndarray             # modular match cost per edge
    groups: list[np.ndarray]        # edge indices of each discounted group
    residual: np.ndarray            # edge indices charged linearly
    cost: CooperativeCost
    constraint: BipartiteMatching
    seed: int | None = None

    def accuracy(self, chosen) -> float:
        hits = sum(1 for e in chosen if self.truth[self.edges[e][0]] == self.edges[e][1])
        return hits / len(self.truth)


def _kmeans(points, k, rng):
    if k == 1:
        return np.zeros(len(points), dtype=int)
    _, labels = kmeans2(points, k, minit="++", seed=rng)
    return labels.astype(int)


def gen_correspondence(n: int = 30, k: int = 3, noise: float = 1.2, outlier_fraction: float = 0.1,
                       seed: int = 0, psi: ConcaveSpec = Power(0.5), spread: float = 6.0, jitter: float = 0.2,
                       templates: int | None = None, distinctness: float = 0.3, descriptor_dim: int = 8,
                       position_weight: float = 0.0, unit: float = 1.0,
                       extent: float = 100.0) -> CorrespondenceInstance:
    """Two noisy views of k clusters of keypoints with a known correspondence.

    Each keypoint has a position and a descriptor.  Descriptors are drawn
    from a small pool of shared templates plus a ``distinctness``-sized
    individual part, so look-alike keypoints recur across clusters.  Cluster
    centres sit evenly on a circle.  View b is a shuffled copy with
    descriptor noise ``noise * distinctness`` and position noise
    ``noise * jitter * spread``.  An ``outlier_fraction`` of points get a
    fresh random position and descriptor.  The match cost of an edge is the
    descriptor distance plus ``position_weight`` times the position distance,
    rescaled so the mean edge cost is ``unit``.

    Edge groups come from a first-pass minimum matching.  Count how often
    each (cluster in a, cluster in b) pair occurs in it.  The k most frequent
    pairs each become a concave-discounted group holding every edge between
    those two clusters.  All remaining edges are charged linearly.
    """
    if not (n >= k >= 1):
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if noise < 0 or not 0 <= outlier_fraction <= 1 or spread <= 0 or distinctness <= 0:
        raise ValueError("need noise >= 0, spread > 0, distinctness > 0 and outlier_fraction in [0, 1]")
    rng = np.random.default_rng(seed)
    templates = templates or max(1, n // k)
    pool = rng.normal(0, 1, size=(templates, descriptor_dim))
    angles = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.arange(k) / k
    centers = extent * (0.5 + 0.3 * np.column_stack([np.cos(angles), np.sin(angles)]))
    member = rng.integers(0, k, size=n)
    pts_a = centers[member] + rng.normal(0, spread, size=(n, 2))
    desc_a = pool[rng.integers(0, templates, size=n)] + rng.normal(0, distinctness, size=(n, descriptor_dim))
    truth = rng.permutation(n)
    pts_b = np.empty_like(pts_a)
    desc_b = np.empty_like(desc_a)
    pts_b[truth] = pts_a + rng.normal(0, noise * jitter * spread, size=(n, 2))
    desc_b[truth] = desc_a + rng.normal(0, noise * distinctness, size=desc_a.shape)
    n_out = int(round(outlier_fraction * n))
    if n_out:
        moved = truth[rng.choice(n, size=n_out, replace=False)]
        pts_b[moved] = rng.uniform(0, extent, size=(n_out, 2))
        desc_b[moved] = pool[rng.integers(0, templates, size=n_out)] + rng.normal(
            0, distinctness, size=(n_out, descriptor_dim))

    cost_matrix = cdist(desc_a, desc_b) + position_weight * cdist(pts_a, pts_b)
    cost_matrix *= unit / cost_matrix.mean()
    clusters_a = _kmeans(pts_a, k, rng)
    clusters_b = _kmeans(pts_b, k, rng)
    edges = [(a, b) for a in range(n) for b in range(n)]
    weights = cost_matrix.ravel().copy()

    rows, cols = linear_sum_assignment(cost_matrix)
    pairs = Counter((int(clusters_a[a]), int(clusters_b[b])) for a, b in zip(rows, cols))
    top = sorted(pairs, key=lambda p: (-pairs[p], p))[:k]
    pair_of_edge = clusters_a[:, None] * k + clusters_b[None, :]
    flat = pair_of_edge.ravel()
    groups = [np.flatnonzero(flat == l * k + s) for l, s in top]
    in_group = np.zeros(len(edges), dtype=bool)
    for grp in groups:
        in_group[grp] = True
    residual = np.flatnonzero(~in_group)

    comps = []
    for grp in groups:
        w = np.zeros(len(edges))
        w[grp] = weights[grp]
        comps.append((psi, w))
    if len(residual):
        w = np.zeros(len(edges))
        w[residual] = weights[residual]
        comps.append((LINEAR, w))
    cost = CooperativeCost(comps)
    constraint = BipartiteMatching(n, n, edges)
    return CorrespondenceInstance(pts_a, pts_b, truth, k, clusters_a, clusters_b, edges, weights,
                                  groups, residual, cost, constraint, seed)


@dataclass
class ComparisonRecord:
    experiment: str
    seed: int | None
    rows: dict = field(default_factory=dict)   # algorithm -> metrics


def run_matching_experiment(inst: CorrespondenceInstance, epsilon: float = 0.25,
                            workers: int = 1) -> ComparisonRecord:
    """PLA, SGA and the modular baseline on the perfect-matching problem.

    PLA also scores the modular solution, so it is never worse than the
    baseline under the cooperative cost.
    """
    f, c = inst.cost, inst.constraint
    mod = solve_linear(c, inst.weights).chosen
    pla = pla_solve(1, f, epsilon, constraint=c, extra_candidates=[mod], workers=workers)
    sga = sga_solve(1, f, constraint=c)
    rec = ComparisonRecord("matching", inst.seed)
    for name, X, extra in (("pla", pla.chosen, {"pieces": pla.pieces_total, "time": pla.wall_time}),
                           ("sga", sga.chosen, {"iterations": len(sga.history), "time": sga.wall_time}),
                           ("mod", mod, {})):
        rec.rows[name] = {"f": f(X), "accuracy": inst.accuracy(X), "size": len(X), **extra}
    return rec


# ---------------------------------------------------------------------------
# sensor placement


def default_sensor_cost(scale: float = 1.0) -> ExplicitPL:
    """Concave staircase of slopes 1, 0.6, 0.3, 0.1 with knees at 2, 4, 7 (times ``scale``)."""
    knees = np.array([2.0, 4.0, 7.0]) * scale
    slopes = [1.0, 0.6, 0.3, 0.1]
    pts = [(0.0, 0.0)]
    for x, s in zip(knees, slopes):
        pts.append((float(x), pts[-1][1] + s * (float(x) - pts[-1][0])))
    pts.append((float(knees[-1] * 2), pts[-1][1] + slopes[-1] * float(knees[-1])))
    return ExplicitPL(tuple(pts))


@dataclass
class SensorInstance:
    locations: np.ndarray         # (n, 2)
    types: np.ndarray             # group of each location
    base_costs: np.ndarray
    psis: list[ConcaveSpec]
    g: SetFunction
    budget: float
    cost: CooperativeCost
    seed: int | None = None


def gen_sensor(n: int = 40, k: int = 3, seed: int = 0, budget_fraction: float = 0.25,
               bandwidth: float = 0.2, psis: list[ConcaveSpec] | None = None,
               cost_range: tuple[float, float] = (0.3, 1.7), budget: float | None = None) -> SensorInstance:
    """Random placement problem with grouped concave discounts.

    Locations are uniform in the unit square and split into k types.  Within
    a type the placement cost is a concave function of the summed base costs,
    so buying more of one type gets cheaper.  The coverage oracle is facility
    location over an RBF similarity between locations.  The budget defaults
    to ``budget_fraction`` of the cost of placing everything.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    rng = np.random.default_rng(seed)
    locations = rng.random((n, 2))
    types = np.arange(n) % k
    rng.shuffle(types)
    base = rng.uniform(*cost_range, size=n)
    if psis is None:
        psis = [default_sensor_cost() for _ in range(k)]
    if len(psis) != k:
        raise ValueError(f"need {k} concave specs, got {len(psis)}")
    comps = []
    for i in range(k):
        w = np.where(types == i, base, 0.0)
        comps.append((psis[i], w))
    cost = CooperativeCost(comps)
    sim = np.exp(-cdist(locations, locations, "sqeuclidean") / (2 * bandwidth ** 2))
    g = FacilityLocation(sim)
    if budget is None:
        budget = budget_fraction * cost(range(n))
    return SensorInstance(locations, types, base, list(psis), g, float(budget), cost, seed)


def agnostic_greedy(g: SetFunction, f: SetFunction, budget: float) -> tuple[int, ...]:
    """Greedy on g alone: add the largest-gain element whose addition keeps f <= budget.

    Ties go to the lowest index; the run ends when no remaining element fits
    or no fitting element has positive gain.
    """
    X: list[int] = []
    rest = list(range(g.n))
    while rest:
        fits = [j for j in rest if f(X + [j]) <= budget]
        if not fits:
            break
        gains = g.gains(X, fits)
        best = int(np.argmax(gains))
        if gains[best] <= 0:
            break
        X.append(fits[best])
        rest.remove(fits[best])
    return as_sorted_tuple(X)


def run_sensor_experiment(inst: SensorInstance, epsilon: float = 0.1,
                          partial_enumeration: int | None = None) -> ComparisonRecord:
    """PLA and SGA on budgeted coverage, against the cost-agnostic greedy."""
    f, g, b = inst.cost, inst.g, inst.budget
    pla = pla_solve(3, f, epsilon, g=g, budget=b, partial_enumeration=partial_enumeration)
    sga = sga_solve(3, f, g=g, budget=b, partial_enumeration=partial_enumeration)
    ag = agnostic_greedy(g, f, b)
    plc_value = pla.flags["surrogate_cost"]
    rec = ComparisonRecord("sensor", inst.seed)
    rec.rows["pla"] = {"g": pla.g_value, "f": pla.objective, "f_pl": plc_value, "size": len(pla.chosen),
                       "exact_surrogate": pla.guarantee.get("sigma") == 1.0}
    rec.rows["sga"] = {"g": sga.g_value, "f": sga.objective, "size": len(sga.chosen)}
    rec.rows["ag"] = {"g": g(ag), "f": f(ag), "size": len(ag)}
    for name in ("pla", "sga", "ag"):
        rec.rows[name]["budget"] = b
    return rec


# ---------------------------------------------------------------------------
# random instances for the four problems


def epsilon_for_pieces(l: float, u: float, pieces: int, growth_exponent: float = 1.0) -> float:
    """Smallest epsilon whose geometric grid spans [l, u] with at most ``pieces`` pieces."""
    if pieces < 2 or u <= l:
        raise ValueError("need pieces >= 2 and u > l")
    eps_prime = math.expm1(math.log(u / l) / (pieces - 1))
    return math.expm1(growth_exponent * math.log1p(eps_prime))


def random_spec(rng: np.random.Generator, family: str | None = None) -> ConcaveSpec:
    family = family or ["power", "log1p", "truncation"][int(rng.integers(3))]
    if family == "power":
        return Power(float(rng.uniform(0.3, 0.9)))
    if family == "log1p":
        return Log1p(float(rng.uniform(0.5, 2.0)))
    if family == "truncation":
        return Truncation(float(rng.uniform(0.5, 3.0)))
    if family == "explicit":
        return default_sensor_cost(float(rng.uniform(0.3, 1.0)))
    if family == "identity":
        return LINEAR
    raise ValueError(f"unknown concave family {family!r}")


def random_cost(rng: np.random.Generator, n: int, k: int, family: str | None = None,
                low: float = 0.3, high: float = 1.0, density: float = 1.0) -> CooperativeCost:
    comps = []
    for _ in range(k):
        w = rng.uniform(low, high, n)
        if density < 1:
            w = w * (rng.random(n) < density)
            if not w.any():
                w[int(rng.integers(n))] = high
        comps.append((random_spec(rng, family), w))
    return CooperativeCost(comps)


def _with_extras(rng, required, candidates, p, max_edges):
    """Required edges plus a random subset of ``candidates`` (each kept with probability p)."""
    chosen = set(required)
    extras = [e for e in candidates if e not in chosen and rng.random() < p]
    rng.shuffle(extras)
    room = max(0, max_edges - len(chosen))
    chosen.update(tuple(e) for e in extras[:room])
    return sorted(chosen)


def random_constraint(rng: np.random.Generator, kind: str, size: int, max_edges: int = 20) -> ConstraintSpec:
    """Random constraint whose ground set is derived from ``size``.

    cardinality: ``size`` elements.  matching: a size x size bipartite graph
    containing a planted perfect matching.  path: a digraph on ``size``
    vertices containing a planted route from 0 to size-1.  tree: a connected
    graph on ``size`` vertices.  Graphs keep at most ``max_edges`` edges.
    """
    if kind == "cardinality":
        return CardinalityLB(int(rng.integers(1, size + 1)), size)
    if kind == "matching":
        perm = rng.permutation(size)
        planted = [(a, int(perm[a])) for a in range(size)]
        pairs = [(a, b) for a in range(size) for b in range(size)]
        return BipartiteMatching(size, size, _with_extras(rng, planted, pairs, 0.35, max_edges))
    if kind == "path":
        order = [0] + [int(v) for v in rng.permutation(np.arange(1, size - 1))] + [size - 1]
        planted = [(order[i], order[i + 1]) for i in range(size - 1)]
        pairs = [(u, v) for u in range(size) for v in range(size) if u != v]
        return ShortestPath(size, _with_extras(rng, planted, pairs, 0.25, max_edges), 0, size - 1)
    if kind == "tree":
        planted = [(int(rng.integers(v)), v) for v in range(1, size)]
        pairs = [(u, v) for u in range(size) for v in range(u + 1, size)]
        return SpanningTree(size, _with_extras(rng, planted, pairs, 0.2, max_edges))
    raise ValueError(f"unknown constraint kind {kind!r}")


def random_oracle(rng: np.random.Generator, n: int, kind: str = "facility") -> SetFunction:
    if kind == "facility":
        return FacilityLocation(rng.random((max(3, n // 2), n)))
    if kind == "coverage":
        return WeightedCoverage(rng.random((n, 2 * n)) < 0.2, rng.uniform(0.5, 2.0, 2 * n))
    raise ValueError(f"unknown oracle kind {kind!r}")


def summarize(records) -> dict:
    """Per-algorithm means plus head-to-head win rates on the primary objective."""
    if not records:
        return {}
    kind = records[0].experiment
    primary, lower_better = ("f", True) if kind == "matching" else ("g", False)
    algos = list(records[0].rows)
    out = {"experiment": kind, "seeds": len(records), "means": {}}
    for a in algos:
        keys = [m for m in records[0].rows[a] if isinstance(records[0].rows[a][m], (int, float))]
        out["means"][a] = {m: float(np.mean([r.rows[a][m] for r in records])) for m in keys}
    wins = {}
    for a in algos:
        for b in algos:
            if a == b:
                continue
            va = np.array([r.rows[a][primary] for r in records])
            vb = np.array([r.rows[b][primary] for r in records])
            tol = 1e-9 * np.maximum(1.0, np.abs(vb))
            ok = va <= vb + tol if lower_better else va >= vb - tol
            wins[f"{a}_vs_{b}"] = float(ok.mean())
    out["win_rate"] = wins
    a, b = algos[0], algos[1]
    out["mean_gap"] = {f"{a}_minus_{b}": float(np.mean([r.rows[a][primary] - r.rows[b][primary] for r in records]))}
    return out
