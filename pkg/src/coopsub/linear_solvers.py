"""Exact minimisers of modular costs over combinatorial families.

Each constraint owns a ground set (elements for cardinality, edges/arcs for
the graph families).  ``solve_linear`` returns an exact minimum-weight
feasible set, ``solve_linear_max`` the maximum where that is tractable.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import as_index_array, as_sorted_tuple


class InfeasibleError(ValueError):
    """The constraint family (or a subproblem) has no feasible set."""


class ConstraintSpec:
    n: int  # ground-set size

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CardinalityLB(ConstraintSpec):
    """All subsets with at least ``m`` of the ``size`` elements."""

    m: int
    size: int

    def __post_init__(self):
        if self.size < 1 or self.m < 0:
            raise ValueError("CardinalityLB needs size >= 1 and m >= 0")

    @property
    def n(self):
        return self.size

    def to_dict(self):
        return {"type": "cardinality", "m": self.m, "size": self.size}


def _check_simple(edges, directed):
    seen = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)


@dataclass(frozen=True)
class BipartiteMatching(ConstraintSpec):
    """Matchings in a bipartite graph; ground set = ``edges`` (left, right).

    ``mode='perfect'`` asks for matchings saturating the smaller side,
    ``mode='maximum'`` for matchings of maximum cardinality.
    """

    n_left: int
    n_right: int
    edges: tuple[tuple[int, int], ...]
    mode: str = "perfect"

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        if self.mode not in ("perfect", "maximum"):
            raise ValueError(f"unknown matching mode {self.mode!r}")
        seen = set()
        for a, b in self.edges:
            if not (0 <= a < self.n_left and 0 <= b < self.n_right):
                raise ValueError(f"edge {(a, b)} out of range")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge {(a, b)}")
            seen.add((a, b))

    @property
    def n(self):
        return len(self.edges)

    @property
    def target_size(self):
        return min(self.n_left, self.n_right)

    def to_dict(self):
        return {"type": "bipartite_matching", "n_left": self.n_left, "n_right": self.n_right,
                "edges": [list(e) for e in self.edges], "mode": self.mode}


@dataclass(frozen=True)
class ShortestPath(ConstraintSpec):
    """Simple directed source-target paths; ground set = ``arcs``."""

    n_vertices: int
    arcs: tuple[tuple[int, int], ...]
    source: int
    target: int

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple((int(a), int(b)) for a, b in self.arcs))
        _check_simple(self.arcs, directed=True)
        if self.source == self.target:
            raise ValueError("source and target must differ")
        for a, b in self.arcs:
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise ValueError(f"arc {(a, b)} out of range")

    @property
    def n(self):
        return len(self.arcs)

    def to_dict(self):
        return {"type": "shortest_path", "n_vertices": self.n_vertices,
                "arcs": [list(a) for a in self.arcs], "source": self.source, "target": self.target}


@dataclass(frozen=True)
class SpanningTree(ConstraintSpec):
    """Spanning trees of an undirected graph; ground set = ``edges``."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        _check_simple(self.edges, directed=False)
        for a, b in self.edges:
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise ValueError(f"edge {(a, b)} out of range")

    @property
    def n(self):
        return len(self.edges)

    def to_dict(self):
        return {"type": "spanning_tree", "n_vertices": self.n_vertices,
                "edges": [list(e) for e in self.edges]}


def constraint_from_dict(d: dict) -> ConstraintSpec:
    kind = d["type"]
    if kind == "cardinality":
        return CardinalityLB(d["m"], d["size"])
    if kind == "bipartite_matching":
        return BipartiteMatching(d["n_left"], d["n_right"], tuple(map(tuple, d["edges"])), d.get("mode", "perfect"))
    if kind == "shortest_path":
        return ShortestPath(d["n_vertices"], tuple(map(tuple, d["arcs"])), d["source"], d["target"])
    if kind == "spanning_tree":
        return SpanningTree(d["n_vertices"], tuple(map(tuple, d["edges"])))
    raise ValueError(f"unknown constraint type {kind!r}")


@dataclass
class LinearSolveResult:
    chosen: tuple[int, ...]
    objective: float
    witness: object = None


# ---------------------------------------------------------------------------
# union-find


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


# ---------------------------------------------------------------------------
# solvers


def _weights(constraint, weights):
    w = np.asarray(weights, dtype=float)
    if w.shape != (constraint.n,):
        raise ValueError(f"weight vector has shape {w.shape}, constraint ground set has {constraint.n} elements")
    return w


def _result(w, chosen, witness=None):
    chosen = as_sorted_tuple(chosen)
    return LinearSolveResult(chosen, math.fsum(w[list(chosen)]), witness)


def _matching(c: BipartiteMatching, w: np.ndarray, maximize: bool):
    size = c.target_size
    if size == 0:
        return _result(w, (), [])
    index = {e: i for i, e in enumerate(c.edges)}
    if c.mode == "perfect":
        fill = -np.inf if maximize else np.inf
        C = np.full((c.n_left, c.n_right), fill)
        for (a, b), x in zip(c.edges, w):
            C[a, b] = x
        try:
            rows, cols = linear_sum_assignment(C, maximize=maximize)
        except ValueError:
            raise InfeasibleError(f"bipartite graph {c.n_left}x{c.n_right} has no perfect matching") from None
        pairs = list(zip(rows.tolist(), cols.tolist()))
    else:
        # missing edges priced so that any real edge beats any dummy pair
        big = 1.0 + 2.0 * float(np.abs(w).sum())
        C = np.full((c.n_left, c.n_right), -big if maximize else big)
        for (a, b), x in zip(c.edges, w):
            C[a, b] = x
        rows, cols = linear_sum_assignment(C, maximize=maximize)
        pairs = [(a, b) for a, b in zip(rows.tolist(), cols.tolist()) if (a, b) in index]
    chosen = [index[p] for p in pairs]
    return _result(w, chosen, sorted(pairs))


def _dijkstra(c: ShortestPath, w: np.ndarray):
    adj = [[] for _ in range(c.n_vertices)]
    for i, (a, b) in enumerate(c.arcs):
        adj[a].append((b, i))
    dist = [math.inf] * c.n_vertices
    pred = [-1] * c.n_vertices
    dist[c.source] = 0.0
    heap = [(0.0, c.source)]
    done = [False] * c.n_vertices
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        if v == c.target:
            break
        for b, i in adj[v]:
            nd = d + w[i]
            if nd < dist[b]:
                dist[b] = nd
                pred[b] = i
                heapq.heappush(heap, (nd, b))
    if not done[c.target]:
        raise InfeasibleError(f"target {c.target} unreachable from source {c.source}")
    chosen, v = [], c.target
    verts = [v]
    while v != c.source:
        i = pred[v]
        chosen.append(i)
        v = c.arcs[i][0]
        verts.append(v)
    return _result(w, chosen, verts[::-1])


def _kruskal(c: SpanningTree, w: np.ndarray, maximize: bool):
    order = sorted(range(c.n), key=lambda i: (-w[i] if maximize else w[i], i))
    uf = UnionFind(c.n_vertices)
    chosen = []
    for i in order:
        a, b = c.edges[i]
        if uf.union(a, b):
            chosen.append(i)
            if len(chosen) == c.n_vertices - 1:
                break
    if len(chosen) != c.n_vertices - 1:
        raise InfeasibleError(f"graph on {c.n_vertices} vertices is disconnected; no spanning tree")
    return _result(w, chosen, [c.edges[i] for i in sorted(chosen)])


def solve_linear(constraint: ConstraintSpec, weights) -> LinearSolveResult:
    """Exact minimum-weight member of the constraint family (weights >= 0)."""
    w = _weights(constraint, weights)
    if np.any(w < 0):
        raise ValueError("solve_linear expects nonnegative weights")
    if isinstance(constraint, CardinalityLB):
        if constraint.m > constraint.n:
            raise InfeasibleError(f"cardinality bound m={constraint.m} exceeds n={constraint.n}")
        chosen = np.argsort(w, kind="stable")[: constraint.m]
        return _result(w, chosen.tolist(), constraint.m)
    if isinstance(constraint, BipartiteMatching):
        return _matching(constraint, w, maximize=False)
    if isinstance(constraint, ShortestPath):
        return _dijkstra(constraint, w)
    if isinstance(constraint, SpanningTree):
        return _kruskal(constraint, w, maximize=False)
    raise TypeError(f"unsupported constraint {type(constraint).__name__}")


def solve_linear_batch(constraint: ConstraintSpec, weight_rows: np.ndarray) -> list[tuple[int, ...]]:
    """Chosen sets for many weight vectors at once (rows of ``weight_rows``)."""
    if isinstance(constraint, CardinalityLB):
        if constraint.m > constraint.n:
            raise InfeasibleError(f"cardinality bound m={constraint.m} exceeds n={constraint.n}")
        order = np.sort(np.argsort(weight_rows, axis=1, kind="stable")[:, : constraint.m], axis=1)
        return [tuple(row) for row in order.tolist()]
    return [solve_linear(constraint, row).chosen for row in weight_rows]


UNSUPPORTED = None


def solve_linear_max(constraint: ConstraintSpec, weights) -> LinearSolveResult | None:
    """Maximum-weight member of the family, or ``None`` when not tractable (paths)."""
    w = _weights(constraint, weights)
    if isinstance(constraint, CardinalityLB):
        if constraint.m > constraint.n:
            raise InfeasibleError(f"cardinality bound m={constraint.m} exceeds n={constraint.n}")
        return _result(w, range(constraint.n), constraint.n)
    if isinstance(constraint, BipartiteMatching):
        return _matching(constraint, w, maximize=True)
    if isinstance(constraint, SpanningTree):
        return _kruskal(constraint, w, maximize=True)
    return UNSUPPORTED


# ---------------------------------------------------------------------------
# feasibility and enumeration


def check_feasible(constraint: ConstraintSpec, X: Iterable[int]) -> bool:
    X = as_sorted_tuple(X)
    if len(set(X)) != len(X) or any(not 0 <= x < constraint.n for x in X):
        return False
    if isinstance(constraint, CardinalityLB):
        return len(X) >= constraint.m
    if isinstance(constraint, BipartiteMatching):
        pairs = [constraint.edges[i] for i in X]
        if len({a for a, _ in pairs}) != len(pairs) or len({b for _, b in pairs}) != len(pairs):
            return False
        if constraint.mode == "perfect":
            return len(pairs) == constraint.target_size
        return len(pairs) == _max_matching_size(constraint)
    if isinstance(constraint, ShortestPath):
        out = {}
        for i in X:
            a, b = constraint.arcs[i]
            if a in out:
                return False
            out[a] = b
        v, steps, seen = constraint.source, 0, {constraint.source}
        while v != constraint.target:
            if v not in out:
                return False
            v = out[v]
            if v in seen:
                return False
            seen.add(v)
            steps += 1
        return steps == len(X)
    if isinstance(constraint, SpanningTree):
        if len(X) != constraint.n_vertices - 1:
            return False
        uf = UnionFind(constraint.n_vertices)
        return all(uf.union(*constraint.edges[i]) for i in X)
    raise TypeError(f"unsupported constraint {type(constraint).__name__}")


def _max_matching_size(c: BipartiteMatching) -> int:
    return len(_matching(c, np.zeros(c.n), maximize=False).chosen)


def enumerate_feasible(constraint: ConstraintSpec) -> Iterator[tuple[int, ...]]:
    """Every member of the family as a sorted tuple (small instances only)."""
    if isinstance(constraint, CardinalityLB):
        for r in range(constraint.m, constraint.n + 1):
            yield from itertools.combinations(range(constraint.n), r)
        return
    if isinstance(constraint, BipartiteMatching):
        target = constraint.target_size if constraint.mode == "perfect" else _max_matching_size(constraint)
        by_left = [[] for _ in range(constraint.n_left)]
        for i, (a, b) in enumerate(constraint.edges):
            by_left[a].append((b, i))

        def rec(a, used, chosen):
            remaining = constraint.n_left - a
            if len(chosen) + remaining < target:
                return
            if a == constraint.n_left:
                if len(chosen) == target:
                    yield as_sorted_tuple(chosen)
                return
            if len(chosen) < target:
                for b, i in by_left[a]:
                    if b not in used:
                        yield from rec(a + 1, used | {b}, chosen + [i])
            yield from rec(a + 1, used, chosen)

        yield from rec(0, frozenset(), [])
        return
    if isinstance(constraint, ShortestPath):
        adj = [[] for _ in range(constraint.n_vertices)]
        for i, (a, b) in enumerate(constraint.arcs):
            adj[a].append((b, i))

        def dfs(v, seen, chosen):
            if v == constraint.target:
                yield as_sorted_tuple(chosen)
                return
            for b, i in adj[v]:
                if b not in seen:
                    yield from dfs(b, seen | {b}, chosen + [i])

        yield from dfs(constraint.source, frozenset([constraint.source]), [])
        return
    if isinstance(constraint, SpanningTree):
        need = constraint.n_vertices - 1
        edges = constraint.edges
        m = len(edges)

        def grow(i, label, chosen):
            # include/exclude edges in index order; an edge closing a cycle is never included
            if len(chosen) == need:
                yield tuple(chosen)
                return
            if m - i < need - len(chosen):
                return
            a, b = edges[i]
            la, lb = label[a], label[b]
            if la != lb:
                merged = tuple(la if x == lb else x for x in label)
                yield from grow(i + 1, merged, chosen + [i])
            yield from grow(i + 1, label, chosen)

        if need == 0:
            yield ()
        else:
            yield from grow(0, tuple(range(constraint.n_vertices)), [])
        return
    raise TypeError(f"unsupported constraint {type(constraint).__name__}")


def subset_indicator(n: int, X: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[as_index_array(X)] = True
    return mask
