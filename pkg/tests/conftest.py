import itertools
import math

import networkx as nx
import numpy as np
import pytest

from coopsub.core import SetFunction
from coopsub.linear_solvers import BipartiteMatching, CardinalityLB, ShortestPath, SpanningTree


class ConvexOverModular(SetFunction):
    """y -> y**2 applied to a modular load: supermodular, used to exercise failure paths."""

    def __init__(self, weights):
        self.w = np.asarray(weights, dtype=float)
        self.n = len(self.w)

    def __call__(self, X):
        return float(self.w[list(X)].sum()) ** 2


def all_subsets(n):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)


def exhaustive_min(fn, sets):
    """Reference minimiser: plain loop over an explicit list of sets."""
    best = None
    for X in sets:
        v = fn(X)
        if best is None or v < best[1] - 1e-15:
            best = (X, v)
    return best


def independent_feasible(c, X):
    """Feasibility via networkx / plain counting, independent of the package."""
    X = list(X)
    if isinstance(c, CardinalityLB):
        return len(X) >= c.m
    if isinstance(c, BipartiteMatching):
        ends = [c.edges[e] for e in X]
        left = [a for a, _ in ends]
        right = [b for _, b in ends]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            return False
        if c.mode == "perfect":
            return len(X) == min(c.n_left, c.n_right)
        G = nx.Graph()
        G.add_nodes_from(("L", a) for a in range(c.n_left))
        G.add_nodes_from(("R", b) for b in range(c.n_right))
        G.add_edges_from((("L", a), ("R", b)) for a, b in c.edges)
        return len(X) == len(nx.max_weight_matching(G, maxcardinality=True))
    if isinstance(c, ShortestPath):
        G = nx.DiGraph()
        G.add_edges_from(c.arcs[e] for e in X)
        if c.source not in G or c.target not in G:
            return False
        if any(G.in_degree(v) > 1 or G.out_degree(v) > 1 for v in G):
            return False
        if G.in_degree(c.source) or G.out_degree(c.target):
            return False
        return nx.is_directed_acyclic_graph(G) and nx.is_weakly_connected(G) and nx.has_path(G, c.source, c.target)
    if isinstance(c, SpanningTree):
        G = nx.Graph()
        G.add_nodes_from(range(c.n_vertices))
        G.add_edges_from(c.edges[e] for e in X)
        return len(X) == c.n_vertices - 1 and nx.is_tree(G)
    raise TypeError(c)


def brute(c, w, maximize=False):
    best = None
    for X in all_subsets(c.n):
        if independent_feasible(c, X):
            v = float(np.sum(w[list(X)]))
            key = -v if maximize else v
            if best is None or key < best[0] - 1e-12:
                best = (key, X)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
