"""Set functions: concave-over-modular costs and monotone submodular oracles.

Subsets are passed around as iterables of integer element indices.  Every
set function exposes ``f(X)``, ``f.gain(X, j)`` and a vectorised
``f.gains(X, candidates)`` used by the greedy solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class PreconditionError(ValueError):
    pass


class DegenerateInstanceError(ValueError):
    pass


def as_index_array(X: Iterable[int]) -> np.ndarray:
    if isinstance(X, np.ndarray) and X.dtype.kind in "iu":
        return X
    return np.fromiter((int(x) for x in X), dtype=np.int64)


def as_sorted_tuple(X: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(int(x) for x in X))


@dataclass(frozen=True)
class GroundSet:
    n: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ground set needs n >= 1")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError(f"labels has length {len(self.labels)}, expected {self.n}")


# ---------------------------------------------------------------------------
# concave scalar functions


class ConcaveSpec:
    """Monotone concave psi with psi(0) = 0.

    ``growth_exponent`` is a constant c with psi(k y) <= k**c psi(y) for k >= 1.
    """

    growth_exponent: float = 1.0

    def __call__(self, y):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Power(ConcaveSpec):
    exponent: float

    def __post_init__(self):
        if not 0 < self.exponent <= 1:
            raise ValueError(f"Power exponent must lie in (0, 1], got {self.exponent}")

    @property
    def growth_exponent(self) -> float:
        return self.exponent

    def __call__(self, y):
        if self.exponent == 1.0:
            return np.asarray(y, dtype=float) * 1.0
        return np.power(np.asarray(y, dtype=float), self.exponent)

    def to_dict(self):
        return {"type": "power", "exponent": self.exponent}


@dataclass(frozen=True)
class Log1p(ConcaveSpec):
    scale: float = 1.0
    growth_exponent = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"Log1p scale must be positive, got {self.scale}")

    def __call__(self, y):
        return np.log1p(self.scale * np.asarray(y, dtype=float))

    def to_dict(self):
        return {"type": "log1p", "scale": self.scale}


@dataclass(frozen=True)
class Truncation(ConcaveSpec):
    cap: float
    growth_exponent = 1.0

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError(f"Truncation cap must be positive, got {self.cap}")

    def __call__(self, y):
        return np.minimum(np.asarray(y, dtype=float), self.cap)

    def to_dict(self):
        return {"type": "truncation", "cap": self.cap}


@dataclass(frozen=True)
class ExplicitPL(ConcaveSpec):
    """Piecewise-linear concave function through ``points``.

    The first point must be (0, 0).  Past the last point the final segment is
    extended linearly; repeat the last value to get a flat tail.
    """

    points: tuple[tuple[float, float], ...]
    growth_exponent = 1.0

    def __post_init__(self):
        pts = tuple((float(x), float(v)) for x, v in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValueError("ExplicitPL needs at least two points")
        if pts[0] != (0.0, 0.0):
            raise ValueError("ExplicitPL must start at (0, 0)")
        xs = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts])
        if np.any(np.diff(xs) <= 0):
            raise ValueError("ExplicitPL breakpoints must be strictly increasing")
        slopes = np.diff(vs) / np.diff(xs)
        if np.any(slopes < 0):
            raise ValueError("ExplicitPL must be nondecreasing")
        if np.any(np.diff(slopes) > 1e-12 * max(1.0, float(np.max(slopes)))):
            raise ValueError("ExplicitPL must be concave (slopes nonincreasing)")

    @property
    def knees(self) -> np.ndarray:
        return np.array([p[0] for p in self.points[1:]])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        xs = np.array([p[0] for p in self.points])
        vs = np.array([p[1] for p in self.points])
        out = np.interp(y, xs, vs)
        tail_slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
        return np.where(y > xs[-1], vs[-1] + tail_slope * (y - xs[-1]), out)

    def to_dict(self):
        return {"type": "explicit_pl", "points": [list(p) for p in self.points]}


def concave_from_dict(d: dict) -> ConcaveSpec:
    kind = d["type"]
    if kind == "power":
        return Power(d["exponent"])
    if kind == "log1p":
        return Log1p(d.get("scale", 1.0))
    if kind == "truncation":
        return Truncation(d["cap"])
    if kind == "explicit_pl":
        return ExplicitPL(tuple(tuple(p) for p in d["points"]))
    raise ValueError(f"unknown concave type {kind!r}")


# ---------------------------------------------------------------------------
# set functions


class SetFunction:
    """Base class for normalised set functions over {0, ..., n-1}."""

    n: int

    def __call__(self, X: Iterable[int]) -> float:
        raise NotImplementedError

    def gain(self, X: Iterable[int], j: int) -> float:
        X = as_index_array(X)
        if j in set(X.tolist()):
            raise PreconditionError(f"element {j} is already in the set")
        return float(self.gains(X, np.array([j]))[0])

    def gains(self, X: Iterable[int], candidates: Sequence[int]) -> np.ndarray:
        X = list(as_index_array(X))
        base = self(X)
        return np.array([self(X + [int(j)]) - base for j in candidates], dtype=float)

    def evaluate_masks(self, masks: np.ndarray) -> np.ndarray:
        """Values on a (m, n) boolean array of subsets."""
        return np.array([self(np.flatnonzero(row)) for row in masks], dtype=float)


class CooperativeCost(SetFunction):
    """f(X) = sum_i psi_i(w_i(X)) with nonnegative weight vectors w_i."""

    def __init__(self, components: Sequence[tuple[ConcaveSpec, Sequence[float]]]):
        if len(components) < 1:
            raise ValueError("need at least one component")
        self.specs = tuple(spec for spec, _ in components)
        W = np.array([np.asarray(w, dtype=float) for _, w in components])
        if W.ndim != 2:
            raise ValueError("weight vectors must all have the same length")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite and nonnegative")
        W.setflags(write=False)
        self.W = W
        self.n = W.shape[1]

    @property
    def k(self) -> int:
        return len(self.specs)

    @property
    def components(self):
        return list(zip(self.specs, self.W))

    def loads(self, X: Iterable[int]) -> np.ndarray:
        idx = as_index_array(X)
        return np.array([math.fsum(row[idx]) for row in self.W])

    def apply(self, loads: np.ndarray) -> float:
        return math.fsum(float(spec(y)) for spec, y in zip(self.specs, loads))

    def __call__(self, X):
        return self.apply(self.loads(X))

    def gains(self, X, candidates):
        loads = self.loads(X)
        cand = as_index_array(candidates)
        base = np.array([spec(y) for spec, y in zip(self.specs, loads)])
        new = np.array([spec(y + self.W[i, cand]) for i, (spec, y) in enumerate(zip(self.specs, loads))])
        return (new - base[:, None]).sum(axis=0)

    def evaluate_masks(self, masks):
        Y = np.asarray(masks, dtype=float) @ self.W.T
        return sum(spec(Y[:, i]) for i, spec in enumerate(self.specs))

    def to_dict(self):
        return {"components": [{"concave": s.to_dict(), "weights": w.tolist()} for s, w in self.components]}

    def __eq__(self, other):
        return isinstance(other, CooperativeCost) and self.specs == other.specs and np.array_equal(self.W, other.W)

    __hash__ = None


def eval_cost(f: SetFunction, X: Iterable[int]) -> float:
    return f(X)


def marginal_gain(f: SetFunction, X: Iterable[int], j: int) -> float:
    return f.gain(X, j)


class FacilityLocation(SetFunction):
    """g(X) = sum_v max_{j in X} S[v, j] for a nonnegative similarity matrix."""

    def __init__(self, similarity):
        S = np.asarray(similarity, dtype=float)
        if S.ndim != 2 or np.any(S < 0):
            raise ValueError("similarity must be a nonnegative 2-D array")
        S.setflags(write=False)
        self.S = S
        self.n = S.shape[1]

    def _cover(self, idx):
        if len(idx) == 0:
            return np.zeros(self.S.shape[0])
        return self.S[:, idx].max(axis=1)

    def __call__(self, X):
        return float(self._cover(as_index_array(X)).sum())

    def gains(self, X, candidates):
        cur = self._cover(as_index_array(X))
        cand = as_index_array(candidates)
        return np.maximum(self.S[:, cand] - cur[:, None], 0.0).sum(axis=0)

    def to_dict(self):
        return {"type": "facility_location", "similarity": self.S.tolist()}


class WeightedCoverage(SetFunction):
    """g(X) = total weight of concepts touched by X."""

    def __init__(self, incidence, weights):
        B = np.asarray(incidence, dtype=bool)
        w = np.asarray(weights, dtype=float)
        if B.ndim != 2 or B.shape[1] != len(w) or np.any(w < 0):
            raise ValueError("incidence must be (n, m) with m nonnegative concept weights")
        B.setflags(write=False)
        w.setflags(write=False)
        self.B, self.concept_weights = B, w
        self.n = B.shape[0]

    def _covered(self, idx):
        if len(idx) == 0:
            return np.zeros(self.B.shape[1], dtype=bool)
        return self.B[idx].any(axis=0)

    def __call__(self, X):
        return math.fsum(self.concept_weights[self._covered(as_index_array(X))])

    def gains(self, X, candidates):
        free = ~self._covered(as_index_array(X))
        cand = as_index_array(candidates)
        return self.B[cand][:, free].astype(float) @ self.concept_weights[free]

    def to_dict(self):
        return {"type": "weighted_coverage", "incidence": self.B.astype(int).tolist(),
                "weights": self.concept_weights.tolist()}


class LogDet(SetFunction):
    """g(X) = 1/2 log det(I + K_XX / sigma2) for a PSD kernel K."""

    def __init__(self, kernel, sigma2: float = 1.0):
        K = np.asarray(kernel, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or not np.allclose(K, K.T):
            raise ValueError("kernel must be a symmetric square matrix")
        if not sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        K.setflags(write=False)
        self.K, self.sigma2 = K, float(sigma2)
        self.n = K.shape[0]

    def _chol(self, idx):
        M = np.eye(len(idx)) + self.K[np.ix_(idx, idx)] / self.sigma2
        return np.linalg.cholesky(M)

    def __call__(self, X):
        idx = as_index_array(X)
        if len(idx) == 0:
            return 0.0
        return float(np.log(np.diag(self._chol(idx))).sum())

    def gains(self, X, candidates):
        # rank-one Schur complement of I + K/sigma2
        idx = as_index_array(X)
        cand = as_index_array(candidates)
        diag = 1.0 + self.K[cand, cand] / self.sigma2
        if len(idx):
            L = np.linalg.cholesky(np.eye(len(idx)) + self.K[np.ix_(idx, idx)] / self.sigma2)
            V = np.linalg.solve(L, self.K[np.ix_(idx, cand)] / self.sigma2)
            diag = diag - (V * V).sum(axis=0)
        return 0.5 * np.log(np.maximum(diag, 1e-300))

    def to_dict(self):
        return {"type": "logdet", "kernel": self.K.tolist(), "sigma2": self.sigma2}


class CooperativeCostOracle(SetFunction):
    """Adapter exposing a CooperativeCost as a coverage oracle."""

    def __init__(self, cost: CooperativeCost):
        self.cost = cost
        self.n = cost.n

    def __call__(self, X):
        return self.cost(X)

    def gains(self, X, candidates):
        return self.cost.gains(X, candidates)

    def evaluate_masks(self, masks):
        return self.cost.evaluate_masks(masks)

    def to_dict(self):
        return {"type": "cooperative", **self.cost.to_dict()}


def cost_from_dict(d: dict) -> CooperativeCost:
    return CooperativeCost([(concave_from_dict(c["concave"]), c["weights"]) for c in d["components"]])


def oracle_from_dict(d: dict) -> SetFunction:
    kind = d["type"]
    if kind == "facility_location":
        return FacilityLocation(d["similarity"])
    if kind == "weighted_coverage":
        return WeightedCoverage(d["incidence"], d["weights"])
    if kind == "logdet":
        return LogDet(d["kernel"], d.get("sigma2", 1.0))
    if kind == "cooperative":
        return CooperativeCostOracle(cost_from_dict(d))
    raise ValueError(f"unknown oracle type {kind!r}")


def modular_sum(weights: np.ndarray, X: Iterable[int]) -> float:
    return math.fsum(np.asarray(weights)[as_index_array(X)])


# ---------------------------------------------------------------------------
# submodularity checks


@dataclass
class SubmodularityReport:
    passed: bool
    checked: int
    mode: str
    counterexample: tuple | None = None  # (S, T, j, gain_S, gain_T)
    modular: bool = False
    notes: list = field(default_factory=list)


def _all_mask_values(fn: SetFunction, n: int) -> np.ndarray:
    masks = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(bool)
    return np.asarray(fn.evaluate_masks(masks), dtype=float)


def _bits(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def check_submodularity(fn: SetFunction, trials: int | None = None, rng_seed: int = 0,
                        tol: float = 1e-9, exhaustive: bool | None = None) -> SubmodularityReport:
    """Test the diminishing-returns inequality f(j|S) >= f(j|T), S subset T, j not in T.

    Exhaustive mode (default for n <= 10) covers every triple: for each j it
    compares f(j|T) against the minimum of f(j|S) over all subsets S of T.
    Sampled mode draws ``trials`` random triples.
    """
    n = fn.n
    if exhaustive is None:
        exhaustive = n <= 10 and trials is None
    if exhaustive and n > 20:
        raise ValueError("exhaustive submodularity check needs n <= 20")
    if exhaustive:
        vals = _all_mask_values(fn, n)
        full = 2 ** n
        masks = np.arange(full)
        checked = 0
        modular = True
        for j in range(n):
            bit = 1 << j
            without = masks[(masks & bit) == 0]
            g = np.full(full, np.inf)
            g[without] = vals[without | bit] - vals[without]
            # subset-minimum transform: low[T] = min over S subset T of g[S]
            low = g.copy()
            arg = masks.copy()
            for i in range(n):
                b = 1 << i
                has = (masks & b) != 0
                src = masks[has] ^ b
                better = low[src] < low[masks[has]]
                tgt = masks[has][better]
                low[tgt] = low[src[better]]
                arg[tgt] = arg[src[better]]
            gw = g[without]
            scale = np.maximum(1.0, np.abs(gw))
            bad = gw > low[without] + tol * scale
            checked += int(sum(2 ** bin(int(t)).count("1") for t in without))
            if modular and np.any(np.abs(gw - gw[0]) > tol * scale):
                modular = False
            if np.any(bad):
                T = int(without[np.argmax(bad)])
                S = int(arg[T])
                return SubmodularityReport(False, checked, "exhaustive",
                                           (_bits(S, n), _bits(T, n), j, float(g[S]), float(g[T])))
        return SubmodularityReport(True, checked, "exhaustive", modular=modular)

    rng = np.random.default_rng(rng_seed)
    trials = 1000 if trials is None else trials
    modular = True
    for _ in range(trials):
        if n < 2:
            break
        j = int(rng.integers(n))
        others = np.array([i for i in range(n) if i != j])
        T = others[rng.random(len(others)) < rng.random()]
        S = T[rng.random(len(T)) < rng.random()]
        gS = fn.gain(S, j)
        gT = fn.gain(T, j)
        if gS < gT - tol * max(1.0, abs(gT)):
            return SubmodularityReport(False, trials, "sampled",
                                       (as_sorted_tuple(S), as_sorted_tuple(T), j, gS, gT))
        if abs(gS - gT) > tol * max(1.0, abs(gT)):
            modular = False
    return SubmodularityReport(True, trials, "sampled", modular=modular)


def enumerate_masks(n: int) -> np.ndarray:
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(bool)


def lex_subsets(n: int):
    """All subsets of range(n) in lexicographic order of their sorted tuples."""
    yield ()
    stack = [(i,) for i in reversed(range(n))]
    while stack:
        s = stack.pop()
        yield s
        stack.extend(s + (i,) for i in reversed(range(s[-1] + 1, n)))

