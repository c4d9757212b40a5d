"""Piecewise-linear lower envelopes of concave functions on a geometric grid.

Piece 0 is the chord from the origin to the first breakpoint; piece j >= 1
is the chord between breakpoints j-1 and j (0-based).  The envelope is the
pointwise minimum of these lines, so past the last breakpoint the final
chord extrapolates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import ConcaveSpec, CooperativeCost, ExplicitPL, as_index_array, enumerate_masks
from .linear_solvers import ConstraintSpec, solve_linear, solve_linear_max


class DegenerateComponentError(ValueError):
    """Weight vector is identically zero, so the component is the constant 0."""


@dataclass(frozen=True)
class PLEnvelope:
    breakpoints: np.ndarray
    slopes: np.ndarray      # one per piece, piece 0 first
    intercepts: np.ndarray
    epsilon_prime: float
    spec: ConcaveSpec

    @property
    def lead_slope(self) -> float:
        return float(self.slopes[0])

    @property
    def n_pieces(self) -> int:
        return len(self.slopes)

    def piece_bounds(self, j: int) -> tuple[float, float]:
        """Load interval on which piece ``j`` is the active line."""
        lo = 0.0 if j == 0 else float(self.breakpoints[j - 1])
        return lo, float(self.breakpoints[j])

    def __call__(self, y):
        return eval_envelope(self, y)


def grid_ratio(epsilon: float, growth_exponent: float) -> float:
    """epsilon' with (1 + epsilon')**c == 1 + epsilon."""
    return math.expm1(math.log1p(epsilon) / growth_exponent)


def piece_count(l: float, u: float, epsilon_prime: float) -> int:
    """Number of geometric breakpoints l (1+e')**j needed to reach u."""
    if u <= l:
        return 1
    steps = math.log(u / l) / math.log1p(epsilon_prime)
    near = round(steps)
    if abs(steps - near) < 1e-9 * max(1.0, steps):
        steps = near
    return int(math.ceil(steps)) + 1


def _chords(spec, breakpoints):
    b = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(spec(b), dtype=float)
    lead = vals[0] / b[0]
    seg = np.diff(vals) / np.diff(b)
    slopes = np.concatenate([[lead], seg])
    intercepts = np.concatenate([[0.0], vals[:-1] - seg * b[:-1]])
    return slopes, intercepts


def build_envelope(spec: ConcaveSpec, l: float, u: float, epsilon: float) -> PLEnvelope:
    """Lower envelope of ``spec`` within a factor 1 + epsilon on [l, u].

    For an ExplicitPL spec the breakpoints are its own knees, which makes the
    envelope exact and the grid ratio 0.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < l <= u:
        raise ValueError(f"need 0 < l <= u, got l={l}, u={u}")
    if isinstance(spec, ExplicitPL):
        knees = spec.knees
        cut = np.searchsorted(knees, u * (1 - 1e-12), side="left")
        bp = knees[: min(cut + 1, len(knees))]
        slopes, intercepts = _chords(spec, bp)
        return PLEnvelope(bp, slopes, intercepts, 0.0, spec)
    eps_prime = grid_ratio(epsilon, spec.growth_exponent)
    N = piece_count(l, u, eps_prime)
    bp = l * np.power(1.0 + eps_prime, np.arange(N))
    if N > 1:
        bp[-1] = max(bp[-1], u)
    slopes, intercepts = _chords(spec, bp)
    return PLEnvelope(bp, slopes, intercepts, eps_prime, spec)


def eval_envelope(env: PLEnvelope, y):
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        return float(np.min(env.slopes * y + env.intercepts))
    return np.min(np.multiply.outer(y, env.slopes) + env.intercepts, axis=-1)


def component_range(f: CooperativeCost, i: int, constraint: ConstraintSpec | None = None) -> tuple[float, float]:
    """(l_i, u_i): the load range the grid for component ``i`` must span.

    With a constraint, the range is the exact min / max of w_i over the
    family; where the max is intractable u_i = w_i(V), and a zero minimum
    falls back to the smallest positive weight.
    """
    w = f.W[i]
    positive = w[w > 0]
    if positive.size == 0:
        raise DegenerateComponentError(f"component {i} has an all-zero weight vector")
    l_fallback, u_fallback = float(positive.min()), math.fsum(w)
    if constraint is None:
        return l_fallback, u_fallback
    l = solve_linear(constraint, w).objective
    if l <= 0:
        l = l_fallback
    best = solve_linear_max(constraint, w)
    u = u_fallback if best is None else best.objective
    return l, max(u, l)


class PLCost:
    """f^PL(X) = sum_i psi_i^PL(w_i(X)) over the non-degenerate components."""

    def __init__(self, f: CooperativeCost, envelopes: Sequence[PLEnvelope | None], epsilon: float):
        self.f = f
        self.envelopes = list(envelopes)
        self.epsilon = epsilon
        self.active = [i for i, e in enumerate(self.envelopes) if e is not None]

    @property
    def piece_counts(self) -> list[int]:
        return [self.envelopes[i].n_pieces for i in self.active]

    @property
    def total_pieces(self) -> int:
        return math.prod(self.piece_counts)

    def component_values(self, loads) -> np.ndarray:
        return np.array([self.envelopes[i](loads[i]) if self.envelopes[i] is not None else 0.0
                         for i in range(len(self.envelopes))])

    def __call__(self, X: Iterable[int]) -> float:
        return math.fsum(self.component_values(self.f.loads(as_index_array(X))))

    def evaluate_masks(self, masks) -> np.ndarray:
        Y = np.asarray(masks, dtype=float) @ self.f.W.T
        out = np.zeros(Y.shape[0])
        for i in self.active:
            out += eval_envelope(self.envelopes[i], Y[:, i])
        return out

    def guarantee_factor(self) -> float:
        exact = all(isinstance(self.envelopes[i].spec, ExplicitPL) for i in self.active)
        return 1.0 if exact else 1.0 + self.epsilon


def build_pl_cost(f: CooperativeCost, epsilon: float, constraint: ConstraintSpec | None = None,
                  ranges: Sequence[tuple[float, float]] | None = None) -> PLCost:
    envs = []
    for i, spec in enumerate(f.specs):
        if not np.any(f.W[i] > 0):
            envs.append(None)
            continue
        l, u = ranges[i] if ranges is not None else component_range(f, i, constraint)
        envs.append(build_envelope(spec, l, u, epsilon))
    if not any(e is not None for e in envs):
        raise DegenerateComponentError("every component has an all-zero weight vector")
    return PLCost(f, envs, epsilon)


@dataclass
class SandwichReport:
    passed: bool
    max_ratio: float
    checked: int
    witness: tuple | None = None


def verify_sandwich(f: CooperativeCost, plc: PLCost, samples: int = 1000, rng_seed: int = 0,
                    exhaustive: bool = False, slack: float = 1e-12) -> SandwichReport:
    """Check f^PL(X) <= f(X) <= (1 + eps) f^PL(X) on random subsets plus the empty set and V."""
    n = f.n
    if exhaustive:
        masks = enumerate_masks(n)
    else:
        rng = np.random.default_rng(rng_seed)
        masks = rng.random((samples, n)) < rng.random((samples, 1))
        masks = np.vstack([np.zeros(n, bool), np.ones(n, bool), masks])
    fv = f.evaluate_masks(masks)
    pv = plc.evaluate_masks(masks)
    factor = plc.guarantee_factor()
    low_bad = pv > fv * (1 + slack) + 1e-300
    high_bad = fv > factor * pv * (1 + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pv > 0, fv / pv, np.where(fv > 0, np.inf, 1.0))
    bad = low_bad | high_bad
    witness = None
    if np.any(bad):
        r = int(np.argmax(bad))
        witness = (tuple(np.flatnonzero(masks[r]).tolist()), float(fv[r]), float(pv[r]))
    return SandwichReport(not np.any(bad), float(ratio.max()), len(masks), witness)
