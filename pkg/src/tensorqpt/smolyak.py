"""Sparse-grid (Smolyak) algorithms for ``V2^{(x) k}`` and their rate fit.

The construction is the classical difference form

    A(q, k) = sum_{|i|_1 <= q} (U_{i_1} - U_{i_1 - 1}) (x) ... (x) (U_{i_k} - U_{i_k - 1}),

``U_0 = 0``, over a nested sequence of univariate rules. For nested point
sets the sample vectors of ``A(q, k)`` are exactly the ``z`` with
``sum_l level(z_l) <= q``, where ``level(x)`` is the first rule using ``x``;
grid sizes therefore follow from the per-level counts of new points alone.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .algorithm import TensorAlgorithm
from .errors import DomainError, RateFailure, SaturationWarning, StructuralError
from .univariate import LinearAlgorithm1D, OperatorSplit, select_points_greedy, univariate_algorithm


def enumerate_index_set(k: int, q: int) -> list:
    """All ``i in N^k`` with ``i_l >= 1`` and ``|i|_1 <= q``, lexicographic."""
    if k < 1:
        raise DomainError("dimension k must be at least 1")
    if q < k:
        raise DomainError(f"no admissible index: level q={q} is below k={k}")
    return [i for i in product(range(1, q - k + 2), repeat=k) if sum(i) <= q]


@dataclass(frozen=True, eq=False)
class UnivariateSequence:
    """Nested rules ``U_1, U_2, ...`` sharing one greedy point sequence."""

    rules: tuple
    points: np.ndarray = field(repr=False)

    @property
    def levels(self) -> int:
        return len(self.rules)

    def new_counts(self) -> list:
        sizes = [0] + [r.cardinality for r in self.rules]
        return [b - a for a, b in zip(sizes, sizes[1:])]

    def level_of(self, x: float) -> Optional[int]:
        for i, rule in enumerate(self.rules, start=1):
            if np.any(rule.points == x):
                return i
        return None


def level_sizes(level: int) -> int:
    """Points of the ``level``-th univariate rule: ``2^(level - 1)``."""
    return 1 << (level - 1)


def build_univariate_sequence(split: OperatorSplit, levels: Optional[int] = None) -> UnivariateSequence:
    """Greedy spline rules for ``V2`` on ``2^(i-1)`` nested points, ``i = 1..L``.

    ``levels=None`` takes every level the surrogate can resolve.
    """
    problem = split.problem
    max_levels = int(math.floor(math.log2(problem.rank))) + 1
    levels = max_levels if levels is None else levels
    if levels < 1:
        raise DomainError("need at least one level")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        greedy = select_points_greedy(problem.kernel, level_sizes(levels), candidates=problem.nodes)
    available = int(math.floor(math.log2(len(greedy)))) + 1
    if available < levels:
        warnings.warn(f"surrogate resolves only {available} of {levels} levels", SaturationWarning, stacklevel=2)
        levels = available
    rules = tuple(univariate_algorithm(split, greedy.points[: level_sizes(i)], problem) for i in range(1, levels + 1))
    return UnivariateSequence(rules, greedy.points[: level_sizes(levels)].copy())


def _difference_rules(rules: Sequence[LinearAlgorithm1D]):
    """``(points, outputs)`` of ``U_i - U_{i-1}`` on the points of ``U_i``."""
    out = []
    prev_pts = np.zeros(0)
    prev_out = None
    for i, rule in enumerate(rules):
        pts = np.asarray(rule.points)
        if prev_pts.size:
            if pts.size < prev_pts.size or not np.array_equal(pts[: prev_pts.size], prev_pts):
                if not np.all(np.isin(prev_pts, pts)):
                    raise StructuralError(f"univariate rule {i + 1} is not nested in rule {i + 2}")
        diff = rule.outputs.copy()
        if prev_out is not None:
            pos = {float(x): j for j, x in enumerate(pts)}
            for j, x in enumerate(prev_pts):
                diff[pos[float(x)]] -= prev_out[j]
        out.append((pts, diff))
        prev_pts, prev_out = pts, rule.outputs
    return out


def smolyak_algorithm(rules, k: int, q: int) -> TensorAlgorithm:
    """Expand ``A(q, k)`` into merged (sample vector, rank-one output) terms."""
    if isinstance(rules, UnivariateSequence):
        rules = rules.rules
    rules = list(rules)
    indices = enumerate_index_set(k, q)
    if len(rules) < q - k + 1:
        raise StructuralError(f"level q={q} in k={k} dimensions needs {q - k + 1} univariate rules, got {len(rules)}")
    diffs = _difference_rules(rules[: q - k + 1])
    samples = []
    factors = [[] for _ in range(k)]
    for index in indices:
        parts = [diffs[i - 1] for i in index]
        grids = np.meshgrid(*[np.arange(p[0].size) for p in parts], indexing="ij")
        flat = [g.reshape(-1) for g in grids]
        samples.append(np.column_stack([parts[ax][0][flat[ax]] for ax in range(k)]))
        for ax in range(k):
            factors[ax].append(parts[ax][1][flat[ax]])
    return TensorAlgorithm.from_terms(np.concatenate(samples), [np.concatenate(f) for f in factors])


def grid_size(new_counts: Sequence[int], k: int, q: int) -> int:
    """Number of sample vectors of ``A(q, k)``: ``#{z : sum level(z_l) <= q}``.

    ``new_counts[i - 1]`` is the number of points first used at level ``i``.
    Levels beyond ``len(new_counts)`` follow the ``2^(i-1)`` doubling rule.
    """
    counts = tuple(int(c) for c in new_counts)
    return _grid_size(counts, k, q)


@lru_cache(maxsize=None)
def _grid_size(counts: tuple, k: int, q: int) -> int:
    if q < k:
        return 0
    width = q - k + 1
    per_level = [_new_count(counts, i) for i in range(1, width + 1)]
    # ways[s]: vectors of the current length with level sum s
    ways = [1] + [0] * q
    for _ in range(k):
        nxt = [0] * (q + 1)
        for s, w in enumerate(ways):
            if w:
                for i, c in enumerate(per_level, start=1):
                    if s + i > q:
                        break
                    nxt[s + i] += w * c
        ways = nxt
    return sum(ways)


def _new_count(counts: tuple, level: int) -> int:
    if level <= len(counts):
        return counts[level - 1]
    return level_sizes(level) - level_sizes(level - 1) if level > 1 else 1


def level_for_budget(new_counts: Sequence[int], k: int, n: int, max_level: Optional[int] = None) -> int:
    """Largest ``q >= k`` whose grid has at most ``n`` points.

    ``max_level`` caps the univariate level ``q - k + 1`` (surrogate limit).
    """
    if n < 1:
        raise DomainError("budget n must be positive")
    q = k
    while True:
        if max_level is not None and q + 1 - k + 1 > max_level:
            return q
        if grid_size(new_counts, k, q + 1) > n:
            return q
        q += 1


@dataclass(frozen=True)
class RateFit:
    """Envelope ``e <= alpha n^(-r)`` over the fitted samples."""

    alpha: float
    r: float
    residual: float
    samples: tuple = ()
    per_k: dict = field(default_factory=dict)

    def bound(self, n) -> float:
        return self.alpha * float(n) ** (-self.r)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "r": self.r,
            "residual": self.residual,
            "samples": [[int(n), float(e)] for n, e in self.samples],
            "per_k": {str(k): {"alpha": v[0], "r": v[1]} for k, v in self.per_k.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RateFit":
        return cls(
            float(data["alpha"]),
            float(data["r"]),
            float(data.get("residual", 0.0)),
            tuple((int(n), float(e)) for n, e in data.get("samples", ())),
            {int(k): (v["alpha"], v["r"]) for k, v in data.get("per_k", {}).items()},
        )


def fit_rate(samples, per_k: Optional[dict] = None) -> RateFit:
    """Least-squares ``log e = log alpha - r log n``, then inflate ``alpha``.

    After the fit ``alpha`` is scaled up just enough that
    ``alpha n^(-r) >= e`` holds on every sample.
    """
    samples = [(float(n), float(e)) for n, e in samples]
    if len(samples) < 4:
        raise DomainError("need at least 4 (n, e) samples")
    n = np.array([s[0] for s in samples])
    e = np.array([s[1] for s in samples])
    if np.any(e <= 0) or np.any(n < 1):
        raise DomainError("samples need n >= 1 and positive errors")
    if np.unique(n).size < 2:
        raise RateFailure("all samples share one cardinality")
    slope, intercept = np.polyfit(np.log(n), np.log(e), 1)
    r = -float(slope)
    if r <= 0:
        raise RateFailure(f"fitted rate r = {r:.4g} is not positive")
    fitted = intercept - r * np.log(n)
    resid = np.log(e) - fitted
    alpha = float(np.exp(intercept + max(0.0, resid.max())))
    # guard the envelope against rounding in exp/log
    alpha *= 1.0 + 1e-12
    return RateFit(alpha, r, float(np.sqrt(np.mean(resid**2))), tuple((int(a), float(b)) for a, b in zip(n, e)), per_k or {})


def error_samples(split: OperatorSplit, sequence: UnivariateSequence, k: int):
    """Staircase samples ``(n, e)`` of ``A(q, k)`` against ``V2^{(x) k}``.

    ``A(q, k)`` is the algorithm used for every budget ``n`` from its own grid
    size up to one below the next level's; the sample sits at the top of that
    range. The last available level has no successor and is skipped. Errors
    below ``EXHAUSTED`` are dropped.
    """
    from .oracle import kronecker_surrogate, worst_case_error
    from .univariate import EXHAUSTED

    counts = sequence.new_counts()
    target = kronecker_surrogate(split.problem, [[split.v2] * k], label=f"V2^{k}")
    out = []
    for q in range(k, k + sequence.levels - 1):
        err = worst_case_error(smolyak_algorithm(sequence, k, q), target)
        if err > EXHAUSTED:
            out.append((grid_size(counts, k, q + 1) - 1, err))
    return out


def measure_rate(split: OperatorSplit, sequence: UnivariateSequence, k_max: int = 3) -> RateFit:
    """Pooled envelope fit over ``k = 1..k_max``, with per-``k`` fits alongside."""
    pooled = []
    per_k = {}
    for k in range(1, k_max + 1):
        samples = error_samples(split, sequence, k)
        pooled.extend(samples)
        if len(samples) >= 4:
            try:
                fit = fit_rate(samples)
                per_k[k] = (fit.alpha, fit.r)
            except RateFailure:
                per_k[k] = (math.nan, math.nan)
    return fit_rate(pooled, per_k)
