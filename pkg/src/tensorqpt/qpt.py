"""Assembly of the tractable algorithm ``A_{d,n,eps}`` from Smolyak components.

With ``S1 = V1 + V2`` every ``S_d`` splits into ``2^d`` Kronecker patterns
``V_{j_1} (x) ... (x) V_{j_d}``. Patterns with more than ``k`` factors ``V2``
are dropped (their sum has norm at most ``lambda_2^{k/2}``). A pattern with
``l`` factors ``V2`` is approximated by the Smolyak algorithm ``A_{l,n}`` on
its ``V2`` coordinates, while each ``V1`` coordinate only needs the single
value at the anchor ``t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .algorithm import TensorAlgorithm, concatenate
from .errors import DomainError, FitError, GapViolation, RateFailure, StructuralError
from .smolyak import RateFit, UnivariateSequence, grid_size, level_for_budget, smolyak_algorithm
from .univariate import OperatorSplit

# largest d for which the assembled algorithm is built explicitly
MATERIALIZE_LIMIT = 24


@dataclass(frozen=True)
class Pattern:
    """Multi-index ``j in {1, 2}^d``."""

    j: tuple

    def __post_init__(self):
        if not self.j or any(v not in (1, 2) for v in self.j):
            raise DomainError("pattern entries must be 1 or 2")

    @classmethod
    def from_positions(cls, d: int, positions) -> "Pattern":
        """Pattern with ``2`` at the given 1-based positions."""
        pos = set(int(p) for p in positions)
        if any(p < 1 or p > d for p in pos):
            raise DomainError(f"positions must lie in 1..{d}")
        return cls(tuple(2 if i in pos else 1 for i in range(1, d + 1)))

    @property
    def d(self) -> int:
        return len(self.j)

    @property
    def size2(self) -> int:
        """``|j|_2``."""
        return sum(1 for v in self.j if v == 2)

    @property
    def positions(self) -> tuple:
        """1-based positions of the entries equal to 2."""
        return tuple(i + 1 for i, v in enumerate(self.j) if v == 2)


def patterns(d: int, k: int):
    """Patterns with ``|j|_2 <= k``, by shell, lexicographic positions within a shell."""
    for shell in range(0, min(k, d) + 1):
        for pos in combinations(range(1, d + 1), shell):
            yield Pattern.from_positions(d, pos)


def truncation_level(eps: float, lambda2: float, d: int) -> int:
    """``k = min(d, ceil(2 ln(2/eps) / ln(1/lambda2)))``.

    ``lambda2 = 0`` gives ``k = 0``: the ``V2`` part vanishes.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if d < 1:
        raise DomainError("d must be at least 1")
    if lambda2 >= 1.0:
        raise GapViolation(f"lambda_2 = {lambda2:.6g} >= lambda_1 = 1: no spectral gap")
    if lambda2 < 0.0:
        raise DomainError("lambda_2 must be non-negative")
    if lambda2 == 0.0:
        return 0
    raw = 2.0 * math.log(2.0 / eps) / math.log(1.0 / lambda2)
    k = min(d, max(1, math.ceil(raw - 1e-12)))
    while k < d and lambda2 ** (k / 2.0) > eps / 2.0:
        k += 1
    return k


def index_count(d: int, k: int) -> int:
    """``sum_{l=0}^{k} C(d, l)`` as an exact integer."""
    if not 0 <= k <= d:
        raise DomainError(f"need 0 <= k <= d, got k={k}, d={d}")
    return sum(math.comb(d, l) for l in range(k + 1))


def choose_n(d: int, eps: float, rate: RateFit, k: int) -> int:
    """Smallest ``n`` with ``2 alpha D / n^r <= eps / 2``.

    ``D = d^k`` when ``k <= d/2`` and ``D = 2^d`` otherwise.
    """
    if rate.r <= 0:
        raise RateFailure(f"rate r = {rate.r} is not positive")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    big = d**k if 2 * k <= d else 2**d
    # work in logs so that 2^64 and friends stay finite
    log_lhs = math.log(2.0 * rate.alpha) + math.log(big)
    log_rhs = math.log(eps / 2.0)

    def enough(n: int) -> bool:
        return log_lhs - rate.r * math.log(n) <= log_rhs + 1e-12

    log_n = (log_lhs - log_rhs) / rate.r
    if log_n > 700:
        raise DomainError(f"required n = exp({log_n:.1f}) is beyond floating point range")
    n = max(1, math.ceil(math.exp(log_n) * (1.0 - 1e-12)))
    while not enough(n):
        n += max(1, n >> 40)
    return n


def _anchor_factor(split: OperatorSplit, count: int) -> np.ndarray:
    return np.broadcast_to(split.output, (count, split.output.size)).copy()


def build_pattern_algorithm(pattern: Pattern, split: OperatorSplit, component: Optional[TensorAlgorithm] = None) -> TensorAlgorithm:
    """``A_{d,n,j}``: splice the anchor into a Smolyak algorithm for the ``V2`` slots.

    ``component`` approximates ``V2^{(x) |j|_2}`` and is ignored (may be None)
    when ``|j|_2 = 0``. Every ``V1`` coordinate takes the value at the anchor
    and contributes the factor ``S1 eta_1``; their scalars are absorbed into
    the first output factor.
    """
    d, ell = pattern.d, pattern.size2
    const = (split.delta * split.scale) ** (d - ell)
    if ell == 0:
        factors = [_anchor_factor(split, 1) for _ in range(d)]
        factors[0] = factors[0] * const
        return TensorAlgorithm.from_terms(np.full((1, d), split.anchor), factors)
    if component is None or component.dim != ell:
        got = None if component is None else component.dim
        raise StructuralError(f"pattern with |j|_2 = {ell} needs a {ell}-dimensional component, got {got}")
    t = component.n_terms
    inner = component.points[component.term_point]
    samples = np.full((t, d), split.anchor)
    factors = []
    slot = 0
    for v in pattern.j:
        if v == 2:
            samples[:, len(factors)] = inner[:, slot]
            factors.append(component.factors[slot])
            slot += 1
        else:
            factors.append(_anchor_factor(split, t))
    factors[0] = factors[0] * const
    return TensorAlgorithm.from_terms(samples, factors)


@dataclass(frozen=True, eq=False)
class QptPlan:
    d: int
    eps: float
    k: int
    n: int
    levels: dict
    capped: tuple
    anchor: float
    delta: int
    anchor_diag: float
    card_bound: int
    card_terms: int
    card_dedup: int
    predicted_error: float
    materialized: bool
    lambda2: float
    rate: RateFit
    algorithm: Optional[TensorAlgorithm] = field(default=None, repr=False)

    @property
    def bound_holds(self) -> bool:
        return self.card_dedup <= self.card_bound

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "eps": self.eps,
            "k": self.k,
            "n": self.n,
            "levels": {str(key): val for key, val in sorted(self.levels.items())},
            "capped": list(self.capped),
            "anchor": {"t": self.anchor, "delta": self.delta, "K_tt": self.anchor_diag},
            "card_bound": str(self.card_bound),
            "card_terms": str(self.card_terms),
            "card_dedup": str(self.card_dedup),
            "predicted_error": self.predicted_error,
            "materialized": self.materialized,
            "lambda2": self.lambda2,
            "rate": {"alpha": self.rate.alpha, "r": self.rate.r},
            "components": [f"smolyak(k={key}, q={val})" for key, val in sorted(self.levels.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _counts_without(counts, skip_level: Optional[int]):
    out = list(counts)
    if skip_level is not None:
        out[skip_level - 1] -= 1
    return out


def _grid_count(per_level, s: int, budget: int) -> int:
    """Vectors in ``P^s`` (per-level counts given) with level sum ``<= budget``."""
    if s == 0:
        return 1 if budget >= 0 else 0
    if budget < s:
        return 0
    ways = [1] + [0] * budget
    for _ in range(s):
        nxt = [0] * (budget + 1)
        for total, w in enumerate(ways):
            if w:
                for lev, c in enumerate(per_level, start=1):
                    if total + lev > budget:
                        break
                    if c:
                        nxt[total + lev] += w * c
        ways = nxt
    return sum(ways)


def dedup_cardinality(d: int, k: int, levels: dict, counts, anchor_level: Optional[int]) -> int:
    """Distinct sample vectors of the assembled algorithm, counted exactly.

    A vector with ``s`` coordinates different from the anchor is produced by a
    shell ``l in [s, k]`` iff its non-anchor level sum is at most
    ``q_l - (l - s) * level(t)``; ``level(t) = None`` means the anchor is not
    a Smolyak node, so only ``l = s`` applies.
    """
    total = 0
    for s in range(0, min(k, d) + 1):
        if s == 0:
            total += 1
            continue
        budgets = []
        for ell in range(s, min(k, d) + 1):
            if anchor_level is None and ell > s:
                break
            extra = 0 if ell == s else (ell - s) * anchor_level
            budgets.append(levels[ell] - extra)
        budget = max(budgets)
        width = max(budget - s + 1, 0)
        per_level = [counts[i] if i < len(counts) else _abstract(i + 1) for i in range(width)]
        per_level = _counts_without(per_level, anchor_level if anchor_level is not None and anchor_level <= width else None)
        total += math.comb(d, s) * _grid_count(per_level, s, budget)
    return total


def _abstract(level: int) -> int:
    return 1 if level == 1 else (1 << (level - 1)) - (1 << (level - 2))


def abstract_counts(levels: int) -> list:
    return [_abstract(i) for i in range(1, levels + 1)]


def assemble_qpt_algorithm(
    d: int,
    eps: float,
    split: OperatorSplit,
    rate: RateFit,
    sequence: Optional[UnivariateSequence] = None,
    materialize: Optional[bool] = None,
) -> QptPlan:
    """Plan (and, for small ``d``, build) ``A_{d,n,eps}``.

    The spectrum behind ``split`` must be normalized (``lambda_1 = 1``).
    Without ``sequence`` or with ``materialize=False`` only the counts and
    the predicted bound are computed, using the ideal ``2^(i-1)`` level sizes.
    """
    spectrum = split.spectrum
    if abs(spectrum.lambda1 - 1.0) > 1e-8:
        raise DomainError(f"normalize the problem first (lambda_1 = {spectrum.lambda1:.6g})")
    lam2 = max(spectrum.lambda2, 0.0)
    k = truncation_level(eps, lam2, d)
    n = choose_n(d, eps, rate, k) if k > 0 else 1
    if materialize is None:
        materialize = sequence is not None and d <= MATERIALIZE_LIMIT
    if materialize and sequence is None:
        raise DomainError("materializing needs a univariate sequence")

    if materialize:
        counts = sequence.new_counts()
        max_level = sequence.levels
        anchor_level = sequence.level_of(split.anchor)
    else:
        counts, max_level, anchor_level = None, None, None
    levels, capped = {}, []
    for kp in range(1, k + 1):
        if materialize:
            q = level_for_budget(counts, kp, n, max_level=max_level)
            if q - kp + 1 == max_level and grid_size(counts, kp, q) < n:
                nxt = grid_size(abstract_counts(max_level + 1), kp, q + 1)
                if nxt <= n:
                    capped.append(kp)
        else:
            q = level_for_budget(abstract_counts(1), kp, n)
        levels[kp] = q
    width = max([q - kp + 1 for kp, q in levels.items()] or [1])
    count_seq = counts if materialize else abstract_counts(width)

    sizes = {0: 1}
    for kp, q in levels.items():
        sizes[kp] = grid_size(count_seq, kp, q)
    card_terms = sum(math.comb(d, ell) * sizes[ell] for ell in range(k + 1))
    card_dedup = dedup_cardinality(d, k, levels, count_seq, anchor_level)
    bound = n * index_count(d, k)
    predicted = rate.bound(n) * index_count(d, k) if k > 0 else 0.0
    if k < d:
        predicted += lam2 ** (k / 2.0)

    algorithm = None
    if materialize:
        components = {kp: smolyak_algorithm(sequence, kp, q) for kp, q in levels.items()}
        parts = [build_pattern_algorithm(p, split, components.get(p.size2)) for p in patterns(d, k)]
        algorithm = concatenate(parts, d, split.output.size)
        if algorithm.cardinality != card_dedup:
            raise StructuralError(f"dedup count {card_dedup} disagrees with the assembled {algorithm.cardinality} points")

    return QptPlan(
        d=d,
        eps=float(eps),
        k=k,
        n=n,
        levels=levels,
        capped=tuple(capped),
        anchor=split.anchor,
        delta=split.delta,
        anchor_diag=1.0 / split.scale**2,
        card_bound=bound,
        card_terms=card_terms,
        card_dedup=card_dedup,
        predicted_error=float(predicted),
        materialized=bool(materialize),
        lambda2=lam2,
        rate=rate,
        algorithm=algorithm,
    )


def envelope_coordinate(d: int, eps: float) -> float:
    """``(1 + ln(1/eps)) (1 + ln d)``."""
    return (1.0 + math.log(1.0 / eps)) * (1.0 + math.log(d))


def qpt_envelope_fit(dataset):
    """Fit ``card <= C exp(t_qpt x)`` with ``x = (1 + ln 1/eps)(1 + ln d)``.

    Least squares gives the slope ``t_qpt``; ``C`` is then raised until the
    bound holds on every point. Returns ``(C, t_qpt)``.
    """
    rows = [(int(d), float(e), int(c)) for d, e, c in dataset]
    if len(rows) < 6:
        raise FitError("need at least 6 (d, eps, cardinality) points")
    if len({r[0] for r in rows}) < 2 or len({r[1] for r in rows}) < 2:
        raise FitError("need at least two distinct d and two distinct eps")
    if any(c < 1 for _, _, c in rows):
        raise FitError("cardinalities must be positive")
    x = np.array([envelope_coordinate(d, e) for d, e, _ in rows])
    y = np.array([math.log(c) for _, _, c in rows])
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()):
        raise FitError("degenerate design: all envelope coordinates coincide")
    slope, intercept = np.polyfit(x, y, 1)
    log_c = intercept + max(0.0, float(np.max(y - (intercept + slope * x))))
    return float(math.exp(log_c) * (1.0 + 1e-12)), float(slope)
