"""Split ``S1 = V1 + V2`` and univariate sampling algorithms for ``V2``."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._linalg import pivoted_cholesky
from .algorithm import TensorAlgorithm
from .errors import AssemblyError, ConditioningError, DomainError, DuplicatePointsError, SaturationWarning
from .kernels import TOL_PSD, Kernel
from .spectral import DiscretizedProblem, PointCondition, Spectrum, check_eigenfunction_point_condition, estimate_decay

GREEDY_CANDIDATES = 1025
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class OperatorSplit:
    """``V1 f = delta K(t,t)^{-1/2} f(t) S1 eta_1`` and ``V2 = S1 - V1``.

    ``v1`` and ``v2`` are the surrogate matrices (output coords x whitened
    coords); ``v2`` is ``S1`` composed with the projection onto
    ``span{eta_2, eta_3, ...}``.
    """

    spectrum: Spectrum
    anchor: float
    anchor_index: int
    delta: int
    scale: float
    output: np.ndarray = field(repr=False)
    v1: np.ndarray = field(repr=False)
    v2: np.ndarray = field(repr=False)

    @property
    def problem(self) -> DiscretizedProblem:
        return self.spectrum.problem

    def apply_v1(self, value_at_anchor: float) -> np.ndarray:
        """``V1 f`` from the single value ``f(t)``."""
        return self.delta * self.scale * value_at_anchor * self.output


def build_split(spectrum: Spectrum, problem: Optional[DiscretizedProblem] = None, condition: Optional[PointCondition] = None) -> OperatorSplit:
    problem = spectrum.problem if problem is None else problem
    if problem is not spectrum.problem:
        raise DomainError("spectrum belongs to a different discretization")
    if condition is None:
        condition = check_eigenfunction_point_condition(spectrum)
    if not condition.holds:
        raise AssemblyError(
            f"eta_1 is not a normalized kernel section (residual {condition.residual:.3g}); "
            "apply rank_one_modify first"
        )
    u1 = spectrum.coords[:, 0]
    output = problem.s1 @ u1
    v1 = np.outer(output, u1)
    v2 = problem.s1 - v1
    p = condition.index
    scale = 1.0 / math.sqrt(problem.section_norms_sq()[p])
    return OperatorSplit(spectrum, float(problem.nodes[p]), p, condition.delta, scale, output, v1, v2)


@dataclass(frozen=True)
class GreedyPoints:
    points: np.ndarray
    power_max: np.ndarray
    saturated: bool

    def __len__(self):
        return self.points.size


def select_points_greedy(kernel: Kernel, n: int, candidates=None) -> GreedyPoints:
    """P-greedy points: each new point maximizes the current power function.

    The first point maximizes ``K(x, x)``; ties go to the smallest
    coordinate. ``power_max[i]`` is the largest power function value on the
    candidates after ``i + 1`` points. Selection stops early, with a
    :class:`SaturationWarning`, when the squared power function drops below
    ``TOL_PSD * max K(x, x)`` everywhere.
    """
    if n < 1:
        raise DomainError("need at least one point")
    a, b = kernel.domain
    cand = np.linspace(a, b, GREEDY_CANDIDATES) if candidates is None else np.sort(kernel.check_points(candidates))
    if np.unique(cand).size != cand.size:
        raise DuplicatePointsError("candidate points must be distinct")
    diag = kernel.diagonal(cand)
    tol = TOL_PSD * max(float(diag.max()), 0.0)
    _, piv, residual = pivoted_cholesky(diag, lambda j: kernel.matrix(cand, cand[j : j + 1])[:, 0], tol, max_rank=n)
    saturated = piv.size < n
    if saturated:
        warnings.warn(f"power function vanished after {piv.size} of {n} points", SaturationWarning, stacklevel=2)
    power = np.sqrt(np.maximum(residual[1 : piv.size + 1], 0.0))
    return GreedyPoints(cand[piv], power, saturated)


@dataclass(frozen=True, eq=False)
class LinearAlgorithm1D:
    """``U f = sum_j f(t_j) g_j``; ``outputs[j]`` is ``g_j`` in output coords."""

    points: np.ndarray
    outputs: np.ndarray = field(repr=False)

    @property
    def cardinality(self) -> int:
        return self.points.size

    def as_tensor(self) -> TensorAlgorithm:
        return TensorAlgorithm.from_terms(self.points[:, None], [self.outputs])

    def matrix(self, problem: DiscretizedProblem) -> np.ndarray:
        """Induced linear map in surrogate coordinates (output x whitened)."""
        return self.outputs.T @ problem.representers(self.points)


def interpolation_operator(problem: DiscretizedProblem, points) -> np.ndarray:
    """Cardinal functions of minimal-norm interpolation, whitened coords (r x n)."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        raise DomainError("an algorithm needs at least one sample point")
    if np.unique(points).size != points.size:
        raise DuplicatePointsError("sample points must be distinct")
    phi = problem.representers(points)
    g = phi @ phi.T
    try:
        chol = cho_factor(g, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("interpolation matrix is singular; points too close") from exc
    diag = np.diag(chol[0]) ** 2
    if diag.min() <= diag.max() / MAX_CONDITION:
        raise ConditioningError("interpolation matrix is numerically singular; points too close")
    return cho_solve(chol, phi).T


def univariate_algorithm(split: Optional[OperatorSplit], points, problem: Optional[DiscretizedProblem] = None) -> LinearAlgorithm1D:
    """Spline algorithm for ``V2``: ``V2`` applied to the kernel interpolant.

    With ``split=None`` the target is ``S1`` itself (used before the point
    condition has been established).
    """
    if problem is None:
        problem = split.problem
    target = problem.s1 if split is None else split.v2
    cardinal = interpolation_operator(problem, points)
    return LinearAlgorithm1D(np.asarray(points, dtype=float).copy(), (target @ cardinal).T)


@dataclass(frozen=True)
class ErrorCurve:
    n: np.ndarray
    errors: np.ndarray
    power_max: np.ndarray
    decay_e: float
    target: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "e_n", "power_max"])
        for n, e, p in zip(self.n, self.errors, self.power_max):
            writer.writerow([int(n), f"{e:.10g}", f"{p:.10g}"])
        return buf.getvalue()


# errors below this count as exhausted (finite-rank space fully sampled)
EXHAUSTED = 1e-10


def minimal_error_curve(split: Optional[OperatorSplit], problem: Optional[DiscretizedProblem], n_max: int) -> ErrorCurve:
    """Worst-case errors ``e_n`` of the greedy spline algorithms, ``n <= n_max``.

    These are upper bounds on the minimal errors (labelled ``e_n^greedy``).
    The target is ``V2`` when a split is given, otherwise ``S1``; both have
    the same polynomial decay once ``V1`` is computable from one value.
    ``decay_e`` is ``inf`` when the errors vanish after finitely many points.
    """
    from .oracle import operator_from_matrix, worst_case_error

    if n_max < 8:
        raise DomainError("n_max must be at least 8")
    if problem is None:
        problem = split.problem
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        greedy = select_points_greedy(problem.kernel, n_max, candidates=problem.nodes)
    target_matrix = problem.s1 if split is None else split.v2
    target = operator_from_matrix(problem, target_matrix)
    errors = []
    for n in range(1, len(greedy) + 1):
        alg = univariate_algorithm(split, greedy.points[:n], problem)
        errors.append(worst_case_error(alg.as_tensor(), target))
    errors = np.array(errors)
    ns = np.arange(1, errors.size + 1)
    positive = errors > EXHAUSTED
    if not positive.all():
        decay = math.inf
    elif errors.size >= 8:
        decay = estimate_decay(errors)
    else:
        decay = 0.0
    return ErrorCurve(ns, errors, greedy.power_max, decay, "S1" if split is None else "V2")
