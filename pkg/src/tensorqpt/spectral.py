"""Finite-dimensional surrogate of ``W1 = S1* S1`` for L2 approximation.

The surrogate space is the span of the kernel sections ``K(., x_i)`` at the
``m`` composite-midpoint nodes. Writing the node Gram matrix as
``G = R R^T`` (pivoted Cholesky, ``R`` of shape ``m x r``), an element
``f = sum_i c_i K(., x_i)`` gets whitened coordinates ``u = R^T c`` with
``||f||_F = |u|``, and its node values are ``R u``. The L2 norm is replaced
by the midpoint rule, so ``S1`` becomes ``B = diag(sqrt(w)) R`` acting
between Euclidean coordinate spaces. All norms downstream are Euclidean in
these coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from ._linalg import pivoted_cholesky
from .errors import DomainError, NumericalFailure, ResolutionError
from .kernels import TOL_COND, TOL_PSD, TOL_ZERO, Kernel, gram

MIN_NODES = 32


@dataclass(frozen=True, eq=False)
class DiscretizedProblem:
    kernel: Kernel
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    s1: np.ndarray = field(repr=False)
    scale: float
    normalized: bool

    @property
    def m(self) -> int:
        return self.nodes.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    @cached_property
    def _svd(self):
        try:
            left, sigma, right_t = np.linalg.svd(self.s1, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"SVD of the {self.s1.shape} surrogate did not converge: {exc}") from exc
        return left, sigma, right_t.T

    @cached_property
    def coefficient_map(self) -> np.ndarray:
        """Matrix ``C`` (m x r): whitened coordinates -> section coefficients."""
        q, t = np.linalg.qr(self.factor)
        return q @ solve_triangular(t, np.eye(t.shape[0]), trans="T")

    @cached_property
    def _node_lookup(self) -> dict:
        return {float(x): i for i, x in enumerate(self.nodes)}

    def node_index(self, x) -> Optional[int]:
        i = self._node_lookup.get(float(x))
        if i is not None:
            return i
        j = int(np.argmin(np.abs(self.nodes - x)))
        if abs(self.nodes[j] - x) <= 1e-13 * max(1.0, abs(x)):
            return j
        return None

    def representers(self, points) -> np.ndarray:
        """Whitened representers of point evaluation, shape (len(points), r).

        Nodes use the rows of the Cholesky factor; other points of the
        domain use the representer of ``f -> f(x)`` restricted to the
        surrogate space.
        """
        points = self.kernel.check_points(points)
        out = np.empty((points.size, self.rank))
        off = []
        for i, x in enumerate(points):
            p = self.node_index(x)
            if p is None:
                off.append(i)
            else:
                out[i] = self.factor[p]
        if off:
            sections = self.kernel.matrix(points[off], self.nodes)
            out[off] = sections @ self.coefficient_map
        return out

    def section_norms_sq(self) -> np.ndarray:
        """Surrogate ``K(x_i, x_i)`` at the nodes."""
        return np.einsum("ij,ij->i", self.factor, self.factor)


def discretize_problem(kernel: Kernel, m: int, normalize: bool = False) -> DiscretizedProblem:
    """Build the midpoint-rule surrogate of L2 approximation for ``kernel``.

    Parameters
    ----------
    kernel : Kernel
    m : int
        Number of midpoint nodes, at least 32.
    normalize : bool
        Rescale ``S1`` by ``lambda_1^{-1/2}`` so the top eigenvalue is 1.
    """
    if int(m) != m or m < MIN_NODES:
        raise ResolutionError(f"need at least {MIN_NODES} quadrature nodes, got {m}")
    m = int(m)
    a, b = kernel.domain
    h = (b - a) / m
    nodes = a + h * (np.arange(m) + 0.5)
    weights = np.full(m, h)
    g = gram(kernel, nodes)
    diag = np.diag(g).copy()
    tol = TOL_PSD * max(float(diag.max()), 0.0)
    factor, _, _ = pivoted_cholesky(diag, lambda j: g[:, j], tol)
    if factor.shape[1] == 0:
        raise NumericalFailure("kernel vanishes on the quadrature grid")
    s1 = np.sqrt(weights)[:, None] * factor
    scale = 1.0
    if normalize:
        top = np.linalg.norm(s1, 2)
        scale = 1.0 / top
        s1 = s1 * scale
    return DiscretizedProblem(kernel, nodes, weights, g, factor, s1, scale, bool(normalize))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ordered eigenpairs of the surrogate ``W1``.

    ``coords[:, j]`` holds the whitened coordinates of ``eta_{j+1}``; the
    left singular vectors give ``S1 eta_j / sqrt(lambda_j)``.
    """

    problem: DiscretizedProblem
    lambdas: np.ndarray
    coords: np.ndarray = field(repr=False)
    decay_lambda: Optional[float] = None

    @property
    def q(self) -> int:
        return self.lambdas.size

    @property
    def lambda1(self) -> float:
        return float(self.lambdas[0])

    @property
    def lambda2(self) -> float:
        return float(self.lambdas[1]) if self.q > 1 else 0.0

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda2

    @cached_property
    def values(self) -> np.ndarray:
        """Eigenfunction values at the nodes, shape (m, q)."""
        return self.problem.factor @ self.coords

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Coefficients over the node kernel sections, shape (m, q)."""
        return self.problem.coefficient_map @ self.coords

    def outputs(self) -> np.ndarray:
        """``S1 eta_j`` in output coordinates, shape (m, q)."""
        return self.problem.s1 @ self.coords

    def evaluate(self, j: int, x) -> np.ndarray:
        """``eta_{j+1}(x)`` at arbitrary points of the domain."""
        x = self.problem.kernel.check_points(x)
        return self.problem.kernel.matrix(x, self.problem.nodes) @ self.coefficients[:, j]


def eigensystem(problem: DiscretizedProblem, q: int) -> Spectrum:
    """Top ``q`` eigenpairs of the surrogate, orthonormal in F1.

    Only ``min(q, rank)`` pairs exist for finite-rank kernels. Signs are
    fixed so that the first section coefficient of magnitude above
    ``TOL_ZERO`` is positive.
    """
    if q < 1 or q > problem.m:
        raise DomainError(f"q must lie in [1, m={problem.m}], got {q}")
    _, sigma, right = problem._svd
    q = min(q, right.shape[1])
    lambdas = sigma[:q] ** 2
    coords = right[:, :q].copy()
    coeffs = problem.coefficient_map @ coords
    for j in range(q):
        big = np.flatnonzero(np.abs(coeffs[:, j]) > TOL_ZERO)
        if big.size and coeffs[big[0], j] < 0:
            coords[:, j] *= -1.0
    decay = None
    if q >= 8 and np.all(lambdas[q // 2 - 1 :] > 0):
        decay = estimate_decay(lambdas)
    return Spectrum(problem, lambdas, coords, decay)


def estimate_decay(sequence) -> float:
    """Polynomial decay rate of a positive sequence.

    Fits ``log a_n`` against ``log n`` by least squares over the tail
    ``n in [N/2, N]`` and returns the negated slope, or 0 when the slope is
    above -0.05.
    """
    a = np.sort(np.asarray(sequence, dtype=float))[::-1]
    n_total = a.size
    if n_total < 8:
        raise DomainError("need at least 8 terms to estimate a decay rate")
    n = np.arange(1, n_total + 1)
    tail = n >= n_total / 2
    if np.any(a[tail] <= 0):
        raise DomainError("sequence must be positive on the fitted tail")
    slope = np.polyfit(np.log(n[tail]), np.log(a[tail]), 1)[0]
    if slope >= -0.05:
        return 0.0
    return float(-slope)


@dataclass(frozen=True)
class PointCondition:
    holds: bool
    t: Optional[float]
    delta: Optional[int]
    residual: float
    index: int
    eta_tail_max: float
    residuals: np.ndarray = field(repr=False, compare=False)

    @property
    def min_residual(self) -> float:
        return self.residual


def check_eigenfunction_point_condition(spectrum: Spectrum, kernel: Optional[Kernel] = None, grid=None) -> PointCondition:
    """Look for ``t`` with ``eta_1 = +-K(t, t)^{-1/2} K(., t)``.

    The F1 residual ``||eta_1 - delta K(t,t)^{-1/2} K(., t)||`` is computed
    for every candidate (default: the quadrature nodes). On success the
    remaining eigenfunctions must vanish at ``t`` as well.
    """
    problem = spectrum.problem
    if kernel is not None and kernel is not problem.kernel:
        raise DomainError("spectrum was computed for a different kernel")
    grid = problem.nodes if grid is None else np.asarray(grid, dtype=float)
    reps = problem.representers(grid)
    norms = np.sqrt(np.einsum("ij,ij->i", reps, reps))
    u1 = spectrum.coords[:, 0]
    proj = reps @ u1
    sign = np.where(proj >= 0, 1.0, -1.0)
    residuals = np.full(grid.size, np.inf)
    ok = norms > TOL_ZERO
    diff = u1[None, :] - sign[ok, None] * reps[ok] / norms[ok, None]
    residuals[ok] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    best = int(np.argmin(residuals))
    res = float(residuals[best])
    tail = 0.0
    if spectrum.q > 1:
        tail = float(np.max(np.abs(reps[best] @ spectrum.coords[:, 1:])))
    holds = res <= TOL_COND and tail <= TOL_COND
    return PointCondition(
        holds,
        float(grid[best]) if holds else None,
        int(sign[best]) if holds else None,
        res,
        best,
        tail,
        residuals,
    )


def spectrum_summary(spectrum: Spectrum, condition: Optional[PointCondition] = None) -> dict:
    return {
        "kernel_id": spectrum.problem.kernel.name,
        "m": spectrum.problem.m,
        "normalized": spectrum.problem.normalized,
        "lambdas": [float(v) for v in spectrum.lambdas],
        "gap": spectrum.gap,
        "t": condition.t if condition is not None else None,
        "delta": condition.delta if condition is not None else None,
        "decay_lambda": spectrum.decay_lambda,
    }


def spectrum_to_json(spectrum: Spectrum, condition: Optional[PointCondition] = None) -> str:
    return json.dumps(spectrum_summary(spectrum, condition), indent=2)
