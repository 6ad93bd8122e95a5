"""Brute-force worst-case errors and operator norms on the tensor surrogate.

The F_d surrogate uses the Kronecker power of the whitened coordinates, so
its norm is Euclidean; the same holds for the output side. For a target
``T = sum_terms c (x)_l M_l`` and an algorithm ``A`` the worst-case error is
the largest singular value of ``T - A``. Small problems are assembled densely;
larger ones go through Lanczos on the normal operator with Kronecker
matrix-vector products, which never forms a ``m^d x r^d`` matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

from .algorithm import TensorAlgorithm
from .errors import DomainError, StructuralError
from .spectral import DiscretizedProblem

MAX_DIM = 3
MAX_FACTOR_SIZE = 64
# entries of the dense residual matrix above which the matrix-free path is used
DENSE_LIMIT = 4_000_000


@dataclass(frozen=True, eq=False)
class TensorSurrogate:
    """``sum_i coefs[i] * kron(terms[i][0], ..., terms[i][d-1])``.

    Every factor maps whitened F1 coordinates (r) to output coordinates (m).
    """

    problem: DiscretizedProblem
    terms: tuple = field(repr=False)
    coefs: tuple = field(repr=False)
    label: str = ""

    @property
    def dim(self) -> int:
        return len(self.terms[0])

    @property
    def shape(self):
        m_out, r = self.terms[0][0].shape
        return m_out, r


def operator_from_matrix(problem: DiscretizedProblem, matrix, label: str = "") -> TensorSurrogate:
    return TensorSurrogate(problem, ((np.asarray(matrix, dtype=float),),), (1.0,), label)


def kronecker_surrogate(problem: DiscretizedProblem, factor_lists: Sequence[Sequence[np.ndarray]], coefs=None, label: str = "") -> TensorSurrogate:
    terms = tuple(tuple(np.asarray(f, dtype=float) for f in fl) for fl in factor_lists)
    if not terms:
        raise StructuralError("a surrogate needs at least one Kronecker term")
    d = len(terms[0])
    shape = terms[0][0].shape
    if any(len(t) != d or any(f.shape != shape for f in t) for t in terms):
        raise StructuralError("inconsistent factor dimensions")
    if d > MAX_DIM:
        raise DomainError(f"oracle supports d <= {MAX_DIM}")
    if coefs is None:
        coefs = (1.0,) * len(terms)
    return TensorSurrogate(problem, terms, tuple(float(c) for c in coefs), label)


def pattern_surrogate(split, pattern) -> TensorSurrogate:
    """``V_{j_1} (x) ... (x) V_{j_d}`` for ``pattern`` in ``{1, 2}^d``."""
    mats = {1: split.v1, 2: split.v2}
    return kronecker_surrogate(split.problem, [[mats[int(j)] for j in pattern]], label="V" + "".join(str(int(j)) for j in pattern))


def full_surrogate(problem: DiscretizedProblem, d: int) -> TensorSurrogate:
    """``S_d = S1^{(x) d}``."""
    return kronecker_surrogate(problem, [[problem.s1] * d], label=f"S_{d}")


def tail_surrogate(split, d: int, k: int) -> TensorSurrogate:
    """Sum of all ``V_{j_1} (x) ... (x) V_{j_d}`` with ``|j|_2 > k``."""
    from itertools import product

    pats = [p for p in product((1, 2), repeat=d) if sum(1 for j in p if j == 2) > k]
    if not pats:
        raise DomainError("tail is empty for k >= d")
    mats = {1: split.v1, 2: split.v2}
    return kronecker_surrogate(split.problem, [[mats[j] for j in p] for p in pats], label=f"tail_{d}_{k}")


def _mode_product(x: np.ndarray, mats) -> np.ndarray:
    """Apply ``mats[l]`` along axis ``l`` of ``x``."""
    for axis, mat in enumerate(mats):
        x = np.moveaxis(np.tensordot(mat, x, axes=([1], [axis])), 0, axis)
    return x


def _khatri_rao(factors, rows: int) -> np.ndarray:
    """Row-wise Kronecker product of (rows, n_l) arrays -> (rows, prod n_l)."""
    return reduce(lambda a, b: (a[:, :, None] * b[:, None, :]).reshape(rows, -1), factors, np.ones((rows, 1)))


class _Residual:
    """Matrix-free ``E = T - A`` in surrogate coordinates."""

    def __init__(self, algorithm: TensorAlgorithm, target: TensorSurrogate):
        d = target.dim
        m_out, r = target.shape
        if algorithm.n_terms and (algorithm.dim != d or algorithm.output_size != m_out):
            raise StructuralError(
                f"algorithm (d={algorithm.dim}, m={algorithm.output_size}) does not match target (d={d}, m={m_out})"
            )
        self.d, self.m, self.r = d, m_out, r
        self.target = target
        self.n_terms = algorithm.n_terms
        if self.n_terms:
            samples = algorithm.points[algorithm.term_point]
            self.axis_points = []
            self.axis_index = []
            self.axis_reps = []
            for ax in range(d):
                uniq, inv = np.unique(samples[:, ax], return_inverse=True)
                self.axis_points.append(uniq)
                self.axis_index.append(np.asarray(inv).reshape(-1))
                self.axis_reps.append(target.problem.representers(uniq))
            self.first = algorithm.factors[0]
            self.rest = _khatri_rao(list(algorithm.factors[1:]), self.n_terms)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = x.reshape((self.r,) * self.d)
        y = np.zeros((self.m,) * self.d)
        for coef, mats in zip(self.target.coefs, self.target.terms):
            y += coef * _mode_product(x, mats)
        if self.n_terms:
            grid = _mode_product(x, self.axis_reps)
            vals = grid[tuple(self.axis_index)]
            y -= ((self.first * vals[:, None]).T @ self.rest).reshape((self.m,) * self.d)
        return y.reshape(-1)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = y.reshape((self.m,) * self.d)
        x = np.zeros((self.r,) * self.d)
        for coef, mats in zip(self.target.coefs, self.target.terms):
            x += coef * _mode_product(y, [m.T for m in mats])
        if self.n_terms:
            c = np.einsum("tj,tj->t", self.first @ y.reshape(self.m, -1), self.rest)
            grid = np.zeros(tuple(p.size for p in self.axis_points))
            np.add.at(grid, tuple(self.axis_index), c)
            x -= _mode_product(grid, [rep.T for rep in self.axis_reps])
        return x.reshape(-1)

    def dense(self) -> np.ndarray:
        mat = np.zeros((self.m**self.d, self.r**self.d))
        for coef, mats in zip(self.target.coefs, self.target.terms):
            mat += coef * reduce(np.kron, mats)
        if self.n_terms:
            reps = _khatri_rao([rep[idx] for rep, idx in zip(self.axis_reps, self.axis_index)], self.n_terms)
            outs = (self.first[:, :, None] * self.rest[:, None, :]).reshape(self.n_terms, -1)
            mat -= outs.T @ reps
        return mat


def _largest_singular_value(res: _Residual) -> float:
    rows, cols = res.m**res.d, res.r**res.d
    if rows * cols <= DENSE_LIMIT:
        return float(np.linalg.norm(res.dense(), 2)) if rows and cols else 0.0
    normal = LinearOperator((cols, cols), matvec=lambda v: res.rmatvec(res.matvec(v)), dtype=float)
    v0 = np.ones(cols) / np.sqrt(cols)
    try:
        vals = eigsh(normal, k=1, which="LA", v0=v0, tol=0.0, ncv=min(cols - 1, 32), maxiter=5000, return_eigenvectors=False)
        top = float(vals[0])
    except (ArpackError, ArpackNoConvergence):
        top = _power_iteration(normal, cols)
    return float(np.sqrt(max(top, 0.0)))


def _power_iteration(op, n: int, steps: int = 500) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    theta = 0.0
    for _ in range(steps):
        w = op.matvec(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        theta = float(v @ w)
        v = w / norm
    return theta


def worst_case_error(algorithm: TensorAlgorithm, target: TensorSurrogate) -> float:
    """``sup_{||f||_{F_d} <= 1} ||T f - A f||`` on the surrogate."""
    _check_ceiling(target)
    return _largest_singular_value(_Residual(algorithm, target))


def operator_norm(target: TensorSurrogate) -> float:
    _check_ceiling(target)
    m_out, _ = target.shape
    return _largest_singular_value(_Residual(TensorAlgorithm.zero(target.dim, m_out), target))


def initial_error(spectrum, d: int) -> float:
    """``e0(S_d) = lambda_1^{d/2}``."""
    if spectrum.lambda1 <= 0:
        raise DomainError("lambda_1 must be positive")
    return float(spectrum.lambda1 ** (d / 2.0))


def _check_ceiling(target: TensorSurrogate) -> None:
    if target.dim > MAX_DIM:
        raise DomainError(f"oracle supports d <= {MAX_DIM}, got {target.dim}")
    if target.dim > 1 and max(target.shape) > MAX_FACTOR_SIZE:
        raise DomainError(f"oracle factor size is capped at {MAX_FACTOR_SIZE} for d > 1")


@dataclass(frozen=True)
class Check:
    check_id: str
    expected: float
    measured: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "expected": self.expected, "measured": self.measured, "tol": self.tol, "pass": self.passed}


def check(check_id: str, measured: float, expected: float, tol: float, relation: str = "abs") -> Check:
    """Record one verification. ``relation`` is ``abs``, ``rel`` or ``le``."""
    if relation == "abs":
        ok = abs(measured - expected) <= tol
    elif relation == "rel":
        ok = abs(measured - expected) <= tol * abs(expected)
    elif relation == "le":
        ok = measured <= expected + tol
    else:
        raise ValueError(relation)
    return Check(check_id, float(expected), float(measured), float(tol), bool(ok))


def report_to_json(checks) -> str:
    return json.dumps([c.to_dict() for c in checks], indent=2)
