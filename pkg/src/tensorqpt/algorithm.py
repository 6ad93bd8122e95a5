"""Linear sampling algorithms ``A f = sum_m f(t_m) g_m`` with rank-one outputs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError


@dataclass(frozen=True, eq=False)
class TensorAlgorithm:
    """Sampling algorithm on ``D1^d`` with outputs in the d-fold output space.

    ``points`` holds the distinct sample vectors (sorted lexicographically).
    Term ``tau`` contributes ``f(points[term_point[tau]])`` times the rank-one
    tensor ``factors[0][tau] (x) ... (x) factors[d-1][tau]``; several terms can
    share a sample vector.
    """

    points: np.ndarray = field(repr=False)
    term_point: np.ndarray = field(repr=False)
    factors: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def cardinality(self) -> int:
        return self.points.shape[0]

    @property
    def n_terms(self) -> int:
        return self.term_point.shape[0]

    @property
    def output_size(self) -> int:
        return self.factors[0].shape[1]

    def __repr__(self):
        return f"TensorAlgorithm(dim={self.dim}, cardinality={self.cardinality}, terms={self.n_terms})"

    @classmethod
    def from_terms(cls, samples, factors) -> "TensorAlgorithm":
        """Merge terms that share a sample vector.

        Parameters
        ----------
        samples : array_like, shape (T, d)
            Sample vector of each rank-one term (duplicates allowed).
        factors : sequence of d arrays, each (T, m_out)
        """
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2:
            raise StructuralError("sample vectors must form a (T, d) array")
        d = samples.shape[1]
        factors = tuple(np.asarray(f, dtype=float) for f in factors)
        if len(factors) != d or any(f.shape[0] != samples.shape[0] for f in factors):
            raise StructuralError("need one (T, m_out) factor array per coordinate")
        if samples.shape[0] == 0:
            return cls(samples.reshape(0, d), np.zeros(0, dtype=int), factors)
        points, inverse = np.unique(samples, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        order = np.argsort(inverse, kind="stable")
        return cls(points, inverse[order], tuple(f[order] for f in factors))

    @classmethod
    def zero(cls, d: int, m_out: int) -> "TensorAlgorithm":
        return cls(np.zeros((0, d)), np.zeros(0, dtype=int), tuple(np.zeros((0, m_out)) for _ in range(d)))

    def outputs_at(self, i: int):
        """Rank-one outputs attached to sample vector ``i`` as a list of factor tuples."""
        sel = np.flatnonzero(self.term_point == i)
        return [tuple(f[t] for f in self.factors) for t in sel]

    def summed_outputs(self) -> np.ndarray:
        """For ``d = 1``: the single output element per sample point, (N, m_out)."""
        if self.dim != 1:
            raise StructuralError("rank-one outputs only collapse to elements for d = 1")
        out = np.zeros((self.cardinality, self.output_size))
        np.add.at(out, self.term_point, self.factors[0])
        return out

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "cardinality": self.cardinality,
            "points": self.points.tolist(),
            "term_point": self.term_point.tolist(),
            "factors": [f.tolist() for f in self.factors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TensorAlgorithm":
        d = int(data["dim"])
        points = np.asarray(data["points"], dtype=float).reshape(-1, d)
        factors = tuple(np.asarray(f, dtype=float).reshape(len(data["term_point"]), -1) for f in data["factors"])
        return cls(points, np.asarray(data["term_point"], dtype=int), factors)


def concatenate(parts, dim: int, m_out: int) -> TensorAlgorithm:
    """Sum of algorithms over the same ``D1^d``, merged by sample vector."""
    parts = [p for p in parts if p.n_terms]
    if not parts:
        return TensorAlgorithm.zero(dim, m_out)
    samples = np.concatenate([p.points[p.term_point] for p in parts])
    factors = [np.concatenate([p.factors[ax] for p in parts]) for ax in range(dim)]
    return TensorAlgorithm.from_terms(samples, factors)
