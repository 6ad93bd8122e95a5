"""Univariate reproducing kernels and the rank-one space restriction.

Three kernel kinds are supported:

``sobolev``
    ``K(x, y) = 1 + min(x, y)`` on ``[0, 1]``.
``tabulated``
    ``K(x, y) = phi(x) . phi(y)`` where the feature map ``phi`` is given by a
    table of values at abscissae and linearly interpolated in between.
``modified``
    ``K(x, y) = B(x, y) - g(x) g(y) / norm_sq`` where ``B`` is a base kernel
    and ``g = sum_i c_i B(., z_i)`` is stored by its coefficients ``c`` over
    base kernel sections at the master grid ``z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AlreadySatisfiedError, AnchorPointError, DomainError, DuplicatePointsError

TOL_PSD = 1e-9
TOL_ZERO = 1e-10
# residual below which the eigenfunction condition counts as satisfied
TOL_COND = 1e-6

SOBOLEV = "sobolev"
TABULATED = "tabulated"
MODIFIED = "modified"


@dataclass(frozen=True, eq=False)
class Kernel:
    """Immutable univariate kernel on an interval ``domain = (a, b)``.

    Use :func:`sobolev_kernel`, :func:`tabulated_kernel` or
    :func:`rank_one_modify` rather than the constructor.
    """

    id: str
    domain: tuple = (0.0, 1.0)
    base: Optional["Kernel"] = None
    anchor: Optional[float] = None
    nodes: Optional[np.ndarray] = field(default=None, repr=False)
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)
    norm_sq: Optional[float] = None
    label: Optional[str] = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.id == MODIFIED:
            return f"{self.base.name}-modified"
        return self.id

    def check_points(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.domain
        if not np.all(np.isfinite(x)) or np.any(x < a) or np.any(x > b):
            raise DomainError(f"points outside the kernel domain [{a}, {b}]")
        return x

    def features(self, x) -> np.ndarray:
        """Tabulated feature map at ``x``, shape (len(x), p)."""
        table = self.coefficients
        return np.column_stack([np.interp(x, self.nodes, table[:, k]) for k in range(table.shape[1])])

    def section_combination(self, x) -> np.ndarray:
        """Values at ``x`` of the stored correction ``g`` (modified kernels)."""
        return self.base.matrix(x, self.nodes) @ self.coefficients

    def matrix(self, x, y) -> np.ndarray:
        """Kernel matrix ``K(x_i, y_j)``; no domain checks."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.id == SOBOLEV:
            return 1.0 + np.minimum.outer(x, y)
        if self.id == TABULATED:
            return self.features(x) @ self.features(y).T
        if self.id == MODIFIED:
            gx = self.section_combination(x)
            gy = gx if y is x else self.section_combination(y)
            return self.base.matrix(x, y) - np.outer(gx, gy) / self.norm_sq
        raise DomainError(f"unknown kernel id {self.id!r}")

    def diagonal(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.id == SOBOLEV:
            return 1.0 + x
        if self.id == TABULATED:
            phi = self.features(x)
            return np.einsum("ij,ij->i", phi, phi)
        g = self.section_combination(x)
        return self.base.diagonal(x) - g * g / self.norm_sq

    def to_dict(self) -> dict:
        out = {"id": self.id, "name": self.name, "domain": [float(v) for v in self.domain]}
        if self.label:
            out["label"] = self.label
        if self.id == TABULATED:
            out["nodes"] = self.nodes.tolist()
            out["features"] = self.coefficients.tolist()
        elif self.id == MODIFIED:
            out["base"] = self.base.to_dict()
            out["anchor"] = self.anchor
            out["nodes"] = self.nodes.tolist()
            out["coefficients"] = self.coefficients.tolist()
            out["norm_sq"] = self.norm_sq
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def kernel_from_dict(data: dict) -> Kernel:
    domain = tuple(float(v) for v in data.get("domain", (0.0, 1.0)))
    kid = data["id"]
    if kid == SOBOLEV:
        return Kernel(SOBOLEV, domain)
    if kid == TABULATED:
        return tabulated_kernel(data["nodes"], data["features"], domain)
    if kid == MODIFIED:
        return Kernel(
            MODIFIED,
            domain,
            base=kernel_from_dict(data["base"]),
            anchor=data.get("anchor"),
            nodes=np.asarray(data["nodes"], dtype=float),
            coefficients=np.asarray(data["coefficients"], dtype=float),
            norm_sq=float(data["norm_sq"]),
            label=data.get("label"),
        )
    raise DomainError(f"unknown kernel id {kid!r}")


def sobolev_kernel() -> Kernel:
    """``1 + min(x, y)`` on ``[0, 1]``."""
    return Kernel(SOBOLEV, (0.0, 1.0))


def tabulated_kernel(nodes, features, domain=(0.0, 1.0)) -> Kernel:
    """Finite-rank kernel ``phi(x) . phi(y)`` from a feature table.

    ``features`` has shape (len(nodes),) for a rank-one kernel ``g(x) g(y)``
    or (len(nodes), p) for rank ``p``.
    """
    nodes = np.asarray(nodes, dtype=float)
    table = np.asarray(features, dtype=float)
    if table.ndim == 1:
        table = table[:, None]
    if table.shape[0] != nodes.shape[0] or np.any(np.diff(nodes) <= 0):
        raise DomainError("tabulated kernel needs strictly increasing nodes, one feature row per node")
    return Kernel(TABULATED, tuple(float(v) for v in domain), nodes=nodes, coefficients=table)


def kernel_preset(name: str) -> Kernel:
    if name in ("sobolev", "sobolev-min-plus-one"):
        return sobolev_kernel()
    raise DomainError(f"unknown kernel preset {name!r}")


def eval_kernel(kernel: Kernel, x: float, y: float) -> float:
    x, y = kernel.check_points([x, y])
    return float(kernel.matrix([x], [y])[0, 0])


def gram(kernel: Kernel, points) -> np.ndarray:
    """Symmetric Gram matrix ``K(p_i, p_j)`` on pairwise distinct points."""
    p = kernel.check_points(points)
    if np.unique(p).size != p.size:
        raise DuplicatePointsError("Gram matrix needs pairwise distinct points")
    g = kernel.matrix(p, p)
    return 0.5 * (g + g.T)


def correction_vector(spectrum, t_star: float):
    """Coefficients and squared norm of ``eta_1 - K(., t*) / eta_1(t*)``.

    ``t_star`` must be a node of the spectrum's discretization. Returns
    ``(coefficients, norm_sq, eta1_at_anchor)``.
    """
    problem = spectrum.problem
    p = problem.node_index(t_star)
    if p is None:
        raise DomainError("the anchor t* must be a node of the discretization grid")
    coords1 = spectrum.coords[:, 0]
    eta_t = float(problem.factor[p] @ coords1)
    section = problem.factor[p]
    scale = np.sqrt(section @ section)
    if abs(eta_t) <= TOL_ZERO * max(1.0, scale):
        raise AnchorPointError(f"eta_1 vanishes at t* = {t_star!r}; pick another anchor")
    tilde = coords1 - section / eta_t
    norm_sq = float(tilde @ tilde)
    if np.sqrt(norm_sq) <= TOL_COND:
        raise AlreadySatisfiedError("already satisfied: eta_1 is proportional to K(., t*)")
    unit = np.zeros(problem.m)
    unit[p] = 1.0
    coefficients = spectrum.coefficients[:, 0] - unit / eta_t
    return coefficients, norm_sq, eta_t


def rank_one_modify(kernel: Kernel, spectrum, t_star: float) -> Kernel:
    """Restrict the space so that ``eta_1`` becomes a normalized kernel section.

    The new kernel is ``K - g (x) g / ||g||^2`` with
    ``g = eta_1 - K(., t*) / eta_1(t*)``; ``g`` is orthogonal to the
    restricted space, which still contains ``eta_1``.

    Raises
    ------
    AnchorPointError
        ``eta_1(t*)`` is (numerically) zero.
    AlreadySatisfiedError
        ``g`` vanishes, i.e. ``eta_1`` is already proportional to ``K(., t*)``.
    """
    if spectrum.problem.kernel is not kernel:
        raise DomainError("spectrum was computed for a different kernel")
    coefficients, norm_sq, _ = correction_vector(spectrum, t_star)
    return Kernel(
        MODIFIED,
        kernel.domain,
        base=kernel,
        anchor=float(t_star),
        nodes=spectrum.problem.nodes.copy(),
        coefficients=coefficients,
        norm_sq=norm_sq,
    )


def select_anchor(spectrum) -> float:
    """Default anchor ``t*``: the node where ``|eta_1|`` is largest (first on ties)."""
    values = spectrum.problem.factor @ spectrum.coords[:, 0]
    return float(spectrum.problem.nodes[int(np.argmax(np.abs(values)))])
