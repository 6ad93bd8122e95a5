"""Independent reference computations used by the tests."""

import math

import numpy as np
from scipy.optimize import brentq


def sobolev_eigenvalues(count: int) -> np.ndarray:
    """Exact eigenvalues of the integral operator with kernel ``1 + min(x, y)`` on [0, 1].

    Eigenfunctions solve ``u'' = -u / lambda`` with ``u(0) = u'(0)`` and
    ``u'(1) = 0``, so ``lambda = 1 / w^2`` where ``w tan w = 1``; the j-th
    root lies in ``((j - 1) pi, (j - 1) pi + pi / 2)``.
    """
    out = []
    for j in range(count):
        lo, hi = j * math.pi + 1e-12, j * math.pi + math.pi / 2 - 1e-12
        w = brentq(lambda x: x * math.sin(x) - math.cos(x), lo, hi, xtol=1e-15)
        out.append(1.0 / w**2)
    return np.array(out)


def combination_technique(rules, k: int, q: int):
    """Dense ``A(q, k)`` via ``sum (-1)^(q-|i|) C(k-1, q-|i|) U_{i_1} (x) ... (x) U_{i_k}``.

    ``rules`` are dense (m_out x r) surrogate matrices of ``U_1, U_2, ...``.
    """
    from itertools import product
    from functools import reduce

    total = None
    for i in product(range(1, q - k + 2), repeat=k):
        s = sum(i)
        if s < max(k, q - k + 1) or s > q:
            continue
        coef = (-1) ** (q - s) * math.comb(k - 1, q - s)
        term = coef * reduce(np.kron, [rules[j - 1] for j in i])
        total = term if total is None else total + term
    return total


def dense_algorithm_matrix(algorithm, problem) -> np.ndarray:
    """Induced surrogate matrix of a TensorAlgorithm, built term by term."""
    from functools import reduce

    d = algorithm.dim
    m_out = algorithm.output_size
    mat = np.zeros((m_out**d, problem.rank**d))
    for tau in range(algorithm.n_terms):
        z = algorithm.points[algorithm.term_point[tau]]
        out = reduce(np.kron, [algorithm.factors[ax][tau] for ax in range(d)])
        rep = reduce(np.kron, [problem.representers([z[ax]])[0] for ax in range(d)])
        mat += np.outer(out, rep)
    return mat


def _apply_kron(mats, x):
    for axis, mat in enumerate(mats):
        x = np.moveaxis(np.tensordot(mat, x, axes=([1], [axis])), 0, axis)
    return x


def combination_apply(rules, k: int, q: int, x):
    """Action of the combination-technique ``A(q, k)`` on a coefficient tensor ``x``."""
    from itertools import product

    total = 0.0
    for i in product(range(1, q - k + 2), repeat=k):
        s = sum(i)
        if s < max(k, q - k + 1) or s > q:
            continue
        coef = (-1) ** (q - s) * math.comb(k - 1, q - s)
        total = total + coef * _apply_kron([rules[j - 1] for j in i], x)
    return total


def algorithm_apply(algorithm, problem, x):
    """``sum_tau f(z_tau) g_tau`` for the function with whitened coefficients ``x``."""
    from functools import reduce

    d = algorithm.dim
    out = np.zeros((algorithm.output_size,) * d)
    for tau in range(algorithm.n_terms):
        z = algorithm.points[algorithm.term_point[tau]]
        value = _apply_kron([problem.representers([z[ax]]) for ax in range(d)], x).reshape(())
        out += float(value) * reduce(np.multiply.outer, [algorithm.factors[ax][tau] for ax in range(d)])
    return out
