"""Small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np


def pivoted_cholesky(diag, column, tol, max_rank=None):
    """Diagonally pivoted (left-looking) Cholesky factorization.

    Works from a diagonal and a column oracle so the full matrix never has to
    be formed. The pivot is the largest remaining diagonal entry; ties go to
    the smallest index.

    Parameters
    ----------
    diag : ndarray
        Diagonal of the symmetric positive semidefinite matrix, shape (m,).
    column : callable
        ``column(j)`` returns column ``j`` of the matrix, shape (m,).
    tol : float
        Stop when the largest remaining diagonal entry is ``<= tol``.
    max_rank : int, optional
        Hard cap on the number of pivots.

    Returns
    -------
    factor : ndarray
        Shape (m, r), rows in the original order, ``factor @ factor.T``
        reproduces the matrix up to the discarded Schur complement.
    pivots : ndarray of int
        Selected indices in selection order.
    residuals : ndarray
        Largest remaining diagonal entry before each selection, followed by
        the value after the last selection (length r + 1).
    """
    residual = np.array(diag, dtype=float, copy=True)
    m = residual.shape[0]
    if max_rank is None:
        max_rank = m
    max_rank = min(max_rank, m)
    factor = np.zeros((m, max_rank))
    pivots = []
    history = []
    for k in range(max_rank):
        j = int(np.argmax(residual))
        top = residual[j]
        history.append(top)
        if top <= tol:
            break
        col = np.asarray(column(j), dtype=float) - factor[:, :k] @ factor[j, :k]
        col /= np.sqrt(top)
        factor[:, k] = col
        residual -= col * col
        # selected entries are exactly exhausted
        residual[j] = 0.0
        residual[pivots] = 0.0
        pivots.append(j)
    else:
        history.append(float(residual.max()) if m else 0.0)
    r = len(pivots)
    return factor[:, :r].copy(), np.array(pivots, dtype=int), np.array(history)


def top_singular_value_dense(matrix):
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))
