import json

import numpy as np
import pytest

from oracles import dense_algorithm_matrix
from tensorqpt import oracle
from tensorqpt.algorithm import TensorAlgorithm
from tensorqpt.errors import DomainError, StructuralError
from tensorqpt.oracle import (
    check,
    full_surrogate,
    initial_error,
    kronecker_surrogate,
    operator_norm,
    pattern_surrogate,
    report_to_json,
    worst_case_error,
)
from tensorqpt.smolyak import smolyak_algorithm


@pytest.mark.parametrize("d", [1, 2, 3])
def test_zero_algorithm_gives_initial_error(problem, spectrum, d):
    m_out = problem.m
    err = worst_case_error(TensorAlgorithm.zero(d, m_out), full_surrogate(problem, d))
    assert err == pytest.approx(1.0, abs=1e-8)
    assert initial_error(spectrum, d) == pytest.approx(err, abs=1e-8)


def test_initial_error_values(base_spectrum):
    assert initial_error(base_spectrum, 2) == pytest.approx(base_spectrum.lambda1)


def test_pattern_norms(split, spectrum):
    assert operator_norm(pattern_surrogate(split, (2, 2))) == pytest.approx(spectrum.lambda2, rel=1e-8)
    assert operator_norm(pattern_surrogate(split, (2, 2, 2))) == pytest.approx(spectrum.lambda2**1.5, rel=1e-6)


def test_eigenvalue_products(problem, spectrum):
    w2 = np.kron(problem.s1, problem.s1)
    top = np.sort(np.linalg.svd(w2, compute_uv=False) ** 2)[::-1][:10]
    lam = spectrum.lambdas
    products = np.sort(np.outer(lam, lam).ravel())[::-1][:10]
    assert np.allclose(top, products, rtol=1e-6)


def test_matrix_free_matches_dense(split, sequence, problem, monkeypatch):
    alg = smolyak_algorithm(sequence, 2, 4)
    target = kronecker_surrogate(problem, [[split.v2, split.v2]])
    dense = worst_case_error(alg, target)
    monkeypatch.setattr(oracle, "DENSE_LIMIT", 0)
    lanczos = worst_case_error(alg, target)
    assert lanczos == pytest.approx(dense, rel=1e-9)
    # and against an explicit term-by-term assembly
    explicit = np.kron(split.v2, split.v2) - dense_algorithm_matrix(alg, problem)
    assert np.linalg.norm(explicit, 2) == pytest.approx(dense, rel=1e-9)


def test_power_iteration_fallback(split, problem):
    res = oracle._Residual(TensorAlgorithm.zero(1, problem.m), kronecker_surrogate(problem, [[split.v2]]))
    from scipy.sparse.linalg import LinearOperator

    op = LinearOperator((problem.rank,) * 2, matvec=lambda v: res.rmatvec(res.matvec(v)))
    top = oracle._power_iteration(op, problem.rank, steps=2000)
    assert np.sqrt(top) == pytest.approx(np.linalg.norm(split.v2, 2), rel=1e-6)


def test_dimension_mismatch(split, problem, sequence):
    alg = smolyak_algorithm(sequence, 2, 3)
    with pytest.raises(StructuralError):
        worst_case_error(alg, kronecker_surrogate(problem, [[split.v2] * 3]))
    with pytest.raises(StructuralError):
        kronecker_surrogate(problem, [[split.v2], [split.v2, split.v2]])


def test_ceiling(problem, split):
    with pytest.raises(DomainError):
        kronecker_surrogate(problem, [[split.v2] * 4])


def test_checks_report():
    checks = [check("a", 1.0, 1.0 + 1e-9, 1e-8), check("b", 0.3, 0.5, 0.0, "le"), check("c", 2.0, 1.0, 0.1, "rel")]
    data = json.loads(report_to_json(checks))
    assert [c["pass"] for c in data] == [True, True, False]
    assert set(data[0]) == {"check_id", "expected", "measured", "tol", "pass"}
    with pytest.raises(ValueError):
        check("x", 1, 1, 0, "eq")
