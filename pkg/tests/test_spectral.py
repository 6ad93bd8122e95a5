import json

import numpy as np
import pytest

from oracles import sobolev_eigenvalues
from tensorqpt.errors import DomainError, ResolutionError
from tensorqpt.kernels import tabulated_kernel
from tensorqpt.spectral import (
    check_eigenfunction_point_condition,
    discretize_problem,
    eigensystem,
    estimate_decay,
    spectrum_to_json,
)


def test_too_coarse(sobolev):
    with pytest.raises(ResolutionError):
        discretize_problem(sobolev, 16)


def test_whitening(base_problem):
    r = base_problem.factor
    assert np.allclose(r @ r.T, base_problem.gram, atol=1e-10)
    # node representers reproduce the Gram matrix
    reps = base_problem.representers(base_problem.nodes)
    assert np.allclose(reps @ reps.T, base_problem.gram, atol=1e-10)


def test_off_node_representer(base_problem, sobolev):
    x = np.array([0.2, 0.61])
    reps = base_problem.representers(x)
    # <K(., x), K(., node)> = K(x, node) holds for functions inside the surrogate space
    cross = reps @ base_problem.factor.T
    assert np.allclose(cross, sobolev.matrix(x, base_problem.nodes), atol=1e-8)


def test_eigenpairs_orthonormal(base_spectrum):
    c = base_spectrum.coords
    assert np.allclose(c.T @ c, np.eye(c.shape[1]), atol=1e-10)
    assert np.all(np.diff(base_spectrum.lambdas) <= 1e-15)
    w = base_spectrum.problem.s1.T @ base_spectrum.problem.s1
    assert np.allclose(w @ c, c * base_spectrum.lambdas, atol=1e-10)


def test_eigenvalues_against_closed_form(sobolev):
    exact = sobolev_eigenvalues(5)
    spec = eigensystem(discretize_problem(sobolev, 256), 5)
    assert np.allclose(spec.lambdas, exact, rtol=2e-3)


def test_normalization(problem, spectrum):
    assert problem.normalized
    assert spectrum.lambda1 == pytest.approx(1.0, abs=1e-12)
    assert 0 < spectrum.lambda2 < 1


def test_eigenfunction_evaluation(base_spectrum):
    p = base_spectrum.problem
    at_nodes = base_spectrum.evaluate(0, p.nodes)
    assert np.allclose(at_nodes, base_spectrum.values[:, 0], atol=1e-8)


def test_estimate_decay_power_law():
    n = np.arange(1, 65)
    assert estimate_decay(n ** -2.0) == pytest.approx(2.0, abs=1e-10)
    assert estimate_decay(np.ones(20)) == 0.0
    with pytest.raises(DomainError):
        estimate_decay(np.ones(5))


def test_point_condition_unmodified_fails(base_spectrum):
    cond = check_eigenfunction_point_condition(base_spectrum)
    assert not cond.holds
    assert cond.residual > 0.1
    assert cond.t is None


def test_point_condition_modified_holds(spectrum):
    cond = check_eigenfunction_point_condition(spectrum)
    assert cond.holds
    assert cond.residual <= 1e-6
    assert cond.eta_tail_max <= 1e-6
    assert cond.delta in (-1, 1)


def test_rank_one_kernel(sobolev):
    nodes = np.linspace(0, 1, 33)
    k = tabulated_kernel(nodes, 1.0 + nodes)
    spec = eigensystem(discretize_problem(k, 32), 10)
    assert spec.q == 1
    assert spec.lambda2 == 0.0
    assert check_eigenfunction_point_condition(spec).holds


def test_spectrum_json(base_spectrum):
    data = json.loads(spectrum_to_json(base_spectrum))
    assert set(data) == {"kernel_id", "m", "normalized", "lambdas", "gap", "t", "delta", "decay_lambda"}
    assert data["kernel_id"] == "sobolev"
    assert data["lambdas"][0] == pytest.approx(base_spectrum.lambda1)
