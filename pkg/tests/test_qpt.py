import json
import math
from itertools import permutations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorqpt.errors import DomainError, FitError, GapViolation, RateFailure, StructuralError
from tensorqpt.oracle import kronecker_surrogate, pattern_surrogate, worst_case_error
from tensorqpt.qpt import (
    Pattern,
    assemble_qpt_algorithm,
    build_pattern_algorithm,
    choose_n,
    dedup_cardinality,
    index_count,
    patterns,
    qpt_envelope_fit,
    truncation_level,
)
from tensorqpt.smolyak import RateFit, smolyak_algorithm


def test_truncation_examples():
    assert truncation_level(0.5, 0.25, 10) == 2
    assert truncation_level(0.5, 0.25, 1) == 1
    assert truncation_level(0.9, 1e-6, 5) == 1
    assert truncation_level(0.5, 0.0, 5) == 0
    with pytest.raises(GapViolation):
        truncation_level(0.5, 1.0, 3)
    with pytest.raises(DomainError):
        truncation_level(1.0, 0.5, 3)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 0.99), st.floats(1e-6, 0.95), st.integers(1, 64))
def test_truncation_guarantee(eps, lam2, d):
    k = truncation_level(eps, lam2, d)
    assert 1 <= k <= d
    if k < d:
        assert lam2 ** (k / 2) <= eps / 2 * (1 + 1e-12)


def test_index_count_examples():
    assert index_count(10, 2) == 56
    assert index_count(4, 4) == 16
    assert index_count(64, 0) == 1
    assert index_count(64, 64) == 2**64
    assert isinstance(index_count(200, 100), int)
    with pytest.raises(DomainError):
        index_count(3, 4)


def test_choose_n_examples():
    assert choose_n(10, 0.1, RateFit(1.0, 1.0, 0.0), 2) == 4000
    assert choose_n(4, 0.5, RateFit(1.0, 2.0, 0.0), 3) == 12
    with pytest.raises(RateFailure):
        choose_n(4, 0.5, RateFit(1.0, 0.0, 0.0), 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 64), st.floats(0.01, 0.9), st.floats(0.01, 10.0), st.floats(0.2, 3.0))
def test_choose_n_minimal(d, eps, alpha, r):
    k = max(1, d // 3)
    rate = RateFit(alpha, r, 0.0)
    n = choose_n(d, eps, rate, k)
    big = d**k if 2 * k <= d else 2**d
    lhs = math.log(2 * alpha * big)
    assert lhs - r * math.log(n) <= math.log(eps / 2) + 1e-9
    if 1 < n < 2**40:
        assert lhs - r * math.log(n - 1) > math.log(eps / 2) - 1e-9


def test_pattern_positions():
    p = Pattern((1, 2, 2, 1))
    assert p.size2 == 2 and p.positions == (2, 3)
    assert Pattern.from_positions(4, (2, 3)) == p
    with pytest.raises(DomainError):
        Pattern((1, 3))
    shells = [q.size2 for q in patterns(4, 2)]
    assert shells == sorted(shells) and len(shells) == index_count(4, 2)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_anchor_only_pattern_exact(split, problem, d):
    alg = build_pattern_algorithm(Pattern((1,) * d), split)
    assert alg.cardinality == 1
    assert np.all(alg.points == split.anchor)
    assert worst_case_error(alg, pattern_surrogate(split, (1,) * d)) <= 1e-10


def test_pattern_identity(split, sequence):
    comp = smolyak_algorithm(sequence, 1, 4)
    lhs = worst_case_error(build_pattern_algorithm(Pattern((1, 2)), split, comp), pattern_surrogate(split, (1, 2)))
    rhs = worst_case_error(comp, kronecker_surrogate(split.problem, [[split.v2]]))
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_pattern_dimension_mismatch(split, sequence):
    with pytest.raises(StructuralError):
        build_pattern_algorithm(Pattern((1, 2, 2)), split, smolyak_algorithm(sequence, 1, 3))


def test_pattern_permutation_invariance(split, sequence):
    comp = smolyak_algorithm(sequence, 2, 4)
    errs = []
    for j in sorted(set(permutations((1, 2, 2)))):
        alg = build_pattern_algorithm(Pattern(j), split, comp)
        errs.append(worst_case_error(alg, pattern_surrogate(split, j)))
    assert max(errs) - min(errs) <= 1e-8


def test_assembly_counts(split, sequence, rate):
    for d, eps in [(2, 0.25), (3, 0.25), (3, 0.5)]:
        plan = assemble_qpt_algorithm(d, eps, split, rate, sequence)
        assert plan.materialized
        assert plan.algorithm.cardinality == plan.card_dedup
        assert plan.card_dedup <= plan.card_terms <= plan.card_bound
        assert plan.card_bound == plan.n * index_count(d, plan.k)
        # brute force count of distinct sample vectors
        assert len({tuple(z) for z in plan.algorithm.points}) == plan.card_dedup


def test_dedup_with_anchor_on_grid():
    # anchor first used at level 2: shell-2 vectors with one anchor coordinate overlap shell 1
    counts = [1, 1, 2, 4]
    levels = {1: 4, 2: 5}
    with_overlap = dedup_cardinality(3, 2, levels, counts, anchor_level=2)
    without = dedup_cardinality(3, 2, levels, counts, anchor_level=None)
    assert with_overlap < without
    # brute force: points labelled by (level, id); anchor is ("a",)
    pts = [(1, 0), (2, 0), (3, 0), (3, 1), (4, 0), (4, 1), (4, 2), (4, 3)]
    anchor = (2, 0)
    seen = set()
    for j in product((1, 2), repeat=3):
        ell = j.count(2)
        if ell > 2:
            continue
        if ell == 0:
            seen.add((anchor,) * 3)
            continue
        for w in product(pts, repeat=ell):
            if sum(p[0] for p in w) <= levels[ell]:
                it = iter(w)
                seen.add(tuple(next(it) if v == 2 else anchor for v in j))
    assert len(seen) == with_overlap


def test_counting_only_large_d(split, rate):
    plan = assemble_qpt_algorithm(64, 0.1, split, rate)
    assert not plan.materialized and plan.algorithm is None
    assert plan.card_dedup <= plan.card_bound
    data = json.loads(plan.to_json())
    assert int(data["card_bound"]) == plan.card_bound


def test_assembly_requires_normalization(base_spectrum, rate):
    from types import SimpleNamespace

    fake = SimpleNamespace(spectrum=base_spectrum)
    with pytest.raises(DomainError):
        assemble_qpt_algorithm(2, 0.5, fake, rate)


def test_envelope_fit_synthetic():
    data = []
    for d in (2, 4, 8):
        for eps in (0.5, 0.25, 0.1):
            x = (1 + math.log(1 / eps)) * (1 + math.log(d))
            data.append((d, eps, max(1, round(math.exp(2 * x)))))
    c, t = qpt_envelope_fit(data)
    assert t == pytest.approx(2.0, abs=0.01)
    assert c == pytest.approx(1.0, rel=0.05)


def test_envelope_fit_errors():
    with pytest.raises(FitError):
        qpt_envelope_fit([(4, 0.5, 10)] * 6)
    with pytest.raises(FitError):
        qpt_envelope_fit([(2, 0.5, 3), (4, 0.25, 7)])
