import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy import ImmutableMatrix

from cli.verify_suite import oracle_check, random_instance
from core.coeffsys import (delta_blocks, delta_system, gamma_identity_check, hurwitz_check,
                           hurwitz_high_order, ladder_checks, weighted_multisets)
from core.errors import IndexRangeError
from core.multijet import compose_curve


def test_weighted_multisets_enumerates_partitions():
    found = list(weighted_multisets(4, 4))
    assert len(found) == 5
    assert all(sum((i + 1) * c for i, c in enumerate(ms)) == 4 for ms in found)
    assert list(weighted_multisets(-1, 3)) == []


@pytest.mark.parametrize("name", ["pitchfork", "secondary", "node"])
def test_identities_on_bundled_problems(problems, name):
    problem = problems[name]
    zs = problem.curve.bars(12)
    for k in range(1, 4):
        assert gamma_identity_check(problem.jet, zs, k)
        assert ladder_checks(problem.jet, zs, k)
        assert oracle_check(problem.jet, zs, k)
        for offset in range(3):
            assert hurwitz_check(problem.jet, problem.curve, k, offset)


def test_delta_has_linear_part_on_diagonal(problems):
    jet = problems["secondary"].jet
    zs = problems["secondary"].curve.bars(6)
    blocks = delta_blocks(jet, zs, 3)
    assert delta_system(jet, zs, 3).delta_matrix().shape == (3 * jet.m, 3 * jet.n)
    for r in range(3):
        assert blocks[r][r] == jet.linear_part()
        for c in range(r):
            assert blocks[r][c] == ImmutableMatrix.zeros(jet.m, jet.n)


def test_hurwitz_formula_matches_oracle_value(problems):
    problem = problems["pitchfork"]
    value = hurwitz_high_order(problem.jet, problem.curve, 1, 0)
    assert value == compose_curve(problem.jet, problem.curve, 3)[2]


def test_index_guards(problems):
    jet = problems["node"].jet
    with pytest.raises(IndexRangeError):
        delta_system(jet, [], 0)
    with pytest.raises(IndexRangeError):
        ladder_checks(jet, [], 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_identities_on_random_instances(seed):
    instance = random_instance(np.random.default_rng(seed), 0, 2)
    zs = instance.curve.bars(2 * instance.k + 5)
    for k in range(1, instance.k + 1):
        assert gamma_identity_check(instance.jet, zs, k)
        assert ladder_checks(instance.jet, zs, k)
        assert oracle_check(instance.jet, zs, k)
        assert hurwitz_check(instance.jet, instance.curve, k, 1)
