import pytest
from hypothesis import given, settings, strategies as st
from sympy import ImmutableMatrix, Matrix

from core.errors import CurveDirectionExhausted, DimensionError
from core.linalg import (DirectSum, Subspace, block_conjugate, block_diag_subspaces, block_equal,
                         block_identity, block_matmul, block_to_matrix, complement, image, kernel)


def col(*xs):
    return ImmutableMatrix(list(xs))


def test_kernel_and_image_of_rank_one_map():
    op = ImmutableMatrix([[1, 2], [2, 4]])
    null = kernel(op, Subspace.whole(2))
    assert null.dim == 1
    assert null.contains(col(-2, 1))
    rng = image(op, Subspace.whole(2))
    assert rng.dim == 1 and rng.contains(col(1, 2))


def test_kernel_restricted_to_subspace():
    op = ImmutableMatrix([[1, 0, 0]])
    inside = Subspace.span(3, [col(1, 0, 0), col(0, 1, 0)])
    assert kernel(op, inside).same_as(Subspace.span(3, [col(0, 1, 0)]))


def test_kernel_dimension_mismatch():
    with pytest.raises(DimensionError):
        kernel(ImmutableMatrix([[1, 0, 0]]), Subspace.whole(2))


def test_complement_picks_unit_vectors():
    sub = Subspace.span(2, [col(1, 0)])
    comp = complement(sub, Subspace.whole(2))
    assert comp.same_as(Subspace.span(2, [col(0, 1)]))


def test_complement_tilts_away_from_avoided_vector():
    sub = Subspace.span(2, [col(1, 0)])
    comp = complement(sub, Subspace.whole(2), avoid=col(0, 1))
    assert comp.dim == 1
    assert not comp.contains(col(0, 1))
    DirectSum(2, (sub, comp))


def test_complement_of_zero_space_cannot_avoid():
    with pytest.raises(CurveDirectionExhausted) as info:
        complement(Subspace.zero(2), Subspace.whole(2), avoid=col(1, 1), level=3)
    assert info.value.level == 3


def test_direct_sum_rejects_overlap():
    with pytest.raises(DimensionError):
        DirectSum(2, (Subspace.span(2, [col(1, 1)]), Subspace.span(2, [col(2, 2)])))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=-3, max_value=3), min_size=9, max_size=9))
def test_projectors_are_idempotent_and_sum_to_identity(entries):
    basis = Matrix(3, 3, entries)
    if basis.rank() < 3:
        return
    parts = (Subspace.span(3, [basis[:, 0]]), Subspace.span(3, [basis[:, 1], basis[:, 2]]))
    split = DirectSum(3, parts)
    p0, p1 = split.projector(0), split.projector(1)
    assert p0 * p0 == p0
    assert p1 * p1 == p1
    assert p0 + p1 == ImmutableMatrix.eye(3)
    vec = col(1, -2, 5)
    assert parts[0].basis * split.coordinates(vec, 0) == p0 * vec


def test_block_helpers():
    blocks = [[ImmutableMatrix([[1]]), ImmutableMatrix([[2]])], [ImmutableMatrix([[0]]), ImmutableMatrix([[3]])]]
    assert block_matmul(block_identity(2, 1), blocks) == blocks
    assert block_to_matrix(blocks) == ImmutableMatrix([[1, 2], [0, 3]])
    scaled = block_conjugate(blocks, [1, 2])
    assert block_to_matrix(scaled) == ImmutableMatrix([[1, 4], [0, 3]])
    assert block_equal(blocks, scaled) == (0, 1)
    assert block_equal(blocks, blocks) is None


def test_block_diag_subspaces():
    basis = block_diag_subspaces([Subspace.span(2, [col(1, 1)]), Subspace.whole(1)])
    assert basis == ImmutableMatrix([[1, 0], [1, 0], [0, 1]])
