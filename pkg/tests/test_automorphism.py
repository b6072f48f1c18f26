import numpy as np
import pytest

import gf2
from automorphism import (
    basic_shifts,
    is_logically_trivial,
    logical_action,
    nontrivial_shift_classes,
    two_generator_decomposition,
    verify_decompositions,
)
from torus_algebra import Monomial

GROSS_AX = [
    [0, 1, 0, 1, 0, 0],
    [0, 1, 0, 0, 0, 1],
    [0, 0, 1, 1, 0, 0],
    [1, 1, 0, 1, 1, 0],
    [0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 0, 1],
]
GROSS_AY = [
    [1, 0, 0, 0, 0, 1],
    [1, 1, 1, 0, 0, 1],
    [0, 0, 0, 0, 1, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 1],
    [0, 0, 1, 1, 0, 1],
]
TWO_GROSS_AX = [
    [0, 1, 1, 1, 0, 1],
    [1, 0, 1, 0, 1, 1],
    [1, 0, 1, 0, 1, 0],
    [1, 0, 1, 1, 1, 1],
    [0, 1, 1, 1, 1, 1],
    [1, 0, 0, 1, 1, 0],
]
TWO_GROSS_AY = [
    [1, 1, 1, 1, 1, 0],
    [1, 1, 0, 1, 1, 1],
    [0, 1, 1, 0, 0, 0],
    [1, 0, 0, 0, 1, 0],
    [1, 0, 0, 1, 1, 1],
    [1, 0, 0, 0, 0, 1],
]


def test_basic_shift_set(gross):
    deltas = {s.delta for s in basic_shifts(gross)}
    p = gross.params
    expected = {p.canon(i, j) for i, j in [(1, 0), (0, 1), (3, -1), (1, 3), (3, -2), (2, 3)]}
    expected |= {p.canon(-d.i, -d.j) for d in expected}
    assert deltas == expected
    assert Monomial(11, 0) in deltas


def test_basic_shifts_come_from_term_products(gross):
    p = gross.params
    for s in basic_shifts(gross):
        poly = gross.A if s.route == "X" else gross.B
        terms = poly.sorted_terms()
        i, j = s.terms
        assert s.delta == p.canon(terms[i].i - terms[j].i, terms[i].j - terms[j].j)
        assert s.duration == 14


def test_trivial_shifts(gross):
    assert is_logically_trivial(gross.params, Monomial(6, 0))
    assert is_logically_trivial(gross.params, Monomial(0, 0))
    assert not is_logically_trivial(gross.params, Monomial(1, 0))


@pytest.mark.parametrize("name", ["gross", "two_gross"])
def test_thirty_five_classes_all_decompose(name, request):
    code = request.getfixturevalue(name)
    assert len(nontrivial_shift_classes(code.params)) == 35
    table = verify_decompositions(code)
    assert len(table) == 35
    assert all(1 <= len(v) <= 2 for v in table.values())


def test_decomposition_examples(gross):
    assert [s.delta for s in two_generator_decomposition(gross, Monomial(1, 0))] == [Monomial(1, 0)]
    parts = two_generator_decomposition(gross, Monomial(3, 3))
    i = sum(s.delta.i for s in parts)
    j = sum(s.delta.j for s in parts)
    assert (i - 3) % 6 == 0 and (j - 3) % 6 == 0
    assert len(parts) == 2


@pytest.mark.parametrize(
    "name,delta,expected",
    [
        ("gross", Monomial(1, 0), GROSS_AX),
        ("gross", Monomial(0, 1), GROSS_AY),
        ("two_gross", Monomial(1, 0), TWO_GROSS_AX),
        ("two_gross", Monomial(0, 1), TWO_GROSS_AY),
    ],
)
def test_printed_action_matrices(name, delta, expected, request):
    code = request.getfixturevalue(name)
    _, ops = request.getfixturevalue(name + "_basis")
    action = logical_action(code, ops, delta)
    assert np.array_equal(action.a6, np.array(expected, dtype=np.uint8))
    assert action.order() == 6


def test_trivial_shift_acts_as_identity(gross, gross_basis):
    _, ops = gross_basis
    action = logical_action(gross, ops, Monomial(6, 0))
    assert np.array_equal(action.x_action, np.eye(12, dtype=np.uint8))


def test_action_is_a_homomorphism(gross, gross_basis):
    _, ops = gross_basis
    rng = np.random.default_rng(9)
    for _ in range(4):
        d1 = Monomial(int(rng.integers(12)), int(rng.integers(6)))
        d2 = Monomial(int(rng.integers(12)), int(rng.integers(6)))
        a1 = logical_action(gross, ops, d1).a6
        a2 = logical_action(gross, ops, d2).a6
        a12 = logical_action(gross, ops, Monomial(d1.i + d2.i, d1.j + d2.j)).a6
        assert np.array_equal(a12, gf2.matmul(a1, a2))


def test_inverse_shift_gives_inverse_matrix(gross, gross_basis):
    _, ops = gross_basis
    a = logical_action(gross, ops, Monomial(3, 5)).a6
    b = logical_action(gross, ops, Monomial(-3, -5)).a6
    assert np.array_equal(gf2.matmul(a, b), np.eye(6, dtype=np.uint8))


def test_shift_preserves_stabilizer_group(two_gross):
    for s in basic_shifts(two_gross):
        rows = {c.key() for c in two_gross.checks("X")}
        assert {two_gross.apply_shift(c, s.delta).key() for c in two_gross.checks("X")} == rows


def test_text_grid(gross, gross_basis):
    _, ops = gross_basis
    text = logical_action(gross, ops, Monomial(1, 0)).to_text()
    assert text.splitlines()[0] == "0 1 0 1 0 0"


@pytest.mark.parametrize("delta", [Monomial(1, 0), Monomial(0, 1), Monomial(3, 5)])
def test_second_block_is_the_dual_of_the_inverse_shift(gross, gross_basis, delta):
    _, ops = gross_basis
    fwd = logical_action(gross, ops, delta)
    back = logical_action(gross, ops, Monomial(-delta.i, -delta.j))
    assert np.array_equal(fwd.x_action[6:, 6:], back.z_action[:6, :6])
    assert np.array_equal(fwd.z_action[6:, 6:], back.a6)
    assert np.array_equal(gf2.matmul(fwd.z_action[:6, :6].T, fwd.a6), np.eye(6, dtype=np.uint8))
