import dataclasses

import numpy as np
import pytest

from logical import (
    BivariatePoly,
    gram_matrix,
    is_x_logical,
    is_z_logical,
    logicals_commute,
    low_weight_logical_search,
    validate_basis_properties,
    zx_dual,
)
from torus_algebra import Monomial


def test_gross_pq_is_logical(gross, gross_basis):
    basis, _ = gross_basis
    assert is_x_logical(gross, basis.p, basis.q)
    zero = BivariatePoly.zero(gross.params)
    assert is_x_logical(gross, zero, zero)


def test_deleting_a_term_breaks_logicality(gross, gross_basis):
    basis, _ = gross_basis
    first = basis.p.sorted_terms()[0]
    broken = basis.p + BivariatePoly.monomial(gross.params, first.i, first.j)
    assert not is_x_logical(gross, broken, basis.q)


def test_commutation_membership(gross, gross_basis):
    _, ops = gross_basis
    x1, z1, z7 = ops["X1"], ops["Z1"], ops["Z7"]
    assert logicals_commute(x1.p, x1.q, z7.p, z7.q)
    assert not logicals_commute(x1.p, x1.q, z1.p, z1.q)


def test_gross_basis_weights(gross_basis):
    _, ops = gross_basis
    assert {ops[k].weight for k in ("X1", "X7", "Z1", "Z7")} == {12}


def test_two_gross_basis_weights(two_gross_basis):
    _, ops = two_gross_basis
    assert {ops[k].weight for k in ("X1", "X7", "Z1", "Z7")} == {20}


@pytest.mark.parametrize("name", ["gross", "two_gross"])
def test_basis_properties_pass(name, request):
    code = request.getfixturevalue(name)
    basis, _ = request.getfixturevalue(name + "_basis")
    report = validate_basis_properties(code, basis)
    assert report.ok, report.lines()


@pytest.mark.parametrize("name", ["gross", "two_gross"])
def test_basis_is_symplectic(name, request):
    _, ops = request.getfixturevalue(name + "_basis")
    assert np.array_equal(gram_matrix(ops), np.eye(12, dtype=np.uint8))


def test_anticommuting_pairs_share_one_qubit(gross_basis):
    _, ops = gross_basis
    shared = set(ops["X1"].pauli.support()) & set(ops["Z1"].pauli.support())
    assert len(shared) == 1


def test_property_two_fails_for_degenerate_basis(gross, gross_basis):
    basis, _ = gross_basis
    x = BivariatePoly.monomial(gross.params, 1, 0)
    bad = dataclasses.replace(basis, r=x * basis.p, s=x * basis.q)
    report = validate_basis_properties(gross, bad)
    assert not report.passed(2)


def test_zx_dual(gross, two_gross, gross_basis, two_gross_basis):
    _, ops = gross_basis
    dual = zx_dual(gross, ops["X1"])
    assert dual.kind == "Z"
    assert is_z_logical(gross, dual.p, dual.q)
    assert zx_dual(gross, dual) == ops["X1"]
    _, ops2 = two_gross_basis
    dual7 = zx_dual(two_gross, ops2["X7"])
    assert is_z_logical(two_gross, dual7.p, dual7.q)


@pytest.mark.parametrize("name", ["gross", "two_gross"])
def test_shift_closure(name, request):
    code = request.getfixturevalue(name)
    basis, _ = request.getfixturevalue(name + "_basis")
    rng = np.random.default_rng(5)
    for _ in range(50):
        alpha = Monomial(int(rng.integers(code.params.ell)), int(rng.integers(code.params.m)))
        assert is_x_logical(code, basis.p.shift(alpha), basis.q.shift(alpha))
        assert is_x_logical(code, basis.r.shift(alpha), basis.s.shift(alpha))


def test_no_weight_eleven_x_logicals(gross, gross_basis):
    _, ops = gross_basis
    result = low_weight_logical_search(gross, "X", 11, budget=300, seed=1, basis_ops=ops)
    assert not result.operators


def test_search_finds_weight_twelve(gross, gross_basis):
    _, ops = gross_basis
    result = low_weight_logical_search(gross, "X", 12, budget=3000, seed=2, basis_ops=ops)
    assert result.min_weight == 12
    for op in list(result.operators)[:50]:
        assert is_x_logical(gross, op.p, op.q)
        assert any(not op.pauli.commutes(ops[f"Z{i}"].pauli) for i in range(1, 13))
    # results are closed under translation
    sample = next(iter(result.operators))
    assert sample.shifted(gross, Monomial(1, 0)) in result.operators
    assert result.census_csv().startswith("weight,shift_unique,total\n")


@pytest.mark.slow
def test_gross_weight_twelve_count(gross, gross_basis):
    _, ops = gross_basis
    result = low_weight_logical_search(gross, "X", 12, budget=200000, seed=3, basis_ops=ops)
    assert result.census()[0][0] == 12
    assert result.census()[0][2] == 1884


@pytest.mark.slow
def test_two_gross_weight_eighteen_count(two_gross, two_gross_basis):
    _, ops = two_gross_basis
    result = low_weight_logical_search(two_gross, "X", 18, budget=400000, seed=4, basis_ops=ops, sweep=2)
    assert result.census()[0] == (18, result.census()[0][1], 336)
