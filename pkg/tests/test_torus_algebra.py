import numpy as np
import pytest

from torus_algebra import (
    GROSS,
    TWO_GROSS,
    BivariatePoly,
    Monomial,
    ParameterError,
    TorusParams,
    contains_one,
    mul,
    poly,
    transpose,
)


def random_poly(params, rng, density=0.3):
    vec = (rng.random(params.size) < density).astype(np.uint8)
    return BivariatePoly.from_vector(params, vec)


def test_square_kills_cross_term():
    assert mul(poly(GROSS, "1+y"), poly(GROSS, "1+y")) == poly(GROSS, "1+y^2")


def test_exponent_reduction():
    assert mul(poly(GROSS, "x^11"), poly(GROSS, "x^3")) == poly(GROSS, "x^2")


def test_gross_a_squared():
    a = poly(GROSS, "1+y+x^3*y^-1")
    assert a * a == poly(GROSS, "1+y^2+x^6*y^-2")


def test_transpose_examples():
    assert transpose(poly(GROSS, "x^2*y^3")) == poly(GROSS, "x^10*y^3")
    assert transpose(poly(GROSS, "1")) == poly(GROSS, "1")
    assert transpose(poly(GROSS, "1+y+x^3*y^-1")) == poly(GROSS, "1+y^5+x^9*y")


def test_contains_one():
    assert not contains_one(BivariatePoly.zero(GROSS))
    assert contains_one(poly(GROSS, "1+x"))
    a = poly(GROSS, "1+y+x^3*y^-1")
    assert contains_one(a * a.T)


def test_negative_exponents_canonicalized():
    p = poly(GROSS, "x^-1*y^-3")
    assert p.sorted_terms() == [Monomial(11, 3)]


def test_parse_accepts_implicit_product_and_cancels_pairs():
    assert poly(GROSS, "x^3y^-1") == poly(GROSS, "x^3*y^5")
    assert poly(GROSS, "x+x") == BivariatePoly.zero(GROSS)


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        poly(GROSS, "1+z^2")


def test_to_str_parses_back():
    p = poly(TWO_GROSS, "1+x+x^-1*y^-3")
    assert poly(TWO_GROSS, p.to_str()) == p


def test_mismatched_torus():
    with pytest.raises(ParameterError):
        poly(GROSS, "x") * poly(TWO_GROSS, "x")


def test_bad_dimensions():
    with pytest.raises(ParameterError):
        TorusParams(0, 6)


def test_matrix_rows_are_shifts():
    a = poly(GROSS, "1+y+x^3*y^-1")
    mat = a.to_matrix()
    alpha = Monomial(5, 2)
    row = mat[GROSS.index(alpha)]
    assert np.array_equal(row, a.shift(alpha).to_vector())


@pytest.mark.parametrize("params", [GROSS, TWO_GROSS])
def test_ring_properties(params):
    rng = np.random.default_rng(11)
    one = BivariatePoly.one(params)
    zero = BivariatePoly.zero(params)
    for _ in range(20):
        a, b, c = (random_poly(params, rng) for _ in range(3))
        assert a.T.T == a
        assert (a * b).T == a.T * b.T
        assert a * b == b * a
        assert (a * b) * c == a * (b * c)
        assert a * one == a
        assert not (a * zero)
        assert a * (b + c) == a * b + a * c
