from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiprover.constraints import constraint_suite
from epiprover.diffalg import (
    DiffForm,
    DimensionError,
    ParseError,
    compare_derivatives,
    compare_monomials,
    differentiate,
    gaussian_eliminate,
    heat_time_derivative,
    make_monomial,
    mono_degree,
    mono_total_order,
    reduce_against,
)
from epiprover.reduction import quad_basis, quadratic_rank, split_suite


def f(*pairs):
    """n = 1 monomial as a form: f(0, 2), (3, 1) is f^2 f_3."""
    return DiffForm(1, {make_monomial([((k,), e) for k, e in pairs]): 1})


def test_derivative_order_single_coordinate():
    assert compare_derivatives((3,), (2,)) == 1
    assert compare_derivatives((2,), (3,)) == -1


def test_derivative_order_last_coordinate_decides():
    assert compare_derivatives((2, 1), (1, 2)) == -1
    assert compare_derivatives((1, 2), (2, 1)) == 1


def test_derivative_order_reflexive_and_dimension_checked():
    assert compare_derivatives((1, 1), (1, 1)) == 0
    with pytest.raises(DimensionError):
        compare_derivatives((1,), (1, 0))


def test_monomial_order_worked_basis():
    m1 = make_monomial([((0,), 2), ((3,), 1)])
    m2 = make_monomial([((0,), 1), ((1,), 1), ((2,), 1)])
    m3 = make_monomial([((1,), 3)])
    assert compare_monomials(m1, m2) == 1
    assert compare_monomials(m2, m3) == 1
    assert compare_monomials(m1, m1) == 0
    assert quad_basis(3, 1).elements == [m1, m2, m3]


def test_monomial_order_second_factor_dominates():
    a = make_monomial([((0,), 1), ((1,), 4), ((2,), 1)])
    b = make_monomial([((1,), 6)])
    assert compare_monomials(a, b) == 1


def test_differentiate_power_and_product_rules():
    assert differentiate(f((1, 2)), 1) == f((1, 1), (2, 1)).scale(2)
    assert differentiate(f((0, 1), (2, 1)), 1) == f((1, 1), (2, 1)) + f((0, 1), (3, 1))
    assert differentiate(f((1, 4)), 1) == f((1, 3), (2, 1)).scale(4)
    with pytest.raises(DimensionError):
        differentiate(f((1, 1)), 2)


def test_heat_derivative_examples():
    assert heat_time_derivative(f((1, 1))) == f((3, 1)).scale(Fraction(1, 2))
    assert heat_time_derivative(f((1, 2))) == f((1, 1), (3, 1))
    d1 = DiffForm.var((1, 0))
    want = DiffForm.var((3, 0)) + DiffForm.var((1, 2))
    assert heat_time_derivative(d1) == want.scale(Fraction(1, 2))


def test_eliminate_collapses_scalar_duplicates():
    r = f((0, 1), (1, 4), (2, 1)).scale(5) - f((1, 6)).scale(4)
    out = gaussian_eliminate([r, r.scale(2)])
    assert out == [r.normalized()]
    assert gaussian_eliminate([]) == []


def test_worked_example_split():
    s = split_suite(constraint_suite(3, 1), quad_basis(3, 1))
    assert len(s.quadratic) == 2
    assert len(s.nonquadratic) == 4


def test_eliminate_rank_three_three():
    s = split_suite(constraint_suite(3, 3), quad_basis(3, 3))
    assert len(s.quadratic) + len(s.intrinsic) == 539
    assert quadratic_rank(s.hat_rows) == 512


def test_parse_reports_position():
    with pytest.raises(ParseError) as err:
        DiffForm.from_text("dim 1\n1/2 * d(1)^1 * x\n")
    assert err.value.line == 2


# -- properties ----------------------------------------------------------------

def monomials(n, max_factors=4, max_order=4):
    der = st.tuples(*[st.integers(0, max_order)] * n)
    return st.lists(st.tuples(der, st.integers(1, 3)), min_size=1, max_size=max_factors).map(make_monomial)


def forms(n=2):
    return st.dictionaries(monomials(n), st.fractions(max_denominator=50).filter(bool), max_size=6).map(
        lambda t: DiffForm(n, t))


@given(monomials(2), monomials(2), monomials(2))
def test_monomial_order_is_total(a, b, c):
    assert compare_monomials(a, b) == -compare_monomials(b, a)
    assert (compare_monomials(a, b) == 0) == (a == b)
    if compare_monomials(a, b) >= 0 and compare_monomials(b, c) >= 0:
        assert compare_monomials(a, c) >= 0


@given(forms())
def test_text_round_trip(form):
    text = form.to_text()
    back = DiffForm.from_text(text)
    assert back == form
    assert back.to_text() == text


@given(monomials(2), st.integers(1, 2))
def test_differentiate_grading(m, coord):
    out = differentiate(DiffForm(2, {m: 1}), coord)
    for mono in out.terms:
        assert mono_degree(mono) == mono_degree(m)
        assert mono_total_order(mono) == mono_total_order(m) + 1


@given(monomials(2))
def test_heat_derivative_grading(m):
    out = heat_time_derivative(DiffForm(2, {m: 3}))
    assert out.gradings() <= {(mono_degree(m), mono_total_order(m) + 2)}


@settings(max_examples=40)
@given(st.lists(forms(), min_size=1, max_size=5))
def test_elimination_soundness(fs):
    rows = gaussian_eliminate(fs)
    piv = {r.leading()[0]: r.terms for r in rows}
    leads = [r.leading()[0] for r in rows]
    assert all(compare_monomials(a, b) > 0 for a, b in zip(leads, leads[1:]))
    for x in fs:
        assert reduce_against(x.terms, piv) == {}
