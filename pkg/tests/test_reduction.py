from fractions import Fraction

import pytest

import published
from epiprover.constraints import constraint_suite, dedup, pair_family
from epiprover.diffalg import DiffForm, make_monomial
from epiprover.reduction import (
    BasisMismatch,
    QuadraticForm,
    Step5Failure,
    eliminate_target,
    quad_basis,
    quadratic_rank,
    quadratize,
    split_suite,
)
from epiprover.targets import build_F, make_problem, DMN


def in_span(q, rows):
    return quadratic_rank(list(rows) + [q]) == quadratic_rank(rows)


def same_span(a, b):
    r = quadratic_rank(a)
    return r == quadratic_rank(b) == quadratic_rank(list(a) + list(b))


def mono(*pairs):
    return make_monomial([((k,), e) for k, e in pairs])


@pytest.mark.parametrize("m,n,size", [(2, 1, 2), (3, 1, 3), (4, 1, 5), (5, 1, 7), (3, 2, 14), (3, 3, 38),
                                      (3, 4, 80), (2, 2, 6)])
def test_basis_sizes(m, n, size):
    assert len(quad_basis(m, n)) == size


def test_basis_elements_are_half_degree():
    B = quad_basis(3, 2)
    for b in B.elements:
        assert sum(e for _, e in b) == 3
        assert sum(sum(d) * e for d, e in b) == 3


def test_quadratize_worked_target():
    B = quad_basis(3, 1)
    q, res = quadratize(build_F(3, 1), B)
    want = QuadraticForm(B, {(0, 0): Fraction(1, 4), (0, 1): Fraction(-1, 2), (1, 1): Fraction(1, 4)})
    assert q == want
    assert res == DiffForm(1, {mono((0, 4), (1, 1), (5, 1)): Fraction(1, 4),
                               mono((0, 3), (1, 2), (4, 1)): Fraction(-1, 8)})
    assert q.to_diffform() + res == build_F(3, 1)


def test_quadratize_nonquadratic_monomial():
    B = quad_basis(3, 1)
    form = DiffForm(1, {mono((0, 1), (1, 4), (3, 1)): 1})
    q, res = quadratize(form, B)
    assert not q
    assert res == form


def test_quadratic_form_basis_guard():
    a = QuadraticForm(quad_basis(3, 1), {(0, 0): 1})
    b = QuadraticForm(quad_basis(4, 1), {(0, 0): 1})
    with pytest.raises(BasisMismatch):
        a + b


def test_matrix_halves_off_diagonal():
    B = quad_basis(3, 1)
    G = QuadraticForm(B, {(0, 1): Fraction(3), (2, 2): Fraction(-1)}).matrix()
    assert G[0][1] == G[1][0] == Fraction(3, 2)
    assert G[2][2] == -1
    assert QuadraticForm.from_matrix(B, G) == QuadraticForm(B, {(0, 1): 3, (2, 2): -1})


def test_worked_reduction_matches_published_rows():
    B = quad_basis(3, 1)
    s = split_suite(constraint_suite(3, 1), B)
    rec = published.D31
    pub = [published.to_quadratic(published.qpoly(t), rec, B) for t in rec["R"].values()]
    assert same_span(s.hat_rows, pub)
    E, _ = eliminate_target(build_F(3, 1), s)
    F = published.to_quadratic(published.qpoly(rec["F"]), rec, B)
    assert in_span(E - F, s.hat_rows)


def test_fourth_order_reduction_matches_published_rows():
    B = quad_basis(4, 1)
    s = split_suite(constraint_suite(4, 1), B)
    rec = published.D41
    pub = [published.to_quadratic(published.qpoly(t), rec, B) for t in rec["R"].values()]
    assert same_span(s.hat_rows, pub)
    prob = make_problem(DMN, 4, 1)
    E, _ = eliminate_target(prob.target, s)
    F = published.to_quadratic(published.qpoly(rec["F"]), rec, B)
    # the published target is stated with the opposite overall sign
    assert in_span(E.scale(prob.sign) - F, s.hat_rows)


def test_two_index_reduction_matches_published_rows():
    B = quad_basis(2, 2)
    s = split_suite(dedup(pair_family()), B)
    rec = published.COSTA_GENERAL
    pub = [published.to_quadratic(published.qpoly(t), rec, B) for t in rec["R"].values()]
    assert same_span(s.hat_rows, pub)


@pytest.mark.parametrize("m,n", [(3, 1), (4, 1), (5, 1), (3, 2), (3, 3)])
def test_elimination_is_exact(m, n):
    s = split_suite(constraint_suite(m, n), quad_basis(m, n))
    F = build_F(m, n)
    E, coef = eliminate_target(F, s)
    recon = E.to_diffform()
    for c, row in zip(coef, s.nonquadratic):
        if c:
            recon = recon + row.scale(c)
    assert (F - recon).terms == {}


def test_split_counts_two_dims():
    s = split_suite(constraint_suite(3, 2), quad_basis(3, 2))
    assert len(s.quadratic) == 48
    assert len(s.intrinsic) == 15
    assert s.independent_count == 63


def test_step5_failure_names_monomials():
    s = split_suite([], quad_basis(3, 1))
    with pytest.raises(Step5Failure) as err:
        eliminate_target(build_F(3, 1), s)
    assert mono((0, 4), (1, 1), (5, 1)) in err.value.monomials
