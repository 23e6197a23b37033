from fractions import Fraction as Q

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import published
from epiprover.certificate import (
    IdentityMismatch,
    NotPSD,
    certificate_from_sos,
    parse,
    quadratic_value,
    rational_ldl,
    rationalize,
    round_value,
    serialize,
    sos_matrix,
    verify,
)
from epiprover.constraints import constraint_suite, dedup, pair_family
from epiprover.diffalg import ParseError
from epiprover.pipeline import certify, prepare
from epiprover.reduction import quad_basis
from epiprover.sdp import solve
from epiprover.targets import COSTA_CONCRETE, COSTA_GENERAL, DMN, NONPOSITIVE, make_problem


# -- LDL ------------------------------------------------------------------------

def test_ldl_rank_one():
    res = rational_ldl([[1, -1], [-1, 1]])
    assert res.psd
    assert res.factors == [(1, [1, -1])]


def test_ldl_zero_pivot_nonzero_row():
    G = [[0, 1], [1, 0]]
    res = rational_ldl(G)
    assert not res.psd
    assert res.witness == [1, -1]
    assert quadratic_value(G, res.witness) < 0


def test_ldl_negative_pivot_after_elimination():
    G = [[1, 2], [2, 1]]
    res = rational_ldl(G)
    assert not res.psd
    assert res.pivot == -3
    assert quadratic_value(G, res.witness) < 0


def test_ldl_skips_zero_rows():
    res = rational_ldl([[0, 0], [0, 2]])
    assert res.psd
    assert res.factors == [(2, [0, 1])]


def test_ldl_rejects_asymmetric():
    with pytest.raises(ValueError):
        rational_ldl([[1, 2], [0, 1]])


def test_ldl_of_published_worked_matrix():
    rec = published.D31
    B = quad_basis(3, 1)
    S = published.padd(*[(c, published.square(e)) for c, e in zip(rec["c"], rec["e"])])
    G = published.to_quadratic(S, rec, B).matrix()
    res = rational_ldl(G)
    assert res.psd
    assert len(res.factors) == 3
    # same decomposition, normalized so the leading entry is 1
    assert res.factors[0][0] == rec["c"][0] * 1009 ** 2
    assert sos_matrix(res.factors, 3) == G


def rational(max_num=20, max_den=6):
    return st.builds(Q, st.integers(-max_num, max_num), st.integers(1, max_den))


@st.composite
def ldl_products(draw, negative=False):
    k = draw(st.integers(1, 20))
    L = [[Q(int(i == j)) if j >= i else Q(0) for j in range(k)] for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            L[i][j] = draw(rational())
    D = [draw(rational(9, 4).map(abs)) for _ in range(k)]
    if negative:
        i = draw(st.integers(0, k - 1))
        D[i] = -abs(draw(rational(9, 4).filter(bool)))
    return [[sum(L[t][i] * D[t] * L[t][j] for t in range(k)) for j in range(k)] for i in range(k)]


@settings(max_examples=100, deadline=None)
@given(ldl_products())
def test_ldl_reconstructs_psd(G):
    res = rational_ldl(G)
    assert res.psd
    assert all(c > 0 for c, _ in res.factors)
    assert sos_matrix(res.factors, len(G)) == G


@settings(max_examples=100, deadline=None)
@given(ldl_products(negative=True))
def test_ldl_witness_for_indefinite(G):
    res = rational_ldl(G)
    assert not res.psd
    assert quadratic_value(G, res.witness) < 0


# -- rounding -------------------------------------------------------------------

def test_round_value():
    assert round_value(0.14750692520775623, 10**4) == Q(213, 1444)
    assert round_value(0.5, 10) == Q(1, 2)
    assert round_value(-0.4033696729435084, 10**4) == Q(-407, 1009)


def test_rationalize_worked_example():
    prep = prepare(DMN, 3, 1)
    sol = solve(prep.sdp)
    pt = rationalize(prep.sdp, sol)
    assert all(r.psd for r in pt.ldl)
    cert = certify(prep, pt.values)
    assert verify(cert).ok


def test_rationalize_perturbed_solver_point():
    prep = prepare(DMN, 3, 1)
    sol = solve(prep.sdp)
    sol.values = {nm: v + 1e-9 for nm, v in sol.values.items()}
    pt = rationalize(prep.sdp, sol)
    assert verify(certify(prep, pt.values)).ok


# -- published certificates -----------------------------------------------------

def dmn_certificate(rec, m, p=None):
    B = quad_basis(m, 1)
    sos = [(c, published.to_row(e, rec, B)) for c, e in zip(rec["c"], rec["e"])]
    mult = {f"p{k}": v for k, v in (p or rec["p"]).items()}
    prob = make_problem(DMN, m, 1)
    return certificate_from_sos(DMN, m, 1, prob.sense, B, [("B1", "F", sos, mult)], constraint_suite(m, 1))


def test_published_worked_certificate():
    rec = published.D31
    gap = published.padd((1, published.qpoly(rec["F"])),
                         (-1, published.padd(*[(c, published.square(e)) for c, e in zip(rec["c"], rec["e"])])),
                         *[(-v, published.qpoly(rec["R"][k])) for k, v in rec["p"].items()])
    assert gap == {}
    assert verify(dmn_certificate(rec, 3)).ok


def test_published_fourth_order_certificate():
    assert verify(dmn_certificate(published.D41, 4)).ok


def test_perturbed_published_certificate_fails():
    rec = published.D31
    p = dict(rec["p"])
    p[1] += Q(1, 10**6)
    sos_gap = published.padd((1, published.qpoly(rec["F"])),
                             *[(-c, published.square(e)) for c, e in zip(rec["c"], rec["e"])],
                             *[(-v, published.qpoly(rec["R"][k])) for k, v in p.items()])
    assert sos_gap != {}
    # the SOS part alone no longer closes the identity
    cert = dmn_certificate(rec, 3)
    c, row = cert.blocks[0].sos[0]
    cert.blocks[0].sos[0] = (c + Q(1, 10**6), row)
    rep = verify(cert)
    assert not rep.ok
    assert "B1" in rep.residuals


def test_published_univariate_costa_identity(golden):
    g = golden("costa_n1.txt")
    # J = 2 R1 - R2 with no square terms
    assert g["J21"] == g["R1"].scale(2) - g["R2"]
    cert = certificate_from_sos(COSTA_CONCRETE, 2, 1, NONPOSITIVE, quad_basis(2, 1),
                                [("B1", "J2", [], {})], constraint_suite(2, 1))
    assert verify(cert).ok


def test_published_two_index_certificate():
    rec = published.COSTA_GENERAL
    L1, L2 = published.costa_L(rec["c1"], rec["c2"])
    B = quad_basis(2, 2)
    res1 = published.padd((1, L1), *[(-v, published.qpoly(rec["R"][k])) for k, v in rec["p"].items()])
    res2 = published.padd((1, L2), *[(-v, published.qpoly(rec["R"][k])) for k, v in rec["q"].items()])
    assert res1 == {}
    assert res2 == published.padd((-2, published.square({3: 1, 4: -1})))
    blocks = [("L1", "L1", [], {f"p{k}": v for k, v in rec["p"].items()}),
              ("L2", "L2", [(Q(2), published.to_row({3: 1, 4: -1}, rec, B))],
               {f"q{k}": v for k, v in rec["q"].items()})]
    cert = certificate_from_sos(COSTA_GENERAL, 2, 2, NONPOSITIVE, B, blocks, dedup(pair_family()),
                                {"c1": rec["c1"], "c2": rec["c2"]})
    assert verify(cert).ok


def test_wrong_sos_is_rejected():
    rec = published.D31
    B = quad_basis(3, 1)
    sos = [(Q(1), published.to_row({1: 1}, rec, B))]
    with pytest.raises(IdentityMismatch):
        certificate_from_sos(DMN, 3, 1, "nonnegative", B, [("B1", "F", sos, {})], constraint_suite(3, 1))


def test_build_rejects_non_psd():
    prep = prepare(DMN, 3, 1)
    with pytest.raises(NotPSD):
        certify(prep, {"q1": Q(1000), "q2": Q(-1000)})


# -- text format ----------------------------------------------------------------

@pytest.fixture(scope="module")
def worked_cert():
    return dmn_certificate(published.D31, 3)


def test_serialize_round_trip(worked_cert):
    text = serialize(worked_cert)
    back = parse(text)
    assert back == worked_cert
    assert serialize(back) == text
    assert verify(back).ok


def test_serialize_two_index_round_trip():
    prep = prepare(COSTA_GENERAL)
    sol = solve(prep.sdp)
    cert = certify(prep, rationalize(prep.sdp, sol).values)
    text = serialize(cert)
    assert serialize(parse(text)) == text
    assert text.count("\nblock ") == 2


def test_parse_negative_coefficient(worked_cert):
    lines = serialize(worked_cert).splitlines()
    i = next(i for i, ln in enumerate(lines) if ln.startswith("sos "))
    lines[i] = "sos -" + lines[i][4:]
    with pytest.raises(ParseError) as err:
        parse("\n".join(lines))
    assert "signed coefficient" in str(err.value)
    assert err.value.line == i + 1


def test_parse_errors_have_positions(worked_cert):
    text = serialize(worked_cert)
    with pytest.raises(ParseError):
        parse(text.replace("certificate v1", "certificate v9"))
    with pytest.raises(ParseError):
        parse(text + "junk\n")
    with pytest.raises(ParseError):
        parse(text.replace("\nend\n", "\n"))


def _edit_comb(cert, edit):
    lines = serialize(cert).splitlines()
    i = next(i for i, ln in enumerate(lines) if ln.startswith("comb "))
    lines[i] = " ".join(edit(lines[i].split(" ", 3)))
    return parse("\n".join(lines) + "\n")


def test_tampered_weight_is_caught(worked_cert):
    def bump(toks):
        toks[1] = str(Q(toks[1]) + 1)
        return toks

    rep = verify(_edit_comb(worked_cert, bump))
    assert not rep.ok
    assert rep.residuals


def test_tampered_provenance_is_caught(worked_cert):
    def swap(toks):
        toks[2] = "0" * len(toks[2])
        return toks

    rep = verify(_edit_comb(worked_cert, swap))
    assert not rep.ok
    assert any("provenance" in r for r in rep.reasons)


def test_sos_factors_are_echelon(worked_cert):
    for blk in worked_cert.blocks:
        leads = [next(j for j, v in enumerate(row) if v) for _, row in blk.sos]
        assert leads == sorted(set(leads))
