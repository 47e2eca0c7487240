from math import comb

import pytest

from linpde import jets
from linpde.catalog import make
from linpde.diffop import DiffOperator, DiffPolynomial, compose, generic_chi_rank
from linpde.duality import same_row_module, syzygies
from linpde.field import QQ
from linpde.jets import characters, delta_regularize, from_operator, pp_procedure, symbol
from linpde.sequences import (NotInvolutiveError, cc_chain, compatibility_operator, euler_poincare,
                              fundamental_diagram, hybrid_dims, janet_dims, janet_dims_raw,
                              janet_sequence, jet_alternating_sum, lowered_system, spencer_dims)


def endpoint(name, **kw):
    return pp_procedure(from_operator(make(name, **kw))).result


def row(K, n, *entries):
    return [DiffPolynomial(K, n, {tuple(mu): K(c) for mu, c in e.items()}) for e in entries]


def up_to_sign(A, rows):
    return A.entries == [rows] or A.entries == [[-e for e in rows]]


# --- compatibility conditions ---------------------------------------------------------

def test_branching_zero_branch_cc():
    cc = compatibility_operator(make("example_1_1", a=0))
    assert cc.generator_orders == [1]
    assert up_to_sign(cc.operator, row(QQ, 2, {(0, 1): 1}, {(1, 0): -1}))


def test_branching_generic_cc():
    D = make("example_1_1")
    cc = compatibility_operator(D)
    assert cc.generator_orders == [2]
    assert [c.polynomial for c in cc.conditions] == ["a"]
    # expected d12 eta2 - d22 eta1 + a d1 eta2, possibly with the opposite sign
    assert up_to_sign(cc.operator, row(D.K, 2, {(0, 2): -1}, {(1, 1): 1, (1, 0): "a"}))
    assert cc.per_order_counts.get(3, 0) == 0


def test_killing_minkowski_cc():
    cc = compatibility_operator(make("killing"))
    assert cc.operator.p == 20 and set(cc.generator_orders) == {2}
    assert 20 == 4 ** 2 * (4 ** 2 - 1) // 12


def test_cc_soundness_on_catalog():
    for name, kw in [("macaulay_2_19", {}), ("beltrami", {}), ("killing", {"metric": "euclid:3"}),
                     ("conformal_killing", {"metric": "euclid:3"}), ("pendulum", {})]:
        D = make(name, **kw)
        cc = compatibility_operator(D)
        if cc.operator.p:
            assert compose(cc.operator, D).is_zero(), name


def test_chain_of_finite_type_system():
    ch = cc_chain(make("macaulay_2_22", case=2))
    assert [ch[0].m] + [A.p for A in ch] == [1, 3, 3, 1]
    assert all(A.order == 2 for A in ch)
    for A, B in zip(ch[1:], ch):
        assert compose(A, B).is_zero()


def test_riemann_to_bianchi():
    ch = cc_chain(make("riemann", metric="euclid:3"), length=1)
    assert ch[1].p == 3 and same_row_module(ch[1], make("bianchi", metric="euclid:3"))


def test_einstein_to_div():
    cc = compatibility_operator(make("einstein"))
    assert cc.operator.p == 4 and cc.generator_orders == [1] * 4
    assert same_row_module(cc.operator, make("div_sym"))


def test_max_order_flags_inconclusive():
    cc = compatibility_operator(make("conformal_killing", metric="euclid:3"), max_order=2)
    assert cc.inconclusive


# --- Gröbner oracle vs jet CC ----------------------------------------------------------

DESK = [("example_1_1", {}), ("example_1_1", {"a": 0}), ("macaulay_2_17", {}), ("macaulay_2_18", {}),
        ("macaulay_2_19", {}), ("macaulay_2_21", {}), ("macaulay_2_21", {"variant": "original"}),
        ("macaulay_2_22", {"case": 1}), ("macaulay_2_22", {"case": 2}),
        ("killing", {"metric": "euclid:2"}), ("killing", {"metric": "euclid:3"}),
        ("conformal_killing", {"metric": "euclid:3"}), ("cauchy", {"metric": "euclid:3"}),
        ("airy", {}), ("beltrami", {}), ("lanczos", {}), ("maxwell_param", {}),
        ("riemann", {"metric": "euclid:2"}), ("riemann", {"metric": "euclid:3"}),
        ("bianchi", {"metric": "euclid:3"}), ("pendulum", {}), ("ricci", {"metric": "euclid:3"}),
        ("einstein", {"metric": "euclid:3"})]


@pytest.mark.parametrize("name,kw", DESK)
def test_cc_equals_groebner_syzygies(name, kw):
    D = make(name, **kw)
    cc = compatibility_operator(D).operator
    sz = syzygies(D)
    if cc.p == 0 or sz.p == 0:
        assert cc.p == sz.p == 0
    else:
        assert same_row_module(cc, sz)


@pytest.mark.parametrize("name,kw", DESK)
def test_resolution_euler_poincare(name, kw):
    D = make(name, **kw)
    ch = cc_chain(D)
    dims = [D.m] + [A.p for A in ch]
    assert euler_poincare(dims) == D.m - generic_chi_rank(D)


def _homogeneous(A):
    return len({e.order for r in A.entries for e in r if e}) == 1 and all(
        max(e.order for e in r) == A.order for r in A.entries)


# the jet count assumes each operator has a single order
HOMOGENEOUS = [(n, k) for n, k in DESK if n not in ("macaulay_2_19", "macaulay_2_21")
               or k == {"variant": "original"}]


@pytest.mark.parametrize("name,kw", HOMOGENEOUS)
def test_jet_exactness(name, kw):
    ch = cc_chain(make(name, **kw))
    assert all(_homogeneous(A) for A in ch)
    for r in range(4):
        assert jet_alternating_sum(ch, r)[1] == 0


def test_conformal_jet_rows():
    ch = cc_chain(make("conformal_killing", metric="euclid:3"))
    assert [A.order for A in ch] == [1, 3, 1]
    dims, total = jet_alternating_sum(ch[:2], 0)
    assert dims == [10, 105, 100, 5] and total == 0


def test_branching_jet_identity():
    # 4 - (r+5)(r+6)/2 + 2(r+3)(r+4)/2 - (r+1)(r+2)/2 = 0, generic branch
    ch = cc_chain(make("example_1_1"))
    for r in range(4):
        dims, total = jet_alternating_sum(ch, r)
        assert dims == [4, comb(r + 6, 2), 2 * comb(r + 4, 2), comb(r + 2, 2)] and total == 0


# --- Janet / Spencer / hybrid ------------------------------------------------------------

def test_janet_dims_of_catalog_systems():
    assert janet_sequence(endpoint("macaulay_2_17")).dims == [1, 3, 2]
    assert janet_sequence(endpoint("macaulay_2_19")).dims == [1, 16, 33, 24, 6]
    R = from_operator(make("macaulay_2_21", variant="transformed"))
    assert janet_sequence(R).dims == [1, 9, 15, 9, 2]


def test_janet_formula_matches_quotient():
    for name, kw in [("macaulay_2_17", {"variant": "transformed"}), ("macaulay_2_19", {}),
                     ("macaulay_2_22", {"case": 1}), ("beltrami", {})]:
        R = endpoint(name, **kw)
        C, reg = delta_regularize(R)
        assert janet_dims(R)[0] == janet_dims_raw(reg), name


def test_janet_rejects_non_involutive():
    with pytest.raises(NotInvolutiveError):
        janet_sequence(from_operator(make("macaulay_2_19")))


def test_spencer_dims():
    assert spencer_dims(endpoint("macaulay_2_17")) == [7, 18, 15, 4]
    assert spencer_dims(endpoint("macaulay_2_22", case=1)) == [6, 16, 14, 4]
    assert spencer_dims(endpoint("macaulay_2_19")) == [4, 12, 12, 4]


def test_hybrid_dims():
    assert hybrid_dims(3, 1, 3, check=True) == [20, 45, 36, 10]
    assert hybrid_dims(2, 1, 5, check=True) == [21, 35, 15]


def test_hybrid_q0():
    # delta is onto from T* (x) S_1 T* (x) E, so only C_0(E) = E survives
    assert hybrid_dims(3, 2, 0, check=True) == [2, 0, 0, 0]


@pytest.mark.parametrize("name,kw,rows", [
    ("macaulay_2_19", {}, ([4, 12, 12, 4], [20, 45, 36, 10], [16, 33, 24, 6])),
    ("macaulay_2_21", {"variant": "transformed"}, ([11, 30, 27, 8], [20, 45, 36, 10], [9, 15, 9, 2])),
    ("macaulay_2_20", {}, ([12, 23, 11], [21, 35, 15], [9, 12, 4])),
    ("macaulay_2_22", {"case": 2}, ([8, 24, 24, 8], [35, 84, 70, 20], [27, 60, 46, 12])),
])
def test_fundamental_diagram(name, kw, rows):
    fd = fundamental_diagram(endpoint(name, **kw))
    assert (fd.spencer, fd.hybrid, fd.janet[:len(rows[2])]) == rows
    assert fd.exact
    assert all(x == 0 for x in fd.long_exact)


def test_euler_poincare():
    assert euler_poincare([1, 2, 1]) == 0
    assert euler_poincare([4, 12, 12, 4]) == 0
    assert euler_poincare([]) == 0


def test_rank_is_last_character():
    for name, kw in [("beltrami", {}), ("einstein", {}), ("macaulay_2_19", {})]:
        D = make(name, **kw)
        R = pp_procedure(from_operator(D)).result
        _, reg = delta_regularize(R)
        assert characters(reg).alpha[-1] == D.m - generic_chi_rank(D), name


def test_lowered_first_order_system():
    L = lowered_system(endpoint("macaulay_2_19"))
    assert L.m == 4 and L.q == 1
    assert janet_sequence(L).dims == [4, 12, 12, 4]
