from collections import Counter
from math import comb

import pytest

from linpde import jets
from linpde.catalog import make
from linpde.diffop import CoordinateChange, DiffOperator, change_variables, prolongation_matrix
from linpde.field import QQ
from linpde.jets import (characters, delta_cohomology, delta_matrix, delta_regularize, delta_sequence,
                         from_operator, is_2_acyclic, is_formally_integrable, is_involutive,
                         is_involutive_here, is_symbol_involutive, janet_tabular, pp_procedure,
                         project, prolong, symbol)
from _oracles import brute_prolongation, dense


def system(name, **kw):
    return from_operator(make(name, **kw))


def full_space(n, m, q):
    return from_operator(DiffOperator.zero(QQ, n, 1, m), q)


# --- construction ------------------------------------------------------------------

def test_branching_dimensions():
    S = system("example_1_1")
    assert S.rank == 2 and S.dim == 4
    assert prolong(S, 1).dim == 4
    assert project(prolong(S, 1), 2).dim == 3


def test_branching_prolongation_dims_stay_four():
    S = system("example_1_1")
    assert [prolong(S, r).dim for r in range(3)] == [4, 4, 4]


def test_zero_operator_is_full_space():
    S = full_space(2, 2, 2)
    assert S.dim == 2 * comb(4, 2)


def test_killing_space_first_order():
    D = make("killing", metric="euclid:3")
    S = from_operator(D)
    assert brute_prolongation(D, 0).rank() == 6
    assert S.dim == 12 - 6 == 6


def test_prolong_zero_is_identity():
    S = system("macaulay_2_19")
    assert prolong(S, 0).same_as(S)
    assert project(S, S.q).same_as(S)


def test_finite_type_prolongation():
    S = system("macaulay_2_22", case=2)
    assert prolong(S, 1).dim == 8
    assert symbol(prolong(S, 1)).dim == 1
    assert symbol(prolong(S, 2)).dim == 0


def test_projection_keeps_dimension():
    R = pp_procedure(system("macaulay_2_19")).result
    P2 = project(prolong(R, 1), 2)
    assert P2.rank == 6 and P2.dim == 4 == R.dim


@pytest.mark.parametrize("name,kw", [("example_1_1", {}), ("macaulay_2_19", {}),
                                     ("macaulay_2_22", {"case": 1}), ("killing", {"metric": "euclid:2"})])
def test_short_exact_sequence(name, kw):
    # dim R_{q+1} = dim R^(1)_q + dim g_{q+1}
    S = system(name, **kw)
    up = prolong(S, 1)
    assert up.dim == project(up, S.q).dim + symbol(up).dim


def test_prolongation_matrix_shape_formula():
    D = make("macaulay_2_17")
    for r in range(3):
        M = prolongation_matrix(D, r)
        assert M.ncols == comb(2 + r + 3, 3) and M.nrows == 3 * comb(r + 3, 3)
        assert dense(M).rank() == brute_prolongation(D, r).rank()


# --- symbols and delta ---------------------------------------------------------------

def test_symbol_dims():
    assert symbol(system("macaulay_2_17", variant="transformed")).dim == 3
    assert symbol(full_space(3, 2, 2)).dim == 2 * comb(2 + 2, 2)


@pytest.mark.parametrize("name,kw", [("macaulay_2_17", {}), ("macaulay_2_22", {"case": 2}),
                                     ("conformal_killing", {"metric": "euclid:3"}),
                                     ("beltrami", {}), ("macaulay_2_20", {})])
def test_delta_squared_is_zero(name, kw):
    G = symbol(system(name, **kw))
    n = G.n
    checked = 0
    for level in range(G.q + 1, G.q + 4):
        for s in range(n - 1):
            # delta_s lands in the domain of delta_{s+1} one level lower
            A = delta_matrix(G.at(level), s)
            B = delta_matrix(G.at(level - 1), s + 1)
            assert A.nrows == B.ncols
            assert (B @ A).is_zero()
            checked += 1
    assert checked


def test_quadric_delta_sequence():
    seq = delta_sequence(symbol(system("macaulay_2_17", variant="transformed")), 4)
    assert seq.dims == [3, 9, 9, 3] and seq.exact


def test_two_variable_delta_sequence():
    S = pp_procedure(system("macaulay_2_20")).result
    seq = delta_sequence(symbol(S), S.q + S.n)
    assert seq.dims == [1, 2, 1] and seq.exact


def test_conformal_cohomology():
    G4 = symbol(system("conformal_killing", metric="euclid:4"))
    h = delta_cohomology(G4, 2, 0)
    assert (h.dimB, h.dimZ, h.dimH) == (16, 26, 10)
    G3 = symbol(system("conformal_killing", metric="euclid:3"))
    h3 = delta_cohomology(G3, 2, 1)
    assert (h3.dimB, h3.dimZ, h3.dimH) == (0, 5, 5)
    assert 3 * G3.at(2).dim - h3.dimZ == 4


def test_involutive_symbol_acyclic():
    G = symbol(system("beltrami"))
    for s in (1, 2):
        for r in range(2):
            assert delta_cohomology(G, s, r).dimH == 0


# --- tabular and characters -------------------------------------------------------------

def test_beltrami_tabular():
    S = system("beltrami")
    assert janet_tabular(S).beta == [0, 3, 3]
    assert characters(S).alpha == [18, 9, 3]


def test_mixed_order_tabular():
    R = pp_procedure(system("macaulay_2_19")).result
    classes = Counter(r.cls for r in janet_tabular(R).rows)
    assert classes == {3: 1, 2: 3, 1: 6, 0: 6}
    assert all(r.dots == 3 for r in janet_tabular(R).rows if r.cls == 0)


def test_single_equation_tabular():
    S = from_operator(DiffOperator.from_rows(QQ, 2, 1, [{0: {(1, 0): 1}}]))
    assert janet_tabular(S).beta == [1, 0]


def test_maxwell_characters_after_change():
    M = make("maxwell_param")
    S = from_operator(change_variables(M, CoordinateChange.parse("x3=x3+x2+x1", 3)))
    assert characters(S).alpha == [9, 3, 0]


def test_quadric_characters():
    S = system("macaulay_2_17", variant="transformed")
    assert characters(S).alpha == [3, 0, 0]
    assert sum(characters(S).alpha) == symbol(S).dim


# --- involutivity -------------------------------------------------------------------------

def test_involutive_only_after_change():
    assert not is_symbol_involutive(system("macaulay_2_18"))
    assert not is_involutive_here(system("macaulay_2_18"))
    assert is_involutive_here(system("macaulay_2_18", variant="transformed"))


def test_zero_symbol_involutive():
    R = pp_procedure(system("macaulay_2_19")).result
    assert symbol(R).dim == 0 and is_symbol_involutive(R)


def test_finite_type_symbol_not_involutive():
    assert not is_symbol_involutive(system("macaulay_2_22", case=2))


def test_two_acyclicity():
    S = system("macaulay_2_22", case=2)
    assert is_2_acyclic(symbol(prolong(S, 1)))
    assert is_2_acyclic(symbol(system("beltrami")))
    G3 = symbol(system("conformal_killing", metric="euclid:3")).at(2)
    G4 = symbol(system("conformal_killing", metric="euclid:4")).at(2)
    assert not is_2_acyclic(G3) and is_2_acyclic(G4)


def test_formal_integrability():
    fi = is_formally_integrable(system("macaulay_2_19"))
    assert not fi and fi.witness == 2
    assert is_formally_integrable(system("macaulay_2_22", case=2))
    assert is_formally_integrable(full_space(2, 1, 2))


def test_pp_mixed_order():
    pp = pp_procedure(system("macaulay_2_19"))
    assert pp.result.q == 3 and pp.result.dim == 4 and symbol(pp.result).dim == 0
    assert (pp.r, pp.s) == (1, 1)


def test_pp_double_projection():
    pp = pp_procedure(system("macaulay_2_22", case=1))
    assert pp.result.q == 2 and pp.result.rank == 4 and pp.s == 2 and pp.r == 0
    S = system("macaulay_2_22", case=1)
    R1 = project(prolong(S, 1), 2)
    assert S.dim > R1.dim > pp.result.dim


def test_pp_already_involutive():
    pp = pp_procedure(system("macaulay_2_17", variant="transformed"))
    assert (pp.r, pp.s) == (0, 0)


def test_prolongation_of_projection():
    # 2-acyclic symbol + one projection: rho_r(R^(1)_q) = R^(1)_{q+r}
    S = system("macaulay_2_22", case=1)
    R1 = project(prolong(S, 1), S.q)
    assert is_2_acyclic(symbol(S))
    for r in (1, 2):
        assert prolong(R1, r).dim == project(prolong(S, r + 1), S.q + r).dim


def test_delta_regularize_monomial_system():
    S = system("macaulay_2_18")
    C, S2 = delta_regularize(S, seed=0)
    assert not C.is_identity() and is_symbol_involutive(S2)
    assert tuple(reversed(janet_tabular(S2).beta)) >= tuple(reversed(janet_tabular(S).beta))
    assert delta_regularize(S, seed=0)[0].matrix == C.matrix


def test_delta_regularize_keeps_identity():
    C, _ = delta_regularize(system("beltrami"))
    assert C.is_identity()


def test_is_involutive_with_regularization():
    assert is_involutive(system("macaulay_2_18"))


def test_spencer_operator_quadric():
    S = system("macaulay_2_17")
    M = jets.spencer_operator_matrix(S)
    A = dense(M)
    E = dense(S.equations)
    L = len(S.index)
    assert A.rank() == 9 <= 3 * S.dim
    for i in range(S.n):
        assert (E * A[i * L:(i + 1) * L, :]).is_zero_matrix


def test_spencer_operator_both_branches():
    for a in ("a", 0):
        jets.spencer_operator_matrix(system("example_1_1", a=a))
