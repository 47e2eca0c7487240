"""One test per acceptance criterion; each prints PASS/FAIL with its runtime."""
import random
import time
from itertools import product

import pytest
import sympy as sp

from linpde.catalog import conformal_symbol_battery, make, pendulum_state, weyl_ricci_diagram
from linpde.diffop import (DiffOperator, DiffPolynomial, adjoint, compose, generic_chi_rank,
                           is_self_adjoint, prolongation_matrix)
from linpde.duality import (double_duality, kalman_operator, kalman_test, kalman_via_duality,
                            minimum_parametrization, parametrizes, same_row_module, syzygies,
                            verify_certificate)
from linpde.field import rank, rref_generic, specialize
from linpde.jets import (_rank, characters, delta_cohomology, delta_matrix, delta_sequence,
                         from_operator, is_2_acyclic, is_involutive_here, is_symbol_involutive,
                         pp_procedure, project, prolong, symbol)
from linpde.sequences import (cc_chain, compatibility_operator, euler_poincare, fundamental_diagram,
                              janet_sequence, jet_alternating_sum, lowered_system, spencer_dims)

from _oracles import chi_matrix, random_pair

RESULTS = {}

BUDGET = {1: 5, 2: 5, 3: 5, 4: 10, 5: 10, 6: 10, 7: 30, 8: 60, 9: 600, 10: 60, 11: 1200, 12: 300}

NOTES = {}


def summary_line(k):
    ok, secs, err = RESULTS[k]
    line = f"{'PASS' if ok else 'FAIL'} criterion {k:2d}  {secs:7.2f}s (budget {BUDGET[k]}s)"
    if k in NOTES:
        line += f"  [{NOTES[k]}]"
    if err:
        line += f"  {err}"
    return line


def summary_lines():
    return [summary_line(k) for k in sorted(RESULTS)]


def criterion(k):
    def wrap(fn):
        def test():
            t0 = time.perf_counter()
            err = ""
            try:
                fn()
            except Exception as exc:
                err = f"{type(exc).__name__}: {exc}"[:200]
                raise
            finally:
                secs = time.perf_counter() - t0
                if not err and secs > BUDGET[k]:
                    err = "over budget"
                RESULTS[k] = (not err, secs, err)
                print(summary_line(k))
            assert secs <= BUDGET[k], f"criterion {k} took {secs:.1f}s"
        test.__name__ = fn.__name__
        test.__doc__ = fn.__doc__
        return test
    return wrap


def endpoint(name, **kw):
    return pp_procedure(from_operator(make(name, **kw))).result


def poly_row(K, n, *entries):
    return [DiffPolynomial(K, n, {tuple(mu): K(c) for mu, c in e.items()}) for e in entries]


@criterion(1)
def test_criterion_01_parameter_branching():
    """Generic and a = 0 branches: projection dims, CC orders, duality."""
    S = from_operator(make("example_1_1"))
    R1 = project(prolong(S, 1), 2)
    R2 = project(prolong(R1, 1), 2)
    assert (R2.dim, R1.dim, S.dim, len(S.index)) == (2, 3, 4, 6)
    cc = compatibility_operator(make("example_1_1"))
    assert cc.operator.p == 1 and cc.generator_orders == [2]
    assert "a" in [c.polynomial for c in cc.conditions]
    assert double_duality(cc.operator).torsion_free

    D0 = make("example_1_1", a=0)
    cc0 = compatibility_operator(D0)
    assert cc0.generator_orders == [1]
    r = double_duality(adjoint(D0))
    assert not r.torsion_free and len(r.torsion_generators) == 1
    t = r.torsion_generators[0]
    assert t.certificate == DiffPolynomial.d(D0.K, 2, 2)
    assert verify_certificate(adjoint(D0), t)


@criterion(2)
def test_criterion_02_quadric_system():
    R = endpoint("macaulay_2_17")
    assert janet_sequence(R).dims == [1, 3, 2]
    assert spencer_dims(R) == [7, 18, 15, 4]
    seq = delta_sequence(symbol(from_operator(make("macaulay_2_17", variant="transformed"))), 4)
    assert seq.dims == [3, 9, 9, 3] and seq.exact


@criterion(3)
def test_criterion_03_coordinate_change():
    S = from_operator(make("macaulay_2_18"))
    assert not is_symbol_involutive(S) and not is_involutive_here(S)
    T = from_operator(make("macaulay_2_18", variant="transformed"))
    assert is_involutive_here(T)
    assert janet_sequence(T).dims == [1, 3, 2]


@criterion(4)
def test_criterion_04_zero_symbol_endpoint():
    R = endpoint("macaulay_2_19")
    assert (R.q, R.dim, symbol(R).dim) == (3, 4, 0)
    fd = fundamental_diagram(R)
    assert (fd.spencer, fd.hybrid, fd.janet[:4]) == ([4, 12, 12, 4], [20, 45, 36, 10], [16, 33, 24, 6])
    jan = janet_sequence(R).dims
    assert jan == [1, 16, 33, 24, 6] and euler_poincare(jan) == 0
    D = make("macaulay_2_19")
    assert D.m - generic_chi_rank(D) == 0
    assert janet_sequence(lowered_system(R)).dims == [4, 12, 12, 4]


@criterion(5)
def test_criterion_05_two_variable_system():
    R = endpoint("macaulay_2_20")
    fd = fundamental_diagram(R)
    assert (fd.spencer, fd.hybrid, fd.janet[:3]) == ([12, 23, 11], [21, 35, 15], [9, 12, 4])
    seq = delta_sequence(symbol(R), R.q + R.n)
    assert seq.dims == [1, 2, 1] and seq.exact


@criterion(6)
def test_criterion_06_third_order_system():
    R = from_operator(make("macaulay_2_21", variant="transformed"))
    assert is_involutive_here(R)
    assert not is_symbol_involutive(from_operator(make("macaulay_2_21")))
    assert janet_sequence(R).dims == [1, 9, 15, 9, 2]
    assert spencer_dims(R) == [11, 30, 27, 8]
    G = symbol(R)
    rk = _rank(delta_matrix(G.at(R.q), 1))
    assert rk == 6 and 3 * R.dim - rk == 27


@criterion(7)
def test_criterion_07_projection_and_finite_type():
    S1 = from_operator(make("macaulay_2_22", case=1))
    pp = pp_procedure(S1)
    R1 = project(prolong(S1, 1), 2)
    assert pp.s == 2 and pp.result.q == 2
    assert S1.dim > R1.dim > pp.result.dim
    assert janet_sequence(pp.result).dims == [1, 4, 4, 1]
    assert spencer_dims(pp.result) == [6, 16, 14, 4]

    D2 = make("macaulay_2_22", case=2)
    S2 = from_operator(D2)
    R3 = prolong(S2, 1)
    G = symbol(S2)
    assert (G.at(3).dim, R3.dim, G.at(4).dim) == (1, 8, 0)
    M = delta_matrix(G.at(2), 2)
    assert (M.ncols, M.nrows, _rank(M)) == (3, 3, 3)
    assert is_2_acyclic(symbol(R3))
    ch = cc_chain(D2)
    assert [D2.m] + [A.p for A in ch] == [1, 3, 3, 1]
    assert all(A.order == 2 for A in ch)
    fd = fundamental_diagram(pp_procedure(S2).result)
    assert (fd.spencer, fd.hybrid, fd.janet[:4]) == ([8, 24, 24, 8], [35, 84, 70, 20], [27, 60, 46, 12])


@criterion(8)
def test_criterion_08_elasticity():
    airy, bel = make("airy"), make("beltrami")
    assert same_row_module(adjoint(make("riemann", metric="euclid:2")), airy)
    assert same_row_module(compatibility_operator(airy).operator, make("cauchy", metric="euclid:2"))
    S = from_operator(bel)
    assert is_involutive_here(S)
    assert characters(S).alpha == [18, 9, 3]
    cau = make("cauchy")
    assert same_row_module(compatibility_operator(bel).operator, cau)
    assert is_self_adjoint(bel) and bel.p == bel.m == 6
    assert bel.source_weights == [1, 2, 2, 1, 2, 1]
    assert generic_chi_rank(bel) == 3
    assert parametrizes(bel, cau, (0, 3, 5))
    assert same_row_module(compatibility_operator(make("maxwell_param")).operator, cau)
    R, subset = minimum_parametrization(bel, cau)
    assert [bel.source_labels[k] for k in subset] == ["phi11", "phi12", "phi22"]


@criterion(9)
def test_criterion_09_relativity():
    assert prolong(from_operator(make("killing")), 1).dim == 10
    assert make("riemann").p == 20 and make("bianchi").p == 20
    E = make("einstein")
    assert is_self_adjoint(E) and not is_self_adjoint(make("ricci"))
    cc = compatibility_operator(E)
    assert cc.operator.p == 4 and cc.generator_orders == [1] * 4
    assert same_row_module(cc.operator, make("div_sym"))
    r = double_duality(E)
    assert not r.torsion_free and len(r.torsion_generators) == 10
    assert all(verify_certificate(E, t) for t in r.torsion_generators)


@criterion(10)
def test_criterion_10_control():
    P1 = make("pendulum")
    r = double_duality(P1)
    assert r.torsion_free and r.parametrization.order == 4
    boxed = DiffOperator.from_rows(P1.K, 1, 1, [
        {0: {(4,): "-l1*l2", (2,): "-g*(l1+l2)", (0,): "-g^2"}},
        {0: {(4,): "l2", (2,): "g"}},
        {0: {(4,): "l1", (2,): "g"}}])
    assert same_row_module(adjoint(r.parametrization), adjoint(boxed))

    Pl = make("pendulum", l1="l", l2="l")
    rl = double_duality(Pl)
    assert not rl.torsion_free and len(rl.torsion_generators) == 1
    t = rl.torsion_generators[0]
    z = t.row.entries[0]
    K = Pl.K
    theta = [DiffPolynomial(K, 1, {}), DiffPolynomial(K, 1, {(0,): 1}), DiffPolynomial(K, 1, {(0,): -1})]
    assert z == theta or z == [-e for e in theta]
    assert t.certificate == DiffPolynomial(K, 1, {(2,): K("l"), (0,): K("g")})

    A, B = pendulum_state()
    assert kalman_via_duality(A, B).torsion_free == kalman_test(A, B).controllable
    for seed in range(50):
        A, B = random_pair(random.Random(seed))
        assert double_duality(kalman_operator(A, B)).torsion_free == kalman_test(A, B).controllable


@criterion(11)
def test_criterion_11_conformal():
    lem = conformal_symbol_battery()
    assert all(lem[n]["g3"] == 0 for n in (3, 4, 5))
    assert not lem[3]["g2_two_acyclic"] and lem[4]["g2_two_acyclic"] and lem[5]["g2_two_acyclic"]
    assert lem[5]["g2_three_acyclic"]

    C3 = make("conformal_killing", metric="euclid:3")
    ch = cc_chain(C3)
    assert [C3.m] + [A.p for A in ch] == [3, 5, 5, 3]
    assert [A.order for A in ch] == [1, 3, 1]
    dims, total = jet_alternating_sum(ch[:2], 0)
    assert dims == [10, 105, 100, 5] and total == 0

    C4 = make("conformal_killing", metric="euclid:4")
    cc4 = compatibility_operator(C4)
    assert cc4.operator.p == 10 and set(cc4.generator_orders) == {2}
    h = delta_cohomology(symbol(from_operator(C4)), 2, 0)
    assert (h.dimZ, h.dimB, h.dimH) == (26, 16, 10)

    d = weyl_ricci_diagram()
    assert (d["top"], d["middle"], d["bottom"]) == ((10, 20, 20), (16, 26, 10), (10, 16, 6))

    # second CC of the n = 4 chain: allowed to come back inconclusive
    cc42 = compatibility_operator(cc4.operator)
    if cc42.inconclusive:
        NOTES[11] = "n=4 second CC inconclusive (stretch goal)"
    else:
        assert cc42.operator.p == 9
        NOTES[11] = "n=4 second CC: 9 rows"


# catalog items with n <= 3 and order <= 3; the two-variable system is fourth order
PROPERTY_ITEMS = [
    ("example_1_1", {}), ("example_1_1", {"a": 0}), ("macaulay_2_17", {}),
    ("macaulay_2_17", {"variant": "transformed"}), ("macaulay_2_18", {}),
    ("macaulay_2_18", {"variant": "transformed"}), ("macaulay_2_19", {}),
    ("macaulay_2_21", {}), ("macaulay_2_21", {"variant": "original"}),
    ("macaulay_2_21", {"variant": "transformed"}), ("macaulay_2_22", {"case": 1}),
    ("macaulay_2_22", {"case": 2}), ("killing", {"metric": "euclid:1"}),
    ("killing", {"metric": "euclid:2"}), ("killing", {"metric": "euclid:3"}),
    ("conformal_killing", {"metric": "euclid:3"}), ("riemann", {"metric": "euclid:2"}),
    ("riemann", {"metric": "euclid:3"}), ("bianchi", {"metric": "euclid:3"}),
    ("cauchy", {"metric": "euclid:2"}), ("cauchy", {"metric": "euclid:3"}), ("airy", {}),
    ("beltrami", {}), ("lanczos", {}), ("maxwell_param", {}), ("div_sym", {"metric": "euclid:3"}),
    ("ricci", {"metric": "euclid:3"}), ("einstein", {"metric": "euclid:3"}), ("pendulum", {}),
]


def _delta_squared(D):
    G = symbol(from_operator(D))
    for level in range(G.q + 1, G.q + 3):
        for s in range(G.n - 1):
            A = delta_matrix(G.at(level), s)
            B = delta_matrix(G.at(level - 1), s + 1)
            assert (B @ A).is_zero()


def _specialization_commutes(D, values=(-2, -1, 1, 2, 3)):
    params = D.K.params
    if not params:
        return
    syms = [sp.Symbol(p) for p in params]
    for r in range(2):
        M = prolongation_matrix(D, r)
        res = rref_generic(M)
        polys = [sp.sympify(c.polynomial.replace("^", "**")) for c in res.conditions]
        for vals in product(values, repeat=len(params)):
            point = dict(zip(syms, vals))
            if any(p.subs(point) == 0 for p in polys):
                continue
            Ms = specialize(M, dict(zip(params, vals)))
            assert rank(Ms) == res.rank
            break


@criterion(12)
def test_criterion_12_property_suites():
    checked = 0
    for name, kw in PROPERTY_ITEMS:
        D = make(name, **kw)
        assert D.n <= 3 and D.order <= 3
        _delta_squared(D)
        assert adjoint(adjoint(D)) == D
        ch = cc_chain(D)
        dims = [D.m] + [A.p for A in ch]
        assert euler_poincare(dims) == D.m - generic_chi_rank(D), name
        # the chain starts with D itself
        cc = ch[1] if len(ch) > 1 else None
        if cc is not None and cc.p:
            assert compose(cc, D).is_zero(), name
            assert adjoint(compose(cc, D)) == compose(adjoint(D), adjoint(cc))
            assert (chi_matrix(cc) * chi_matrix(D)).expand().is_zero_matrix
            assert same_row_module(cc, syzygies(D)), name
        else:
            assert syzygies(D).p == 0, name
        _specialization_commutes(D)
        checked += 1
    assert checked == len(PROPERTY_ITEMS)


if __name__ == "__main__":
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]:
        try:
            fn()
        except Exception:
            pass
    print("\n".join(summary_lines()))
