"""Double differential duality: torsion, parametrizations and the Kalman bridge."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations

from .field import Field, ScalarMatrix, rref_rows, right_kernel_rows, content_normalize, merge_conditions
from .diffop import (DiffOperator, DiffPolynomial, adjoint, compose, generic_chi_rank, monomials,
                     add_mono)
from .groebner import buchberger, operator_rows, syzygy_module, to_row, GroebnerBasis
from .sequences import compatibility_operator


class NotFoundError(RuntimeError):
    pass


# --- row modules ------------------------------------------------------------------

@dataclass
class RowModuleBasis:
    K: Field
    n: int
    m: int
    generators: list
    groebner: GroebnerBasis

    def reduce(self, f: dict) -> dict:
        return self.groebner.reduce(f)


def _as_elements(rows, K=None, n=None):
    if isinstance(rows, DiffOperator):
        return rows.K, rows.n, rows.m, operator_rows(rows)
    out = []
    for r in rows:
        out.append({(k, mu): c for k, e in enumerate(r) for mu, c in e.terms.items()})
    r0 = rows[0]
    return r0[0].K, r0[0].n, len(r0), out


def row_module(rows) -> RowModuleBasis:
    """Completed basis of the submodule of K[d]^m spanned by operator rows."""
    K, n, m, gens = _as_elements(rows)
    return RowModuleBasis(K, n, m, gens, buchberger(K, n, gens))


def _element(z, m=None):
    if isinstance(z, dict):
        return z
    if isinstance(z, DiffOperator):
        if z.p != 1:
            raise ValueError("membership expects a single row")
        return operator_rows(z)[0]
    return {(k, mu): c for k, e in enumerate(z) for mu, c in e.terms.items()}


def _conds(*bases):
    return merge_conditions(*(b.groebner.conditions for b in bases))


def membership(B: RowModuleBasis, z):
    """(is_member, normal form) for a single row."""
    nf = B.reduce(_element(z))
    return not nf, nf


def same_row_module(A, B) -> bool:
    ra, rb = row_module(A), row_module(B)
    return (all(membership(ra, g)[0] for g in rb.generators)
            and all(membership(rb, g)[0] for g in ra.generators))


def syzygies(D: DiffOperator) -> DiffOperator:
    """Generators of the left syzygies of D's rows, from the Groebner oracle."""
    gens = syzygy_module(D)
    rows = [to_row(D.K, D.n, D.p, g) for g in gens]
    return DiffOperator(D.K, D.n, rows, list(D.target_labels), [f"s{i + 1}" for i in range(len(rows))],
                        list(D.target_weights), [1] * len(rows), name="syz")


# --- torsion certificates ---------------------------------------------------------

@dataclass
class TorsionGenerator:
    row: DiffOperator
    certificate: DiffPolynomial | None
    order: int | None
    conditions: tuple = ()

    @property
    def found(self) -> bool:
        return self.certificate is not None


def _mul_poly(f: dict, mu) -> dict:
    return {(k, add_mono(nu, mu)): c for (k, nu), c in f.items()}


def find_certificate(B: RowModuleBasis, z: dict, cap: int = 4):
    """(P, order, conditions) for a nonzero P of least order with P.z in the module."""
    K, n = B.K, B.n
    lams = []
    nfs = []
    for t in range(cap + 1):
        new = monomials(n, t)
        for lam in new:
            lams.append(lam)
            nfs.append(B.reduce(_mul_poly(z, lam)))
        keys = sorted({k for f in nfs for k in f})
        kpos = {k: i for i, k in enumerate(keys)}
        # columns are the multipliers; rows are normal-form coordinates
        rows = [dict() for _ in keys]
        for j, f in enumerate(nfs):
            for k, c in f.items():
                rows[kpos[k]][j] = c
        # prefer free variables of low order so certificates stay small
        order = list(range(len(lams) - 1, -1, -1))
        basis, conds = right_kernel_rows(K, rows, len(lams), order)
        if basis:
            # the kernel vector whose free multiplier has the highest order
            v = max(basis, key=lambda b: max(b))
            v = content_normalize(K, v, sorted(v, reverse=True))
            P = DiffPolynomial(K, n, {lams[j]: c for j, c in v.items()})
            return P, t, merge_conditions(conds, B.groebner.conditions)
    return None, None, ()


# --- double duality ---------------------------------------------------------------

@dataclass
class DualityReport:
    input: DiffOperator
    adjoint_of_input: DiffOperator
    cc_of_adjoint: DiffOperator
    parametrization: DiffOperator
    cc_of_candidate: DiffOperator
    torsion_free: bool
    torsion_generators: list
    conditions: tuple = ()
    partial: bool = False
    log: list = dc_field(default_factory=list)


def double_duality(D1: DiffOperator, max_order: int | None = None, certificate_cap: int = 4,
                   cap: int = 20, seed: int = 0) -> DualityReport:
    """Five steps: ad(D1), its CC, D = ad of that, CC(D) =: D1', compare D1' with D1."""
    log = []
    A = adjoint(D1)
    log.append(f"step 1: ad(D1) is {A.p}x{A.m} of order {A.order}")
    cc1 = compatibility_operator(A, max_order, cap, seed)
    adD = cc1.operator
    log.append(f"step 2: CC of ad(D1) has {adD.p} generator(s) of orders {cc1.generator_orders}")
    D = adjoint(adD)
    D.name = "parametrization"
    log.append(f"step 3: D = ad(ad(D)) is {D.p}x{D.m} of order {D.order}")
    cc2 = compatibility_operator(D, max_order, cap, seed)
    D1p = cc2.operator
    log.append(f"step 4: CC of D has {D1p.p} generator(s) of orders {cc2.generator_orders}")
    if not compose(D1, D).is_zero():
        raise AssertionError("D1 o D is not zero")
    B = row_module(D1)
    Bp = row_module(D1p)
    missing = [g for g in B.generators if not membership(Bp, g)[0]]
    if missing:
        raise AssertionError("D1 is not inside the CC module of its candidate parametrization")
    torsion = []
    work = list(B.generators)
    cur = B
    for g in operator_rows(D1p):
        if membership(cur, g)[0]:
            continue
        P, t, pc = find_certificate(B, g, certificate_cap)
        row = DiffOperator(D1p.K, D1p.n, [to_row(D1p.K, D1p.n, D1p.m, g)], list(D1p.source_labels),
                           [f"z{len(torsion) + 1}"], list(D1p.source_weights), [1])
        torsion.append(TorsionGenerator(row, P, t, pc))
        if P is None:
            log.append(f"torsion candidate {len(torsion)}: certificate not found up to order {certificate_cap}")
        work.append(g)
        cur = RowModuleBasis(B.K, B.n, B.m, work, buchberger(B.K, B.n, work))
    tf = not torsion
    log.append("step 5: " + ("same row modules: torsion-free, D parametrizes D1" if tf
                            else f"{len(torsion)} torsion generator(s)"))
    conds = merge_conditions(D1.conditions, cc1.conditions, cc2.conditions, _conds(B, Bp, cur),
                             *(t.conditions for t in torsion))
    return DualityReport(D1, A, adD, D, D1p, tf, torsion, conds,
                         cc1.inconclusive or cc2.inconclusive, log)


def verify_certificate(D1: DiffOperator, tg: TorsionGenerator) -> bool:
    if tg.certificate is None or not tg.certificate:
        return False
    B = row_module(D1)
    z = operator_rows(tg.row)[0]
    Pz = {}
    for mu, c in tg.certificate.terms.items():
        for (k, nu), v in z.items():
            key = (k, add_mono(mu, nu))
            Pz[key] = Pz.get(key, D1.K.zero) + c * v
    Pz = {k: v for k, v in Pz.items() if v}
    return membership(B, Pz)[0]


# --- minimum parametrization ------------------------------------------------------

def parametrizes(D: DiffOperator, D1: DiffOperator, columns, max_order=None) -> bool:
    """Does D restricted to ``columns`` still have CC generating D1's row module?"""
    sub = D.select_columns(list(columns))
    cc = compatibility_operator(sub, max_order)
    return same_row_module(cc.operator, D1)


def minimum_parametrization(D: DiffOperator, D1: DiffOperator, max_order: int | None = None,
                            subset_cap: int = 5000):
    """First column subset in lexicographic order of size chi-rank(D) that still parametrizes D1."""
    k = generic_chi_rank(D)
    if k == D.m:
        return D, tuple(range(D.m))
    tried = 0
    for S in combinations(range(D.m), k):
        tried += 1
        if tried > subset_cap:
            break
        if parametrizes(D, D1, S, max_order):
            R = D.restrict_columns(list(S))
            R.name = "minimum_parametrization"
            return R, S
    raise NotFoundError(f"no column subset of size {k} verified (tried {tried})")


# --- Kalman -----------------------------------------------------------------------

@dataclass
class KalmanResult:
    controllable: bool
    rank: int
    conditions: tuple = ()

    def __bool__(self):
        return self.controllable


def kalman_test(A: ScalarMatrix, B: ScalarMatrix) -> KalmanResult:
    """rank [B | AB | ... | A^{n-1}B] == n."""
    n = A.nrows
    if A.ncols != n or B.nrows != n:
        raise ValueError("shape mismatch between A and B")
    K = A.K
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    cols = []
    for M in blocks:
        T = M.transpose()
        cols.extend(T.data)
    red, _, conds = rref_rows(K, cols, origin="kalman")
    return KalmanResult(len(red) == n, len(red), merge_conditions(conds))


def kalman_operator(A: ScalarMatrix, B: ScalarMatrix) -> DiffOperator:
    """Rows -d y_i + (A y)_i + (B u)_i over unknowns (y, u)."""
    K = A.K
    n, m = A.nrows, B.ncols
    rows = []
    for i in range(n):
        r = {}
        r.setdefault(i, {})[(1,)] = -K.one
        for j, c in A.data[i].items():
            r.setdefault(j, {})
            r[j][(0,)] = r[j].get((0,), K.zero) + c
        for j, c in B.data[i].items():
            r.setdefault(n + j, {})[(0,)] = c
        rows.append(r)
    labels = [f"y{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
    return DiffOperator.from_rows(K, 1, n + m, rows, source_labels=labels, name="kalman")


def kalman_via_duality(A: ScalarMatrix, B: ScalarMatrix, **kw) -> DualityReport:
    rep = double_duality(kalman_operator(A, B), **kw)
    kt = kalman_test(A, B)
    if rep.torsion_free != kt.controllable:
        raise AssertionError("duality and Kalman rank test disagree")
    return rep
