"""Compatibility conditions, Janet and Spencer sequences, fundamental diagram."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations
from math import comb

from .field import rref_rows, content_normalize, right_kernel_rows, merge_conditions
from .diffop import (DiffOperator, DiffPolynomial, jet_index, prolongation_matrix, add_mono,
                     unit, monomials)
from .jets import (JetSystem, InconclusiveError, SymbolSpace, from_operator, pp_procedure,
                   symbol, delta_matrix, janet_tabular, is_involutive, delta_regularize,
                   _rank, prolong)
from . import groebner


class NotInvolutiveError(ValueError):
    pass


@dataclass
class CCResult:
    operator: DiffOperator
    generator_orders: list
    per_order_counts: dict
    saturation_order: int
    conditions: tuple = ()
    inconclusive: bool = False
    log: list = dc_field(default_factory=list)

    def __str__(self):
        return str(self.operator)


def _shifts(vec: dict, src, dst, n, dt):
    """All d_lambda applied to a jet-space row vector, |lambda| <= dt."""
    out = []
    for d in range(dt + 1):
        for lam in monomials(n, d):
            out.append({dst.index[(k, add_mono(mu, lam))]: v
                        for (k, mu), v in ((src.columns[c], v) for c, v in vec.items())})
    return out


def _reduce(vec: dict, red: list, pivots: list) -> dict:
    v = dict(vec)
    for row, p in zip(red, pivots):
        c = v.get(p)
        if c:
            for col, x in row.items():
                w = v.get(col)
                w = -c * x if w is None else w - c * x
                if w:
                    v[col] = w
                else:
                    v.pop(col, None)
    return v


def _vec_to_row(vec: dict, idx, K, n, p):
    terms = [dict() for _ in range(p)]
    for c, v in vec.items():
        k, mu = idx.columns[c]
        terms[k][mu] = v
    return [DiffPolynomial(K, n, t) for t in terms]


def compatibility_operator(D: DiffOperator, max_order: int | None = None, cap: int = 20,
                           seed: int = 0, prune: bool = True) -> CCResult:
    """Generating compatibility conditions D1 with D1 o D = 0.

    Generators are read off the left kernels of the prolongation matrices
    order by order; the order bound comes from the prolongation/projection
    procedure on ker D.
    """
    K, n, p = D.K, D.n, D.p
    S = from_operator(D)
    pp = pp_procedure(S, cap, seed)
    r, s = pp.first_fi
    bound = r + s + 1
    log = [f"PP on ker D: r={r}, s={s}; generators have order <= {bound}"]
    conds = list(D.conditions) + list(pp.result.conditions)
    top = bound + 1
    inconclusive = False
    if max_order is not None and max_order < top:
        top = max_order
        inconclusive = max_order < bound
    gens = []
    counts = {}
    t = 0
    while t <= top:
        M = prolongation_matrix(D, t)
        dst = jet_index(n, p, t)
        T = M.transpose()
        L, c1 = right_kernel_rows(K, T.data, len(dst), dst.elim)
        conds += c1
        P = []
        for tg, g in gens:
            P += _shifts(g, jet_index(n, p, tg), dst, n, t - tg)
        red, piv, c2 = rref_rows(K, P, dst.elim, "cc")
        conds += c2
        rem = [x for x in (_reduce(v, red, piv) for v in L) if x]
        new, _, c3 = rref_rows(K, rem, dst.elim, "cc")
        conds += c3
        counts[t] = len(new)
        for v in new:
            gens.append((t, content_normalize(K, v, dst.elim)))
        if new:
            log.append(f"order {t}: {len(new)} new generator(s)")
        if t > bound and new:
            # should not happen; keep looking instead of trusting the bound
            log.append(f"unexpected generators above bound at order {t}")
            top = max(top, t + 1) if max_order is None else top
        t += 1
    rows, orders = [], []
    for tg, g in gens:
        rows.append(_vec_to_row(g, jet_index(n, p, tg), K, n, p))
        orders.append(tg)
    if prune and len(rows) > 1:
        rows, orders, dropped = _prune(K, n, p, rows, orders)
        if dropped:
            log.append(f"dropped {dropped} generator(s) lying in the module of earlier ones")
    op = DiffOperator(K, n, rows, list(D.target_labels), [f"g{i + 1}" for i in range(len(rows))],
                      list(D.target_weights), [1] * len(rows), name=f"cc({D.name})" if D.name else "cc",
                      conditions=merge_conditions(conds))
    return CCResult(op, orders, counts, bound, op.conditions, inconclusive, log)


def _prune(K, n, p, rows, orders):
    kept, kept_orders = [], []
    gb = None
    dropped = 0
    for row, o in zip(rows, orders):
        f = {(k, mu): c for k, e in enumerate(row) for mu, c in e.terms.items()}
        if gb is not None and not gb.reduce(f):
            dropped += 1
            continue
        kept.append(row)
        kept_orders.append(o)
        gb = groebner.buchberger(K, n, [{(k, mu): c for k, e in enumerate(r) for mu, c in e.terms.items()}
                                        for r in kept])
    return kept, kept_orders, dropped


def cc_chain(D: DiffOperator, length: int | None = None, max_order: int | None = None,
             cap: int = 20, seed: int = 0) -> list:
    """[D, D1, D2, ...] until the next operator is zero or ``length`` is reached."""
    out = [D]
    cur = D
    while length is None or len(out) <= length:
        res = compatibility_operator(cur, max_order, cap, seed)
        if res.operator.p == 0:
            break
        out.append(res.operator)
        cur = res.operator
        if len(out) > cur.n + 2:
            break
    return out


@dataclass
class SequenceReport:
    kind: str
    dims: list
    orders: list
    euler_poincare: int
    tabular: object = None
    change: object = None
    notes: list = dc_field(default_factory=list)


def euler_poincare(dims) -> int:
    return sum((-1) ** i * d for i, d in enumerate(dims))


def _trim(dims):
    out = list(dims)
    while len(out) > 2 and out[-1] == 0:
        out.pop()
    return out


def _require_involutive(S: JetSystem, seed: int):
    if not is_involutive(S, seed=seed):
        raise NotInvolutiveError("system is not involutive; run the PP procedure first")
    return delta_regularize(S, seed)


def janet_dims(S: JetSystem, seed: int = 0):
    """([F_0, ..., F_n], tabular, change) counted from the Janet tabular."""
    C, reg = _require_involutive(S, seed)
    tab = janet_tabular(reg)
    n = S.n
    return [sum(comb(row.dots, r) for row in tab.rows) if r else len(tab.rows)
            for r in range(n + 1)], tab, C


def janet_dims_raw(S: JetSystem) -> list:
    """[F_0, ..., F_n] as quotients of forms on J_q(E); no tabular involved."""
    K, n, m, q = S.K, S.n, S.m, S.q
    idx = S.index
    N = len(idx)
    sol = S.solution_basis()
    top = jet_index(n, m, q + 1)
    hi = [c for c in top.columns if sum(c[1]) == q + 1]
    out = []
    for r in range(n + 1):
        Js = list(combinations(range(n), r))
        jpos = {J: a for a, J in enumerate(Js)}
        vecs = []
        for a in range(len(Js)):
            for v in sol:
                vecs.append({a * N + c: x for c, x in v.items()})
        if r > 0:
            for I in combinations(range(n), r - 1):
                for k, nu in hi:
                    vec = {}
                    for i in range(n):
                        if i in I or nu[i] == 0:
                            continue
                        J = tuple(sorted(I + (i,)))
                        sign = (-1) ** sum(1 for j in I if j < i)
                        mu = list(nu)
                        mu[i] -= 1
                        vec[jpos[J] * N + idx.index[(k, tuple(mu))]] = K.one * sign
                    if vec:
                        vecs.append(vec)
        rk = len(rref_rows(K, vecs)[0]) if vecs else 0
        out.append(len(Js) * N - rk)
    return out


def janet_sequence(S: JetSystem, seed: int = 0, check: bool = True) -> SequenceReport:
    F, tab, C = janet_dims(S, seed)
    notes = []
    if check:
        raw = janet_dims_raw(S)
        if raw != F:
            raise AssertionError(f"Janet dimensions disagree: tabular {F}, quotient {raw}")
        notes.append("tabular and quotient counts agree")
    dims = _trim([S.m] + F)
    orders = [S.q] + [1] * (len(dims) - 2)
    return SequenceReport("janet", dims, orders, euler_poincare(dims), tab, C, notes)


def spencer_dims(S: JetSystem, seed: int = 0) -> list:
    """[C_0, ..., C_n] for an involutive R_q."""
    _require_involutive(S, seed)
    G = symbol(S)
    n = S.n
    out = []
    for r in range(n + 1):
        im = _rank(delta_matrix(G, r - 1)) if r > 0 else 0
        out.append(comb(n, r) * S.dim - im)
    return out


def spencer_sequence(S: JetSystem, seed: int = 0) -> SequenceReport:
    dims = spencer_dims(S, seed)
    return SequenceReport("spencer", dims, [1] * (len(dims) - 1), euler_poincare(dims))


def _sym_dim(n, d):
    return comb(n + d - 1, d) if d >= 0 else 0


def hybrid_dims(n: int, m: int, q: int, check: bool = False, K=None) -> list:
    """[C_0(E), ..., C_n(E)]: forms on J_q(E) modulo delta of forms on S_{q+1} E."""
    jq = m * comb(n + q, q)
    out = []
    for r in range(n + 1):
        rk = sum((-1) ** j * comb(n, r - 1 - j) * m * _sym_dim(n, q + 1 + j) for j in range(r))
        if check and r > 0:
            from .field import QQ
            G = SymbolSpace(K or QQ, n, m, q, [], q)
            got = _rank(delta_matrix(G, r - 1))
            if got != rk:
                raise AssertionError(f"hybrid rank mismatch at r={r}: {got} vs {rk}")
        out.append(comb(n, r) * jq - rk)
    return out


@dataclass
class FundamentalDiagram:
    spencer: list
    hybrid: list
    janet: list
    exact: bool
    h: list
    Q: list
    long_exact: list


def fundamental_diagram(S: JetSystem, seed: int = 0, levels: int = 3) -> FundamentalDiagram:
    sp = spencer_dims(S, seed)
    hy = hybrid_dims(S.n, S.m, S.q, check=True, K=S.K)
    ja, _, _ = janet_dims(S, seed)
    exact = all(a == b + c for a, b, c in zip(hy, sp, ja))
    h, Q, ok = introductory_diagram(S, levels)
    return FundamentalDiagram(sp, hy, ja, exact, h, Q, ok)


def introductory_diagram(S: JetSystem, levels: int = 3):
    """h_{r+1}, Q_r and the long exact sequence residue for the operator of S."""
    D = S.to_operator()
    n, m, q, p = S.n, S.m, S.q, D.p
    G = symbol(S)
    h, Q, res = [], [], []
    for r in range(levels):
        M = prolongation_matrix(D, r, q)
        Q.append(p * comb(n + r, r) - _rank(M))
    for r in range(levels):
        g = G.at(q + r + 1).dim
        h.append(p * _sym_dim(n, r + 1) - (m * _sym_dim(n, q + r + 1) - g))
    for r in range(levels - 1):
        R0 = m * comb(n + q + r, n) - (p * comb(n + r, r) - Q[r])
        R1 = m * comb(n + q + r + 1, n) - (p * comb(n + r + 1, r + 1) - Q[r + 1])
        g = G.at(q + r + 1).dim
        res.append(g - R1 + R0 - h[r] + Q[r + 1] - Q[r])
    return h, Q, res


def jet_alternating_sum(chain: list, r: int = 0) -> tuple:
    """dim R - dim J(E) + dim J(F0) - ... along a chain of operators.

    The last operator's target is taken at jet order r and every earlier
    space at the accumulated order.
    """
    n = chain[0].n
    dims = []
    order = r
    for A in reversed(chain):
        dims.append(A.p * comb(n + order, order))
        order += A.order
    D = chain[0]
    M = prolongation_matrix(D, order - D.order)
    dims.append(D.m * comb(n + order, order))
    dims.append(dims[-1] - _rank(M))
    dims = dims[::-1]
    return dims, euler_poincare(dims)


def lowered_system(S: JetSystem) -> JetSystem:
    """First-order system on the parametric jets of a finite type R_q."""
    if symbol(S).dim != 0:
        raise ValueError("lowering needs a system of finite type")
    K, n, q = S.K, S.n, S.q
    idx = S.index
    par = S.parametric()
    ppos = {c: a for a, c in enumerate(par)}
    lead = dict(zip(S.leading(), S.rows))
    N = len(par)
    rows = []
    for a, c in enumerate(par):
        k, mu = idx.columns[c]
        for i in range(n):
            row = {(a, unit(n, i)): K.one}
            tgt = idx.index[(k, add_mono(mu, unit(n, i)))]
            if tgt in ppos:
                row[(ppos[tgt], (0,) * n)] = -K.one
            else:
                for cc, v in lead[tgt].items():
                    if cc != tgt:
                        key = (ppos[cc], (0,) * n)
                        row[key] = row.get(key, K.zero) + v
            rows.append(row)
    ops = []
    for row in rows:
        line = {}
        for (a, mu2), v in row.items():
            if v:
                line.setdefault(a, {})[mu2] = v
        ops.append(line)
    labels = [f"z{a + 1}" for a in range(N)]
    D = DiffOperator.from_rows(K, n, N, ops, source_labels=labels)
    return from_operator(D, 1, provenance=S.provenance + ["lowered to first order"])
