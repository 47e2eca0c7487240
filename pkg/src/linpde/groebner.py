"""Buchberger completion for submodules of K[d]^p.

Module elements are dicts ``{(position, exponents): coeff}``.  Terms are
compared position-over-term (position 0 highest) with graded reverse
lexicographic order on the exponents.
"""
from __future__ import annotations

from .field import Field, _pivot_conditions, merge_conditions


def term_key(t):
    pos, mu = t
    return (-pos, sum(mu), tuple(-e for e in reversed(mu)))


def leading(f: dict):
    return max(f, key=term_key)


def _divides(mu, nu) -> bool:
    return all(a <= b for a, b in zip(mu, nu))


def _sub(nu, mu):
    return tuple(b - a for a, b in zip(mu, nu))


def _lcm(mu, nu):
    return tuple(max(a, b) for a, b in zip(mu, nu))


def _mul_term(f: dict, mu, c) -> dict:
    return {(p, tuple(a + b for a, b in zip(nu, mu))): v * c for (p, nu), v in f.items()}


def _axpy(f: dict, g: dict, c, K) -> dict:
    """f + c*g, in place on f."""
    for t, v in g.items():
        w = f.get(t)
        if w is None:
            f[t] = c * v
        else:
            w = w + c * v
            if w:
                f[t] = w
            else:
                del f[t]
    return f


class GroebnerBasis:
    def __init__(self, K: Field, n: int, elements: list, conditions=()):
        self.K = K
        self.n = n
        self.elements = elements
        self.leads = [leading(g) for g in elements]
        # parameter polynomials divided by during completion
        self.conditions = tuple(conditions)

    def reduce(self, f: dict, full: bool = True) -> dict:
        """Normal form of f."""
        K = self.K
        f = dict(f)
        out = {}
        while f:
            t = leading(f)
            c = f[t]
            for g, (gp, gmu) in zip(self.elements, self.leads):
                if gp == t[0] and _divides(gmu, t[1]):
                    q = _sub(t[1], gmu)
                    fac = -c / g[(gp, gmu)]
                    _axpy(f, _mul_term(g, q, K.one), fac, K)
                    break
            else:
                if not full:
                    out.update(f)
                    return out
                out[t] = c
                del f[t]
        return out


def buchberger(K: Field, n: int, gens: list, max_pairs: int = 200000) -> GroebnerBasis:
    """Reduced Groebner basis of the module generated by ``gens``."""
    G = []
    for g in gens:
        g = {t: v for t, v in g.items() if v}
        if g:
            G.append(g)
    if not G:
        return GroebnerBasis(K, n, [])
    basis = []
    pairs = []
    conds = []

    def lead_of(g):
        return leading(g)

    def add(h):
        hl = lead_of(h)
        c = h[hl]
        conds.extend(_pivot_conditions(K, c, "groebner"))
        h = {t: v / c for t, v in h.items()}
        idx = len(basis)
        basis.append(h)
        for j in range(idx):
            if basis[j] is None:
                continue
            gl = lead_of(basis[j])
            if gl[0] == hl[0]:
                L = _lcm(gl[1], hl[1])
                pairs.append((sum(L), j, idx))

    # inter-reduce the input a little: process by increasing leading term
    G.sort(key=lambda g: term_key(leading(g)))
    for g in G:
        gb = GroebnerBasis(K, n, [b for b in basis if b is not None])
        h = gb.reduce(g)
        if h:
            add(h)
    count = 0
    while pairs:
        pairs.sort()
        _, i, j = pairs.pop(0)
        gi, gj = basis[i], basis[j]
        if gi is None or gj is None:
            continue
        li, lj = lead_of(gi), lead_of(gj)
        L = _lcm(li[1], lj[1])
        s = _mul_term(gi, _sub(L, li[1]), K.one)
        _axpy(s, _mul_term(gj, _sub(L, lj[1]), K.one), -K.one, K)
        gb = GroebnerBasis(K, n, [b for b in basis if b is not None])
        h = gb.reduce(s)
        count += 1
        if count > max_pairs:
            raise RuntimeError("Groebner completion exceeded pair budget")
        if h:
            add(h)
    return GroebnerBasis(K, n, _interreduce(K, n, [b for b in basis if b is not None]),
                         merge_conditions(conds))


def _interreduce(K, n, G):
    # drop elements whose leading term is divisible by another's
    G = sorted(G, key=lambda g: term_key(leading(g)))
    keep = []
    for g in G:
        lg = leading(g)
        if any(leading(h)[0] == lg[0] and _divides(leading(h)[1], lg[1]) for h in keep):
            continue
        keep.append(g)
    out = []
    for i, g in enumerate(keep):
        others = GroebnerBasis(K, n, keep[:i] + keep[i + 1:])
        lg = leading(g)
        rest = {t: v for t, v in g.items() if t != lg}
        red = others.reduce(rest)
        red[lg] = g[lg]
        out.append(red)
    out.sort(key=lambda g: term_key(leading(g)), reverse=True)
    return out


def operator_rows(A, offset: int = 0) -> list:
    """Rows of a DiffOperator as module elements."""
    out = []
    for row in A.entries:
        f = {}
        for k, e in enumerate(row):
            for mu, c in e.terms.items():
                f[(k + offset, mu)] = c
        out.append(f)
    return out


def to_row(K, n, m, f: dict):
    """Module element back to a list of DiffPolynomials."""
    from .diffop import DiffPolynomial
    row = [dict() for _ in range(m)]
    for (k, mu), c in f.items():
        row[k][mu] = c
    return [DiffPolynomial(K, n, t) for t in row]


def syzygy_module(A) -> list:
    """Generators of {lam : lam A = 0} as module elements over the row positions."""
    K, n, m, p = A.K, A.n, A.m, A.p
    aug = []
    for tau, f in enumerate(operator_rows(A)):
        g = dict(f)
        g[(m + tau, (0,) * n)] = K.one
        aug.append(g)
    gb = buchberger(K, n, aug)
    out = []
    for g in gb.elements:
        if all(k >= m for k, _ in g):
            out.append({(k - m, mu): c for (k, mu), c in g.items()})
    return out
