"""Linear systems in jet space: prolongation, projection, symbols and the delta complex."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache
from itertools import combinations
from math import comb
import random

from .field import Field, ScalarMatrix, rref_rows, merge_conditions
from .diffop import (DiffOperator, DiffPolynomial, CoordinateChange, change_variables,
                     jet_index, monomials, mclass, add_mono, unit)


class InconclusiveError(RuntimeError):
    """An iteration cap was reached before a decision."""

    def __init__(self, message, cap=None, log=None):
        super().__init__(message)
        self.cap = cap
        self.log = log or []


class HomIndex:
    """Homogeneous jet coordinates (k, mu), |mu| = d, canonical order."""

    def __init__(self, n, m, d):
        self.n, self.m, self.d = n, m, d
        self.columns = [(k, mu) for mu in monomials(n, d) for k in range(m)]
        self.index = {c: i for i, c in enumerate(self.columns)}

    def __len__(self):
        return len(self.columns)


@lru_cache(maxsize=None)
def hom_index(n, m, d) -> HomIndex:
    return HomIndex(n, m, d)


def _leading(row: dict, rank_of) -> int:
    return min(row, key=rank_of.__getitem__)


@dataclass
class JetSystem:
    """R_q inside J_q(E) given by equations kept in reduced echelon form."""

    K: Field
    n: int
    m: int
    q: int
    rows: list
    conditions: tuple = ()
    provenance: list = dc_field(default_factory=list)
    labels: list = None

    @classmethod
    def from_rows(cls, K, n, m, q, rows, conditions=(), provenance=None, labels=None,
                  origin="system"):
        idx = jet_index(n, m, q)
        red, _, conds = rref_rows(K, rows, idx.elim, origin)
        return cls(K, n, m, q, red, merge_conditions(conditions, conds),
                   list(provenance or []), labels)

    @property
    def index(self):
        return jet_index(self.n, self.m, self.q)

    @property
    def equations(self) -> ScalarMatrix:
        return ScalarMatrix(self.K, len(self.rows), len(self.index), self.rows)

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def dim(self) -> int:
        return len(self.index) - len(self.rows)

    def leading(self) -> list:
        ro = self.index.rank_of
        return [_leading(r, ro) for r in self.rows]

    def parametric(self) -> list:
        piv = set(self.leading())
        return [c for c in range(len(self.index)) if c not in piv]

    def solution_basis(self) -> list:
        """One vector of R_q per parametric jet, as {column: value}."""
        lead = self.leading()
        out = []
        for c in self.parametric():
            v = {c: self.K.one}
            for r, p in zip(self.rows, lead):
                x = r.get(c)
                if x:
                    v[p] = -x
            out.append(v)
        return out

    def to_operator(self) -> DiffOperator:
        cols = self.index.columns
        ops = []
        for r in self.rows:
            line = {}
            for c, v in r.items():
                k, mu = cols[c]
                line.setdefault(k, {})[mu] = v
            ops.append(line)
        return DiffOperator.from_rows(self.K, self.n, self.m, ops,
                                      source_labels=self.labels or None)

    def changed(self, C: CoordinateChange) -> "JetSystem":
        if C.is_identity():
            return self
        op = change_variables(self.to_operator(), C)
        return from_operator(op, self.q, provenance=self.provenance + [f"change {C}"],
                             conditions=self.conditions)

    def specialize(self, bindings) -> "JetSystem":
        return from_operator(self.to_operator().specialize(bindings), self.q,
                             provenance=self.provenance + [f"specialize {bindings}"])

    def same_as(self, other: "JetSystem") -> bool:
        return (self.q == other.q and self.n == other.n and self.m == other.m
                and self.rows == other.rows)

    def row_str(self, r: dict) -> str:
        cols = self.index.columns
        ro = self.index.rank_of
        parts = []
        for c in sorted(r, key=ro.__getitem__):
            k, mu = cols[c]
            name = (self.labels[k] if self.labels else ("y" if self.m == 1 else f"y{k + 1}"))
            sub = "".join(str(i + 1) * e for i, e in enumerate(mu))
            cs = self.K.to_str(r[c])
            coef = "" if cs == "1" else "-" if cs == "-1" else f"({cs})*" if any(ch in cs[1:] for ch in "+-/") else f"{cs}*"
            parts.append(f"{coef}{name}" + (f"_{sub}" if sub else ""))
        return " + ".join(parts).replace("+ -", "- ")

    def __str__(self):
        return "\n".join(self.row_str(r) + " = 0" for r in self.rows)


def from_operator(A: DiffOperator, q=None, provenance=None, conditions=()) -> JetSystem:
    """The system ker(Phi) of order q (default: order of A), raw equations only."""
    q = A.order if q is None else q
    q = max(q, 0)
    idx = jet_index(A.n, A.m, q)
    rows = []
    for r in A.entries:
        row = {}
        for k, e in enumerate(r):
            for mu, c in e.terms.items():
                row[idx.index[(k, mu)]] = c
        rows.append(row)
    return JetSystem.from_rows(A.K, A.n, A.m, q, rows, merge_conditions(conditions, A.conditions),
                               provenance or [f"from operator {A.name}".strip()],
                               labels=list(A.source_labels))


def prolong(S: JetSystem, r: int = 1) -> JetSystem:
    """R_{q+r} obtained by adjoining all formal derivatives of the equations."""
    cur = S
    for _ in range(r):
        old = cur.index
        new = jet_index(cur.n, cur.m, cur.q + 1)
        rows = []
        for row in cur.rows:
            rows.append({new.index[old.columns[c]]: v for c, v in row.items()})
            for i in range(cur.n):
                e = unit(cur.n, i)
                rows.append({new.index[(old.columns[c][0], add_mono(old.columns[c][1], e))]: v
                             for c, v in row.items()})
        cur = JetSystem.from_rows(cur.K, cur.n, cur.m, cur.q + 1, rows, cur.conditions,
                                  cur.provenance + ["prolong"], cur.labels, origin="prolong")
    return cur


def project(S: JetSystem, q2: int) -> JetSystem:
    """Equations of S involving only jets of order <= q2."""
    if q2 > S.q:
        raise ValueError("projection order exceeds system order")
    if q2 == S.q:
        return S
    old = S.index
    new = jet_index(S.n, S.m, q2)
    ro = old.rank_of
    rows = []
    for r in S.rows:
        if old.degree_of[_leading(r, ro)] <= q2:
            rows.append({new.index[old.columns[c]]: v for c, v in r.items()})
    return JetSystem(S.K, S.n, S.m, q2, rows, S.conditions, S.provenance + [f"project to {q2}"],
                     S.labels)


# symbols -----------------------------------------------------------------

class SymbolSpace:
    """The family g_l of a system of order q; this object sits at one level."""

    def __init__(self, K, n, m, q, base_rows, level=None, _cache=None):
        self.K, self.n, self.m, self.q = K, n, m, q
        self.level = q if level is None else level
        self._cache = _cache if _cache is not None else {q: base_rows}

    def _rows_at(self, l):
        if l < self.q:
            return []
        if l not in self._cache:
            prev = self._rows_at(l - 1)
            old, new = hom_index(self.n, self.m, l - 1), hom_index(self.n, self.m, l)
            rows = []
            for row in prev:
                for i in range(self.n):
                    e = unit(self.n, i)
                    rows.append({new.index[(old.columns[c][0], add_mono(old.columns[c][1], e))]: v
                                 for c, v in row.items()})
            order = list(range(len(new)))
            self._cache[l] = rref_rows(self.K, rows, order)[0]
        return self._cache[l]

    def at(self, level) -> "SymbolSpace":
        return SymbolSpace(self.K, self.n, self.m, self.q, None, level, self._cache)

    def prolongation(self) -> "SymbolSpace":
        return self.at(self.level + 1)

    @property
    def rows(self):
        return self._rows_at(self.level)

    @property
    def index(self) -> HomIndex:
        return hom_index(self.n, self.m, self.level)

    @property
    def relations(self) -> ScalarMatrix:
        return ScalarMatrix(self.K, len(self.rows), len(self.index), self.rows)

    @property
    def dim(self) -> int:
        return len(self.index) - len(self.rows)

    def parametric(self) -> list:
        piv = {min(r) for r in self.rows}
        return [c for c in range(len(self.index)) if c not in piv]

    def basis(self) -> list:
        """Basis vectors keyed by (k, mu); coordinates are parametric values."""
        cols = self.index.columns
        lead = [min(r) for r in self.rows]
        out = []
        for c in self.parametric():
            v = {cols[c]: self.K.one}
            for r, p in zip(self.rows, lead):
                x = r.get(c)
                if x:
                    v[cols[p]] = -x
            out.append(v)
        return out

    def as_system(self) -> JetSystem:
        """Homogeneous system of order ``level`` whose symbol is this space."""
        hidx = self.index
        jidx = jet_index(self.n, self.m, self.level)
        rows = [{jidx.index[hidx.columns[c]]: v for c, v in r.items()} for r in self.rows]
        return JetSystem.from_rows(self.K, self.n, self.m, self.level, rows)


def symbol(S: JetSystem) -> SymbolSpace:
    idx = S.index
    h = hom_index(S.n, S.m, S.q)
    ro = idx.rank_of
    rows = []
    for r in S.rows:
        if idx.degree_of[_leading(r, ro)] == S.q:
            rows.append({h.index[idx.columns[c]]: v for c, v in r.items() if idx.degree_of[c] == S.q})
    return SymbolSpace(S.K, S.n, S.m, S.q, rows)


def _wedge_sign(i, I) -> int:
    return -1 if sum(1 for j in I if j < i) % 2 else 1


def delta_matrix(G: SymbolSpace, s: int) -> ScalarMatrix:
    """delta: wedge^s T* (x) g_{l+1} -> wedge^{s+1} T* (x) g_l, l = G.level."""
    n = G.n
    if not 0 <= s < n:
        raise ValueError("form degree out of range")
    K = G.K
    hi = G.prolongation()
    dom = hi.basis()
    tcols = G.index.columns
    tpar = G.parametric()
    Is = list(combinations(range(n), s))
    Js = list(combinations(range(n), s + 1))
    jpos = {J: a for a, J in enumerate(Js)}
    npar = len(tpar)
    data = [{} for _ in range(len(Js) * npar)]
    col = 0
    for I in Is:
        for b in dom:
            for i in range(n):
                if i in I:
                    continue
                J = tuple(sorted(I + (i,)))
                sign = _wedge_sign(i, I)
                e = unit(n, i)
                base = jpos[J] * npar
                for a, pc in enumerate(tpar):
                    k, mu = tcols[pc]
                    v = b.get((k, add_mono(mu, e)))
                    if v:
                        data[base + a][col] = v if sign > 0 else -v
            col += 1
    return ScalarMatrix(K, len(Js) * npar, len(Is) * len(dom), data)


def _rank(M: ScalarMatrix) -> int:
    if M.nrows == 0 or M.ncols == 0:
        return 0
    T = M if M.nrows <= M.ncols else M.transpose()
    return len(rref_rows(M.K, T.data)[0])


@dataclass
class DeltaCohomology:
    s: int
    level: int
    dimB: int
    dimZ: int
    dimH: int


def delta_cohomology(G: SymbolSpace, s: int, r: int = 0) -> DeltaCohomology:
    """Cohomology at wedge^s T* (x) g_{l+r} where l is G's level."""
    n = G.n
    L = G.level + r
    GL = G.at(L)
    total = comb(n, s) * GL.dim
    B = _rank(delta_matrix(GL, s - 1)) if 1 <= s <= n else 0
    if s < n and L >= 1:
        Z = total - _rank(delta_matrix(G.at(L - 1), s))
    else:
        Z = total
    return DeltaCohomology(s, L, B, Z, Z - B)


@dataclass
class DeltaSequence:
    dims: list
    ranks: list
    exact: bool


def delta_sequence(G: SymbolSpace, top: int) -> DeltaSequence:
    """0 -> g_top -> T*(x)g_{top-1} -> ... down to wedge^s with level >= 0."""
    n = G.n
    dims, ranks = [], []
    smax = min(n, top)
    for s in range(smax + 1):
        dims.append(comb(n, s) * G.at(top - s).dim)
    for s in range(smax):
        ranks.append(_rank(delta_matrix(G.at(top - s - 1), s)))
    exact = True
    prev = 0
    for s in range(smax + 1):
        out = ranks[s] if s < smax else 0
        if dims[s] - out != prev:
            exact = False
        prev = ranks[s] if s < smax else 0
    if smax == n and ranks and ranks[-1] != dims[-1]:
        exact = False
    return DeltaSequence(dims, ranks, exact)


# tabular, characters, involutivity ---------------------------------------

@dataclass
class JanetRow:
    leading: tuple
    cls: int
    multiplicative: list
    dots: int


@dataclass
class JanetTabular:
    rows: list
    beta: list

    def __str__(self):
        out = []
        n = len(self.beta)
        for r in self.rows:
            cells = [str(i) if i in r.multiplicative else "." for i in range(1, n + 1)]
            out.append(" ".join(cells))
        return "\n".join(out)


def janet_tabular(S: JetSystem) -> JanetTabular:
    idx = S.index
    ro = idx.rank_of
    rows = []
    beta = [0] * S.n
    for r in S.rows:
        k, mu = idx.columns[_leading(r, ro)]
        if sum(mu) == S.q and S.q > 0:
            c = mclass(mu)
            beta[c - 1] += 1
            rows.append(JanetRow((k, mu), c, list(range(1, c + 1)), S.n - c))
        else:
            rows.append(JanetRow((k, mu), 0, [], S.n))
    return JanetTabular(rows, beta)


@dataclass
class Characters:
    alpha: list


def characters(S: JetSystem) -> Characters:
    beta = janet_tabular(S).beta
    n, m, q = S.n, S.m, S.q
    if q == 0:
        return Characters([0] * (n - 1) + [m - sum(beta)] if n else [])
    return Characters([m * comb(q + n - i - 1, q - 1) - beta[i - 1] for i in range(1, n + 1)])


def _cartan_holds(S: JetSystem) -> bool:
    a = characters(S).alpha
    g = symbol(S)
    return g.prolongation().dim == sum((i + 1) * x for i, x in enumerate(a))


def is_symbol_involutive(S: JetSystem) -> bool:
    """Cartan test in the current coordinates."""
    return _cartan_holds(S)


def is_involutive_here(S: JetSystem, cap: int = 20, seed: int = 0) -> bool:
    """Involutive without any change of coordinates."""
    return _cartan_holds(S) and bool(is_formally_integrable(S, cap, seed))


def _beta_key(S: JetSystem):
    return tuple(reversed(janet_tabular(S).beta))


def random_unimodular(n: int, rng: random.Random) -> CoordinateChange:
    from .diffop import _det
    while True:
        M = [[rng.randint(-2, 2) for _ in range(n)] for _ in range(n)]
        if abs(_det(M)) == 1:
            return CoordinateChange(M)


def delta_regularize(S: JetSystem, seed: int = 0, attempts: int = 5):
    """Identity first, then seeded unimodular changes; best beta tuple wins."""
    ident = CoordinateChange.identity(S.n)
    if _cartan_holds(S):
        return ident, S
    best = (_beta_key(S), ident, S)
    rng = random.Random(seed)
    for _ in range(attempts):
        C = random_unimodular(S.n, rng)
        S2 = S.changed(C)
        if _cartan_holds(S2):
            return C, S2
        key = _beta_key(S2)
        if key > best[0]:
            best = (key, C, S2)
    return best[1], best[2]


def _symbol_involutive_regular(G: SymbolSpace, seed: int) -> bool:
    if G.dim == 0:
        return True
    sysG = G.as_system()
    _, S2 = delta_regularize(sysG, seed)
    return _cartan_holds(S2)


def involutive_level(G: SymbolSpace, cap: int = 20, seed: int = 0) -> int:
    """Smallest r with g_{l+r} involutive (after delta-regularization)."""
    for r in range(cap + 1):
        if _symbol_involutive_regular(G.at(G.level + r), seed):
            return r
    raise InconclusiveError(f"no involutive prolongation of the symbol within cap {cap}", cap)


def acyclicity_profile(G: SymbolSpace, s_max: int = 2, cap: int = 20, seed: int = 0) -> dict:
    """Levels below the involutive one with nonzero H^1..H^s_max."""
    r0 = involutive_level(G, cap, seed)
    bad = {}
    for r in range(r0):
        for s in range(1, min(s_max, G.n) + 1):
            h = delta_cohomology(G, s, r)
            if h.dimH:
                bad.setdefault(G.level + r, []).append(h)
    return {"involutive_level": G.level + r0, "nonzero": bad}


def is_s_acyclic(G: SymbolSpace, s: int, cap: int = 20, seed: int = 0) -> bool:
    return not acyclicity_profile(G, s, cap, seed)["nonzero"]


def is_2_acyclic(S, cap: int = 20, seed: int = 0) -> bool:
    G = S if isinstance(S, SymbolSpace) else symbol(S)
    return is_s_acyclic(G, 2, cap, seed)


@dataclass
class FIResult:
    integrable: bool
    witness: int | None = None
    checked_up_to: int = 0

    def __bool__(self):
        return self.integrable


def is_formally_integrable(S: JetSystem, cap: int = 20, seed: int = 0) -> FIResult:
    """Projection test once the symbol has been made 2-acyclic by prolongation."""
    prof = acyclicity_profile(symbol(S), 2, cap, seed)
    t0 = (max(prof["nonzero"]) - S.q + 1) if prof["nonzero"] else 0
    cur = S
    for t in range(t0 + 1):
        up = prolong(cur, 1)
        if project(up, cur.q).rank != cur.rank:
            return FIResult(False, cur.q, cur.q)
        cur = up
    return FIResult(True, None, S.q + t0)


@dataclass
class PPResult:
    result: JetSystem
    r: int
    s: int
    log: list
    first_fi: tuple
    change: CoordinateChange


def pp_procedure(S: JetSystem, cap: int = 20, seed: int = 0) -> PPResult:
    """Prolong/project until an involutive system is reached."""
    cur = S
    r = s = 0
    log = []
    first = None
    for it in range(cap):
        G = symbol(cur)
        if not is_2_acyclic(G, cap, seed):
            cur = prolong(cur, 1)
            r += 1
            log.append(f"symbol of order {cur.q - 1} not 2-acyclic: prolong to {cur.q}")
            continue
        proj = project(prolong(cur, 1), cur.q)
        if proj.rank > cur.rank:
            log.append(f"projection adds {proj.rank - cur.rank} equation(s) at order {cur.q}")
            cur = replace(proj, provenance=cur.provenance + ["prolong", f"project to {cur.q}"])
            s += 1
            continue
        if first is None:
            first = (r, s)
        C, reg = delta_regularize(cur, seed)
        if _cartan_holds(reg):
            log.append(f"involutive at order {cur.q} (r={r}, s={s}) in coordinates {C}")
            return PPResult(cur, r, s, log, first, C)
        log.append(f"formally integrable at order {cur.q} but symbol not involutive: prolong")
        cur = prolong(cur, 1)
        r += 1
    raise InconclusiveError(f"PP procedure did not stop within {cap} iterations", cap, log)


def is_involutive(S: JetSystem, cap: int = 20, seed: int = 0) -> bool:
    _, reg = delta_regularize(S, seed)
    return _cartan_holds(reg) and bool(is_formally_integrable(S, cap, seed))


def spencer_operator_matrix(S: JetSystem) -> ScalarMatrix:
    """Matrix of d: R_{q+1} -> T* (x) J_q(E) on constant sections, image checked in T*(x)R_q."""
    R1 = prolong(S, 1)
    hi = R1.index
    lo = S.index
    basis = R1.solution_basis()
    n = S.n
    data = [{} for _ in range(n * len(lo))]
    for col, f in enumerate(basis):
        fk = {hi.columns[c]: v for c, v in f.items()}
        for i in range(n):
            e = unit(n, i)
            comp = {}
            for a, (k, mu) in enumerate(lo.columns):
                v = fk.get((k, add_mono(mu, e)))
                if v:
                    comp[a] = -v
                    data[i * len(lo) + a][col] = -v
            for row in S.rows:
                acc = S.K.zero
                for c, v in row.items():
                    w = comp.get(c)
                    if w:
                        acc = acc + v * w
                if acc:
                    raise AssertionError("Spencer operator image leaves T* (x) R_q")
    return ScalarMatrix(S.K, n * len(lo), len(basis), data)
