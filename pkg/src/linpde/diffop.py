"""Constant-coefficient differential operators over K[d1..dn]."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
import re

from .field import (Field, QQ, ScalarMatrix, rref_generic, specialize as _specialize_matrix,
                    merge_conditions)


def mclass(mu) -> int:
    """1-based index of the first nonzero exponent, 0 for the zero index."""
    for i, e in enumerate(mu):
        if e:
            return i + 1
    return 0


def monomials(n: int, d: int) -> list:
    """Exponent tuples of total degree d in canonical order."""
    out = []
    for combo in combinations_with_replacement(range(n), d):
        mu = [0] * n
        for i in combo:
            mu[i] += 1
        out.append(tuple(mu))
    out.sort(key=lambda mu: (-mclass(mu), tuple(-e for e in mu)))
    return out


def add_mono(mu, nu):
    return tuple(a + b for a, b in zip(mu, nu))


def unit(n: int, i: int):
    """Exponent of d_i, 0-based i."""
    return tuple(1 if j == i else 0 for j in range(n))


def mono_str(mu) -> str:
    digits = "".join(str(i + 1) * e for i, e in enumerate(mu))
    return "d" + digits if digits else ""


class JetIndex:
    """Jet coordinates (k, mu), |mu| <= q, in canonical order.

    Canonical order: degree ascending, then class descending, then exponents
    lexicographically descending, then unknown index.  ``elim`` is the
    elimination order: same, but highest degree first.
    """

    def __init__(self, n: int, m: int, q: int):
        self.n, self.m, self.q = n, m, q
        self.columns = []
        self.by_degree = []
        for d in range(q + 1):
            block = [(k, mu) for mu in monomials(n, d) for k in range(m)]
            self.by_degree.append(list(range(len(self.columns), len(self.columns) + len(block))))
            self.columns.extend(block)
        self.index = {c: i for i, c in enumerate(self.columns)}
        self.elim = [i for d in range(q, -1, -1) for i in self.by_degree[d]]
        self.rank_of = {c: r for r, c in enumerate(self.elim)}
        self.degree_of = [sum(mu) for _, mu in self.columns]

    def __len__(self):
        return len(self.columns)

    def top(self):
        return self.by_degree[self.q]

    def label(self, col: int, names=None) -> str:
        k, mu = self.columns[col]
        base = names[k] if names else ("y" if self.m == 1 else f"y{k + 1}^")
        sub = "".join(str(i + 1) * e for i, e in enumerate(mu))
        if self.m > 1 and not names:
            return f"y{k + 1}" + (f"_{sub}" if sub else "")
        return base + (f"_{sub}" if sub else "")


@lru_cache(maxsize=None)
def jet_index(n: int, m: int, q: int) -> JetIndex:
    return JetIndex(n, m, q)


class DiffPolynomial:
    """Sparse map multi-index -> coefficient; represents sum a_mu d_mu."""

    __slots__ = ("K", "n", "terms")

    def __init__(self, K: Field, n: int, terms=None):
        self.K = K
        self.n = n
        self.terms = {mu: c for mu, c in (terms or {}).items() if c}

    @classmethod
    def zero(cls, K, n):
        return cls(K, n, {})

    @classmethod
    def const(cls, K, n, c):
        return cls(K, n, {(0,) * n: K(c)})

    @classmethod
    def d(cls, K, n, *idx, coeff=1):
        """The monomial coeff * d_{idx} with 1-based indices."""
        mu = [0] * n
        for i in idx:
            mu[i - 1] += 1
        return cls(K, n, {tuple(mu): K(coeff)})

    @property
    def order(self) -> int:
        return max((sum(mu) for mu in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, o: "DiffPolynomial") -> "DiffPolynomial":
        t = dict(self.terms)
        for mu, c in o.terms.items():
            t[mu] = t.get(mu, self.K.zero) + c
        return DiffPolynomial(self.K, self.n, t)

    def __neg__(self):
        return DiffPolynomial(self.K, self.n, {mu: -c for mu, c in self.terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o):
        if isinstance(o, DiffPolynomial):
            t = {}
            for mu, a in self.terms.items():
                for nu, b in o.terms.items():
                    k = add_mono(mu, nu)
                    t[k] = t.get(k, self.K.zero) + a * b
            return DiffPolynomial(self.K, self.n, t)
        c = self.K(o) if not _is_raw(self.K, o) else o
        return DiffPolynomial(self.K, self.n, {mu: a * c for mu, a in self.terms.items()})

    __rmul__ = __mul__

    def shift(self, nu) -> "DiffPolynomial":
        return DiffPolynomial(self.K, self.n, {add_mono(mu, nu): c for mu, c in self.terms.items()})

    def flip(self) -> "DiffPolynomial":
        """d_mu -> (-1)^{|mu|} d_mu."""
        return DiffPolynomial(self.K, self.n,
                              {mu: (-c if sum(mu) % 2 else c) for mu, c in self.terms.items()})

    def __eq__(self, o):
        return isinstance(o, DiffPolynomial) and self.n == o.n and self.terms == o.terms

    def __hash__(self):
        return hash(tuple(sorted((mu, str(c)) for mu, c in self.terms.items())))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), mclass(t[0]), tuple(-e for e in t[0])))

    def to_str(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mu, c in self.sorted_terms():
            cs = self.K.to_str(c)
            d = mono_str(mu)
            if not d:
                parts.append(cs if not _needs_paren(cs) else f"({cs})")
            elif cs == "1":
                parts.append(d)
            elif cs == "-1":
                parts.append("-" + d)
            else:
                parts.append((f"({cs})" if _needs_paren(cs) else cs) + "*" + d)
        s = " + ".join(parts)
        return s.replace("+ -", "- ")

    def __str__(self):
        return self.to_str()

    __repr__ = __str__

    def map_coeffs(self, f, K=None) -> "DiffPolynomial":
        return DiffPolynomial(K or self.K, self.n, {mu: f(c) for mu, c in self.terms.items()})


def _needs_paren(s: str) -> bool:
    body = s[1:] if s.startswith("-") else s
    return any(ch in body for ch in "+-/") or ("*" in body)


def _is_raw(K, x) -> bool:
    if K.parametric:
        return type(x) is type(K.one)
    return type(x) is type(K.one)


class ShapeError(ValueError):
    pass


class SingularChangeError(ValueError):
    pass


@dataclass
class DiffOperator:
    """p x m matrix over K[d]: rows are targets, columns are sources."""

    K: Field
    n: int
    entries: list
    source_labels: list = None
    target_labels: list = None
    source_weights: list = None
    target_weights: list = None
    name: str = ""
    conditions: tuple = ()

    def __post_init__(self):
        self.entries = [list(r) for r in self.entries]
        p = len(self.entries)
        m = len(self.entries[0]) if p else len(self.source_labels or [])
        if any(len(r) != m for r in self.entries):
            raise ShapeError("ragged operator matrix")
        if self.source_labels is None:
            self.source_labels = [f"y{k + 1}" for k in range(m)]
        if self.target_labels is None:
            self.target_labels = [f"f{t + 1}" for t in range(p)]
        if self.source_weights is None:
            self.source_weights = [1] * m
        if self.target_weights is None:
            self.target_weights = [1] * p
        if len(self.source_labels) != m or len(self.target_labels) != p:
            raise ShapeError("label count mismatch")
        if len(self.source_weights) != m or len(self.target_weights) != p:
            raise ShapeError("weight count mismatch")

    # construction --------------------------------------------------------
    @classmethod
    def from_rows(cls, K: Field, n: int, m: int, rows, **kw) -> "DiffOperator":
        """rows: list of {k: {mu: coeff}} or {k: DiffPolynomial}."""
        entries = []
        for r in rows:
            line = []
            for k in range(m):
                v = r.get(k)
                if v is None:
                    line.append(DiffPolynomial.zero(K, n))
                elif isinstance(v, DiffPolynomial):
                    line.append(v)
                else:
                    line.append(DiffPolynomial(K, n, {tuple(mu): K(c) for mu, c in v.items()}))
            entries.append(line)
        if not rows:
            kw.setdefault("source_labels", [f"y{k + 1}" for k in range(m)])
        return cls(K, n, entries, **kw)

    @classmethod
    def zero(cls, K, n, p, m) -> "DiffOperator":
        return cls(K, n, [[DiffPolynomial.zero(K, n) for _ in range(m)] for _ in range(p)],
                   source_labels=[f"y{k + 1}" for k in range(m)])

    @classmethod
    def identity(cls, K, n, m) -> "DiffOperator":
        return cls(K, n, [[DiffPolynomial.const(K, n, 1) if i == j else DiffPolynomial.zero(K, n)
                           for j in range(m)] for i in range(m)])

    @property
    def p(self) -> int:
        return len(self.entries)

    @property
    def m(self) -> int:
        return len(self.source_labels)

    @property
    def order(self) -> int:
        return max((e.order for r in self.entries for e in r), default=-1)

    def row(self, i) -> tuple:
        return tuple(self.entries[i])

    def rows(self) -> list:
        return [tuple(r) for r in self.entries]

    def is_zero(self) -> bool:
        return all(e.is_zero() for r in self.entries for e in r)

    def __eq__(self, o):
        return (isinstance(o, DiffOperator) and self.n == o.n and self.p == o.p
                and self.m == o.m and self.entries == o.entries)

    def __str__(self):
        lines = []
        for t, r in enumerate(self.entries):
            terms = []
            for k, e in enumerate(r):
                if e:
                    s = e.to_str()
                    terms.append(f"({s}) {self.source_labels[k]}")
            lines.append(f"{self.target_labels[t]} = " + (" + ".join(terms) if terms else "0"))
        return "\n".join(lines)

    def with_rows(self, rows, target_labels=None, target_weights=None) -> "DiffOperator":
        rows = [list(r) for r in rows]
        p = len(rows)
        return DiffOperator(self.K, self.n, rows, list(self.source_labels),
                            target_labels or [f"f{t + 1}" for t in range(p)],
                            list(self.source_weights), target_weights or [1] * p,
                            conditions=self.conditions)

    def restrict_columns(self, keep) -> "DiffOperator":
        """Zero every source column not in ``keep`` (0-based)."""
        keep = set(keep)
        z = DiffPolynomial.zero(self.K, self.n)
        rows = [[e if k in keep else z for k, e in enumerate(r)] for r in self.entries]
        return replace(self, entries=rows, name=self.name + "|" + ",".join(map(str, sorted(keep))))

    def select_columns(self, keep) -> "DiffOperator":
        keep = list(keep)
        rows = [[r[k] for k in keep] for r in self.entries]
        return DiffOperator(self.K, self.n, rows, [self.source_labels[k] for k in keep],
                            list(self.target_labels), [self.source_weights[k] for k in keep],
                            list(self.target_weights), self.name, self.conditions)

    def coerce(self, K: Field) -> "DiffOperator":
        if K is self.K:
            return self
        rows = [[e.map_coeffs(lambda c: K.convert_from(self.K, c), K) for e in r] for r in self.entries]
        return replace(self, K=K, entries=rows)

    def specialize(self, bindings: dict) -> "DiffOperator":
        target = Field(tuple(p for p in self.K.params if p not in bindings))
        for p in bindings:
            if p not in self.K.params:
                from .field import UnknownParameterError
                raise UnknownParameterError(p)
        rows = [[e.map_coeffs(lambda c: self.K.specialize(c, bindings, target), target)
                 for e in r] for r in self.entries]
        return replace(self, K=target, entries=rows, conditions=())


def _common_field(A: DiffOperator, B: DiffOperator):
    if A.K is B.K:
        return A, B
    K = A.K.extend(B.K.params)
    return A.coerce(K), B.coerce(K)


def compose(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    """A after B."""
    if A.m != B.p or A.n != B.n:
        raise ShapeError(f"cannot compose {A.p}x{A.m} after {B.p}x{B.m}")
    A, B = _common_field(A, B)
    K, n = A.K, A.n
    rows = []
    for i in range(A.p):
        line = []
        for j in range(B.m):
            acc = DiffPolynomial.zero(K, n)
            for k in range(A.m):
                a, b = A.entries[i][k], B.entries[k][j]
                if a and b:
                    acc = acc + a * b
            line.append(acc)
        rows.append(line)
    return DiffOperator(K, n, rows, list(B.source_labels), list(A.target_labels),
                        list(B.source_weights), list(A.target_weights),
                        conditions=merge_conditions(A.conditions, B.conditions))


def adjoint(A: DiffOperator) -> DiffOperator:
    """Weighted formal adjoint W_s^-1 * transpose(A(-d)) * W_t."""
    K = A.K
    rows = []
    for j in range(A.m):
        line = []
        for i in range(A.p):
            e = A.entries[i][j].flip()
            w = Fraction(A.target_weights[i], A.source_weights[j])
            if w != 1:
                e = e * K(w)
            line.append(e)
        rows.append(line)
    name = f"ad({A.name})" if A.name else ""
    return DiffOperator(K, A.n, rows, list(A.target_labels), list(A.source_labels),
                        list(A.target_weights), list(A.source_weights), name, A.conditions)


def is_self_adjoint(A: DiffOperator) -> bool:
    if A.p != A.m:
        raise ShapeError("self-adjointness needs a square operator")
    return adjoint(A).entries == A.entries


def prolongation_matrix(A: DiffOperator, r: int, q: int | None = None) -> ScalarMatrix:
    """Matrix of rho_r: J_{q+r}(E) -> J_r(F0) in canonical jet orders."""
    q = A.order if q is None else q
    q = max(q, 0)
    rows_idx = jet_index(A.n, A.p, r)
    cols_idx = jet_index(A.n, A.m, q + r)
    data = []
    for tau, nu in rows_idx.columns:
        row = {}
        for k, e in enumerate(A.entries[tau]):
            for mu, c in e.terms.items():
                row[cols_idx.index[(k, add_mono(mu, nu))]] = c
        data.append(row)
    return ScalarMatrix(A.K, len(rows_idx), len(cols_idx), data)


@dataclass
class CoordinateChange:
    """Linear change xbar = C x; derivations transform by d_i -> sum_j C_ji dbar_j."""

    matrix: list
    conditions: tuple = ()

    def __post_init__(self):
        self.matrix = [[Fraction(v) for v in r] for r in self.matrix]
        if _det(self.matrix) == 0:
            raise SingularChangeError("coordinate change is singular")

    @property
    def n(self):
        return len(self.matrix)

    @classmethod
    def identity(cls, n):
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def parse(cls, text: str, n: int) -> "CoordinateChange":
        """Parse ``"x3=x3+x2+x1, x2=x1"``; unspecified variables stay put."""
        M = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        for part in filter(None, (s.strip() for s in re.split(r"[;,]", text))):
            lhs, rhs = part.split("=")
            i = int(lhs.strip().lstrip("x")) - 1
            M[i] = _parse_linear(rhs, n)
        return cls(M)

    @classmethod
    def on_derivations(cls, P) -> "CoordinateChange":
        """The change whose derivation map is dbar = P d, i.e. C = (P^-1)^T."""
        inv = _inverse([[Fraction(v) for v in r] for r in P])
        return cls([[inv[j][i] for j in range(len(P))] for i in range(len(P))])

    def inverse(self) -> "CoordinateChange":
        return CoordinateChange(_inverse(self.matrix))

    def is_identity(self) -> bool:
        return all(self.matrix[i][j] == (i == j) for i in range(self.n) for j in range(self.n))

    def __str__(self):
        parts = []
        for i, r in enumerate(self.matrix):
            terms = []
            for j, c in enumerate(r):
                if c:
                    terms.append(("" if c == 1 else "-" if c == -1 else f"{c}*") + f"x{j + 1}")
            parts.append(f"x{i + 1}=" + "+".join(terms).replace("+-", "-"))
        return ", ".join(parts)


def _parse_linear(text: str, n: int) -> list:
    row = [Fraction(0)] * n
    for sign, coef, var in re.findall(r"([+-]?)\s*(\d+(?:/\d+)?\s*\*?)?\s*x(\d+)", text.replace(" ", "")):
        c = Fraction(coef.rstrip("*")) if coef else Fraction(1)
        if sign == "-":
            c = -c
        row[int(var) - 1] += c
    return row


def _det(M) -> Fraction:
    M = [list(r) for r in M]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            if f:
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return det


def _inverse(M) -> list:
    n = len(M)
    A = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(M)]
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            raise SingularChangeError("singular matrix")
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [r[n:] for r in A]


def change_variables(A: DiffOperator, C: CoordinateChange) -> DiffOperator:
    if C.n != A.n:
        raise ShapeError("coordinate change dimension mismatch")
    K, n = A.K, A.n
    images = [DiffPolynomial(K, n, {unit(n, j): K(C.matrix[j][i]) for j in range(n)})
              for i in range(n)]
    cache = {}

    def power(mu):
        if mu not in cache:
            acc = DiffPolynomial.const(K, n, 1)
            for i, e in enumerate(mu):
                for _ in range(e):
                    acc = acc * images[i]
            cache[mu] = acc
        return cache[mu]

    rows = []
    for r in A.entries:
        line = []
        for e in r:
            acc = DiffPolynomial.zero(K, n)
            for mu, c in e.terms.items():
                acc = acc + power(mu) * c
            line.append(acc)
        rows.append(line)
    return replace(A, entries=rows)


def generic_chi_rank(A: DiffOperator) -> int:
    """Rank of A(chi) over K(chi_1..chi_n)."""
    if A.is_zero():
        return 0
    chis = tuple(f"chi_{i + 1}" for i in range(A.n))
    L = A.K.extend(chis)
    gens = [L(c) for c in chis]
    data = []
    for r in A.entries:
        row = {}
        for k, e in enumerate(r):
            acc = L.zero
            for mu, c in e.terms.items():
                term = L.convert_from(A.K, c)
                for i, ex in enumerate(mu):
                    if ex:
                        term = term * gens[i] ** ex
                acc = acc + term
            if acc:
                row[k] = acc
        data.append(row)
    return rref_generic(ScalarMatrix(L, A.p, A.m, data)).rank


def stack(*ops: DiffOperator) -> DiffOperator:
    """Rows of several operators with the same source."""
    K = ops[0].K
    for o in ops[1:]:
        K = K.extend(o.K.params)
    ops = [o.coerce(K) for o in ops]
    rows = [r for o in ops for r in o.entries]
    labels = [l for o in ops for l in o.target_labels]
    weights = [w for o in ops for w in o.target_weights]
    return DiffOperator(K, ops[0].n, rows, list(ops[0].source_labels), labels,
                        list(ops[0].source_weights), weights,
                        conditions=merge_conditions(*(o.conditions for o in ops)))
