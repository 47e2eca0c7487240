"""Exact scalars over Q or Q(a1..ak) and linear algebra that tracks genericity.

Plain rationals are gmpy2 ``mpq`` values.  With parameters, scalars are
sympy ``FracElement`` values over ``ZZ[params]`` which are kept reduced with a
positive leading denominator coefficient.  All matrix code only uses the
arithmetic operators and truthiness, so the same routines serve both cases.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import reduce

import gmpy2
import sympy
from sympy.polys.fields import FracField
from sympy.polys.domains import ZZ
from sympy.polys.orderings import lex

mpq = gmpy2.mpq


class MalformedScalarError(ValueError):
    pass


class SpecializationPoleError(ValueError):
    pass


class UnknownParameterError(KeyError):
    pass


_FIELDS: dict[tuple, "Field"] = {}


class Field:
    """Q when ``params`` is empty, otherwise the rational function field."""

    def __new__(cls, params=()):
        params = tuple(params)
        if params in _FIELDS:
            return _FIELDS[params]
        self = super().__new__(cls)
        self.params = params
        if params:
            self._frac = FracField(params, ZZ, lex)
            self._syms = tuple(sympy.Symbol(p) for p in params)
            self.zero = self._frac.zero
            self.one = self._frac.one
        else:
            self._frac = None
            self._syms = ()
            self.zero = mpq(0)
            self.one = mpq(1)
        _FIELDS[params] = self
        return self

    def __reduce__(self):
        return (Field, (self.params,))

    def __repr__(self):
        return f"Field({list(self.params)})" if self.params else "QQ"

    @property
    def parametric(self) -> bool:
        return bool(self.params)

    # conversion -----------------------------------------------------------
    def __call__(self, value):
        if self._frac is None:
            if isinstance(value, str):
                return mpq(Fraction(value))
            if isinstance(value, sympy.Basic):
                r = sympy.Rational(value)
                return mpq(int(r.p), int(r.q))
            return mpq(value)
        K = self._frac
        if isinstance(value, type(K.one)) and value.field is K:
            return value
        if isinstance(value, (int, gmpy2.mpz().__class__)):
            return K(int(value))
        if isinstance(value, (Fraction, type(mpq(0)))):
            return K(int(value.numerator)) / K(int(value.denominator))
        if hasattr(value, "as_expr"):
            value = value.as_expr()
        if isinstance(value, str):
            value = sympy.sympify(value.replace("^", "**"),
                                  locals={p: s for p, s in zip(self.params, self._syms)})
        free = {str(s) for s in sympy.sympify(value).free_symbols}
        unknown = free - set(self.params)
        if unknown:
            raise UnknownParameterError(", ".join(sorted(unknown)))
        return K.from_expr(sympy.sympify(value))

    def convert_from(self, other: "Field", x):
        """Move ``x`` from field ``other`` into this field."""
        if other is self:
            return x
        if other._frac is None:
            return self(x)
        return self(x.as_expr())

    def extend(self, extra) -> "Field":
        return Field(self.params + tuple(p for p in extra if p not in self.params))

    # inspection -----------------------------------------------------------
    def degree(self, x) -> int:
        """Total degree of the numerator (0 for rationals)."""
        if self._frac is None or not x:
            return 0
        return max(sum(m) for m in x.numer.monoms())

    def is_constant(self, x) -> bool:
        return self._frac is None or (x.numer.is_ground and x.denom.is_ground)

    def numer_denom(self, x):
        if self._frac is None:
            return int(x.numerator), int(x.denominator)
        return x.numer, x.denom

    def factors(self, x) -> list:
        """Non-constant irreducible factors of the numerator, normalized."""
        if self._frac is None or not x or x.numer.is_ground:
            return []
        _, facs = x.numer.factor_list()
        return [_canonical_poly(f) for f, _ in facs if not f.is_ground]

    def to_str(self, x) -> str:
        if self._frac is None:
            return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
        s = str(x.as_expr())
        return s.replace("**", "^")

    def to_sympy(self, x):
        if self._frac is None:
            return sympy.Rational(int(x.numerator), int(x.denominator))
        return x.as_expr()

    # specialization -------------------------------------------------------
    def specialize(self, x, bindings: dict, target: "Field | None" = None):
        if target is None:
            target = Field(tuple(p for p in self.params if p not in bindings))
        for p in bindings:
            if p not in self.params:
                raise UnknownParameterError(p)
        if self._frac is None:
            return target.convert_from(self, x)
        subs = {s: sympy.Rational(Fraction(str(bindings[p]))) if isinstance(bindings[p], str)
                else sympy.sympify(bindings[p])
                for p, s in zip(self.params, self._syms) if p in bindings}
        for v in subs.values():
            extra = {str(f) for f in v.free_symbols} - set(target.params)
            if extra:
                raise UnknownParameterError(", ".join(sorted(extra)))
        num = x.numer.as_expr().subs(subs)
        den = x.denom.as_expr().subs(subs)
        if sympy.expand(den) == 0:
            raise SpecializationPoleError(f"denominator {x.denom.as_expr()} vanishes at {bindings}")
        return target(sympy.cancel(num / den))


QQ = Field(())


def _canonical_poly(p):
    """Primitive part with positive leading coefficient: a key up to units."""
    _, p = p.primitive()
    if p.LC < 0:
        p = -p
    return p


@dataclass(frozen=True)
class GenericityCondition:
    polynomial: str
    origin: str = ""

    def __str__(self):
        return f"{self.polynomial} != 0"


def merge_conditions(*groups) -> tuple:
    """Union of condition tuples, deduplicated on the polynomial."""
    seen = {}
    for g in groups:
        for c in g:
            seen.setdefault(c.polynomial, c)
    return tuple(seen[k] for k in sorted(seen))


class ParamScalar:
    """Exact element of K with a normalized numerator/denominator pair."""

    __slots__ = ("K", "raw")

    def __init__(self, K: Field, raw):
        self.K = K
        self.raw = raw

    @classmethod
    def normalize(cls, numerator, denominator=1, params=()) -> "ParamScalar":
        K = Field(tuple(params))
        den = K(denominator)
        if not den:
            raise MalformedScalarError("zero denominator")
        return cls(K, K(numerator) / den)

    @property
    def numerator(self):
        return self.K.numer_denom(self.raw)[0]

    @property
    def denominator(self):
        return self.K.numer_denom(self.raw)[1]

    def _wrap(self, other):
        if isinstance(other, ParamScalar):
            if other.K is not self.K:
                raise TypeError("scalars from different fields")
            return other.raw
        return self.K(other)

    def __add__(self, o):
        return ParamScalar(self.K, self.raw + self._wrap(o))

    __radd__ = __add__

    def __sub__(self, o):
        return ParamScalar(self.K, self.raw - self._wrap(o))

    def __rsub__(self, o):
        return ParamScalar(self.K, self._wrap(o) - self.raw)

    def __mul__(self, o):
        return ParamScalar(self.K, self.raw * self._wrap(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        d = self._wrap(o)
        if not d:
            raise ZeroDivisionError("division by zero scalar")
        return ParamScalar(self.K, self.raw / d)

    def __neg__(self):
        return ParamScalar(self.K, -self.raw)

    def __bool__(self):
        return bool(self.raw)

    def __eq__(self, o):
        try:
            return self.raw == self._wrap(o)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.K.params, str(self)))

    def __str__(self):
        return self.K.to_str(self.raw)

    def __repr__(self):
        return f"ParamScalar({self})"

    def specialize(self, bindings: dict) -> "ParamScalar":
        target = Field(tuple(p for p in self.K.params if p not in bindings))
        return ParamScalar(target, self.K.specialize(self.raw, bindings, target))


def normalize(s: ParamScalar) -> ParamScalar:
    return ParamScalar.normalize(s.numerator, s.denominator, s.K.params)


class ScalarMatrix:
    """Sparse matrix stored as a list of row dicts ``{col: value}``."""

    __slots__ = ("K", "nrows", "ncols", "data")

    def __init__(self, K: Field, nrows: int, ncols: int, data=None):
        self.K = K
        self.nrows = nrows
        self.ncols = ncols
        if data is None:
            data = [{} for _ in range(nrows)]
        self.data = [{c: v for c, v in row.items() if v} for row in data]
        if len(self.data) != nrows:
            raise ValueError("row count mismatch")

    @classmethod
    def from_dense(cls, K: Field, rows) -> "ScalarMatrix":
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        data = [{j: K(v) for j, v in enumerate(r) if v} for r in rows]
        return cls(K, len(rows), ncols, data)

    @property
    def entries(self) -> dict:
        return {(i, j): v for i, row in enumerate(self.data) for j, v in row.items()}

    def to_dense(self):
        z = self.K.zero
        return [[row.get(j, z) for j in range(self.ncols)] for row in self.data]

    def transpose(self) -> "ScalarMatrix":
        out = [{} for _ in range(self.ncols)]
        for i, row in enumerate(self.data):
            for j, v in row.items():
                out[j][i] = v
        return ScalarMatrix(self.K, self.ncols, self.nrows, out)

    def __matmul__(self, other: "ScalarMatrix") -> "ScalarMatrix":
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch")
        out = []
        for row in self.data:
            acc = {}
            for k, a in row.items():
                for j, b in other.data[k].items():
                    acc[j] = acc.get(j, self.K.zero) + a * b
            out.append(acc)
        return ScalarMatrix(self.K, self.nrows, other.ncols, out)

    def is_zero(self) -> bool:
        return not any(self.data)

    def __eq__(self, other):
        return (isinstance(other, ScalarMatrix) and self.nrows == other.nrows
                and self.ncols == other.ncols and self.data == other.data)

    def __repr__(self):
        return f"ScalarMatrix({self.nrows}x{self.ncols}, nnz={sum(map(len, self.data))})"


@dataclass
class RrefResult:
    reduced: ScalarMatrix
    rank: int
    conditions: tuple = ()
    pivots: list = dc_field(default_factory=list)


def _pivot_conditions(K, value, origin):
    return [GenericityCondition(str(f.as_expr()).replace("**", "^"), origin)
            for f in K.factors(value)]


def rref_rows(K: Field, rows, order=None, origin="rref"):
    """Gauss-Jordan on a list of row dicts.

    ``order`` lists columns from most to least significant; columns absent
    from it are never used as pivots.  Returns (rows, pivots, conditions)
    with the reduced rows sorted by pivot position.
    """
    rows = [dict(r) for r in rows if r]
    if order is None:
        order = sorted({c for r in rows for c in r})
    colmap: dict = {}
    for i, r in enumerate(rows):
        for c in r:
            colmap.setdefault(c, set()).add(i)
    active = [True] * len(rows)
    pivots = []
    conds = []
    parametric = K.parametric
    for col in order:
        cands = [i for i in colmap.get(col, ()) if active[i]]
        if not cands:
            continue
        if parametric:
            p = min(cands, key=lambda i: (K.degree(rows[i][col]), i))
        else:
            p = min(cands, key=lambda i: (len(rows[i]), i))
        prow = rows[p]
        piv = prow[col]
        if parametric and not K.is_constant(piv):
            conds.extend(_pivot_conditions(K, piv, origin))
        if piv != 1:
            inv = 1 / piv
            for c in prow:
                prow[c] = prow[c] * inv
        active[p] = False
        for i in cands:
            if i == p:
                continue
            r = rows[i]
            f = r[col]
            for c, v in prow.items():
                nv = r.get(c)
                if nv is None:
                    r[c] = -f * v
                    colmap.setdefault(c, set()).add(i)
                else:
                    nv = nv - f * v
                    if nv:
                        r[c] = nv
                    else:
                        del r[c]
                        colmap[c].discard(i)
        for c in prow:
            colmap[c].discard(p)
        pivots.append((col, p))
    # back substitution, last pivot first
    for k in range(len(pivots) - 1, -1, -1):
        col, p = pivots[k]
        prow = rows[p]
        for kk in range(k):
            r = rows[pivots[kk][1]]
            f = r.get(col)
            if f is None:
                continue
            for c, v in prow.items():
                nv = r.get(c, K.zero) - f * v
                if nv:
                    r[c] = nv
                else:
                    r.pop(c, None)
    out = [rows[p] for _, p in pivots]
    return out, [c for c, _ in pivots], conds


def rref_generic(M: ScalarMatrix, order=None, origin="rref") -> RrefResult:
    rows, pivots, conds = rref_rows(M.K, M.data, order, origin)
    red = ScalarMatrix(M.K, len(rows), M.ncols, rows)
    return RrefResult(red, len(rows), merge_conditions(conds), pivots)


def rank(M: ScalarMatrix) -> int:
    return rref_generic(M).rank


def content_normalize(K: Field, vec: dict, order=None) -> dict:
    """Scale a vector: no denominators, primitive, first entry positive."""
    if not vec:
        return {}
    keys = list(order) if order is not None else sorted(vec)
    keys = [k for k in keys if k in vec]
    if not K.parametric:
        den = reduce(gmpy2.lcm, (v.denominator for v in vec.values()))
        ints = {k: v * den for k, v in vec.items()}
        g = reduce(gmpy2.gcd, (abs(v.numerator) for v in ints.values()))
        s = g if ints[keys[0]] > 0 else -g
        return {k: v / s for k, v in ints.items()}
    den = reduce(lambda a, b: a.lcm(b), (v.denom for v in vec.values()))
    nums = {k: (v.numer * den.exquo(v.denom)) for k, v in vec.items()}
    g = reduce(lambda a, b: a.gcd(b), nums.values())
    lead = nums[keys[0]].quo(g)
    if lead.LC < 0:
        g = -g
    R = K._frac
    return {k: R(p.exquo(g)) for k, p in nums.items()}


@dataclass
class KernelResult:
    basis: list
    conditions: tuple = ()

    def __len__(self):
        return len(self.basis)


def right_kernel_rows(K: Field, rows, ncols: int, order=None):
    """Basis {v : A v = 0} for A given by row dicts; vectors as dicts."""
    red, pivots, conds = rref_rows(K, rows, order)
    pivset = set(pivots)
    basis = []
    for f in range(ncols):
        if f in pivset:
            continue
        v = {f: K.one}
        for r, pc in zip(red, pivots):
            x = r.get(f)
            if x:
                v[pc] = -x
        basis.append(v)
    return basis, conds


def kernel_left(M: ScalarMatrix, normalize_content: bool = True) -> KernelResult:
    """Basis of {c : c M = 0} as dense lists, content-normalized."""
    T = M.transpose()
    basis, conds = right_kernel_rows(M.K, T.data, M.nrows)
    out = []
    for v in basis:
        if normalize_content:
            v = content_normalize(M.K, v)
        out.append([v.get(i, M.K.zero) for i in range(M.nrows)])
    return KernelResult(out, merge_conditions(conds))


def specialize(obj, bindings: dict):
    """Substitute rational values for some parameters."""
    if isinstance(obj, ParamScalar):
        return obj.specialize(bindings)
    if isinstance(obj, ScalarMatrix):
        K = obj.K
        for p in bindings:
            if p not in K.params:
                raise UnknownParameterError(p)
        target = Field(tuple(p for p in K.params if p not in bindings))
        data = [{c: K.specialize(v, bindings, target) for c, v in row.items()} for row in obj.data]
        return ScalarMatrix(target, obj.nrows, obj.ncols, data)
    if hasattr(obj, "specialize"):
        return obj.specialize(bindings)
    raise TypeError(f"cannot specialize {type(obj).__name__}")
