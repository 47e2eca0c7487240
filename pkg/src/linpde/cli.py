"""Operator DSL and the ``linpde`` command-line driver.

A source file holds one or more blocks::

    operator ex {
      n = 2;
      params = [a];
      source = [xi];
      target = [eta1, eta2];
      eta1 = d[1,2] xi + (a) d[1] xi;
      eta2 = d[2,2] xi;
    }
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field as dc_field

import sympy

from .field import Field, QQ, merge_conditions, UnknownParameterError, SpecializationPoleError
from .diffop import DiffOperator, CoordinateChange, adjoint, change_variables, generic_chi_rank, mclass
from . import jets
from .jets import InconclusiveError, from_operator, janet_tabular, characters
from .sequences import compatibility_operator, fundamental_diagram, janet_sequence, euler_poincare
from .duality import double_duality, minimum_parametrization, NotFoundError
from . import catalog


class DSLError(ValueError):
    def __init__(self, message, line=0, col=0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


# --- lexer --------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\]=;,+\-*/()^])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DSLError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Tok(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - start + 1))
    return toks


# --- spec -----------------------------------------------------------------------------

@dataclass
class SourceSpec:
    """One operator block; coefficients are canonical strings."""

    name: str
    n: int
    params: list
    source_labels: list
    target_labels: list
    weights: dict = dc_field(default_factory=dict)
    equations: list = dc_field(default_factory=list)


def _canon(expr) -> str:
    expr = sympy.cancel(sympy.sympify(expr))
    if expr.is_Rational:
        return str(expr)
    return str(expr).replace("**", "^")


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def fail(self, msg, tok=None):
        tok = tok or self.tok
        raise DSLError(msg, tok.line, tok.col)

    def take(self, kind=None, text=None) -> Tok:
        t = self.tok
        if (kind and t.kind != kind) or (text is not None and t.text != text):
            want = repr(text) if text is not None else kind
            self.fail(f"expected {want}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def at(self, text) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def blocks(self) -> list:
        out = []
        while self.tok.kind != "eof":
            out.append(self.block())
        if not out:
            self.fail("empty input: expected 'operator'")
        return out

    def identlist(self) -> list:
        self.take("punct", "[")
        out = []
        while not self.at("]"):
            out.append(self.take("ident").text)
            if not self.at("]"):
                self.take("punct", ",")
        self.take("punct", "]")
        return out

    def intlist(self) -> list:
        self.take("punct", "[")
        out = []
        while not self.at("]"):
            neg = self.at("-")
            if neg:
                self.take()
            v = int(self.take("int").text)
            out.append(-v if neg else v)
            if not self.at("]"):
                self.take("punct", ",")
        self.take("punct", "]")
        return out

    def block(self) -> SourceSpec:
        kw = self.take("ident")
        if kw.text != "operator":
            self.fail("expected 'operator'", kw)
        name = self.take("ident").text
        self.take("punct", "{")
        spec = SourceSpec(name, 0, [], [], [])
        declared_targets = None
        seen = set()
        while not self.at("}"):
            t = self.take("ident")
            key = t.text
            if key == "weights":
                side = self.take("ident")
                if side.text not in ("source", "target"):
                    self.fail("expected 'source' or 'target'", side)
                self.take("punct", "=")
                spec.weights[side.text] = self.intlist()
            elif key in ("n", "params", "source", "target") and self.at("="):
                self.take("punct", "=")
                if key == "n":
                    spec.n = int(self.take("int").text)
                elif key == "params":
                    spec.params = self.identlist()
                elif key == "source":
                    spec.source_labels = self.identlist()
                else:
                    declared_targets = self.identlist()
            else:
                if declared_targets is not None and key not in declared_targets:
                    self.fail(f"undeclared target label {key!r}", t)
                if key in seen:
                    self.fail(f"duplicate equation for {key!r}", t)
                seen.add(key)
                self.take("punct", "=")
                spec.equations.append((key, self.expr(spec)))
            self.take("punct", ";")
        self.take("punct", "}")
        if declared_targets is None:
            declared_targets = [k for k, _ in spec.equations]
        spec.target_labels = declared_targets
        for side, labels in (("source", spec.source_labels), ("target", spec.target_labels)):
            w = spec.weights.get(side)
            if w is not None and len(w) != len(labels):
                raise DSLError(f"operator {name}: {side} weights need {len(labels)} entries")
        return normalize(spec)

    def expr(self, spec) -> list:
        if not spec.n:
            self.fail("declare n before equations")
        if self.tok.kind == "int" and self.tok.text == "0" and self.toks[self.i + 1].text == ";":
            self.take()
            return []
        terms = []
        sign = 1
        if self.at("+") or self.at("-"):
            sign = -1 if self.take().text == "-" else 1
        while True:
            terms.append(self.term(spec, sign))
            if self.at("+") or self.at("-"):
                sign = -1 if self.take().text == "-" else 1
            else:
                return terms

    def coef_atom(self, spec):
        t = self.tok
        if t.kind == "int":
            self.take()
            v = sympy.Integer(int(t.text))
            if self.at("/"):
                self.take()
                d = int(self.take("int").text)
                if d == 0:
                    self.fail("zero denominator", t)
                v = sympy.Rational(int(t.text), d)
            return v
        if t.kind == "punct" and t.text == "(":
            return self.poly(spec)
        if t.kind == "ident" and t.text in spec.params:
            self.take()
            return sympy.Symbol(t.text)
        return None

    def poly(self, spec):
        open_tok = self.take("punct", "(")
        depth, parts = 1, []
        while True:
            t = self.tok
            if t.kind == "eof":
                self.fail("unbalanced parenthesis", open_tok)
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth == 0:
                    self.take()
                    break
            if t.kind == "ident" and t.text not in spec.params:
                self.fail(f"unknown parameter {t.text!r}", t)
            parts.append(t.text)
            self.take()
        src = " ".join(parts).replace("^", "**")
        try:
            return sympy.sympify(src, locals={p: sympy.Symbol(p) for p in spec.params})
        except (sympy.SympifyError, SyntaxError, TypeError):
            self.fail("malformed coefficient", open_tok)

    def term(self, spec, sign):
        start = self.tok
        coef = sympy.Integer(sign)
        got = False
        while True:
            a = self.coef_atom(spec)
            if a is None:
                break
            coef *= a
            got = True
            if self.at("*"):
                self.take()
                continue
            break
        mu = (0,) * spec.n
        if self.tok.kind == "ident" and self.tok.text == "d" and self.toks[self.i + 1].text == "[":
            self.take()
            self.take("punct", "[")
            idx = []
            while not self.at("]"):
                it = self.take("int")
                k = int(it.text)
                if not 1 <= k <= spec.n:
                    self.fail(f"derivative index {k} out of range 1..{spec.n}", it)
                idx.append(k)
                if not self.at("]"):
                    self.take("punct", ",")
            self.take("punct", "]")
            mu = tuple(idx.count(i + 1) for i in range(spec.n))
            if self.at("*"):
                self.take()
        elif got and self.tok.kind != "ident":
            self.fail("expected a source label", self.tok)
        lab = self.take("ident")
        if lab.text not in spec.source_labels:
            self.fail(f"undeclared source label {lab.text!r}", lab)
        if coef == 0 and not got:
            self.fail("empty term", start)
        return (coef, mu, lab.text)


def normalize(spec: SourceSpec) -> SourceSpec:
    """Combine like terms and order them by source then multi-index."""
    eqs = []
    for tgt, terms in spec.equations:
        acc = {}
        for c, mu, lab in terms:
            c = sympy.sympify(c) if isinstance(c, str) else c
            key = (lab, tuple(mu))
            acc[key] = acc.get(key, 0) + c
        col = {lab: i for i, lab in enumerate(spec.source_labels)}
        out = []
        for (lab, mu), c in acc.items():
            s = _canon(c.replace("^", "**") if isinstance(c, str) else c)
            if s != "0":
                out.append((s, mu, lab))
        out.sort(key=lambda t: (col[t[2]], -sum(t[1]), mclass(t[1]), tuple(-e for e in t[1])))
        eqs.append((tgt, out))
    order = {t: i for i, t in enumerate(spec.target_labels)}
    eqs.sort(key=lambda e: order.get(e[0], len(order)))
    spec.equations = eqs
    return spec


def parse_all(text: str) -> list:
    return _Parser(text).blocks()


def parse(text: str) -> SourceSpec:
    """The first operator block in ``text``."""
    return parse_all(text)[0]


# --- spec <-> operator ------------------------------------------------------------

def _mu_str(mu) -> str:
    idx = [str(i + 1) for i, e in enumerate(mu) for _ in range(e)]
    return f"d[{','.join(idx)}] " if idx else ""


def _coef_text(s: str):
    """(sign, text) for printing a canonical coefficient."""
    e = sympy.sympify(s.replace("^", "**"))
    if e.is_Rational:
        sign = -1 if e < 0 else 1
        a = abs(e)
        return sign, "" if a == 1 else f"{a} "
    if e.could_extract_minus_sign():
        return -1, f"({_canon(-e)}) "
    return 1, f"({s}) "


def format_spec(spec: SourceSpec) -> str:
    lines = [f"operator {spec.name} {{", f"  n = {spec.n};"]
    if spec.params:
        lines.append(f"  params = [{', '.join(spec.params)}];")
    lines.append(f"  source = [{', '.join(spec.source_labels)}];")
    lines.append(f"  target = [{', '.join(spec.target_labels)}];")
    for side in ("source", "target"):
        if side in spec.weights:
            lines.append(f"  weights {side} = [{', '.join(map(str, spec.weights[side]))}];")
    for tgt, terms in spec.equations:
        body = ""
        for i, (c, mu, lab) in enumerate(terms):
            sign, ctext = _coef_text(c)
            if i == 0:
                body += ("-" if sign < 0 else "")
            else:
                body += " - " if sign < 0 else " + "
            body += f"{ctext}{_mu_str(mu)}{lab}"
        lines.append(f"  {tgt} = {body or '0'};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_operator(spec: SourceSpec, bindings: dict | None = None) -> DiffOperator:
    """Build the operator, substituting ``bindings`` before any arithmetic."""
    bindings = dict(bindings or {})
    for p in bindings:
        if p not in spec.params:
            raise UnknownParameterError(p)
    K = Field(tuple(p for p in spec.params if p not in bindings))
    syms = {p: sympy.Symbol(p) for p in spec.params}
    subs = {syms[p]: v for p, v in bindings.items()}
    col = {lab: i for i, lab in enumerate(spec.source_labels)}
    eqs = dict(spec.equations)
    rows = []
    for tgt in spec.target_labels:
        row = {}
        for c, mu, lab in eqs.get(tgt, []):
            v = sympy.sympify(c.replace("^", "**"), locals=syms).subs(subs)
            row.setdefault(col[lab], {})[mu] = K(sympy.cancel(v))
        rows.append(row)
    return DiffOperator.from_rows(
        K, spec.n, len(spec.source_labels), rows,
        source_labels=list(spec.source_labels), target_labels=list(spec.target_labels),
        source_weights=list(spec.weights.get("source", [1] * len(spec.source_labels))),
        target_weights=list(spec.weights.get("target", [1] * len(spec.target_labels))),
        name=spec.name)


def from_operator_spec(D: DiffOperator, name: str | None = None) -> SourceSpec:
    eqs = []
    for tgt, row in zip(D.target_labels, D.entries):
        terms = []
        for k, e in enumerate(row):
            for mu, c in e.terms.items():
                terms.append((D.K.to_sympy(c), mu, D.source_labels[k]))
        eqs.append((tgt, terms))
    w = {}
    if any(x != 1 for x in D.source_weights):
        w["source"] = list(D.source_weights)
    if any(x != 1 for x in D.target_weights):
        w["target"] = list(D.target_weights)
    spec = SourceSpec(re.sub(r"\W", "_", name or D.name or "op") or "op", D.n, list(D.K.params),
                      list(D.source_labels), list(D.target_labels), w, eqs)
    return normalize(spec)


def format_operator(D: DiffOperator, name: str | None = None) -> str:
    return format_spec(from_operator_spec(D, name))


# --- JSON helpers ---------------------------------------------------------------------

def rows_json(D: DiffOperator) -> list:
    """Each row is a list of [coeff, source label, mu...] terms."""
    out = []
    for row in D.entries:
        terms = []
        for k, e in enumerate(row):
            for mu, c in e.sorted_terms():
                terms.append([D.K.to_str(c), D.source_labels[k], *mu])
        out.append(terms)
    return out


def conditions_json(conds) -> list:
    return [c.polynomial for c in conds]


def _report(command, source):
    return {"command": command, "source": source, "conditions": [], "dims": None,
            "tabular": None, "cc": None, "torsion": None}


# --- loading --------------------------------------------------------------------------

def parse_bindings(items) -> dict:
    out = {}
    for item in items or []:
        for part in filter(None, (s.strip() for s in item.split(","))):
            if "=" not in part:
                raise DSLError(f"bad specialization {part!r}; expected name=value")
            k, v = (s.strip() for s in part.split("=", 1))
            try:
                out[k] = sympy.sympify(v.replace("^", "**"))
            except sympy.SympifyError:
                raise DSLError(f"bad specialization value {v!r}") from None
    return out


def _catalog_args(items) -> dict:
    out = {}
    for item in items or []:
        k, _, v = item.partition("=")
        out[k.strip()] = int(v) if v.strip().lstrip("-").isdigit() else v.strip()
    return out


def load(source: str, bindings=None, args=None, change=None) -> DiffOperator:
    if source.startswith("catalog:"):
        D = catalog.make(source.split(":", 1)[1], **_catalog_args(args))
        if bindings:
            D = D.specialize(bindings)
    else:
        with open(source, encoding="utf-8") as fh:
            D = to_operator(parse(fh.read()), bindings)
    if change:
        D = change_variables(D, CoordinateChange.parse(change, D.n))
    return D


# --- commands ---------------------------------------------------------------------------

def _projection_chain(S, cap):
    """[dim J_q, dim R_q, dim R^(1)_q, ...] until projection stabilizes."""
    dims = [len(S.index), S.dim]
    cur = S
    for _ in range(cap):
        nxt = jets.project(jets.prolong(cur, 1), S.q)
        if nxt.rank == cur.rank:
            break
        cur = nxt
        dims.append(cur.dim)
    return dims


def _tabular_json(S):
    tab = janet_tabular(S)
    alpha = characters(S).alpha
    return {"beta": list(reversed(tab.beta)), "alpha": list(alpha),
            "rows": [{"unknown": k + 1, "mu": list(mu), "class": r.cls, "dots": r.dots}
                     for r, (k, mu) in ((r, r.leading) for r in tab.rows)]}


def cmd_analyze(D, a, out, rep):
    S = from_operator(D)
    chain = _projection_chain(S, a.cap)
    tab = _tabular_json(S)
    here = jets.is_symbol_involutive(S)
    fi = jets.is_formally_integrable(S, a.cap, a.seed)
    rep["tabular"] = tab
    out.append(f"operator {D.name or '?'}: {D.p} x {D.m}, order {D.order}, n = {D.n}")
    out.append("projection chain at order %d (J_q, R_q, R^(1)_q, ...): %s"
               % (S.q, ", ".join(map(str, chain))))
    out.append("tabular (multiplicative variables 1..n, '.' = non-multiplicative):")
    out.extend("  " + line for line in str(janet_tabular(S)).splitlines())
    out.append(f"beta = ({', '.join(map(str, tab['beta']))})")
    out.append(f"alpha = ({', '.join(map(str, tab['alpha']))})")
    out.append(f"symbol involutive in these coordinates: {here}")
    out.append(f"formally integrable: {bool(fi)}" + (f" (fails at order {fi.witness})" if not fi else ""))
    pp = jets.pp_procedure(S, a.cap, a.seed)
    reg_change, reg = jets.delta_regularize(pp.result, a.seed)
    out.append(f"involutive here: {here and bool(fi)}")
    out.append("PP procedure:")
    out.extend("  " + line for line in pp.log)
    out.append(f"PP endpoint: order {pp.result.q}, dim {pp.result.dim}, symbol dim "
               f"{jets.symbol(pp.result).dim}, r = {pp.r}, s = {pp.s}")
    rep["dims"] = {"projection_chain": chain, "pp": {"q": pp.result.q, "dim": pp.result.dim,
                   "symbol": jets.symbol(pp.result).dim, "r": pp.r, "s": pp.s},
                   "chi_rank": generic_chi_rank(D)}
    rep["involutive_here"] = here and bool(fi)
    rep["formally_integrable"] = bool(fi)
    if not reg_change.is_identity():
        out.append(f"delta-regular coordinates: {reg_change}")
        rep["change"] = str(reg_change)
    rep["conditions"] = conditions_json(merge_conditions(D.conditions, S.conditions,
                                                         pp.result.conditions))
    return 0


def _cc_chain(D, a):
    steps = []
    cur = D
    length = a.chain or 1
    while len(steps) < length:
        res = compatibility_operator(cur, a.max_order, a.cap, a.seed)
        steps.append(res)
        if res.operator.p == 0 or res.inconclusive:
            break
        cur = res.operator
    return steps


def cmd_cc(D, a, out, rep):
    steps = _cc_chain(D, a)
    first = steps[0]
    conds = merge_conditions(D.conditions, *(s.conditions for s in steps))
    rep["cc"] = {"orders": first.generator_orders, "rows": rows_json(first.operator),
                 "chain": [{"p": s.operator.p, "m": s.operator.m, "orders": s.generator_orders}
                           for s in steps]}
    rep["dims"] = [D.m, D.p] + [s.operator.p for s in steps if s.operator.p]
    rep["conditions"] = conditions_json(conds)
    for i, s in enumerate(steps, 1):
        out.append(f"CC {i}: {s.operator.p} generator(s), orders {s.generator_orders}")
        if s.operator.p:
            out.append(format_operator(s.operator, f"cc{i}").rstrip())
        out.extend("  " + line for line in s.log)
    out.append("dims: " + " -> ".join(map(str, rep["dims"])))
    return 2 if any(s.inconclusive for s in steps) else 0


def cmd_sequences(D, a, out, rep):
    S = from_operator(D)
    pp = jets.pp_procedure(S, a.cap, a.seed)
    R = pp.result
    fd = fundamental_diagram(R, a.seed)
    js = janet_sequence(R, a.seed)
    chi = generic_chi_rank(R.to_operator())
    rep["dims"] = {"spencer": fd.spencer, "hybrid": fd.hybrid, "janet": fd.janet,
                   "janet_sequence": js.dims, "exact": fd.exact,
                   "euler_poincare": euler_poincare(js.dims), "m_minus_chi_rank": R.m - chi}
    rep["conditions"] = conditions_json(merge_conditions(D.conditions, R.conditions))
    out.append(f"involutive system: order {R.q}, dim {R.dim} (r = {pp.r}, s = {pp.s})")
    out.append("Spencer C_r: " + ", ".join(map(str, fd.spencer)))
    out.append("hybrid  C_r: " + ", ".join(map(str, fd.hybrid)))
    out.append("Janet   F_r: " + ", ".join(map(str, fd.janet)))
    out.append(f"rows exact (hybrid = Spencer + Janet): {fd.exact}")
    out.append("Janet sequence: " + " -> ".join(map(str, js.dims)))
    out.append(f"Euler-Poincare: {euler_poincare(js.dims)} (m - chi-rank = {R.m - chi})")
    return 0


def cmd_adjoint(D, a, out, rep):
    A = adjoint(D)
    rep["cc"] = None
    rep["operator"] = rows_json(A)
    rep["conditions"] = conditions_json(D.conditions)
    out.append(format_operator(A, "ad_" + (D.name or "op")).rstrip())
    return 0


def _torsion_json(r):
    return {"torsionFree": r.torsion_free,
            "generators": [{"row": rows_json(t.row)[0],
                            "certificate": None if t.certificate is None else
                            [[t.certificate.K.to_str(c), *mu] for mu, c in t.certificate.sorted_terms()],
                            "order": t.order} for t in r.torsion_generators]}


def cmd_duality(D, a, out, rep):
    r = double_duality(D, a.max_order, a.certificate_cap, a.cap, a.seed)
    rep["torsion"] = _torsion_json(r)
    rep["torsionFree"] = r.torsion_free
    rep["conditions"] = conditions_json(r.conditions)
    rep["parametrization"] = rows_json(r.parametrization)
    out.extend(r.log)
    out.append("parametrization:")
    out.append(format_operator(r.parametrization, "parametrization").rstrip())
    out.append(f"torsion-free: {r.torsion_free}")
    for i, t in enumerate(r.torsion_generators, 1):
        cert = "not found" if t.certificate is None else str(t.certificate)
        out.append(f"torsion {i}: {str(t.row).split(' = ', 1)[1]}   certificate: {cert}")
    missing = any(t.certificate is None for t in r.torsion_generators)
    return 2 if r.partial or missing else 0


def cmd_minparam(D, a, out, rep):
    if a.parametrization:
        P = load(a.parametrization, parse_bindings(a.specialize), a.arg, a.change)
        D1 = D
    else:
        r = double_duality(D, a.max_order, a.certificate_cap, a.cap, a.seed)
        P, D1 = r.parametrization, D
    R, subset = minimum_parametrization(P, D1, a.max_order)
    rep["dims"] = {"columns": [P.source_labels[k] for k in subset], "chi_rank": generic_chi_rank(P)}
    rep["operator"] = rows_json(R.select_columns(list(subset)))
    out.append("kept potentials: " + ", ".join(P.source_labels[k] for k in subset))
    out.append(format_operator(R.select_columns(list(subset)), "minimum_parametrization").rstrip())
    return 0


def cmd_crosschecks(a, out, rep):
    results = catalog.crosschecks(include_slow=a.slow)
    ok = True
    for c in results:
        out.append(f"{'PASS' if c.ok else 'FAIL'} {c.name}" + (f"  [{c.detail}]" if c.detail else ""))
        ok &= c.ok
    rep["checks"] = [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in results]
    return 0 if ok else 1


COMMANDS = {"analyze": cmd_analyze, "cc": cmd_cc, "sequences": cmd_sequences,
            "adjoint": cmd_adjoint, "duality": cmd_duality, "minparam": cmd_minparam}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linpde", description="Formal analysis of linear PDE operators.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, source=True):
        if source:
            p.add_argument("source", help="DSL file or catalog:NAME")
            p.add_argument("--specialize", action="append", default=[], metavar="a=0,l1=l2")
            p.add_argument("--change", help='explicit coordinate change, e.g. "x3=x3+x2+x1"')
            p.add_argument("--arg", action="append", default=[], metavar="key=value",
                           help="catalog constructor argument, e.g. metric=euclid:3")
        p.add_argument("--json", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=20)
        p.add_argument("--max-order", type=int, default=None)
        p.add_argument("--chain", type=int, default=None)
        p.add_argument("--certificate-cap", type=int, default=4)

    for name in COMMANDS:
        common(sub.add_parser(name))
    sub.choices["minparam"].add_argument("--parametrization", help="explicit parametrization source")
    cp = sub.add_parser("crosschecks")
    common(cp, source=False)
    cp.add_argument("--slow", action="store_true")
    return ap


def run(argv) -> tuple:
    """(exit code, report dict, text lines)."""
    a = build_parser().parse_args(argv)
    rep = _report(a.command, getattr(a, "source", None))
    out = []
    try:
        if a.command == "crosschecks":
            code = cmd_crosschecks(a, out, rep)
        else:
            D = load(a.source, parse_bindings(a.specialize), a.arg, a.change)
            code = COMMANDS[a.command](D, a, out, rep)
    except InconclusiveError as exc:
        rep["error"] = str(exc)
        out.append(f"inconclusive: {exc}")
        return 2, rep, out
    except (DSLError, OSError, KeyError, ValueError, NotFoundError, SpecializationPoleError) as exc:
        rep["error"] = f"{type(exc).__name__}: {exc}"
        out.append(f"error: {exc}")
        return 1, rep, out
    if rep["conditions"]:
        out.append("conditions: " + ", ".join(f"{c} != 0" for c in rep["conditions"]))
    else:
        out.append("conditions: none")
    return code, rep, out


def main(argv=None) -> int:
    code, rep, out = run(sys.argv[1:] if argv is None else argv)
    if "--json" in (sys.argv[1:] if argv is None else argv):
        print(json.dumps(rep, sort_keys=True, indent=2))
    else:
        stream = sys.stderr if code == 1 else sys.stdout
        print("\n".join(out), file=stream)
    return code
