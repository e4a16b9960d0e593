"""Relational algebra: expressions, set-semantics evaluation, the
negation-guardedness check, and the surface syntax.

Surface syntax (1-based column indices)::

    R    project[1,2](E)    select[1=2](E)    E x F    E & F    E + F    E - F

``x`` binds tightest, then ``&``, then ``+`` and ``-`` (left associative).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ParseError, SchemaError
from .formula import Schema
from .instance import Instance
from .lexer import TokenStream, tokenize


@dataclass(frozen=True)
class RaExpr:
    arity: int = field(init=False, compare=False, repr=False)

    def _set_arity(self, k: int):
        object.__setattr__(self, "arity", k)


@dataclass(frozen=True)
class Atom(RaExpr):
    rel: str
    rel_arity: int

    def __post_init__(self):
        self._set_arity(self.rel_arity)


@dataclass(frozen=True)
class Select(RaExpr):
    i: int
    j: int
    sub: RaExpr

    def __post_init__(self):
        k = self.sub.arity
        if not (1 <= self.i <= k and 1 <= self.j <= k):
            raise SchemaError(f"selection {self.i}={self.j} out of range for arity {k}")
        self._set_arity(k)


@dataclass(frozen=True)
class Project(RaExpr):
    indices: tuple
    sub: RaExpr

    def __post_init__(self):
        k = self.sub.arity
        for i in self.indices:
            if not 1 <= i <= k:
                raise SchemaError(f"projection index {i} out of range for arity {k}")
        self._set_arity(len(self.indices))


@dataclass(frozen=True)
class Product(RaExpr):
    left: RaExpr
    right: RaExpr

    def __post_init__(self):
        self._set_arity(self.left.arity + self.right.arity)


@dataclass(frozen=True)
class _SameArity(RaExpr):
    left: RaExpr
    right: RaExpr

    def __post_init__(self):
        if self.left.arity != self.right.arity:
            raise SchemaError(f"{type(self).__name__} of arities {self.left.arity} and {self.right.arity}")
        self._set_arity(self.left.arity)


class Union(_SameArity):
    pass


class Intersect(_SameArity):
    pass


class Diff(_SameArity):
    pass


def ra_children(e: RaExpr) -> list:
    if isinstance(e, (Select, Project)):
        return [e.sub]
    if isinstance(e, (Product, Union, Intersect, Diff)):
        return [e.left, e.right]
    return []


def ra_size(e: RaExpr) -> int:
    """Tree size, counting shared subexpressions once per occurrence."""
    memo: dict = {}

    def go(x):
        k = id(x)
        if k not in memo:
            memo[k] = 1 + sum(go(c) for c in ra_children(x))
        return memo[k]

    return go(e)


def ra_relations(e: RaExpr) -> dict:
    out: dict = {}
    seen: set = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if isinstance(x, Atom):
            out[x.rel] = x.rel_arity
        stack.extend(ra_children(x))
    return out


# --- guardedness -------------------------------------------------------------

@dataclass(frozen=True)
class GuardCheck:
    ok: bool
    path: tuple = ()  # steps from the root to the first offending Diff

    def __bool__(self) -> bool:
        return self.ok


def normalize_atoms(e: RaExpr) -> RaExpr:
    """Rewrite the left argument ``R`` of every difference as ``π_{1..k}(R)``."""
    if isinstance(e, Diff):
        left = e.left
        if isinstance(left, Atom):
            left = Project(tuple(range(1, left.arity + 1)), left)
        else:
            left = normalize_atoms(left)
        return Diff(left, normalize_atoms(e.right))
    if isinstance(e, Select):
        return Select(e.i, e.j, normalize_atoms(e.sub))
    if isinstance(e, Project):
        return Project(e.indices, normalize_atoms(e.sub))
    if isinstance(e, (Product, Union, Intersect)):
        return type(e)(normalize_atoms(e.left), normalize_atoms(e.right))
    return e


def check_ra_guarded(e: RaExpr) -> GuardCheck:
    """Every difference must have the shape ``π_{i1..im}(R) − E``."""
    e = normalize_atoms(e)
    stack = [(e, ())]
    while stack:
        x, path = stack.pop()
        if isinstance(x, Diff):
            if not (isinstance(x.left, Project) and isinstance(x.left.sub, Atom)):
                return GuardCheck(False, path)
            stack.append((x.right, path + ("diff.right",)))
            continue
        names = {Select: ("select",), Project: ("project",)}
        if isinstance(x, (Select, Project)):
            stack.append((x.sub, path + names[type(x)]))
        elif isinstance(x, (Product, Union, Intersect)):
            tag = type(x).__name__.lower()
            stack.append((x.right, path + (f"{tag}.right",)))
            stack.append((x.left, path + (f"{tag}.left",)))
    return GuardCheck(True)


# --- evaluation --------------------------------------------------------------

def eval_ra(e: RaExpr, inst: Instance) -> set:
    """Standard set semantics."""
    memo: dict = {}
    for rel, ar in ra_relations(e).items():
        known = inst.schema.relations.get(rel)
        if known is not None and known != ar:
            raise SchemaError(f"{rel} has arity {known} in the instance, {ar} in the expression")

    def go(x: RaExpr) -> frozenset:
        k = id(x)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        if isinstance(x, Atom):
            out = inst.relation(x.rel)
        elif isinstance(x, Select):
            i, j = x.i - 1, x.j - 1
            out = frozenset(t for t in go(x.sub) if t[i] == t[j])
        elif isinstance(x, Project):
            idx = [i - 1 for i in x.indices]
            out = frozenset(tuple(t[i] for i in idx) for t in go(x.sub))
        elif isinstance(x, Product):
            right = go(x.right)
            out = frozenset(a + b for a in go(x.left) for b in right)
        elif isinstance(x, Union):
            out = go(x.left) | go(x.right)
        elif isinstance(x, Intersect):
            out = go(x.left) & go(x.right)
        elif isinstance(x, Diff):
            out = go(x.left) - go(x.right)
        else:
            raise TypeError(f"not an RA expression: {x!r}")
        memo[k] = (x, out)
        return out

    return set(go(e))


# --- text --------------------------------------------------------------------

def format_ra(e: RaExpr) -> str:
    if isinstance(e, Atom):
        return e.rel
    if isinstance(e, Select):
        return f"select[{e.i}={e.j}]({format_ra(e.sub)})"
    if isinstance(e, Project):
        return f"project[{','.join(map(str, e.indices))}]({format_ra(e.sub)})"
    ops = {Product: "x", Intersect: "&", Union: "+", Diff: "-"}

    def side(c):
        s = format_ra(c)
        return f"({s})" if type(c) in ops else s

    return f"{side(e.left)} {ops[type(e)]} {side(e.right)}"


def parse_ra(text: str, schema: Schema, source: str | None = None) -> RaExpr:
    ts = TokenStream(tokenize(text, source=source), source)
    p = _RaParser(ts, schema)
    e = p.additive()
    if ts.peek.kind != "eof":
        ts.error(f"unexpected {ts.describe(ts.peek)}")
    return e


class _RaParser:
    def __init__(self, ts: TokenStream, schema: Schema):
        self.ts = ts
        self.schema = schema

    def build(self, cls, tok, *args):
        try:
            return cls(*args)
        except SchemaError as exc:
            raise ParseError(str(exc), tok.line, tok.column, self.ts.source) from None

    def additive(self) -> RaExpr:
        e = self.intersective()
        while True:
            tok = self.ts.peek
            if self.ts.accept("+"):
                e = self.build(Union, tok, e, self.intersective())
            elif self.ts.accept("-"):
                e = self.build(Diff, tok, e, self.intersective())
            else:
                return e

    def intersective(self) -> RaExpr:
        e = self.product()
        while True:
            tok = self.ts.peek
            if not self.ts.accept("&"):
                return e
            e = self.build(Intersect, tok, e, self.product())

    def product(self) -> RaExpr:
        e = self.unary()
        while True:
            tok = self.ts.peek
            if not (tok.kind == "ident" and tok.text == "x"):
                return e
            self.ts.next()
            e = self.build(Product, tok, e, self.unary())

    def indices(self) -> list:
        ts = self.ts
        ts.expect("[")
        out = []
        if not ts.at("]"):
            out.append(self.number())
            while ts.accept(","):
                out.append(self.number())
        ts.expect("]")
        return out

    def number(self) -> int:
        tok = self.ts.next()
        if tok.kind != "number":
            self.ts.error(f"expected a column number, found {self.ts.describe(tok)}", tok)
        return int(tok.text)

    def unary(self) -> RaExpr:
        ts = self.ts
        tok = ts.peek
        if ts.accept("("):
            e = self.additive()
            ts.expect(")")
            return e
        if tok.kind == "ident" and tok.text in ("project", "pi") and ts.peek_at(1).text == "[":
            ts.next()
            idx = self.indices()
            ts.expect("(")
            sub = self.additive()
            ts.expect(")")
            return self.build(Project, tok, tuple(idx), sub)
        if tok.kind == "ident" and tok.text in ("select", "sigma") and ts.peek_at(1).text == "[":
            ts.next()
            ts.expect("[")
            i = self.number()
            ts.expect("=")
            j = self.number()
            ts.expect("]")
            ts.expect("(")
            sub = self.additive()
            ts.expect(")")
            return self.build(Select, tok, i, j, sub)
        name = ts.expect_ident("relation name")
        if name.text not in self.schema.relations:
            ts.error(f"unknown relation {name.text}", name)
        return Atom(name.text, self.schema.relations[name.text])


_RA_WORDS = {"project", "pi", "select", "sigma", "x"}


def infer_ra_schema(text: str, max_arity: int = 4, source: str | None = None) -> Schema:
    """Smallest arities under which ``text`` parses and typechecks.

    Assignments are tried by increasing total arity, then in lexicographic
    order of relation name.
    """
    toks = tokenize(text, source=source)
    names = sorted({t.text for k, t in enumerate(toks)
                    if t.kind == "ident" and t.text not in _RA_WORDS})
    if len(names) > 6:
        raise SchemaError("too many relations to infer arities; supply a schema")
    combos = sorted(itertools.product(range(1, max_arity + 1), repeat=len(names)),
                    key=lambda c: (sum(c), c))
    last = None
    for combo in combos:
        schema = Schema(dict(zip(names, combo)))
        try:
            parse_ra(text, schema, source)
            return schema
        except ParseError as exc:
            # only typing failures depend on the arities tried
            if "out of range" not in exc.message and "of arities" not in exc.message:
                raise
            last = exc
    if last is None:
        raise SchemaError("no relation found")
    raise last
