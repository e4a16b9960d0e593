"""Abstract syntax for GNFO and GNFP formulas.

Nodes are immutable.  ``And`` and ``Or`` are binary; helpers ``conj`` and
``disj`` fold lists.  ``Top`` is the empty conjunction and doubles as the
guard of a negated sentence.  ``FALSE`` is the closed formula
``true & not(true)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import SchemaError


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return f'"{self.name}"'


Term = Union[Var, Const]


@dataclass(frozen=True)
class Schema:
    """Relation names with arities, plus constant symbols."""

    relations: dict = field(default_factory=dict)
    constants: frozenset = frozenset()

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.relations.items())), self.constants))

    def arity(self, rel: str) -> int:
        try:
            return self.relations[rel]
        except KeyError:
            raise SchemaError(f"unknown relation {rel}") from None

    def with_relations(self, extra: dict) -> "Schema":
        rels = dict(self.relations)
        for name, ar in extra.items():
            if name in rels and rels[name] != ar:
                raise SchemaError(f"relation {name} declared with arities {rels[name]} and {ar}")
            rels[name] = ar
        return Schema(rels, self.constants)


# --- formula nodes ---------------------------------------------------------

@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class RelAtom:
    rel: str
    terms: tuple


@dataclass(frozen=True)
class EqAtom:
    left: Term
    right: Term


@dataclass(frozen=True)
class And:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Or:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class GuardedNeg:
    """``guard & not(body)``; the guard is a RelAtom, EqAtom or Top."""

    guard: "Formula"
    body: "Formula"


@dataclass(frozen=True)
class SecondOrderAtom:
    var: str
    terms: tuple


@dataclass(frozen=True)
class GuardDisjunct:
    bound: tuple  # existentially quantified variable names
    atom: "Formula"  # RelAtom, EqAtom or Top


@dataclass(frozen=True)
class GeneralizedGuard:
    disjuncts: tuple

    def free_vars(self) -> frozenset:
        out: set = set()
        for d in self.disjuncts:
            out |= free_vars(d.atom) - set(d.bound)
        return frozenset(out)

    def as_formula(self) -> "Formula":
        parts = []
        for d in self.disjuncts:
            f = d.atom
            for v in reversed(d.bound):
                f = Exists(v, f)
            parts.append(f)
        return disj(parts)


@dataclass(frozen=True)
class FixpointDef:
    var: str  # second-order variable X_k
    params: tuple  # first-order variable names x_k
    guard: GeneralizedGuard
    body: "Formula"


@dataclass(frozen=True)
class Lfp:
    defs: tuple  # tuple of FixpointDef; length 1 is the plain operator
    component: int
    args: tuple  # terms


Formula = Union[Top, RelAtom, EqAtom, And, Or, Exists, GuardedNeg, SecondOrderAtom, Lfp]
ATOMS = (RelAtom, EqAtom)

TRUE = Top()
FALSE = GuardedNeg(Top(), Top())


def is_false(f: Formula) -> bool:
    return isinstance(f, GuardedNeg) and isinstance(f.guard, Top) and isinstance(f.body, Top)


# --- constructors ----------------------------------------------------------

def var(name: str) -> Var:
    return Var(name)


def atom(rel: str, *names: str) -> RelAtom:
    """``atom("R", "x", "y")``; names written ``"'c'"`` become constants."""
    return RelAtom(rel, tuple(_term(n) for n in names))


def eq(a: str | Term, b: str | Term) -> EqAtom:
    return EqAtom(_term(a), _term(b))


def _term(x) -> Term:
    if isinstance(x, (Var, Const)):
        return x
    if len(x) >= 2 and x[0] == x[-1] == "'":
        return Const(x[1:-1])
    return Var(x)


def conj(parts: Iterable[Formula]) -> Formula:
    parts = [p for p in parts if not isinstance(p, Top)]
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def exists(names: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(names)):
        body = Exists(v, body)
    return body


def neg(guard: Formula, body: Formula) -> GuardedNeg:
    return GuardedNeg(guard, body)


def conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        return conjuncts(f.lhs) + conjuncts(f.rhs)
    if isinstance(f, Top):
        return []
    return [f]


def disjuncts(f: Formula) -> list:
    if isinstance(f, Or):
        return disjuncts(f.lhs) + disjuncts(f.rhs)
    return [f]


# --- traversal -------------------------------------------------------------

def term_vars(terms: Iterable[Term]) -> list:
    return [t.name for t in terms if isinstance(t, Var)]


def free_vars(f: Formula) -> frozenset:
    """Free first-order variables."""
    if isinstance(f, Top):
        return frozenset()
    if isinstance(f, (RelAtom, SecondOrderAtom)):
        return frozenset(term_vars(f.terms))
    if isinstance(f, EqAtom):
        return frozenset(term_vars((f.left, f.right)))
    if isinstance(f, (And, Or)):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, Exists):
        return free_vars(f.body) - {f.var}
    if isinstance(f, GuardedNeg):
        return free_vars(f.guard) | free_vars(f.body)
    if isinstance(f, Lfp):
        return frozenset(term_vars(f.args))
    raise TypeError(f"not a formula: {f!r}")


def children(f: Formula) -> list:
    if isinstance(f, (And, Or)):
        return [f.lhs, f.rhs]
    if isinstance(f, Exists):
        return [f.body]
    if isinstance(f, GuardedNeg):
        return [f.guard, f.body]
    if isinstance(f, Lfp):
        out = []
        for d in f.defs:
            out.extend(dd.atom for dd in d.guard.disjuncts)
            out.append(d.body)
        return out
    return []


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def all_vars(f: Formula) -> set:
    """Every first-order variable name occurring free or bound."""
    out: set = set()
    for g in walk(f):
        if isinstance(g, (RelAtom, SecondOrderAtom)):
            out.update(term_vars(g.terms))
        elif isinstance(g, EqAtom):
            out.update(term_vars((g.left, g.right)))
        elif isinstance(g, Exists):
            out.add(g.var)
        elif isinstance(g, Lfp):
            out.update(term_vars(g.args))
            for d in g.defs:
                out.update(d.params)
                for dd in d.guard.disjuncts:
                    out.update(dd.bound)
    return out


def constants(f: Formula) -> set:
    out: set = set()
    for g in walk(f):
        ts: tuple = ()
        if isinstance(g, (RelAtom, SecondOrderAtom)):
            ts = g.terms
        elif isinstance(g, EqAtom):
            ts = (g.left, g.right)
        elif isinstance(g, Lfp):
            ts = g.args
        out.update(t.name for t in ts if isinstance(t, Const))
    return out


def relations(f: Formula) -> dict:
    """Relation symbol → arity for every RelAtom in ``f``."""
    out: dict = {}
    for g in walk(f):
        if isinstance(g, RelAtom):
            out.setdefault(g.rel, len(g.terms))
    return out


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def is_gnfo(f: Formula) -> bool:
    return not any(isinstance(g, (Lfp, SecondOrderAtom)) for g in walk(f))


# --- substitution ----------------------------------------------------------

def _sub_term(t: Term, m: dict) -> Term:
    if isinstance(t, Var) and t.name in m:
        return m[t.name]
    return t


def substitute(f: Formula, m: dict) -> Formula:
    """Capture-avoiding substitution of free variables by terms.

    ``m`` maps variable names to ``Term``.  Bound variables that would
    capture an incoming variable are renamed.
    """
    if not m:
        return f
    if isinstance(f, Top):
        return f
    if isinstance(f, RelAtom):
        return RelAtom(f.rel, tuple(_sub_term(t, m) for t in f.terms))
    if isinstance(f, SecondOrderAtom):
        return SecondOrderAtom(f.var, tuple(_sub_term(t, m) for t in f.terms))
    if isinstance(f, EqAtom):
        return EqAtom(_sub_term(f.left, m), _sub_term(f.right, m))
    if isinstance(f, And):
        return And(substitute(f.lhs, m), substitute(f.rhs, m))
    if isinstance(f, Or):
        return Or(substitute(f.lhs, m), substitute(f.rhs, m))
    if isinstance(f, GuardedNeg):
        return GuardedNeg(substitute(f.guard, m), substitute(f.body, m))
    if isinstance(f, Exists):
        m2 = {k: v for k, v in m.items() if k != f.var}
        if not m2:
            return f
        incoming = {t.name for t in m2.values() if isinstance(t, Var)}
        if f.var in incoming:
            avoid = incoming | all_vars(f.body) | set(m2)
            fresh = fresh_name(f.var, avoid)
            body = substitute(f.body, {f.var: Var(fresh)})
            return Exists(fresh, substitute(body, m2))
        return Exists(f.var, substitute(f.body, m2))
    if isinstance(f, Lfp):
        # definitions are closed in their first-order part
        return Lfp(f.defs, f.component, tuple(_sub_term(t, m) for t in f.args))
    raise TypeError(f"not a formula: {f!r}")


def rename_so(f: Formula, m: dict) -> Formula:
    """Replace free second-order atoms ``X(t)`` by ``m[X](t)``.

    ``m`` maps a second-order variable to ``(params, formula)``; the atom is
    replaced by ``formula`` with ``params`` substituted by the atom's terms.
    """
    if isinstance(f, SecondOrderAtom):
        if f.var in m:
            params, body = m[f.var]
            return substitute(body, dict(zip(params, f.terms)))
        return f
    if isinstance(f, (Top, RelAtom, EqAtom)):
        return f
    if isinstance(f, And):
        return And(rename_so(f.lhs, m), rename_so(f.rhs, m))
    if isinstance(f, Or):
        return Or(rename_so(f.lhs, m), rename_so(f.rhs, m))
    if isinstance(f, GuardedNeg):
        return GuardedNeg(f.guard, rename_so(f.body, m))
    if isinstance(f, Exists):
        return Exists(f.var, rename_so(f.body, m))
    if isinstance(f, Lfp):
        shadowed = {d.var for d in f.defs}
        inner = {k: v for k, v in m.items() if k not in shadowed}
        defs = tuple(FixpointDef(d.var, d.params, d.guard, rename_so(d.body, inner)) for d in f.defs)
        return Lfp(defs, f.component, f.args)
    raise TypeError(f"not a formula: {f!r}")


def fresh_name(base: str, avoid: set) -> str:
    stem = base.rstrip("0123456789'") or "v"
    i = 0
    while True:
        cand = f"{stem}{i}"
        if cand not in avoid:
            return cand
        i += 1


_NUM = re.compile(r"(\d+)")


def natural_key(name: str):
    """Sort key placing ``x2`` before ``x10``."""
    return [int(p) if p.isdigit() else p for p in _NUM.split(name)]


def sorted_vars(names: Iterable[str]) -> tuple:
    return tuple(sorted(names, key=natural_key))


def free_so_vars(f: Formula) -> frozenset:
    """Second-order variables occurring free in ``f``."""
    if isinstance(f, SecondOrderAtom):
        return frozenset({f.var})
    if isinstance(f, Lfp):
        out: set = set()
        for d in f.defs:
            out |= free_so_vars(d.body)
        return frozenset(out - {d.var for d in f.defs})
    out = frozenset()
    for c in children(f):
        out |= free_so_vars(c)
    return out


def mark_second_order(f: Formula, names: set) -> Formula:
    """Turn relational atoms over ``names`` into second-order atoms."""
    if isinstance(f, RelAtom) and f.rel in names:
        return SecondOrderAtom(f.rel, f.terms)
    if isinstance(f, And):
        return And(mark_second_order(f.lhs, names), mark_second_order(f.rhs, names))
    if isinstance(f, Or):
        return Or(mark_second_order(f.lhs, names), mark_second_order(f.rhs, names))
    if isinstance(f, Exists):
        return Exists(f.var, mark_second_order(f.body, names))
    if isinstance(f, GuardedNeg):
        return GuardedNeg(f.guard, mark_second_order(f.body, names))
    if isinstance(f, Lfp):
        defs = tuple(FixpointDef(d.var, d.params, d.guard, mark_second_order(d.body, names))
                     for d in f.defs)
        return Lfp(defs, f.component, f.args)
    return f
