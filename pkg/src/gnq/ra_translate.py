"""Translations between negation-guarded relational algebra and GNFO.

``ra_to_gnfo`` is linear.  ``gnfo_to_ra`` works over an ``ADOM``
expression (the union of all unary projections) and may grow
exponentially when unions are pulled out of differences guarded by an
equality; a node cap bounds it.
"""

from __future__ import annotations

import itertools

from .errors import BlowUpError, NotGuardedError, SchemaError
from .formula import (
    And,
    Const,
    EqAtom,
    Exists,
    Formula,
    GuardedNeg,
    Or,
    RelAtom,
    Schema,
    Top,
    Var,
    conj,
    exists,
    free_vars,
    fresh_name,
    is_gnfo,
    relations,
    sorted_vars,
    substitute,
)
from .ra import (
    Atom,
    Diff,
    Intersect,
    Product,
    Project,
    RaExpr,
    Select,
    Union,
    check_ra_guarded,
    normalize_atoms,
)

# --- RA to GNFO --------------------------------------------------------------

def ra_to_gnfo(e: RaExpr, prefix: str = "x") -> Formula:
    """Formula with free variables ``x1..xk`` equivalent to ``e``."""
    check = check_ra_guarded(e)
    if not check.ok:
        raise NotGuardedError(f"difference at {'/'.join(check.path) or 'root'} is not guarded")
    e = normalize_atoms(e)
    counter = itertools.count()

    def fresh(k):
        return [Var(f"z{next(counter)}") for _ in range(k)]

    def tr(x: RaExpr, args: list) -> Formula:
        if isinstance(x, Atom):
            return RelAtom(x.rel, tuple(args))
        if isinstance(x, Select):
            return And(tr(x.sub, args), EqAtom(args[x.i - 1], args[x.j - 1]))
        if isinstance(x, Project):
            z = fresh(x.sub.arity)
            eqs = [EqAtom(a, z[i - 1]) for a, i in zip(args, x.indices)]
            return exists([v.name for v in z], conj([tr(x.sub, z)] + eqs))
        if isinstance(x, Product):
            k = x.left.arity
            return And(tr(x.left, args[:k]), tr(x.right, args[k:]))
        if isinstance(x, Intersect):
            return And(tr(x.left, args), tr(x.right, args))
        if isinstance(x, Union):
            return Or(tr(x.left, args), tr(x.right, args))
        if isinstance(x, Diff):
            proj = x.left
            z = fresh(proj.sub.arity)
            picked = [z[i - 1] for i in proj.indices]
            guard = RelAtom(proj.sub.rel, tuple(z))
            eqs = [EqAtom(a, p) for a, p in zip(args, picked)]
            return exists([v.name for v in z], conj([GuardedNeg(guard, tr(x.right, picked))] + eqs))
        raise TypeError(f"not an RA expression: {x!r}")

    return tr(e, [Var(f"{prefix}{i}") for i in range(1, e.arity + 1)])


# --- GNFO to RA --------------------------------------------------------------

class _Builder:
    def __init__(self, schema: Schema, cap: int):
        self.schema = schema
        self.cap = cap
        self.nodes = 0
        self.projections = []
        for rel in sorted(schema.relations):
            for i in range(1, schema.relations[rel] + 1):
                self.projections.append(self.make(Project, (i,), Atom(rel, schema.relations[rel])))
        if not self.projections:
            raise SchemaError("the active domain needs a relation of positive arity")
        adom = self.projections[0]
        for p in self.projections[1:]:
            adom = self.make(Union, adom, p)
        self.adom = adom
        self._adom_pow: dict = {}

    def make(self, cls, *args):
        self.nodes += 1
        if self.nodes > self.cap:
            raise BlowUpError("GNFO to RA translation", self.cap)
        return cls(*args)

    def product(self, parts: list) -> RaExpr:
        out = parts[0]
        for p in parts[1:]:
            out = self.make(Product, out, p)
        return out

    def project(self, idx, e: RaExpr) -> RaExpr:
        idx = tuple(idx)
        if idx == tuple(range(1, e.arity + 1)):
            return e
        return self.make(Project, idx, e)

    def layout(self, ctx: tuple, cover: dict, factor: RaExpr, factor_cols: dict) -> RaExpr:
        """Place ``factor`` (whose columns bind ``factor_cols``) among ADOM
        columns for the remaining context variables and reorder to ``ctx``.
        ``cover`` marks the context variables bound by ``factor``."""
        parts: list = []
        col_of: dict = {}
        width = 0
        placed = False
        for v in ctx:
            if v in cover:
                if not placed:
                    parts.append(factor)
                    for name, c in factor_cols.items():
                        col_of[name] = width + c
                    width += factor.arity
                    placed = True
            else:
                parts.append(self.adom)
                width += 1
                col_of[v] = width
        if not placed:
            parts.append(factor)
            width += factor.arity
        if not parts:
            return factor
        return self.project([col_of[v] for v in ctx], self.product(parts))

    def tr(self, f: Formula, ctx: tuple) -> RaExpr:
        if isinstance(f, RelAtom):
            return self.atom(f, ctx)
        if isinstance(f, EqAtom):
            return self.equality(f, ctx)
        if isinstance(f, Top):
            if not ctx:
                raise NotGuardedError("a closed true is not expressible in RA")
            return self.product([self.adom] * len(ctx))
        if isinstance(f, And):
            return self.make(Intersect, self.tr(f.lhs, ctx), self.tr(f.rhs, ctx))
        if isinstance(f, Or):
            return self.make(Union, self.tr(f.lhs, ctx), self.tr(f.rhs, ctx))
        if isinstance(f, Exists):
            v, body = f.var, f.body
            if v in ctx:
                v = fresh_name(v, set(ctx) | set(free_vars(body)))
                body = substitute(body, {f.var: Var(v)})
            inner = self.tr(body, ctx + (v,))
            return self.project(range(1, len(ctx) + 1), inner)
        if isinstance(f, GuardedNeg):
            return self.negation(f, ctx)
        raise NotGuardedError(f"{type(f).__name__} has no RA counterpart")

    def _no_consts(self, terms):
        for t in terms:
            if isinstance(t, Const):
                raise NotGuardedError("constants are not allowed in relational algebra")

    def atom(self, f: RelAtom, ctx: tuple) -> RaExpr:
        self._no_consts(f.terms)
        ar = self.schema.relations.get(f.rel)
        if ar is None:
            raise SchemaError(f"unknown relation {f.rel}")
        if ar != len(f.terms):
            raise SchemaError(f"{f.rel} has arity {ar}")
        e: RaExpr = Atom(f.rel, ar)
        first: dict = {}
        for pos, t in enumerate(f.terms, start=1):
            if t.name in first:
                e = self.make(Select, first[t.name], pos, e)
            else:
                first[t.name] = pos
        return self.layout(ctx, first, e, first)

    def equality(self, f: EqAtom, ctx: tuple) -> RaExpr:
        self._no_consts((f.left, f.right))
        a, b = f.left.name, f.right.name
        return self.layout(ctx, {a: 1, b: 1}, self.adom, {a: 1, b: 1})

    def guard_expr(self, g: RelAtom) -> tuple:
        """``(π_P(R), tr_y(g))`` for a relational guard, ``y`` its variables
        in order of first occurrence."""
        self._no_consts(g.terms)
        ar = self.schema.relations.get(g.rel)
        if ar is None:
            raise SchemaError(f"unknown relation {g.rel}")
        base = Atom(g.rel, ar)
        first: dict = {}
        sel: RaExpr = base
        for pos, t in enumerate(g.terms, start=1):
            if t.name in first:
                sel = self.make(Select, first[t.name], pos, sel)
            else:
                first[t.name] = pos
        y = tuple(first)
        proj = self.make(Project, tuple(first[v] for v in y), base)
        exact = proj if sel is base else self.make(Project, tuple(first[v] for v in y), sel)
        return y, proj, exact

    def negation(self, f: GuardedNeg, ctx: tuple) -> RaExpr:
        g = f.guard
        if isinstance(g, RelAtom):
            y, proj, exact = self.guard_expr(g)
            diff = self.make(Diff, proj, self.tr(f.body, y))
            local = diff if exact is proj else self.make(Intersect, exact, diff)
            cols = {v: i for i, v in enumerate(y, start=1)}
            return self.layout(ctx, cols, local, cols)
        if isinstance(g, EqAtom):
            self._no_consts((g.left, g.right))
            a, b = g.left.name, g.right.name
            body = substitute(f.body, {b: Var(a)}) if a != b else f.body
            inner = self.tr(body, (a,))
            pieces = [self.make(Diff, p, inner) for p in self.projections]
            un = pieces[0]
            for p in pieces[1:]:
                un = self.make(Union, un, p)
            cols = {a: 1, b: 1}
            return self.layout(ctx, cols, un, cols)
        raise NotGuardedError("negation guarded by true has no RA counterpart")


def gnfo_to_ra(f: Formula, order: tuple | None = None, schema: Schema | None = None,
               node_cap: int = 10**6) -> RaExpr:
    """Guarded RA expression with one column per variable of ``order``
    (default: free variables in natural order).

    Agrees with ``answers`` under active-domain semantics; for formulas
    that are not domain independent the RA reading is the active-domain one.
    """
    if not is_gnfo(f):
        raise NotGuardedError("only GNFO formulas translate to RA")
    if order is None:
        order = sorted_vars(free_vars(f))
    if schema is None:
        schema = Schema(relations(f))
    else:
        schema = schema.with_relations(relations(f))
    b = _Builder(schema, node_cap)
    return b.tr(f, tuple(order))
