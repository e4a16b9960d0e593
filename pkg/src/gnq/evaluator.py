"""Answer sets of GNFO/GNFP formulas under active-domain semantics.

``answers`` evaluates set-at-a-time: each subformula extends a context
table of partial assignments.  Negation only ever filters the rows of its
guard.  ``fo_oracle_answers`` is an independent tuple-at-a-time Tarskian
evaluator over unrestricted first-order formulas, used as a test oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

from .errors import GnqError
from .formula import (
    And,
    Const,
    EqAtom,
    Exists,
    Formula,
    GuardedNeg,
    Lfp,
    Or,
    RelAtom,
    Schema,
    SecondOrderAtom,
    Top,
    Var,
    all_vars,
    constants,
    free_so_vars,
    free_vars,
    fresh_name,
    sorted_vars,
    substitute,
)
from .instance import Instance


class EvaluationError(GnqError):
    pass


# --- tables ----------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    cols: tuple
    rows: frozenset

    def index(self, names) -> list:
        return [self.cols.index(n) for n in names]

    def project(self, names) -> "Table":
        idx = self.index(names)
        return Table(tuple(names), frozenset(tuple(r[i] for i in idx) for r in self.rows))


UNIT = Table((), frozenset({()}))


def join(a: Table, b: Table) -> Table:
    common = [c for c in a.cols if c in b.cols]
    extra = [c for c in b.cols if c not in a.cols]
    ai = a.index(common)
    bi = b.index(common)
    ei = b.index(extra)
    buckets: dict = {}
    for r in b.rows:
        buckets.setdefault(tuple(r[i] for i in bi), []).append(tuple(r[i] for i in ei))
    rows = set()
    for r in a.rows:
        for tail in buckets.get(tuple(r[i] for i in ai), ()):
            rows.add(r + tail)
    return Table(a.cols + tuple(extra), frozenset(rows))


def pad(t: Table, cols: tuple, domain) -> Table:
    missing = [c for c in cols if c not in t.cols]
    rows = t.rows
    cur = t.cols
    if missing:
        ext = set()
        for r in rows:
            for combo in itertools.product(domain, repeat=len(missing)):
                ext.add(r + combo)
        rows = frozenset(ext)
        cur = cur + tuple(missing)
    return Table(cur, rows).project(cols) if cur != tuple(cols) else Table(cur, rows)


# --- set-at-a-time evaluator -----------------------------------------------

class _Evaluator:
    def __init__(self, inst: Instance, domain: frozenset, on_stage: Callable | None):
        self.inst = inst
        self.domain = tuple(sorted(domain))
        self.on_stage = on_stage
        self.cache: dict = {}

    def value(self, t) -> str:
        return t.name

    def match(self, terms: tuple, rows, ctx: Table) -> Table:
        names: list = []
        for t in terms:
            if isinstance(t, Var) and t.name not in names:
                names.append(t.name)
        out = set()
        for row in rows:
            binding: dict = {}
            ok = True
            for t, v in zip(terms, row):
                if isinstance(t, Const):
                    if t.name != v:
                        ok = False
                        break
                else:
                    prev = binding.get(t.name)
                    if prev is None:
                        binding[t.name] = v
                    elif prev != v:
                        ok = False
                        break
            if ok:
                out.add(tuple(binding[n] for n in names))
        return join(ctx, Table(tuple(names), frozenset(out)))

    def eval(self, f: Formula, ctx: Table, env: dict) -> Table:
        if isinstance(f, Top):
            return ctx
        if isinstance(f, RelAtom):
            return self.match(f.terms, self.inst.relation(f.rel), ctx)
        if isinstance(f, SecondOrderAtom):
            if f.var not in env:
                raise EvaluationError(f"free second-order variable {f.var}")
            return self.match(f.terms, env[f.var], ctx)
        if isinstance(f, EqAtom):
            return self.equality(f, ctx)
        if isinstance(f, And):
            return self.eval(f.rhs, self.eval(f.lhs, ctx, env), env)
        if isinstance(f, Or):
            target = ctx.cols + tuple(v for v in sorted_vars(free_vars(f)) if v not in ctx.cols)
            left = pad(self.eval(f.lhs, ctx, env), target, self.domain)
            right = pad(self.eval(f.rhs, ctx, env), target, self.domain)
            return Table(target, left.rows | right.rows)
        if isinstance(f, Exists):
            body, v = f.body, f.var
            if v in ctx.cols:
                v = fresh_name(v, set(ctx.cols) | all_vars(body))
                body = substitute(body, {f.var: Var(v)})
            inner = self.eval(body, ctx, env)
            if v not in inner.cols:
                # vacuous quantifier: true iff the domain is nonempty
                return inner if self.domain else Table(inner.cols, frozenset())
            keep = tuple(c for c in inner.cols if c != v)
            return inner.project(keep)
        if isinstance(f, GuardedNeg):
            g = self.eval(f.guard, ctx, env)
            bv = sorted_vars(free_vars(f.body))
            missing = [v for v in bv if v not in g.cols]
            if missing:
                raise EvaluationError(f"negation does not guard {missing}")
            keys = g.project(bv)
            b = self.eval(f.body, keys, env).project(bv)
            idx = g.index(bv)
            return Table(g.cols, frozenset(r for r in g.rows if tuple(r[i] for i in idx) not in b.rows))
        if isinstance(f, Lfp):
            rel = self.fixpoint(f, env)[f.component]
            return self.match(f.args, rel, ctx)
        raise TypeError(f"not a formula: {f!r}")

    def equality(self, f: EqAtom, ctx: Table) -> Table:
        a, b = f.left, f.right
        if isinstance(a, Const) and isinstance(b, Const):
            return ctx if a.name == b.name else Table(ctx.cols, frozenset())
        if isinstance(a, Const):
            a, b = b, a
        if isinstance(b, Const):
            return join(ctx, Table((a.name,), frozenset({(b.name,)})))
        if a.name == b.name:
            return join(ctx, Table((a.name,), frozenset((d,) for d in self.domain)))
        if a.name in ctx.cols and b.name in ctx.cols:
            i, j = ctx.index((a.name, b.name))
            return Table(ctx.cols, frozenset(r for r in ctx.rows if r[i] == r[j]))
        if a.name in ctx.cols or b.name in ctx.cols:
            known, new = (a.name, b.name) if a.name in ctx.cols else (b.name, a.name)
            i = ctx.cols.index(known)
            return Table(ctx.cols + (new,), frozenset(r + (r[i],) for r in ctx.rows))
        return join(ctx, Table((a.name, b.name), frozenset((d, d) for d in self.domain)))

    def fixpoint(self, f: Lfp, env: dict) -> list:
        key_env = tuple(sorted((x, env[x]) for x in free_so_vars(f) if x in env))
        key = (id(f), key_env)
        hit = self.cache.get(key)
        if hit is not None and hit[0] is f:
            return hit[1]
        stages = [frozenset() for _ in f.defs]
        step = 0
        while True:
            local = dict(env)
            for d, s in zip(f.defs, stages):
                local[d.var] = s
            new = [self.stage(d, local) for d in f.defs]
            if self.on_stage is not None:
                self.on_stage(f, step, stages, new)
            if new == stages:
                break
            stages = new
            step += 1
        self.cache[key] = (f, stages)
        return stages

    def stage(self, d, env: dict) -> frozenset:
        out = set()
        for dis in d.guard.disjuncts:
            g = self.eval(dis.atom, UNIT, env)
            keep = tuple(c for c in g.cols if c not in dis.bound)
            g = g.project(keep)
            t = self.eval(d.body, g, env)
            t = pad(t, d.params, self.domain).project(d.params)
            out |= t.rows
        return frozenset(out)


def evaluation_domain(f: Formula, inst: Instance, schema: Schema | None = None) -> frozenset:
    dom = set(inst.active_domain)
    declared = set(schema.constants) if schema else set(inst.schema.constants)
    for c in constants(f):
        if c not in dom and c not in declared:
            raise EvaluationError(f"unknown constant {c}")
        dom.add(c)
    return frozenset(dom)


def answers(f: Formula, inst: Instance, order: tuple | None = None, schema: Schema | None = None,
            on_stage: Callable | None = None) -> set:
    """Tuples over ``order`` (default: free variables in natural order)
    satisfying ``f`` in ``inst``.  Quantifiers range over the active domain.

    ``on_stage(lfp, step, previous, current)`` observes fixpoint iteration.
    """
    if order is None:
        order = sorted_vars(free_vars(f))
    order = tuple(order)
    dom = evaluation_domain(f, inst, schema)
    ev = _Evaluator(inst, dom, on_stage)
    table = ev.eval(f, UNIT, {})
    if len(set(order)) != len(order):
        base = tuple(dict.fromkeys(order))
        t = pad(table, base, ev.domain).project(base)
        idx = [base.index(v) for v in order]
        return {tuple(r[i] for i in idx) for r in t.rows}
    t = pad(table, order, ev.domain)
    return set(t.project(order).rows)


def holds(f: Formula, inst: Instance, schema: Schema | None = None) -> bool:
    """Truth of a sentence."""
    return () in answers(f, inst, (), schema)


# --- raw first-order oracle -------------------------------------------------

@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class Forall:
    var: str
    body: object


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object


def raw_free_vars(f) -> frozenset:
    if isinstance(f, Not):
        return raw_free_vars(f.body)
    if isinstance(f, Forall):
        return raw_free_vars(f.body) - {f.var}
    if isinstance(f, Implies):
        return raw_free_vars(f.lhs) | raw_free_vars(f.rhs)
    if isinstance(f, (And, Or)):
        return raw_free_vars(f.lhs) | raw_free_vars(f.rhs)
    if isinstance(f, Exists):
        return raw_free_vars(f.body) - {f.var}
    if isinstance(f, GuardedNeg):
        return raw_free_vars(f.guard) | raw_free_vars(f.body)
    return free_vars(f)


def fo_oracle_answers(f, inst: Instance, order: tuple | None = None, max_assignments: int = 10**7) -> set:
    """Brute-force Tarskian evaluation: try every assignment of domain
    values to the answer variables and decide truth recursively."""
    if order is None:
        order = sorted_vars(raw_free_vars(f))
    dom = sorted(set(inst.active_domain) | _raw_constants(f))
    if len(dom) ** len(order) > max_assignments:
        raise EvaluationError("oracle size guard exceeded")
    oracle = _Oracle(inst, dom)
    out = set()
    for combo in itertools.product(dom, repeat=len(order)):
        asg = dict(zip(order, combo))
        if oracle.truth(f, asg, {}):
            out.add(combo)
    return out


def _raw_constants(f) -> set:
    if isinstance(f, Not):
        return _raw_constants(f.body)
    if isinstance(f, Forall):
        return _raw_constants(f.body)
    if isinstance(f, (Implies, And, Or)):
        return _raw_constants(f.lhs) | _raw_constants(f.rhs)
    if isinstance(f, Exists):
        return _raw_constants(f.body)
    if isinstance(f, GuardedNeg):
        return _raw_constants(f.guard) | _raw_constants(f.body)
    return constants(f)


class _Oracle:
    def __init__(self, inst: Instance, dom: list):
        self.inst = inst
        self.dom = dom

    def val(self, t, asg):
        return t.name if isinstance(t, Const) else asg[t.name]

    def truth(self, f, asg: dict, env: dict) -> bool:
        if isinstance(f, Top):
            return True
        if isinstance(f, RelAtom):
            return tuple(self.val(t, asg) for t in f.terms) in self.inst.relation(f.rel)
        if isinstance(f, SecondOrderAtom):
            return tuple(self.val(t, asg) for t in f.terms) in env[f.var]
        if isinstance(f, EqAtom):
            return self.val(f.left, asg) == self.val(f.right, asg)
        if isinstance(f, And):
            return self.truth(f.lhs, asg, env) and self.truth(f.rhs, asg, env)
        if isinstance(f, Or):
            return self.truth(f.lhs, asg, env) or self.truth(f.rhs, asg, env)
        if isinstance(f, Implies):
            return (not self.truth(f.lhs, asg, env)) or self.truth(f.rhs, asg, env)
        if isinstance(f, Not):
            return not self.truth(f.body, asg, env)
        if isinstance(f, GuardedNeg):
            return self.truth(f.guard, asg, env) and not self.truth(f.body, asg, env)
        if isinstance(f, Exists):
            return any(self.truth(f.body, {**asg, f.var: d}, env) for d in self.dom)
        if isinstance(f, Forall):
            return all(self.truth(f.body, {**asg, f.var: d}, env) for d in self.dom)
        if isinstance(f, Lfp):
            rels = self.fixpoint(f, env)
            return tuple(self.val(t, asg) for t in f.args) in rels[f.component]
        raise TypeError(f"not a formula: {f!r}")

    def fixpoint(self, f: Lfp, env: dict) -> list:
        cur = [frozenset() for _ in f.defs]
        while True:
            local = dict(env)
            local.update({d.var: s for d, s in zip(f.defs, cur)})
            nxt = []
            for d in f.defs:
                guard = d.guard.as_formula()
                rel = set()
                for combo in itertools.product(self.dom, repeat=len(d.params)):
                    asg = dict(zip(d.params, combo))
                    if self.truth(guard, asg, local) and self.truth(d.body, asg, local):
                        rel.add(combo)
                nxt.append(frozenset(rel))
            if nxt == cur:
                return cur
            cur = nxt
