"""Seeded random generators for formulas, queries, programs and instances."""

from __future__ import annotations

import itertools
import random

from gnq.datalog import AnswerClause, Literal, Rule, make_program
from gnq.formula import (
    TRUE,
    And,
    EqAtom,
    Exists,
    GuardedNeg,
    Or,
    RelAtom,
    Schema,
    Var,
    free_vars,
)
from gnq.instance import Fact, Instance
from gnq.sql import NamedSchema

SCHEMA = Schema({"R": 2, "S": 1, "T": 2})
CATALOG = NamedSchema({"R": ("a", "b"), "S": ("a",), "T": ("a", "b")})
VALUES = ("a", "b", "c", "d", "e")


def random_instance(rng: random.Random, schema: Schema = SCHEMA, max_elems: int = 5,
                    max_facts: int = 25) -> Instance:
    dom = VALUES[: rng.randint(1, max_elems)]
    facts = set()
    for _ in range(rng.randint(0, max_facts)):
        rel = rng.choice(sorted(schema.relations))
        facts.add(Fact(rel, tuple(rng.choice(dom) for _ in range(schema.relations[rel]))))
    return Instance(facts, schema)


def instances(seed: int, n: int, **kw) -> list:
    rng = random.Random(seed)
    return [random_instance(rng, **kw) for _ in range(n)]


# --- GNFO ------------------------------------------------------------------------

class FormulaGen:
    """Random GNFO formulas whose free variables come from a given pool."""

    def __init__(self, rng: random.Random, schema: Schema = SCHEMA, top_guards: bool = False,
                 max_depth: int = 3):
        self.rng = rng
        self.schema = schema
        self.top_guards = top_guards
        self.max_depth = max_depth
        self.counter = itertools.count()

    def fresh(self) -> str:
        return f"z{next(self.counter)}"

    def atom(self, pool: list):
        rng = self.rng
        if len(pool) >= 2 and rng.random() < 0.15:
            a, b = rng.sample(pool, 2)
            return EqAtom(Var(a), Var(b))
        rel = rng.choice(sorted(self.schema.relations))
        return RelAtom(rel, tuple(Var(rng.choice(pool)) for _ in range(self.schema.relations[rel])))

    def formula(self, pool: list, depth: int = 0):
        rng = self.rng
        if not pool:
            v = self.fresh()
            return Exists(v, self.formula([v], depth + 1))
        if depth >= self.max_depth:
            return self.atom(pool)
        k = rng.random()
        if k < 0.25:
            return self.atom(pool)
        if k < 0.45:
            return And(self.formula(pool, depth + 1), self.formula(pool, depth + 1))
        if k < 0.55:
            return Or(self.formula(pool, depth + 1), self.formula(pool, depth + 1))
        if k < 0.75:
            v = self.fresh()
            return Exists(v, self.formula(pool + [v], depth + 1))
        return self.negation(pool, depth)

    def negation(self, pool: list, depth: int):
        rng = self.rng
        if self.top_guards and rng.random() < 0.1:
            return GuardedNeg(TRUE, self.sentence(depth + 1))
        guard = self.atom(pool)
        gvars = sorted(free_vars(guard))
        body = self.formula(gvars, depth + 1)
        return And(guard, GuardedNeg(guard, body)) if rng.random() < 0.3 else GuardedNeg(guard, body)

    def sentence(self, depth: int = 0):
        v = self.fresh()
        return Exists(v, self.formula([v], depth + 1))


def gnfo_formulas(seed: int, n: int, pool=("x1", "x2"), **kw) -> list:
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        g = FormulaGen(rng, **kw)
        size = rng.randint(0, len(pool))
        out.append(g.formula(list(pool[:size]) if size else []))
    return out


# --- GN-RA -----------------------------------------------------------------------

def ra_text(rng: random.Random, arity: int, depth: int = 0, schema: Schema = SCHEMA) -> str:
    """Text of a random guarded RA expression of the given arity."""
    rels = sorted(schema.relations)
    base = [r for r in rels if schema.relations[r] == arity]
    choices = ["atom", "project", "select", "product", "union", "intersect", "diff"]
    if depth >= 3:
        choices = ["atom", "project"]
    while True:
        c = rng.choice(choices)
        if c == "atom" and base:
            return rng.choice(base)
        if c == "project":
            src = rng.choice(rels)
            k = schema.relations[src]
            idx = [rng.randint(1, k) for _ in range(arity)]
            if depth < 3 and rng.random() < 0.5:
                m = rng.randint(1, 3)
                idx = [rng.randint(1, m) for _ in range(arity)]
                return f"project[{','.join(map(str, idx))}]({ra_text(rng, m, depth + 1, schema)})"
            return f"project[{','.join(map(str, idx))}]({src})"
        if c == "select" and arity >= 2:
            i, j = rng.randint(1, arity), rng.randint(1, arity)
            return f"select[{i}={j}]({ra_text(rng, arity, depth + 1, schema)})"
        if c == "product" and arity >= 2:
            a = rng.randint(1, arity - 1)
            return f"({ra_text(rng, a, depth + 1, schema)} x {ra_text(rng, arity - a, depth + 1, schema)})"
        if c in ("union", "intersect"):
            op = "+" if c == "union" else "&"
            return f"({ra_text(rng, arity, depth + 1, schema)} {op} {ra_text(rng, arity, depth + 1, schema)})"
        if c == "diff":
            src = rng.choice(rels)
            k = schema.relations[src]
            idx = [rng.randint(1, k) for _ in range(arity)]
            return f"(project[{','.join(map(str, idx))}]({src}) - {ra_text(rng, arity, depth + 1, schema)})"


# --- GN-SQL ----------------------------------------------------------------------

class SqlGen:
    """Random well-typed negation-guarded FO-SQL text over ``CATALOG``."""

    def __init__(self, rng: random.Random, catalog: NamedSchema = CATALOG, max_depth: int = 2):
        self.rng = rng
        self.catalog = catalog
        self.max_depth = max_depth
        self.counter = itertools.count()

    def tv(self) -> str:
        return f"t{next(self.counter)}"

    def term(self, scope: list) -> str:
        v, rel = self.rng.choice(scope)
        return f"{v}.{self.rng.choice(self.catalog.relations[rel])}"

    def query(self, outer: list, width: int, depth: int = 0) -> str:
        rng = self.rng
        if depth < self.max_depth and rng.random() < 0.25:
            op = rng.choice(["union", "intersect", "except"])
            if op == "except":
                return f"{self.simple(width)} except ({self.query([], width, depth + 1)})"
            return f"{self.sfw(outer, width, depth + 1)} {op} {self.sfw(outer, width, depth + 1)}"
        return self.sfw(outer, width, depth)

    def simple(self, width: int) -> str:
        rel = self.rng.choice(sorted(self.catalog.relations))
        v = self.tv()
        sel = ", ".join(f"{v}.{self.rng.choice(self.catalog.relations[rel])} as o{i + 1}" for i in range(width))
        return f"select {sel} from {rel} {v}"

    def sfw(self, outer: list, width: int, depth: int) -> str:
        rng = self.rng
        local = [(self.tv(), rng.choice(sorted(self.catalog.relations))) for _ in range(rng.randint(1, 2))]
        sel = ", ".join(f"{self.term(local)} as o{i + 1}" for i in range(width))
        frm = ", ".join(f"{rel} {v}" for v, rel in local)
        where = self.cond(local + outer, depth)
        return f"select {sel} from {frm}" + ("" if where == "true" else f" where {where}")

    def cond(self, scope: list, depth: int) -> str:
        rng = self.rng
        k = rng.random()
        if depth >= self.max_depth or k < 0.3:
            return f"{self.term(scope)} = {self.term(scope)}" if rng.random() < 0.85 else "true"
        if k < 0.45:
            return f"({self.cond(scope, depth + 1)} and {self.cond(scope, depth + 1)})"
        if k < 0.55:
            return f"({self.cond(scope, depth + 1)} or {self.cond(scope, depth + 1)})"
        if k < 0.7:
            return f"exists ({self.query(scope, 1, depth + 1)})"
        if k < 0.8:
            return f"{self.term(scope)} in ({self.query(scope, 1, depth + 1)})"
        one = [rng.choice(scope)]
        return f"not ({self.cond(one, depth + 1)})"


def sql_texts(seed: int, n: int) -> list:
    rng = random.Random(seed)
    return [SqlGen(rng).query([], rng.randint(1, 2)) for _ in range(n)]


# --- GN-Datalog ------------------------------------------------------------------

def gn_program(rng: random.Random, recursive: bool, n_strata: int | None = None,
               schema: Schema = SCHEMA, answer: bool = True):
    """A strictly negation-guarded stratified program with an answer query."""
    n_strata = n_strata or rng.randint(1, 3)
    arities = dict(schema.relations)
    lower = dict(schema.relations)  # relations usable as guards and under negation
    strata = []
    counter = itertools.count(1)
    for k in range(n_strata):
        heads = {f"P{next(counter)}": rng.randint(1, 2) for _ in range(rng.randint(1, 2))}
        rules = []
        for h, ar in heads.items():
            for _ in range(rng.randint(1, 2)):
                rules.append(_gn_rule(rng, h, ar, lower, heads if recursive else {}))
        strata.append(rules)
        lower.update(heads)
        arities.update(heads)
    idbs = [r for r in arities if r not in schema.relations]
    ans = []
    if answer:
        target = rng.choice(idbs)
        ar = arities[target]
        width = rng.randint(0, ar)
        for _ in range(rng.randint(1, 2)):
            vs = [f"v{i}" for i in range(ar)]
            body = [RelAtom(target, tuple(Var(v) for v in vs))]
            if rng.random() < 0.4:
                extra = rng.choice(sorted(lower))
                body.append(RelAtom(extra, tuple(Var(rng.choice(vs)) for _ in range(lower[extra]))))
            ans.append(AnswerClause(tuple(Var(v) for v in vs[:width]), tuple(body)))
    return make_program(strata, ans, dict(schema.relations))


def _gn_rule(rng, head: str, ar: int, lower: dict, same: dict) -> Rule:
    grel = rng.choice(sorted(r for r in lower if lower[r] >= 1))
    gvars = [f"y{i}" for i in range(lower[grel])]
    if rng.random() < 0.3 and len(gvars) >= 2:
        gvars[1] = gvars[0]
    guard = RelAtom(grel, tuple(Var(v) for v in gvars))
    distinct = sorted(set(gvars))
    if len(distinct) < ar:
        # the guard cannot cover a wider head; pick another guard
        return _gn_rule(rng, head, ar, lower, same)
    hv = rng.sample(distinct, ar)
    body = [Literal(guard)]
    pool = list(distinct)
    for _ in range(rng.randint(0, 2)):
        rel = rng.choice(sorted(lower) + sorted(same))
        n = lower.get(rel, same.get(rel))
        if rel in same:
            # recursive atoms reuse guard variables so rules stay safe
            body.append(Literal(RelAtom(rel, tuple(Var(rng.choice(distinct)) for _ in range(n)))))
        else:
            vs = []
            for _ in range(n):
                if rng.random() < 0.3:
                    v = f"w{len(pool)}"
                    pool.append(v)
                else:
                    v = rng.choice(pool)
                vs.append(v)
            body.append(Literal(RelAtom(rel, tuple(Var(v) for v in vs))))
    for _ in range(rng.randint(0, 2)):
        rel = rng.choice(sorted(lower))
        body.append(Literal(RelAtom(rel, tuple(Var(rng.choice(distinct)) for _ in range(lower[rel]))), True))
    return Rule(RelAtom(head, tuple(Var(v) for v in hv)), tuple(body))


def gn_programs(seed: int, n: int, recursive: bool) -> list:
    rng = random.Random(seed)
    return [gn_program(rng, recursive) for _ in range(n)]


# --- UCQs and serial queries -------------------------------------------------------

def _rel_atom(rng, schema: Schema, pool: list) -> RelAtom:
    rel = rng.choice(sorted(schema.relations))
    return RelAtom(rel, tuple(Var(rng.choice(pool)) for _ in range(schema.relations[rel])))


def _exists(qvars: list, body):
    for v in reversed(qvars):
        body = Exists(v, body)
    return body


def _conj(parts: list):
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _disj(parts: list):
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def ucq(rng: random.Random, free: list, schema: Schema = SCHEMA):
    """A union of one to three conjunctive queries with free variables ``free``."""
    cqs = []
    for _ in range(rng.randint(1, 3)):
        qvars = [f"u{i}" for i in range(rng.randint(0 if free else 1, 2))]
        pool = list(free) + qvars
        atoms = [_rel_atom(rng, schema, pool) for _ in range(rng.randint(1, 3))]
        for v in pool:
            if not any(Var(v) in a.terms for a in atoms):
                rel = max(schema.relations, key=lambda r: (schema.relations[r] == 1, r))
                atoms.append(RelAtom(rel, (Var(v),) * schema.relations[rel]))
        cqs.append(_exists(qvars, _conj(atoms)))
    return _disj(cqs)


class SgnqGen:
    """Boolean serial queries without equalities: positively occurring blocks
    carry at most one negated conjunct, negatively occurring ones up to two.
    Negated blocks are quantified so normalization keeps them whole."""

    def __init__(self, rng: random.Random, schema: Schema = SCHEMA, max_depth: int = 2):
        self.rng = rng
        self.schema = schema
        self.max_depth = max_depth
        self.counter = itertools.count()

    def block(self, pool: list, depth: int, positive: bool):
        rng = self.rng
        lo = 1 if depth or not pool else 0
        qvars = [f"q{next(self.counter)}" for _ in range(rng.randint(lo, 2))]
        vs = list(pool) + qvars
        parts = [_rel_atom(rng, self.schema, vs) for _ in range(rng.randint(1, 2))]
        for v in qvars:
            if not any(Var(v) in a.terms for a in parts):
                parts.append(_rel_atom(rng, self.schema, [v]))
        if depth < self.max_depth:
            n_neg = rng.randint(0, 1) if positive else rng.randint(0, 2)
            for _ in range(n_neg):
                guard = _rel_atom(rng, self.schema, vs)
                gvars = sorted(free_vars(guard))
                sub = self.block(rng.sample(gvars, rng.randint(1, len(gvars))), depth + 1, not positive)
                parts.append(GuardedNeg(guard, sub))
        return _exists(qvars, _conj(parts))

    def query(self):
        return _disj([self.block([], 0, True) for _ in range(self.rng.randint(1, 2))])
