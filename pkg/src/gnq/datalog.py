"""Datalog with stratified negation.

Program text::

    X(x,y) :- E(x,y), not S(x,y).
    ---                                 (explicit stratum boundary)
    Z :- F(x).                          (nullary atoms may drop the parens)
    ?- ans(x) :- X(x,y), P(y).          (answer UCQ; several clauses are unioned)

Without ``---`` separators the strata are computed from the dependency
graph.  Rule bodies may also use ``x = y`` between positively bound
variables; such equalities are sugar for filtering and carry no guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .errors import GnqError, ParseError, StratificationError
from .evaluator import answers
from .formula import (
    EqAtom,
    RelAtom,
    Schema,
    Var,
    conj,
    disj,
    exists,
    free_vars,
    substitute,
    term_vars,
)
from .instance import Fact, Instance
from .lexer import TokenStream, tokenize


class DatalogError(GnqError):
    pass


@dataclass(frozen=True)
class Literal:
    atom: RelAtom
    negated: bool = False

    def __str__(self) -> str:
        return ("not " if self.negated else "") + _atom_text(self.atom)


@dataclass(frozen=True)
class Rule:
    head: RelAtom
    body: tuple  # Literal or EqAtom
    pos: tuple = field(default=(0, 0), compare=False)

    def positive(self) -> list:
        return [l.atom for l in self.body if isinstance(l, Literal) and not l.negated]

    def negative(self) -> list:
        return [l.atom for l in self.body if isinstance(l, Literal) and l.negated]

    def equalities(self) -> list:
        return [l for l in self.body if isinstance(l, EqAtom)]

    def variables(self) -> list:
        """Rule variables in order of first occurrence, head first."""
        out: list = []
        for a in [self.head] + [l.atom if isinstance(l, Literal) else l for l in self.body]:
            ts = a.terms if isinstance(a, RelAtom) else (a.left, a.right)
            for v in term_vars(ts):
                if v not in out:
                    out.append(v)
        return out

    def __str__(self) -> str:
        body = ", ".join(str(l) if isinstance(l, Literal) else f"{l.left} = {l.right}" for l in self.body)
        return f"{_atom_text(self.head)} :- {body}."


@dataclass(frozen=True)
class AnswerClause:
    head: tuple  # answer terms (variables)
    body: tuple  # RelAtom or EqAtom


@dataclass(frozen=True)
class StratifiedProgram:
    strata: tuple  # tuple of tuples of Rule
    ans: tuple = ()  # AnswerClause; empty means no answer query
    edb_arities: dict = field(default_factory=dict, compare=False)

    def __hash__(self):
        return hash((self.strata, self.ans))

    @property
    def rules(self) -> list:
        return [r for s in self.strata for r in s]

    def idb(self) -> dict:
        out: dict = {}
        for r in self.rules:
            out[r.head.rel] = len(r.head.terms)
        return out

    def idb_stratum(self) -> dict:
        return {r.head.rel: k for k, s in enumerate(self.strata) for r in s}

    def edb(self) -> dict:
        idb = self.idb()
        out = dict(self.edb_arities)
        for r in self.rules:
            for a in r.positive() + r.negative():
                if a.rel not in idb:
                    out.setdefault(a.rel, len(a.terms))
        for c in self.ans:
            for a in c.body:
                if isinstance(a, RelAtom) and a.rel not in idb:
                    out.setdefault(a.rel, len(a.terms))
        return out

    @property
    def answer_arity(self) -> int | None:
        return len(self.ans[0].head) if self.ans else None

    def is_recursive(self) -> bool:
        for s in self.strata:
            heads = {r.head.rel for r in s}
            for r in s:
                if any(a.rel in heads for a in r.positive() + r.negative()):
                    return True
        return False


def _atom_text(a: RelAtom) -> str:
    if not a.terms:
        return a.rel
    return f"{a.rel}({','.join(t.name for t in a.terms)})"


def format_program(p: StratifiedProgram) -> str:
    lines = []
    for k, s in enumerate(p.strata):
        if k:
            lines.append("---")
        lines.extend(str(r) for r in s)
    for c in p.ans:
        head = ",".join(t.name for t in c.head)
        body = ", ".join(_atom_text(a) if isinstance(a, RelAtom) else f"{a.left} = {a.right}" for a in c.body)
        lines.append(f"?- ans({head}) :- {body}.")
    return "\n".join(lines) + "\n"


# --- parsing -------------------------------------------------------------------

def parse_datalog(text: str, source: str | None = None, stratified: bool | None = None) -> StratifiedProgram:
    """Parse a program.  Explicit ``---`` separators are honored verbatim;
    otherwise (or with ``stratified=False``) strata are computed."""
    ts = TokenStream(tokenize(text, source=source), source)
    groups: list = [[]]
    ans: list = []
    explicit = False
    while ts.peek.kind != "eof":
        if ts.accept("---"):
            explicit = True
            groups.append([])
            continue
        if ts.at("?-"):
            ts.next()
            ans.append(_answer_clause(ts))
            continue
        groups[-1].append(_rule(ts))
    groups = [g for g in groups if g]
    rules = [r for g in groups for r in g]
    for r in rules:
        _check_safe(r, source)
    if explicit and stratified is not False:
        prog = StratifiedProgram(tuple(tuple(g) for g in groups), tuple(ans))
        validate_strata(prog)
        return prog
    return stratify(rules, tuple(ans))


def _atom(ts: TokenStream) -> RelAtom:
    name = ts.expect_ident("relation name")
    terms = []
    if ts.accept("("):
        if not ts.at(")"):
            terms.append(_var(ts))
            while ts.accept(","):
                terms.append(_var(ts))
        ts.expect(")")
    return RelAtom(name.text, tuple(terms))


def _var(ts: TokenStream) -> Var:
    tok = ts.next()
    if tok.kind != "ident":
        ts.error(f"expected a variable, found {ts.describe(tok)}", tok)
    return Var(tok.text)


def _body_item(ts: TokenStream):
    if ts.at_keyword("not") and ts.peek_at(1).kind == "ident":
        ts.next()
        return Literal(_atom(ts), True)
    if ts.peek.kind == "ident" and ts.peek_at(1).text == "=":
        left = _var(ts)
        ts.expect("=")
        return EqAtom(left, _var(ts))
    return Literal(_atom(ts), False)


def _rule(ts: TokenStream) -> Rule:
    start = ts.peek
    head = _atom(ts)
    ts.expect(":-")
    body = [_body_item(ts)]
    while ts.accept(","):
        body.append(_body_item(ts))
    ts.expect(".")
    return Rule(head, tuple(body), (start.line, start.column))


def _answer_clause(ts: TokenStream) -> AnswerClause:
    head = _atom(ts)
    ts.expect(":-")
    body = []
    while True:
        item = _body_item(ts)
        if isinstance(item, Literal):
            if item.negated:
                ts.error("the answer query is a union of conjunctive queries; negation is not allowed")
            body.append(item.atom)
        else:
            body.append(item)
        if not ts.accept(","):
            break
    ts.expect(".")
    return AnswerClause(head.terms, tuple(body))


def _check_safe(r: Rule, source=None):
    pos_vars = set()
    for a in r.positive():
        pos_vars |= set(term_vars(a.terms))
    for v in r.variables():
        if v not in pos_vars:
            raise ParseError(f"variable {v} does not occur in a positive body atom", r.pos[0], r.pos[1], source)


def make_program(strata, ans=(), edb_arities=None) -> StratifiedProgram:
    prog = StratifiedProgram(tuple(tuple(s) for s in strata), tuple(ans), dict(edb_arities or {}))
    for r in prog.rules:
        _check_safe(r)
    validate_strata(prog)
    return prog


# --- stratification ------------------------------------------------------------

def validate_strata(p: StratifiedProgram):
    seen: dict = {}
    for k, s in enumerate(p.strata):
        for r in s:
            if r.head.rel in seen and seen[r.head.rel] != k:
                raise StratificationError(f"{r.head.rel} is defined in strata {seen[r.head.rel] + 1} and {k + 1}")
            seen[r.head.rel] = k
    arities: dict = {}
    for r in p.rules:
        for a in [r.head] + r.positive() + r.negative():
            if arities.setdefault(a.rel, len(a.terms)) != len(a.terms):
                raise DatalogError(f"{a.rel} used with arities {arities[a.rel]} and {len(a.terms)}")
    for k, s in enumerate(p.strata):
        for r in s:
            for a in r.positive():
                if seen.get(a.rel, -1) > k:
                    raise StratificationError(f"{a.rel} is used in stratum {k + 1} before it is defined")
            for a in r.negative():
                if seen.get(a.rel, -1) >= k:
                    raise StratificationError(
                        f"{a.rel} is negated in stratum {k + 1} but not defined in a lower stratum")


def stratify(rules: list, ans: tuple = ()) -> StratifiedProgram:
    """Least stratification by condensing the predicate dependency graph."""
    g = nx.DiGraph()
    heads = {r.head.rel for r in rules}
    for r in rules:
        g.add_node(r.head.rel)
        for a in r.positive():
            if a.rel in heads:
                neg = g.edges[a.rel, r.head.rel]["neg"] if g.has_edge(a.rel, r.head.rel) else False
                g.add_edge(a.rel, r.head.rel, neg=neg)
        for a in r.negative():
            if a.rel in heads:
                g.add_edge(a.rel, r.head.rel, neg=True)
    comp = nx.condensation(g)
    member = comp.graph["mapping"]
    for u, v, d in g.edges(data=True):
        if d["neg"] and member[u] == member[v]:
            cycle = _negative_cycle(g, u, v)
            raise StratificationError("negation through recursion: " + " -> ".join(cycle))
    level: dict = {}
    for c in nx.topological_sort(comp):
        lv = 0
        for pred in comp.predecessors(c):
            for u in comp.nodes[pred]["members"]:
                for v in comp.nodes[c]["members"]:
                    if g.has_edge(u, v):
                        lv = max(lv, level[pred] + (1 if g.edges[u, v]["neg"] else 0))
        level[c] = lv
    by_level: dict = {}
    for r in rules:
        by_level.setdefault(level[member[r.head.rel]], []).append(r)
    strata = tuple(tuple(by_level[k]) for k in sorted(by_level))
    return StratifiedProgram(strata, tuple(ans))


def _negative_cycle(g: nx.DiGraph, u: str, v: str) -> list:
    path = nx.shortest_path(g, v, u)
    return [u] + path


# --- guardedness ---------------------------------------------------------------

@dataclass(frozen=True)
class GuardViolation:
    target: str  # "head" or "neg:<atom>"
    missing: frozenset


@dataclass(frozen=True)
class RuleVerdict:
    index: int  # 0-based position in the flattened rule list
    stratum: int  # 0-based
    rule: Rule
    violations: tuple

    @property
    def guarded(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class GuardReport:
    verdicts: tuple

    @property
    def ok(self) -> bool:
        return all(v.guarded for v in self.verdicts)

    def __bool__(self) -> bool:
        return self.ok

    def violations(self) -> list:
        return [(v.index, x) for v in self.verdicts for x in v.violations]


def check_gn_datalog(p: StratifiedProgram, idb_guards: bool = False) -> GuardReport:
    """Negation guardedness of every rule.

    Strict mode takes guards from ``EDB`` of the rule's stratum (base
    relations and IDBs of lower strata).  With ``idb_guards`` any positive
    body atom may serve, including IDBs of the same stratum.
    """
    strat = p.idb_stratum()
    verdicts = []
    index = 0
    for k, s in enumerate(p.strata):
        for r in s:
            if idb_guards:
                guards = r.positive()
            else:
                guards = [a for a in r.positive() if strat.get(a.rel, -1) < k]
            targets = [("head", r.head)] + [(f"neg:{_atom_text(a)}", a) for a in r.negative()]
            vs = []
            for name, a in targets:
                need = set(term_vars(a.terms))
                best = None
                for gd in guards:
                    miss = need - set(term_vars(gd.terms))
                    if best is None or len(miss) < len(best):
                        best = miss
                if best is None:
                    best = need if need else {"<no guard atom>"}
                if best:
                    vs.append(GuardViolation(name, frozenset(best)))
            verdicts.append(RuleVerdict(index, k, r, tuple(vs)))
            index += 1
    return GuardReport(tuple(verdicts))


def guard_atom(r: Rule, target: RelAtom, allowed) -> RelAtom | None:
    need = set(term_vars(target.terms))
    for a in r.positive():
        if allowed(a) and need <= set(term_vars(a.terms)):
            return a
    return None


# --- evaluation ----------------------------------------------------------------

@dataclass
class EvalTrace:
    """Per-stratum sequence of derived-fact counts, for monotonicity checks."""
    stages: list = field(default_factory=list)


def _match(atom: RelAtom, row: tuple, binding: dict) -> dict | None:
    out = binding
    copied = False
    for t, v in zip(atom.terms, row):
        prev = out.get(t.name)
        if prev is None:
            if not copied:
                out = dict(out)
                copied = True
            out[t.name] = v
        elif prev != v:
            return None
    return out if copied else dict(out)


class _Db:
    def __init__(self, rels: dict):
        self.rels = rels
        self.index: dict = {}

    def get(self, rel: str) -> set:
        return self.rels.get(rel, set())

    def lookup(self, atom: RelAtom, binding: dict, source: set | None = None):
        rows = self.get(atom.rel) if source is None else source
        bound = [(i, binding[t.name]) for i, t in enumerate(atom.terms) if t.name in binding]
        if not bound or source is not None:
            return rows
        key = (atom.rel, tuple(i for i, _ in bound))
        idx = self.index.get(key)
        if idx is None:
            idx = {}
            for row in rows:
                idx.setdefault(tuple(row[i] for i, _ in bound), []).append(row)
            self.index[key] = idx
        return idx.get(tuple(v for _, v in bound), ())


def _fire(r: Rule, db: _Db, delta_pos: int | None = None, delta: dict | None = None) -> set:
    pos = r.positive()
    out = set()

    def go(i: int, binding: dict):
        if i == len(pos):
            for e in r.equalities():
                if binding[e.left.name] != binding[e.right.name]:
                    return
            for a in r.negative():
                if tuple(binding[t.name] for t in a.terms) in db.get(a.rel):
                    return
            out.add(tuple(binding[t.name] for t in r.head.terms))
            return
        a = pos[i]
        src = delta.get(a.rel, set()) if i == delta_pos else None
        for row in db.lookup(a, binding, src):
            b = _match(a, row, binding)
            if b is not None:
                go(i + 1, b)

    go(0, {})
    return out


def eval_stratified(p: StratifiedProgram, inst: Instance, mode: str = "semi-naive",
                    trace: EvalTrace | None = None) -> tuple:
    """``(model, answers)``: the stratified fixpoint as an Instance and the
    answer-query tuples (``None`` without an answer query)."""
    idb = p.idb()
    for rel in inst.relation_names():
        if rel in idb and inst.relation(rel):
            raise DatalogError(f"input instance has facts for IDB relation {rel}")
    rels = {r: set(inst.relation(r)) for r in inst.relation_names()}
    for k, stratum in enumerate(p.strata):
        heads = {r.head.rel for r in stratum}
        for h in heads:
            rels.setdefault(h, set())
        stages: list = []
        if mode == "naive":
            _naive(stratum, rels, stages)
        elif mode == "semi-naive":
            _semi_naive(stratum, rels, heads, stages)
        else:
            raise ValueError(f"unknown mode {mode}")
        if trace is not None:
            trace.stages.append(stages)
    facts = [Fact(r, t) for r, rows in rels.items() for t in rows]
    schema_rels = dict(inst.schema.relations)
    schema_rels.update(idb)
    model = Instance(facts, Schema(schema_rels, inst.schema.constants))
    result = answer_ucq(p, model) if p.ans else None
    return model, result


def _naive(stratum, rels: dict, stages: list):
    while True:
        db = _Db(rels)
        new = {}
        for r in stratum:
            new.setdefault(r.head.rel, set()).update(_fire(r, db))
        grown = False
        for rel, rows in new.items():
            if not rows <= rels[rel]:
                grown = True
        stages.append(sum(len(rels[h]) for h in {r.head.rel for r in stratum}))
        if not grown:
            return
        for rel, rows in new.items():
            rels[rel] = rels[rel] | rows


def _semi_naive(stratum, rels: dict, heads: set, stages: list):
    db = _Db(rels)
    delta: dict = {}
    for r in stratum:
        for t in _fire(r, db):
            if t not in rels[r.head.rel]:
                delta.setdefault(r.head.rel, set()).add(t)
    stages.append(sum(len(rels[h]) for h in heads))
    while delta:
        for rel, rows in delta.items():
            rels[rel] = rels[rel] | rows
        stages.append(sum(len(rels[h]) for h in heads))
        db = _Db(rels)
        new: dict = {}
        for r in stratum:
            for i, a in enumerate(r.positive()):
                if a.rel in heads and delta.get(a.rel):
                    for t in _fire(r, db, i, delta):
                        if t not in rels[r.head.rel]:
                            new.setdefault(r.head.rel, set()).add(t)
        delta = new


def ucq_formula(p: StratifiedProgram, prefix: str = "a") -> tuple:
    """The answer UCQ as a formula over ``a1..ak`` plus that variable order."""
    k = p.answer_arity or 0
    order = tuple(f"{prefix}{i}" for i in range(1, k + 1))
    parts = []
    for c in p.ans:
        if len(c.head) != k:
            raise DatalogError("answer clauses differ in arity")
        inner = set()
        for a in c.body:
            inner |= free_vars(a)
        inner |= set(term_vars(c.head))
        taken = set(order)
        ren = {}
        for v in sorted(inner):
            if v in taken:
                nv = v
                i = 0
                while nv in taken or nv in inner:
                    i += 1
                    nv = f"{v}_{i}"
                ren[v] = Var(nv)
                taken.add(nv)
        body = [substitute(a, ren) for a in c.body]
        head = [ren.get(t.name, t) for t in c.head]
        eqs = [EqAtom(Var(o), h) for o, h in zip(order, head)]
        bound = sorted({v for a in body + eqs for v in free_vars(a)} - set(order))
        parts.append(exists(bound, conj(body + eqs)))
    return disj(parts), order


def answer_ucq(p: StratifiedProgram, model: Instance) -> set:
    f, order = ucq_formula(p)
    return answers(f, model, order)
