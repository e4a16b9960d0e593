"""Bounded open-world answering and finite model search.

Every search here is complete only up to its budget; running out of budget
is reported as ``none-within-budget`` and never as a negative answer.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .chase import FAILED, STOPPED, TERMINATED, ChaseState, chase, is_null
from .datalog import StratifiedProgram, eval_stratified
from .datalog_translate import GUARD_PREFIX, expand_total
from .dnf import DnfQuery, NegLiteral, dnf_normalize
from .errors import BlowUpError, GnqError
from .evaluator import answers
from .formula import (
    EqAtom,
    Formula,
    RelAtom,
    Schema,
    Top,
    constants,
    free_vars,
    relations,
    sorted_vars,
    walk,
)
from .grounding import Grounder
from .instance import Fact, Instance
from .ra import RaExpr
from .ra_translate import ra_to_gnfo
from .sql_translate import sql_to_gnfo

ENTAILED, NOT_ENTAILED, NOT_WITHIN = "entailed", "not-entailed", "not-entailed-within-budget"
FOUND, NONE_WITHIN = "found", "none-within-budget"

FRESH_PREFIX = "_:f"


@dataclass(frozen=True)
class SearchBudget:
    max_extra_facts: int | None = None  # None: factor * |I|
    max_fresh_values: int = 1
    max_chase_steps: int = 10_000
    factor: int = 3

    def __post_init__(self):
        for name in ("max_fresh_values", "max_chase_steps", "factor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.max_extra_facts is not None and self.max_extra_facts < 0:
            raise ValueError("max_extra_facts must be non-negative")

    def extra_facts(self, inst: Instance) -> int:
        if self.max_extra_facts is not None:
            return self.max_extra_facts
        return self.factor * len(inst)


@dataclass
class OwaVerdict:
    status: str
    chase: ChaseState | None = None

    @property
    def entailed(self) -> bool:
        return self.status == ENTAILED


@dataclass
class SearchResult:
    status: str
    instance: Instance | None = None
    answer: tuple | None = None
    added: tuple = ()
    explored: int = 0

    @property
    def found(self) -> bool:
        return self.status == FOUND


def _holds_at(f: Formula, inst: Instance, answer: tuple, order, schema=None) -> bool:
    return tuple(answer) in answers(f, inst, order, schema=schema)


# --- open-world answering by chase ---------------------------------------------

def owa_answer_cq(inst: Instance, tgds, keys, cq: Formula, answer: tuple = (), order=None,
                  budget: SearchBudget = SearchBudget()) -> OwaVerdict:
    """Certain-answer test for a union of conjunctive queries."""
    if order is None:
        order = sorted_vars(free_vars(cq))
    rels = dict(relations(cq))

    def goal(facts) -> bool:
        schema = Schema({**_fact_rels(facts), **rels})
        return _holds_at(cq, Instance(facts, schema), answer, order)

    state = chase(inst, tgds, keys, budget.max_chase_steps, stop=goal)
    if state.status in (STOPPED, FAILED):
        return OwaVerdict(ENTAILED, state)
    if state.status == TERMINATED:
        return OwaVerdict(NOT_ENTAILED, state)
    return OwaVerdict(NOT_WITHIN, state)


def _fact_rels(facts) -> dict:
    out: dict = {}
    for f in facts:
        out[f.rel] = len(f.values)
    return out


# --- polarity pruning ----------------------------------------------------------

def _polarity(q: DnfQuery, positive: bool, out: dict):
    for b in q.blocks:
        for l in b.literals:
            if isinstance(l, NegLiteral):
                if isinstance(l.guard, RelAtom):
                    out.setdefault(l.guard.rel, set()).add(positive)
                _polarity(l.sub, not positive, out)
            elif isinstance(l, RelAtom):
                out.setdefault(l.rel, set()).add(positive)


def _range_restricted(q: DnfQuery, bound: frozenset) -> bool:
    for b in q.blocks:
        restricted = set(bound)
        for l in b.literals:
            a = l.guard if isinstance(l, NegLiteral) else l
            if isinstance(a, RelAtom):
                restricted |= free_vars(a)
        eqs = [l for l in b.literals if isinstance(l, EqAtom)]
        eqs += [l.guard for l in b.literals if isinstance(l, NegLiteral) and isinstance(l.guard, EqAtom)]
        changed = True
        while changed:
            changed = False
            for e in eqs:
                vs = free_vars(e)
                if vs & restricted and not vs <= restricted:
                    restricted |= vs
                    changed = True
        needed = set(b.qvars)
        for l in b.literals:
            a = l.guard if isinstance(l, NegLiteral) else l
            if not isinstance(a, Top):
                needed |= free_vars(a)
        if not needed <= restricted:
            return False
        for l in b.literals:
            if isinstance(l, NegLiteral) and not _range_restricted(l.sub, frozenset(restricted)):
                return False
    return True


def relevant_relations(q: Formula, inst: Instance) -> tuple:
    """Relations whose facts may matter when refuting ``q``.

    For range-restricted queries the answer depends only on the mentioned
    relations and grows monotonically in relations that occur only
    positively, so adding their facts never helps a refutation.
    """
    rels = dict(inst.schema.relations)
    rels.update(relations(q))
    try:
        d = dnf_normalize(q)
    except (BlowUpError, GnqError):
        return rels, False
    if not _range_restricted(d, frozenset(free_vars(q))):
        return rels, False
    pol: dict = {}
    _polarity(d, True, pol)
    keep = {r: n for r, n in relations(q).items() if False in pol.get(r, set())}
    return keep, True


# --- candidate enumeration ------------------------------------------------------

def _fresh_ok(combo, fresh: list) -> bool:
    """Fresh values must first appear in their canonical order."""
    seen = 0
    for f in combo:
        for v in f.values:
            if v.startswith(FRESH_PREFIX):
                k = fresh.index(v)
                if k > seen:
                    return False
                if k == seen:
                    seen += 1
    return True


class _RefuteCheck:
    def __init__(self, q, base, answer, order, schema):
        self.q, self.base, self.answer, self.order, self.schema = q, base, answer, order, schema

    def __call__(self, combos):
        for idx, combo in combos:
            j = Instance(self.base.facts | set(combo), self.schema)
            if not _holds_at(self.q, j, self.answer, self.order, self.schema):
                return idx
        return None


def _first_hit(check, candidates, workers: int, chunk: int = 512):
    """Index of the first candidate accepted by ``check``; the result does
    not depend on ``workers``."""
    it = enumerate(candidates)
    if workers <= 1:
        hit = check(it)
        return hit
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while True:
            parts = [list(itertools.islice(it, chunk)) for _ in range(workers)]
            parts = [p for p in parts if p]
            if not parts:
                return None
            for hit in pool.map(check, parts):
                if hit is not None:
                    return hit


class _GroundedSearch:
    """Size-bounded DFS over candidate subsets in the order of
    ``itertools.combinations``, pruning prefixes under which ``q`` is
    already true whatever the remaining choices."""

    def __init__(self, circuit, root: int, n: int, fresh_of: list):
        self.circuit, self.root, self.n, self.fresh_of = circuit, root, n, fresh_of
        self.visited = 0

    def run(self, size: int, first: int | None = None):
        assign = [2] * self.n
        if first is None:
            return self._dfs(0, size, assign, 0)
        for i in range(first):
            assign[i] = 0
        assign[first] = 1
        seen = self._fresh_step(first, 0)
        if seen is None:
            return None
        return self._dfs(first + 1, size - 1, assign, seen, [first])

    def _fresh_step(self, i: int, seen: int):
        k = self.fresh_of[i]
        if k is None:
            return seen
        new = [x for x in k if x >= seen]
        if new != list(range(seen, seen + len(new))):
            return None
        return seen + len(new)

    def _dfs(self, i: int, remaining: int, assign: list, seen: int, chosen=None):
        chosen = chosen or []
        self.visited += 1
        if remaining == 0:
            for j in range(i, self.n):
                assign[j] = 0
            v = self.circuit.evaluate(self.root, assign)
            for j in range(i, self.n):
                assign[j] = 2
            return list(chosen) if v == 0 else None
        if self.n - i < remaining:
            return None
        if self.circuit.evaluate(self.root, assign) == 1:
            return None
        for j in range(i, self.n - remaining + 1):
            s2 = self._fresh_step(j, seen)
            if s2 is not None:
                assign[j] = 1
                hit = self._dfs(j + 1, remaining - 1, assign, s2, chosen + [j])
                if hit is not None:
                    for x in range(i, j + 1):
                        assign[x] = 2
                    return hit
            assign[j] = 0
        for x in range(i, self.n):
            assign[x] = 2
        return None


class _BranchRun:
    def __init__(self, search: _GroundedSearch, size: int):
        self.search, self.size = search, size

    def __call__(self, first: int):
        return self.search.run(self.size, first)


def _fresh_indices(f: Fact, fresh: list):
    ks = []
    for v in f.values:
        if v in fresh:
            k = fresh.index(v)
            if k not in ks:
                ks.append(k)
    return ks or None


def _grounded_refute(q, base: Instance, cands: list, fresh: list, answer, order, limit, workers):
    rigid = set(base.active_domain) | set(constants(q)) | set(answer)
    values = sorted(rigid) + fresh
    g = Grounder(base.facts, cands, values, rigid)
    env = dict(zip(order, answer))
    root = g.ground(q, env)
    search = _GroundedSearch(g.c, root, len(cands), [_fresh_indices(f, fresh) for f in cands])
    for size in range(0, min(limit, len(cands)) + 1):
        if size == 0 or workers <= 1:
            hit = search.run(size)
        else:
            hit = None
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for h in pool.map(_BranchRun(search, size), range(len(cands) - size + 1)):
                    if h is not None:
                        hit = h
                        break
        if hit is not None:
            return tuple(cands[i] for i in hit), search.visited
    return None, search.visited


def _groundable(f) -> bool:
    return all(isinstance(x, (Top, RelAtom, EqAtom)) or type(x).__name__ in ("And", "Or", "Exists", "GuardedNeg")
               for x in walk(f))


def owa_refute_bounded(inst: Instance, q: Formula, budget: SearchBudget = SearchBudget(),
                       answer: tuple = (), order=None, workers: int = 1,
                       nulls_as_fresh: bool = False, enumerate_only: bool = False) -> SearchResult:
    """Search for ``J ⊇ I`` with ``answer ∉ q(J)``.

    Extensions add up to ``budget.extra_facts(I)`` facts over the active
    domain plus up to ``max_fresh_values`` fresh values.  The first
    extension in (size, candidate order) is returned.  With
    ``nulls_as_fresh`` the labeled nulls of ``I`` may also be renamed to
    other values first.  Guarded-negation queries are ground into a circuit
    and searched with pruning; ``enumerate_only`` evaluates every candidate.
    """
    if order is None:
        order = sorted_vars(free_vars(q))
    rels, _ = relevant_relations(q, inst)
    schema = Schema({**inst.schema.relations, **relations(q)}, inst.schema.constants)
    limit = budget.extra_facts(inst)
    fresh = [f"{FRESH_PREFIX}{i}" for i in range(1, budget.max_fresh_values + 1)]
    bases = [inst]
    if nulls_as_fresh:
        bases = list(_null_images(inst))
    explored = 0
    grounded = _groundable(q) and not enumerate_only
    for base in bases:
        values = sorted(base.active_domain | set(constants(q)) | set(answer)) + fresh
        cands = [Fact(r, t) for r in sorted(rels) for t in itertools.product(values, repeat=rels[r])]
        cands = [f for f in cands if f not in base.facts]
        if grounded:
            added, n = _grounded_refute(q, base, cands, fresh, tuple(answer), order, limit, workers)
            explored += n
            if added is not None:
                return SearchResult(FOUND, Instance(base.facts | set(added), schema), tuple(answer),
                                    added, explored)
            continue
        check = _RefuteCheck(q, base, tuple(answer), order, schema)
        for size in range(0, min(limit, len(cands)) + 1):
            combos = [c for c in itertools.combinations(cands, size) if _fresh_ok(c, fresh)]
            hit = _first_hit(check, combos, workers)
            if hit is not None:
                explored += hit + 1
                added = combos[hit]
                return SearchResult(FOUND, Instance(base.facts | set(added), schema), tuple(answer),
                                    tuple(added), explored)
            explored += len(combos)
    return SearchResult(NONE_WITHIN, explored=explored)


def _null_images(inst: Instance):
    nulls = sorted({v for f in inst.facts for v in f.values if is_null(v)})
    consts = sorted(v for v in inst.active_domain if not is_null(v))
    yield inst
    if not nulls:
        return
    for image in itertools.product(consts + nulls, repeat=len(nulls)):
        m = dict(zip(nulls, image))
        if all(m[n] == n for n in nulls):
            continue
        yield Instance({Fact(f.rel, tuple(m.get(v, v) for v in f.values)) for f in inst.facts},
                       inst.schema)


# --- finite model enumeration ---------------------------------------------------

def _canonical(facts: tuple, k: int) -> bool:
    """True when no permutation of ``c0..c{k-1}`` yields a smaller encoding."""
    enc = sorted((f.rel, tuple(int(v[1:]) for v in f.values)) for f in facts)
    for perm in itertools.permutations(range(k)):
        other = sorted((r, tuple(perm[i] for i in vs)) for r, vs in enc)
        if other < enc:
            return False
    return True


def enumerate_instances(rels: dict, max_size: int, max_facts: int | None = None):
    """Instances over domains ``c0..c{k-1}`` for k = 0..max_size, each using
    every domain element, one per isomorphism class, smaller first."""
    yield Instance((), Schema(dict(rels)))
    for k in range(1, max_size + 1):
        dom = [f"c{i}" for i in range(k)]
        cands = [Fact(r, t) for r in sorted(rels) for t in itertools.product(dom, repeat=rels[r])]
        top = len(cands) if max_facts is None else min(max_facts, len(cands))
        for size in range(1, top + 1):
            for combo in itertools.combinations(cands, size):
                used = {v for f in combo for v in f.values}
                if len(used) != k:
                    continue
                if not _canonical(combo, k):
                    continue
                yield Instance(combo, Schema(dict(rels)))


class _SatCheck:
    def __init__(self, f, order):
        self.f, self.order = f, order

    def __call__(self, items):
        for idx, inst in items:
            if answers(self.f, inst, self.order, schema=inst.schema):
                return idx
        return None


def sat_bounded(f: Formula, max_size: int, max_facts: int | None = None, workers: int = 1,
                schema: Schema | None = None) -> SearchResult:
    """Smallest model found by enumeration, with a satisfying tuple."""
    if constants(f):
        raise GnqError("bounded model search does not support constants")
    rels = dict(relations(f))
    if schema is not None:
        rels.update(schema.relations)
    order = sorted_vars(free_vars(f))
    insts = list(enumerate_instances(rels, max_size, max_facts))
    hit = _first_hit(_SatCheck(f, order), insts, workers)
    if hit is None:
        return SearchResult(NONE_WITHIN, explored=len(insts))
    inst = insts[hit]
    ans = sorted(answers(f, inst, order, schema=inst.schema))[0]
    return SearchResult(FOUND, inst, ans, explored=hit + 1)


# --- containment ----------------------------------------------------------------

@dataclass
class BoundedQuery:
    """A query given by its answer function over instances of ``relations``."""
    run: object
    relations: dict
    arity: int
    expand: object = None  # optional instance expansion applied before running

    def __call__(self, inst: Instance) -> set:
        if self.expand is not None:
            inst = self.expand(inst)
        return self.run(inst)


def as_bounded_query(q, schema=None) -> BoundedQuery:
    """Wrap a formula, RA expression, SQL query or Datalog program."""
    if isinstance(q, BoundedQuery):
        return q
    if isinstance(q, StratifiedProgram):
        base = {r: n for r, n in q.edb().items() if not r.startswith(GUARD_PREFIX)}
        guarded = any(r.startswith(GUARD_PREFIX) for r in q.edb())
        return BoundedQuery(_DatalogRun(q), base, q.answer_arity or 0,
                            _TotalGuards(q) if guarded else None)
    if isinstance(q, RaExpr):
        q = ra_to_gnfo(q)
    if not isinstance(q, (RelAtom, EqAtom, Top)) and hasattr(q, "select") and hasattr(q, "from_"):
        q = sql_to_gnfo(q, schema)
    if constants(q):
        raise GnqError("bounded containment search does not support constants")
    order = sorted_vars(free_vars(q))
    return BoundedQuery(_FormulaRun(q, order), dict(relations(q)), len(order))


class _FormulaRun:
    def __init__(self, f, order):
        self.f, self.order = f, order

    def __call__(self, inst):
        return answers(self.f, inst, self.order, schema=inst.schema)


class _DatalogRun:
    def __init__(self, p):
        self.p = p

    def __call__(self, inst):
        return eval_stratified(self.p, inst)[1]


class _TotalGuards:
    def __init__(self, p):
        self.p = p

    def __call__(self, inst):
        return expand_total(inst, self.p)


class _ContainCheck:
    def __init__(self, q1, q2):
        self.q1, self.q2 = q1, q2

    def __call__(self, items):
        for idx, inst in items:
            a1 = self.q1(inst)
            if a1 and not a1 <= self.q2(inst):
                return idx
        return None


def containment_counterexample_bounded(q1, q2, max_size: int, max_facts: int | None = None,
                                       workers: int = 1, schema=None) -> SearchResult:
    """An instance and tuple in ``q1`` but not in ``q2``, if one exists
    among the enumerated instances."""
    b1, b2 = as_bounded_query(q1, schema), as_bounded_query(q2, schema)
    if b1.arity != b2.arity:
        raise GnqError(f"answer arities differ: {b1.arity} and {b2.arity}")
    rels = dict(b1.relations)
    for r, n in b2.relations.items():
        if rels.setdefault(r, n) != n:
            raise GnqError(f"{r} has arities {rels[r]} and {n}")
    insts = list(enumerate_instances(rels, max_size, max_facts))
    hit = _first_hit(_ContainCheck(b1, b2), insts, workers)
    if hit is None:
        return SearchResult(NONE_WITHIN, explored=len(insts))
    inst = insts[hit]
    witness = sorted(b1(inst) - b2(inst))[0]
    return SearchResult(FOUND, inst, witness, explored=hit + 1)
