"""Restricted chase with tgds and key constraints.

Labeled nulls are values starting with ``_:``; every other value is a
constant.  Triggers are collected per round and fired in the order (rule
index, binding values), each only if its head is not yet satisfied.  Keys
are applied after each round by unifying nulls; two distinct constants
make the chase fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constraints import Tgd
from .formula import EqAtom, RelAtom, Schema, natural_key
from .instance import Fact, Instance

NULL_PREFIX = "_:"

TERMINATED, FAILED, EXHAUSTED, STOPPED = "terminated", "failed", "budget-exhausted", "stopped"


def is_null(v: str) -> bool:
    return v.startswith(NULL_PREFIX)


def _value_key(v: str):
    return (is_null(v), natural_key(v))


@dataclass
class ChaseState:
    facts: frozenset
    nulls: int = 0
    steps: int = 0
    rounds: int = 0
    status: str = TERMINATED
    failure: str | None = None
    trace: list = field(default_factory=list)

    def instance(self, schema: Schema | None = None) -> Instance:
        return Instance(self.facts, schema)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "steps": self.steps,
            "rounds": self.rounds,
            "failure": self.failure,
            "facts": [str(f) for f in sorted(self.facts, key=_fact_key)],
            "trace": self.trace,
        }


def _fact_key(f: Fact):
    return (f.rel, tuple(_value_key(v) for v in f.values))


class _Store:
    def __init__(self, facts):
        self.rels: dict = {}
        for f in facts:
            self.rels.setdefault(f.rel, set()).add(f.values)
        self.index: dict = {}
        self.delta: dict | None = None  # None: every row counts as new

    def take_delta(self) -> dict:
        d = self.delta if self.delta is not None else {r: set(rows) for r, rows in self.rels.items()}
        self.delta = {}
        return d

    def add(self, rel: str, row: tuple) -> bool:
        rows = self.rels.setdefault(rel, set())
        if row in rows:
            return False
        rows.add(row)
        if self.delta is not None:
            self.delta.setdefault(rel, set()).add(row)
        for (r, pos), idx in self.index.items():
            if r == rel:
                idx.setdefault(tuple(row[i] for i in pos), []).append(row)
        return True

    def rows(self, rel: str):
        return self.rels.get(rel, ())

    def lookup(self, atom: RelAtom, binding: dict):
        pos = tuple(i for i, t in enumerate(atom.terms) if t.name in binding)
        if not pos:
            return list(self.rows(atom.rel))
        key = (atom.rel, pos)
        idx = self.index.get(key)
        if idx is None:
            idx = {}
            for row in self.rows(atom.rel):
                idx.setdefault(tuple(row[i] for i in pos), []).append(row)
            self.index[key] = idx
        return idx.get(tuple(binding[atom.terms[i].name] for i in pos), ())

    def facts(self) -> frozenset:
        return frozenset(Fact(r, t) for r, rows in self.rels.items() for t in rows)


def _matches(atoms: list, store: _Store, binding: dict):
    """All extensions of ``binding`` mapping the atoms into the store."""
    rel_atoms = [a for a in atoms if isinstance(a, RelAtom)]
    eqs = [a for a in atoms if isinstance(a, EqAtom)]

    def go(i: int, b: dict):
        if i == len(rel_atoms):
            if all(b.get(e.left.name) == b.get(e.right.name) for e in eqs):
                yield b
            return
        a = rel_atoms[i]
        for row in store.lookup(a, b):
            nb = b
            ok = True
            for t, v in zip(a.terms, row):
                cur = nb.get(t.name)
                if cur is None:
                    if nb is b:
                        nb = dict(b)
                    nb[t.name] = v
                elif cur != v:
                    ok = False
                    break
            if ok:
                yield from go(i + 1, nb if nb is not b else dict(b))

    yield from go(0, dict(binding))


def _delta_matches(atoms: list, store: _Store, delta: dict):
    """Matches of ``atoms`` that use at least one row of ``delta``, each once."""
    if not any(isinstance(a, RelAtom) for a in atoms):
        yield from _matches(atoms, store, {})
        return
    seen = set()
    for j, a in enumerate(atoms):
        if not isinstance(a, RelAtom):
            continue
        rest = atoms[:j] + atoms[j + 1:]
        for row in delta.get(a.rel, ()):
            b = {}
            if any(b.setdefault(t.name, v) != v for t, v in zip(a.terms, row)):
                continue
            for m in _matches(rest, store, b):
                k = tuple(sorted(m.items()))
                if k not in seen:
                    seen.add(k)
                    yield m


def _satisfied(t: Tgd, store: _Store, binding: dict) -> bool:
    front = {v: binding[v] for v in t.frontier()}
    for _ in _matches(list(t.head), store, front):
        return True
    return False


def chase(inst: Instance, tgds, keys=(), max_steps: int = 10_000, stop=None) -> ChaseState:
    """Run the restricted chase.  ``stop(store_facts)`` is consulted after
    every round; a true result ends the run with status ``stopped``."""
    tgds = list(tgds)
    keys = list(keys)
    store = _Store(inst.facts)
    state = ChaseState(frozenset())
    nulls = max([int(v[3:]) for f in inst.facts for v in f.values
                 if is_null(v) and v[2:3] == "n" and v[3:].isdigit()], default=0)
    if not _apply_keys(store, keys, state):
        state.facts = store.facts()
        return state
    if stop is not None and stop(store.facts()):
        state.status = STOPPED
        state.facts = store.facts()
        return state
    while True:
        # A trigger built only from older rows was fired or satisfied in an earlier round.
        delta = store.take_delta()
        triggers = []
        for i, t in enumerate(tgds):
            order = t.body_vars()
            found = []
            for b in _delta_matches(list(t.body), store, delta):
                if not _satisfied(t, store, b):
                    found.append(b)
            found.sort(key=lambda b: tuple(_value_key(b[v]) for v in order))
            triggers.extend((i, b) for b in found)
        if not triggers:
            state.status = TERMINATED
            break
        fired = False
        for i, b in triggers:
            t = tgds[i]
            if _satisfied(t, store, b):
                continue
            if state.steps >= max_steps:
                state.status = EXHAUSTED
                state.facts = store.facts()
                state.nulls = nulls
                return state
            full = dict(b)
            for z in t.existentials():
                nulls += 1
                full[z] = f"{NULL_PREFIX}n{nulls}"
            added = []
            for a in t.head:
                row = tuple(full[x.name] for x in a.terms)
                if store.add(a.rel, row):
                    added.append(str(Fact(a.rel, row)))
            state.steps += 1
            fired = True
            state.trace.append({"round": state.rounds + 1, "rule": i,
                                "binding": {k: full[k] for k in sorted(full, key=natural_key)},
                                "added": added})
        state.rounds += 1
        if not _apply_keys(store, keys, state):
            break
        if stop is not None and stop(store.facts()):
            state.status = STOPPED
            break
        if not fired:
            state.status = TERMINATED
            break
    state.facts = store.facts()
    state.nulls = nulls
    return state


def _apply_keys(store: _Store, keys: list, state: ChaseState) -> bool:
    while True:
        sub = None
        for k in keys:
            groups: dict = {}
            for row in sorted(store.rows(k.rel), key=lambda r: tuple(_value_key(v) for v in r)):
                kv = tuple(row[p - 1] for p in k.key)
                dv = tuple(row[p - 1] for p in k.determined)
                prev = groups.setdefault(kv, dv)
                if prev != dv:
                    for a, b in zip(prev, dv):
                        if a == b:
                            continue
                        if not is_null(a) and not is_null(b):
                            state.status = FAILED
                            state.failure = f"{k}: {a} != {b}"
                            state.trace.append({"round": state.rounds, "fail": [a, b], "key": str(k)})
                            return False
                        sub = _unifier(a, b)
                        break
                if sub:
                    break
            if sub:
                state.trace.append({"round": state.rounds, "unify": list(sub), "key": str(k)})
                _substitute(store, *sub)
                break
        if sub is None:
            return True


def _unifier(a: str, b: str) -> tuple:
    """``(null, replacement)``: nulls yield to constants and to older nulls."""
    if not is_null(a):
        return b, a
    if not is_null(b):
        return a, b
    return (a, b) if _value_key(a) > _value_key(b) else (b, a)


def _substitute(store: _Store, old: str, new: str):
    rels = {}
    for rel, rows in store.rels.items():
        rels[rel] = {tuple(new if v == old else v for v in row) for row in rows}
    store.rels = rels
    store.index = {}
    store.delta = None


def replay(inst: Instance, tgds, trace: list) -> frozenset:
    """Re-apply a recorded trace and return the resulting facts."""
    tgds = list(tgds)
    store = _Store(inst.facts)
    for ev in trace:
        if "rule" in ev:
            t = tgds[ev["rule"]]
            b = ev["binding"]
            for a in t.head:
                store.add(a.rel, tuple(b[x.name] for x in a.terms))
        elif "unify" in ev:
            _substitute(store, ev["unify"][0], ev["unify"][1])
    return store.facts()


def violations(facts, tgds, keys=()) -> list:
    """Unsatisfied tgd triggers and key violations of a fact set."""
    store = _Store(facts)
    out = []
    for i, t in enumerate(tgds):
        for b in _matches(list(t.body), store, {}):
            if not _satisfied(t, store, b):
                out.append(("tgd", i, b))
                break
    for k in keys:
        seen: dict = {}
        for row in store.rows(k.rel):
            kv = tuple(row[p - 1] for p in k.key)
            dv = tuple(row[p - 1] for p in k.determined)
            if seen.setdefault(kv, dv) != dv:
                out.append(("key", str(k), kv))
                break
    return out


def find_homomorphism(src, dst, rigid=lambda v: not is_null(v)) -> dict | None:
    """A map of ``src`` values into ``dst`` values, identity on rigid values,
    sending every source fact to a target fact."""
    by_rel: dict = {}
    for f in dst:
        by_rel.setdefault(f.rel, []).append(f.values)
    src = sorted(src, key=lambda f: (len(by_rel.get(f.rel, ())), _fact_key(f)))

    def go(i: int, m: dict):
        if i == len(src):
            return m
        f = src[i]
        for row in by_rel.get(f.rel, ()):
            nm = m
            ok = True
            for v, w in zip(f.values, row):
                if rigid(v):
                    if v != w:
                        ok = False
                        break
                    continue
                cur = nm.get(v)
                if cur is None:
                    if nm is m:
                        nm = dict(m)
                    nm[v] = w
                elif cur != w:
                    ok = False
                    break
            if ok:
                r = go(i + 1, nm)
                if r is not None:
                    return r
        return None

    return go(0, {})
