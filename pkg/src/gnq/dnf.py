"""Disjunctive normal form, width, negation rank.

A ``DnfQuery`` is a disjunction of blocks ``exists q . (l1 & ... & lm)``.
A literal is a relational atom, an equality, or ``NegLiteral(guard, sub)``
where ``sub`` is a one-block ``DnfQuery`` that is either quantified or a
single literal, so no conjunction sits directly below a negation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .checks import check_gnfo
from .errors import BlowUpError, NotGuardedError
from .formula import (
    And,
    EqAtom,
    Exists,
    Formula,
    GuardedNeg,
    Or,
    RelAtom,
    Top,
    Var,
    all_vars,
    conj,
    disj,
    exists,
    free_vars,
    is_gnfo,
    substitute,
)
from .formula_text import format_formula

DEFAULT_NODE_CAP = 10**6


@dataclass(frozen=True)
class NegLiteral:
    guard: Formula  # RelAtom, EqAtom or Top
    sub: "DnfQuery"


@dataclass(frozen=True)
class DnfBlock:
    qvars: tuple
    literals: tuple


@dataclass(frozen=True)
class DnfQuery:
    blocks: tuple

    def to_formula(self) -> Formula:
        return dnf_to_formula(self)

    def __str__(self) -> str:
        return format_formula(self.to_formula())


def dnf_to_formula(q: DnfQuery) -> Formula:
    return disj(_block_formula(b) for b in q.blocks)


def _block_formula(b: DnfBlock) -> Formula:
    return exists(b.qvars, conj(_lit_formula(l) for l in b.literals))


def _lit_formula(l) -> Formula:
    if isinstance(l, NegLiteral):
        return GuardedNeg(l.guard, dnf_to_formula(l.sub))
    return l


def _subst_lit(l, m: dict):
    if isinstance(l, NegLiteral):
        return NegLiteral(substitute(l.guard, m), _subst_query(l.sub, m))
    return substitute(l, m)


def _subst_query(q: DnfQuery, m: dict) -> DnfQuery:
    out = []
    for b in q.blocks:
        inner = {k: v for k, v in m.items() if k not in b.qvars}
        out.append(DnfBlock(b.qvars, tuple(_subst_lit(l, inner) for l in b.literals)))
    return DnfQuery(tuple(out))


class _Normalizer:
    def __init__(self, avoid: set, cap: int):
        self.avoid = set(avoid)
        self.counter = 0
        self.cap = cap
        self.nodes = 0

    def fresh(self) -> str:
        while True:
            name = f"v{self.counter}"
            self.counter += 1
            if name not in self.avoid:
                return name

    def charge(self, blocks: list) -> list:
        self.nodes += sum(len(b.literals) + 1 for b in blocks)
        if self.nodes > self.cap:
            raise BlowUpError("DNF normalization", self.cap)
        return blocks

    def norm(self, f: Formula) -> list:
        if isinstance(f, Top):
            return [DnfBlock((), ())]
        if isinstance(f, (RelAtom, EqAtom)):
            return self.charge([DnfBlock((), (f,))])
        if isinstance(f, Or):
            return self.norm(f.lhs) + self.norm(f.rhs)
        if isinstance(f, And):
            left = self.norm(f.lhs)
            right = self.norm(f.rhs)
            return self.charge([DnfBlock(a.qvars + b.qvars, a.literals + b.literals)
                                for a in left for b in right])
        if isinstance(f, Exists):
            out = []
            for b in self.norm(f.body):
                v = self.fresh()
                lits = tuple(_subst_lit(l, {f.var: Var(v)}) for l in b.literals)
                out.append(DnfBlock((v,) + b.qvars, lits))
            return self.charge(out)
        if isinstance(f, GuardedNeg):
            options = []
            for b in self.norm(f.body):
                if b.qvars or len(b.literals) == 1:
                    options.append([b])
                elif not b.literals:
                    return []  # negation of true
                else:
                    options.append([DnfBlock((), (l,)) for l in b.literals])
            out = []
            for choice in itertools.product(*options):
                lits = tuple(NegLiteral(f.guard, DnfQuery((c,))) for c in choice)
                if not lits:
                    lits = (f.guard,) if not isinstance(f.guard, Top) else ()
                out.append(DnfBlock((), lits))
            return self.charge(out)
        raise NotGuardedError(f"not a GNFO formula: {type(f).__name__}")


def _canonical(q: DnfQuery, free: set) -> DnfQuery:
    """Renumber bound variables of each top-level disjunct as v0, v1, ...

    Two passes through unique temporaries keep inner binders from
    capturing renamed outer variables.
    """
    out = []
    for b in q.blocks:
        tmp = itertools.count()
        b = _renumber_block(b, lambda: f"\x00{next(tmp)}")
        counter = itertools.count()

        def fresh():
            while True:
                name = f"v{next(counter)}"
                if name not in free:
                    return name

        out.append(_renumber_block(b, fresh))
    return DnfQuery(tuple(out))


def _renumber_block(b: DnfBlock, fresh) -> DnfBlock:
    m = {v: fresh() for v in b.qvars}
    lits = []
    for l in b.literals:
        l = _subst_lit(l, {k: Var(v) for k, v in m.items()})
        if isinstance(l, NegLiteral):
            l = NegLiteral(l.guard, DnfQuery(tuple(_renumber_block(sb, fresh) for sb in l.sub.blocks)))
        lits.append(l)
    return DnfBlock(tuple(m[v] for v in b.qvars), tuple(lits))


def dnf_normalize(f: Formula, node_cap: int = DEFAULT_NODE_CAP) -> DnfQuery:
    """Rewrite a GNFO formula into an equivalent DNF.

    Bound variables come out canonically numbered per top-level disjunct.
    Raises ``BlowUpError`` once more than ``node_cap`` nodes are produced.
    """
    if not is_gnfo(f):
        raise NotGuardedError("DNF is defined for GNFO formulas only")
    rep = check_gnfo(f)
    if not rep.ok:
        raise NotGuardedError("; ".join(str(v) for v in rep.violations))
    free = set(free_vars(f))
    n = _Normalizer(all_vars(f) | free, node_cap)
    q = DnfQuery(tuple(n.norm(f)))
    return _canonical(q, free)


def query_vars(q: DnfQuery) -> set:
    return all_vars(dnf_to_formula(q)) if q.blocks else set()


def width(f: Formula, node_cap: int = DEFAULT_NODE_CAP) -> int:
    """Distinct variables, free or bound, in the canonical DNF of ``f``."""
    q = dnf_normalize(f, node_cap)
    names: set = set()
    for b in q.blocks:
        names |= _block_vars(b)
    return len(names)


def _block_vars(b: DnfBlock) -> set:
    out = set(b.qvars)
    for l in b.literals:
        if isinstance(l, NegLiteral):
            out |= free_vars(l.guard)
            for sb in l.sub.blocks:
                out |= _block_vars(sb)
        else:
            out |= free_vars(l)
    return out


def negation_rank(q: DnfQuery) -> int:
    best = 0
    for b in q.blocks:
        for l in b.literals:
            if isinstance(l, NegLiteral):
                best = max(best, 1 + negation_rank(l.sub))
    return best


def is_ucq(q: DnfQuery) -> bool:
    return all(not isinstance(l, NegLiteral) for b in q.blocks for l in b.literals)


def check_dnf_shape(q: DnfQuery) -> bool:
    """True when ``q`` matches the normal-form grammar."""
    for b in q.blocks:
        for l in b.literals:
            if isinstance(l, NegLiteral):
                if len(l.sub.blocks) != 1:
                    return False
                sb = l.sub.blocks[0]
                if not sb.qvars and len(sb.literals) != 1:
                    return False
                if not check_dnf_shape(l.sub):
                    return False
            elif not isinstance(l, (RelAtom, EqAtom)):
                return False
    return True
