"""Translations between Datalog programs and guarded formulas."""

from __future__ import annotations

import itertools

from .datalog import (
    AnswerClause,
    DatalogError,
    Literal,
    Rule,
    StratifiedProgram,
    check_gn_datalog,
    make_program,
    ucq_formula,
)
from .dnf import DEFAULT_NODE_CAP, DnfQuery, NegLiteral, dnf_normalize
from .errors import BlowUpError, NotGuardedError
from .formula import (
    TRUE,
    And,
    Const,
    EqAtom,
    Exists,
    FixpointDef,
    Formula,
    GeneralizedGuard,
    GuardDisjunct,
    GuardedNeg,
    Lfp,
    Or,
    RelAtom,
    Schema,
    SecondOrderAtom,
    Top,
    Var,
    conj,
    disj,
    exists,
    free_vars,
    fresh_name,
    relations,
    sorted_vars,
    substitute,
    term_vars,
)
from .instance import Fact, Instance


def _tree_size(f, memo: dict) -> int:
    hit = memo.get(id(f))
    if hit is not None:
        return hit[1]
    if isinstance(f, (And, Or)):
        n = 1 + _tree_size(f.lhs, memo) + _tree_size(f.rhs, memo)
    elif isinstance(f, Exists):
        n = 1 + _tree_size(f.body, memo)
    elif isinstance(f, GuardedNeg):
        n = 1 + _tree_size(f.guard, memo) + _tree_size(f.body, memo)
    else:
        n = 1
    memo[id(f)] = (f, n)
    return n


# --- non-recursive programs to formulas ----------------------------------------

def _guard_neg(alpha: Formula, phi: Formula) -> Formula | None:
    """``alpha ∧ ¬phi`` with the negation attached to atoms inside ``alpha``
    that cover ``free(phi)``; ``None`` when some branch has no such atom."""
    need = free_vars(phi)
    if isinstance(alpha, (RelAtom, EqAtom)):
        return GuardedNeg(alpha, phi) if need <= free_vars(alpha) else None
    if isinstance(alpha, Or):
        l, r = _guard_neg(alpha.lhs, phi), _guard_neg(alpha.rhs, phi)
        return None if l is None or r is None else Or(l, r)
    if isinstance(alpha, Exists):
        v, body = alpha.var, alpha.body
        if v in need:
            nv = fresh_name(v, need | free_vars(body) | {v})
            body = substitute(body, {v: Var(nv)})
            v = nv
        inner = _guard_neg(body, phi)
        return None if inner is None else Exists(v, inner)
    if isinstance(alpha, And):
        l = _guard_neg(alpha.lhs, phi)
        if l is not None:
            return And(l, alpha.rhs)
        r = _guard_neg(alpha.rhs, phi)
        return None if r is None else And(alpha.lhs, r)
    if isinstance(alpha, GuardedNeg) and not isinstance(alpha.guard, Top):
        g = _guard_neg(alpha.guard, phi)
        return None if g is None else And(alpha, g)
    return None


class _Inliner:
    def __init__(self, p: StratifiedProgram, node_cap: int):
        self.p = p
        self.cap = node_cap
        self.defs: dict = {}
        self.memo: dict = {}
        by_head: dict = {}
        for r in p.rules:
            by_head.setdefault(r.head.rel, []).append(r)
        self.by_head = by_head
        self.arity = p.idb()

    def check(self, f: Formula) -> Formula:
        if _tree_size(f, self.memo) > self.cap:
            raise BlowUpError("inlined formula nodes", self.cap)
        return f

    def definition(self, rel: str) -> tuple:
        hit = self.defs.get(rel)
        if hit is not None:
            return hit
        params = tuple(f"p{i}" for i in range(1, self.arity[rel] + 1))
        parts = [self.rule_formula(r, params) for r in self.by_head[rel]]
        out = (params, self.check(disj(parts)))
        self.defs[rel] = out
        return out

    def atom(self, a: RelAtom) -> Formula:
        if a.rel not in self.by_head:
            return a
        params, body = self.definition(a.rel)
        return substitute(body, dict(zip(params, a.terms)))

    def rule_formula(self, r: Rule, params: tuple) -> Formula:
        ren: dict = {}
        eqs = []
        for p, t in zip(params, r.head.terms):
            if t.name in ren:
                eqs.append(EqAtom(ren[t.name], Var(p)))
            else:
                ren[t.name] = Var(p)
        taken = set(params)
        for v in r.variables():
            if v not in ren:
                nv = fresh_name("y", taken) if v in taken else v
                taken.add(nv)
                ren[v] = Var(nv)
        pos = [substitute(a, ren) for a in r.positive()]
        parts = [self.atom(a) for a in pos]
        parts += [substitute(e, ren) for e in r.equalities()]
        for a in r.negative():
            a = substitute(a, ren)
            body = self.atom(a)
            need = set(term_vars(a.terms))
            piece = None
            for g, gf in zip(pos, parts):
                if need <= set(term_vars(g.terms)):
                    piece = _guard_neg(gf, body)
                    if piece is not None:
                        break
            if piece is None:
                raise NotGuardedError(f"negated atom {a.rel} in rule `{r}` has no covering guard")
            parts.append(piece)
        parts += eqs
        bound = [ren[v].name for v in r.variables() if ren[v].name not in params]
        return exists(sorted_vars(bound), conj(parts))


def nonrecursive_to_gnfo(p: StratifiedProgram, node_cap: int = DEFAULT_NODE_CAP) -> tuple:
    """``(formula, order)``: an IDB-free formula over ``a1..ak`` equivalent
    to the answer query of ``p``."""
    if p.is_recursive():
        raise DatalogError("program is recursive")
    if not p.ans:
        raise DatalogError("program has no answer query")
    inl = _Inliner(p, node_cap)
    f, order = ucq_formula(p)
    out = _inline_formula(f, inl)
    return inl.check(out), order


def _inline_formula(f: Formula, inl: _Inliner) -> Formula:
    if isinstance(f, RelAtom):
        return inl.atom(f)
    if isinstance(f, And):
        return And(_inline_formula(f.lhs, inl), _inline_formula(f.rhs, inl))
    if isinstance(f, Or):
        return Or(_inline_formula(f.lhs, inl), _inline_formula(f.rhs, inl))
    if isinstance(f, Exists):
        return Exists(f.var, _inline_formula(f.body, inl))
    return f


# --- formulas to non-recursive programs ----------------------------------------

class _ToProgram:
    def __init__(self, taken: set):
        self.taken = taken
        self.names: dict = {}
        self.levels: dict = {}  # stratum index -> rules
        self.memo: dict = {}
        self.counter = 0

    def name(self, base: str) -> str:
        n = base
        while n in self.taken:
            n = "_" + n
        self.taken.add(n)
        return n

    def rule(self, stratum: int, head: RelAtom, body: list):
        self.levels.setdefault(stratum, []).append(Rule(head, tuple(body)))

    def guard_literal(self, g) -> tuple:
        if isinstance(g, RelAtom):
            if any(isinstance(t, Const) for t in g.terms):
                raise NotGuardedError("constants are not supported in Datalog rules")
            return Literal(g), sorted_vars(set(term_vars(g.terms)))
        if isinstance(g, EqAtom):
            if isinstance(g.left, Const) or isinstance(g.right, Const):
                raise NotGuardedError("constants are not supported in Datalog rules")
            a = RelAtom(self.xeq, (g.left, g.right))
            return Literal(a), sorted_vars(set(term_vars(a.terms)))
        raise NotGuardedError("a negated sentence has no atom to guard it in a Datalog rule")

    def literals(self, b) -> tuple:
        """Body literals for one block and the deepest negation level used."""
        out = []
        depth = 0
        for l in b.literals:
            if isinstance(l, NegLiteral):
                rel, lv = self.negation(l)
                vars_ = sorted_vars(free_vars(l.guard))
                out.append(Literal(RelAtom(rel, tuple(Var(v) for v in vars_))))
                depth = max(depth, lv)
            elif isinstance(l, Top):
                continue
            else:
                lit, _ = self.guard_literal(l)
                out.append(lit)
        covered = set()
        for lit in out:
            covered |= set(term_vars(lit.atom.terms))
        for v in b.qvars:
            if v not in covered:
                out.append(Literal(RelAtom(self.adom, (Var(v),))))
        return out, depth

    def negation(self, l: NegLiteral) -> tuple:
        """IDBs for ``g ∧ χ`` and ``g ∧ ¬χ``; level-L pairs sit in strata
        2L and 2L+1, above ADOM (0) and X_eq (1)."""
        hit = self.memo.get(l)
        if hit is not None:
            return hit
        guard, yvars = self.guard_literal(l.guard)
        head_terms = tuple(Var(v) for v in yvars)
        bodies = []
        inner = 0
        for b in l.sub.blocks:
            lits, depth = self.literals(b)
            inner = max(inner, depth)
            bodies.append(lits)
        level = inner + 1
        self.counter += 1
        pos = self.name(f"X_pos{self.counter}")
        negr = self.name(f"X_neg{self.counter}")
        for lits in bodies:
            self.rule(2 * level, RelAtom(pos, head_terms), [guard] + lits)
        self.rule(2 * level + 1, RelAtom(negr, head_terms),
                  [guard, Literal(RelAtom(pos, head_terms), True)])
        self.memo[l] = (negr, level)
        return negr, level


def gnfo_to_nonrecursive(f: Formula, schema: Schema | None = None, order: tuple | None = None,
                         node_cap: int = DEFAULT_NODE_CAP) -> StratifiedProgram:
    """A strictly guarded, non-recursive program answering ``f`` under
    active-domain semantics over instances of ``schema``."""
    q = f if isinstance(f, DnfQuery) else dnf_normalize(f, node_cap)
    ff = q.to_formula()
    if order is None:
        order = sorted_vars(free_vars(ff))
    rels = dict(relations(ff))
    if schema is not None:
        rels.update(schema.relations)
    t = _ToProgram(set(rels))
    t.adom = t.name("ADOM")
    t.xeq = t.name("X_eq")
    for rel, n in sorted(rels.items()):
        vs = tuple(Var(f"v{i}") for i in range(1, n + 1))
        for v in vs:
            t.rule(0, RelAtom(t.adom, (v,)), [Literal(RelAtom(rel, vs))])
    x = Var("x")
    t.rule(1, RelAtom(t.xeq, (x, x)), [Literal(RelAtom(t.adom, (x,)))])
    clauses = []
    head = tuple(Var(v) for v in order)
    for b in q.blocks:
        lits, _ = t.literals(b)
        body = [l.atom for l in lits] + [RelAtom(t.adom, (v,)) for v in head]
        clauses.append(AnswerClause(head, tuple(body)))
    top = max(t.levels) if t.levels else 1
    strata = [t.levels.get(k, []) for k in range(top + 1)]
    strata = [s for s in strata if s]
    arities = {r: n for r, n in rels.items()}
    return make_program(strata, clauses, arities)


# --- guarded Datalog to fixpoint logic -----------------------------------------

def gndatalog_to_gnfp(p: StratifiedProgram) -> tuple:
    """``(phi_q, psi_q, schema_hat)``.

    ``schema_hat`` adds every IDB as a relation.  ``phi_q`` holds in an
    expansion iff each IDB relation equals its stratum's least fixpoint
    computed over the expansion; ``psi_q`` is the answer query with each
    IDB atom replaced by that fixpoint.
    """
    rep = check_gn_datalog(p)
    if not rep.ok:
        idx, v = rep.violations()[0]
        raise NotGuardedError(f"rule {idx + 1} is not guarded: {v.target} misses {sorted(v.missing)}")
    edb = p.edb()
    idb = p.idb()
    schema_hat = Schema({**edb, **idb})
    blocks = {}  # stratum -> (defs, index by relation)
    for k, s in enumerate(p.strata):
        heads = []
        for r in s:
            if r.head.rel not in heads:
                heads.append(r.head.rel)
        defs = tuple(_fixpoint_def(rel, [r for r in s if r.head.rel == rel], set(heads), idb)
                     for rel in heads)
        for i, rel in enumerate(heads):
            blocks[rel] = (defs, i)

    def fix(rel: str, args: tuple) -> Formula:
        defs, i = blocks[rel]
        return Lfp(defs, i, tuple(args))

    phi_parts = []
    for rel in idb:
        defs, i = blocks[rel]
        d = defs[i]
        xs = tuple(Var(v) for v in d.params)
        a = RelAtom(rel, xs)
        f = fix(rel, xs)
        sub = exists(d.params, GuardedNeg(a, f))
        phi_parts.append(GuardedNeg(TRUE, sub))
        sup = []
        for dis in d.guard.disjuncts:
            sup.append(exists(dis.bound, GuardedNeg(dis.atom, a)))
        phi_parts.append(GuardedNeg(TRUE, exists(d.params, And(f, disj(sup)))))
    phi = conj(phi_parts)
    if p.ans:
        u, _ = ucq_formula(p)
        psi = _replace_idb(u, idb, fix)
    else:
        psi = TRUE
    return phi, psi, schema_hat


def _replace_idb(f: Formula, idb: dict, fix) -> Formula:
    if isinstance(f, RelAtom) and f.rel in idb:
        return fix(f.rel, f.terms)
    if isinstance(f, And):
        return And(_replace_idb(f.lhs, idb, fix), _replace_idb(f.rhs, idb, fix))
    if isinstance(f, Or):
        return Or(_replace_idb(f.lhs, idb, fix), _replace_idb(f.rhs, idb, fix))
    if isinstance(f, Exists):
        return Exists(f.var, _replace_idb(f.body, idb, fix))
    return f


def _fixpoint_def(rel: str, rules: list, local: set, idb: dict) -> FixpointDef:
    n = idb[rel]
    params = tuple(f"p{i}" for i in range(1, n + 1))
    disjuncts = []
    bodies = []
    for r in rules:
        names = [t.name for t in r.head.terms]
        if len(set(names)) != len(names):
            raise NotGuardedError(f"rule `{r}` repeats a head variable; its guard cannot cover every parameter")
        taken = set(params)
        ren = {h: Var(p) for h, p in zip(names, params)}
        for v in r.variables():
            if v not in ren:
                nv = fresh_name("y", taken) if v in taken else v
                taken.add(nv)
                ren[v] = Var(nv)

        def so(a: RelAtom) -> Formula:
            a = substitute(a, ren)
            return SecondOrderAtom(a.rel, a.terms) if a.rel in local else a

        parts = [so(a) for a in r.positive()] + [substitute(e, ren) for e in r.equalities()]
        for a in r.negative():
            a2 = substitute(a, ren)
            g = next(g for g in r.positive()
                     if g.rel not in local and set(term_vars(a.terms)) <= set(term_vars(g.terms)))
            parts.append(GuardedNeg(substitute(g, ren), a2))
        bound = [ren[v].name for v in r.variables() if ren[v].name not in params]
        bodies.append(exists(sorted_vars(bound), conj(parts)))
        g = next(g for g in r.positive()
                 if g.rel not in local and set(names) <= set(term_vars(g.terms)))
        g = substitute(g, ren)
        gb = tuple(sorted_vars(set(term_vars(g.terms)) - set(params)))
        dis = GuardDisjunct(gb, g)
        if dis not in disjuncts:
            disjuncts.append(dis)
    return FixpointDef(rel, params, GeneralizedGuard(tuple(disjuncts)), disj(bodies))


# --- guarding positive programs ------------------------------------------------

GUARD_PREFIX = "__guard_"


def guard_datalog_for_containment(p: StratifiedProgram) -> StratifiedProgram:
    """Add a fresh EDB atom over all rule variables to each rule body."""
    for r in p.rules:
        if r.negative():
            raise DatalogError("input must be positive Datalog")
        if r.equalities():
            raise DatalogError("input must be positive Datalog without equalities")
    used = set(p.edb()) | set(p.idb())
    if any(n.startswith(GUARD_PREFIX) for n in used):
        raise DatalogError(f"relation names starting with {GUARD_PREFIX} are reserved")
    strata = []
    arities = dict(p.edb())
    i = 0
    for s in p.strata:
        out = []
        for r in s:
            i += 1
            vs = tuple(Var(v) for v in r.variables())
            g = RelAtom(f"{GUARD_PREFIX}{i}", vs)
            arities[g.rel] = len(vs)
            out.append(Rule(r.head, (Literal(g),) + r.body, r.pos))
        strata.append(out)
    return make_program(strata, p.ans, arities)


def expand_total(inst: Instance, p_hat: StratifiedProgram) -> Instance:
    """Interpret every fresh guard relation as the total relation over the
    active domain of ``inst``."""
    dom = sorted(inst.active_domain)
    facts = list(inst.facts)
    rels = dict(inst.schema.relations)
    for rel, n in p_hat.edb().items():
        if rel.startswith(GUARD_PREFIX):
            rels[rel] = n
            facts.extend(Fact(rel, t) for t in itertools.product(dom, repeat=n))
    return Instance(facts, Schema(rels, inst.schema.constants))
