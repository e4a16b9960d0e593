"""Translations between GN-SQL and GNFO, and elimination of ADOM."""

from __future__ import annotations

import itertools

from .errors import BlowUpError, NotGuardedError
from .formula import (
    TRUE,
    And,
    Const,
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
    exists,
    free_vars,
    is_gnfo,
    sorted_vars,
    substitute,
)
from .instance import Fact, Instance
from .sql import (
    ADOM,
    CAnd,
    CEq,
    CExists,
    CIn,
    CNot,
    Cond,
    COr,
    CTrue,
    NamedSchema,
    SelectFromWhere,
    SetOp,
    SqlQuery,
    Term,
    _type_query,
    check_sql_guarded,
    cond_free_vars,
    rename_apart,
    typecheck_sql,
)

# --- SQL to GNFO ---------------------------------------------------------------

class _ToGnfo:
    def __init__(self, schema: NamedSchema):
        self.schema = schema
        self.names: dict = {}
        self.taken: set = set()
        self.counter = itertools.count()

    def var(self, tvar: str, attr: str) -> Var:
        key = (tvar, attr)
        if key not in self.names:
            base = f"{tvar}_{attr}"
            name, i = base, 0
            while name in self.taken or _reserved(name):
                i += 1
                name = f"{base}{i}"
            self.taken.add(name)
            self.names[key] = name
        return Var(self.names[key])

    def fresh(self) -> str:
        while True:
            name = f"o{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def tuple_vars(self, rel: str, tvar: str) -> list:
        return [self.var(tvar, a) for a in self.schema.attrs(rel)]

    def query(self, q: SqlQuery, env: dict, out: dict) -> Formula:
        """``out`` maps each output attribute to the variable carrying it."""
        if isinstance(q, SetOp):
            left = self.query(q.left, env, out)
            if q.op == "union":
                return Or(left, self.query(q.right, env, out))
            if q.op == "intersect":
                return And(left, self.query(q.right, env, out))
            # except: first argument is a simple projection over one relation
            rel, tvar = q.left.from_[0]
            zs = self.tuple_vars(rel, tvar)
            pos = {a: zs[self.schema.position(rel, t.attr)] for t, a in q.left.select}
            right = self.query(q.right, env, pos)
            eqs = [EqAtom(out[a], pos[a]) for a in sorted(pos)]
            guard = RelAtom(rel, tuple(zs))
            return exists([z.name for z in zs], conj([GuardedNeg(guard, right)] + eqs))
        local = dict(env)
        atoms, bound = [], []
        for rel, tvar in q.from_:
            local[tvar] = rel
            zs = self.tuple_vars(rel, tvar)
            atoms.append(RelAtom(rel, tuple(zs)))
            bound.extend(z.name for z in zs)
        ambient = atoms[0] if atoms else None
        cond = self.cond(q.where, local, ambient)
        eqs = [EqAtom(out[a], self.var(t.var, t.attr)) for t, a in q.select]
        bound = list(dict.fromkeys(bound))
        return exists(bound, conj(atoms + [cond] + eqs))

    def cond(self, c: Cond, env: dict, ambient) -> Formula:
        if isinstance(c, CTrue):
            return TRUE
        if isinstance(c, CEq):
            return EqAtom(self.var(c.left.var, c.left.attr), self.var(c.right.var, c.right.attr))
        if isinstance(c, CIn):
            (attr,) = typecheck_sub(c.query, self.schema, env)
            return self.query(c.query, env, {attr: self.var(c.term.var, c.term.attr)})
        if isinstance(c, CExists):
            attrs = typecheck_sub(c.query, self.schema, env)
            out = {a: Var(self.fresh()) for a in attrs}
            return exists([v.name for v in out.values()], self.query(c.query, env, out))
        if isinstance(c, CAnd):
            return And(self.cond(c.left, env, ambient), self.cond(c.right, env, ambient))
        if isinstance(c, COr):
            return Or(self.cond(c.left, env, ambient), self.cond(c.right, env, ambient))
        if isinstance(c, CNot):
            fv = sorted(cond_free_vars(c.cond))
            body = self.cond(c.cond, env, ambient)
            if len(fv) > 1:
                raise NotGuardedError(f"not over tuple variables {fv}")
            if fv:
                (tvar,) = fv
                guard = RelAtom(env[tvar], tuple(self.tuple_vars(env[tvar], tvar)))
            elif ambient is not None:
                guard = ambient
            else:
                guard = TRUE
            return GuardedNeg(guard, body)
        raise TypeError(c)


def _reserved(name: str) -> bool:
    return name[:1] == "x" and name[1:].isdigit()


def typecheck_sub(q: SqlQuery, schema: NamedSchema, env: dict) -> tuple:
    return _type_query(q, schema, env, [])


def sql_to_gnfo(q: SqlQuery, schema: NamedSchema) -> Formula:
    """GNFO formula over ``x1..xn``, one per output attribute in sorted order."""
    attrs = typecheck_sql(q, schema)
    rep = check_sql_guarded(q)
    if not rep.ok:
        raise NotGuardedError("; ".join(str(v) for v in rep.violations))
    tr = _ToGnfo(schema)
    out = {a: Var(f"x{i}") for i, a in enumerate(attrs, start=1)}
    return tr.query(q, {}, out)


# --- GNFO to SQL ---------------------------------------------------------------

def _rename_apart(f: Formula, avoid: set) -> Formula:
    """Give every quantifier its own variable name."""
    counter = itertools.count()
    used = set(avoid) | all_vars(f)

    def fresh():
        while True:
            n = f"u{next(counter)}"
            if n not in used:
                used.add(n)
                return n

    def go(g):
        if isinstance(g, Exists):
            v = fresh()
            return Exists(v, go(substitute(g.body, {g.var: Var(v)})))
        if isinstance(g, And):
            return And(go(g.lhs), go(g.rhs))
        if isinstance(g, Or):
            return Or(go(g.lhs), go(g.rhs))
        if isinstance(g, GuardedNeg):
            return GuardedNeg(g.guard, go(g.body))
        return g

    return go(f)


class _ToSql:
    def __init__(self, schema: NamedSchema):
        self.schema = schema
        self.counter = itertools.count()

    def tv(self, var: str) -> str:
        return f"R_{var}"

    def fresh_tv(self) -> str:
        return f"T{next(self.counter)}"

    def term(self, v) -> Term:
        if isinstance(v, Const):
            raise NotGuardedError("constants are not supported in SQL")
        return Term(self.tv(v.name), "A")

    def rel_exists(self, a: RelAtom, extra: Cond | None, sub_map: dict | None = None) -> Cond:
        attrs = self.schema.attrs(a.rel)
        if len(attrs) != len(a.terms):
            raise NotGuardedError(f"{a.rel} has {len(attrs)} attributes")
        if not attrs:
            raise NotGuardedError("nullary relations have no SQL counterpart")
        r = self.fresh_tv()
        eqs = [CEq(Term(r, at), self.term(t)) for at, t in zip(attrs, a.terms)]
        where = eqs[0]
        for e in eqs[1:]:
            where = CAnd(where, e)
        if extra is not None:
            where = CAnd(where, extra)
        return CExists(SelectFromWhere(((Term(r, attrs[0]), attrs[0]),), ((a.rel, r),), where))

    def cond(self, f: Formula) -> Cond:
        if isinstance(f, Top):
            return CTrue()
        if isinstance(f, EqAtom):
            return CEq(self.term(f.left), self.term(f.right))
        if isinstance(f, RelAtom):
            return self.rel_exists(f, None)
        if isinstance(f, And):
            return CAnd(self.cond(f.lhs), self.cond(f.rhs))
        if isinstance(f, Or):
            return COr(self.cond(f.lhs), self.cond(f.rhs))
        if isinstance(f, Exists):
            r = self.tv(f.var)
            return CExists(SelectFromWhere(((Term(r, "A"), "A"),), ((ADOM, r),), self.cond(f.body)))
        if isinstance(f, GuardedNeg):
            g = f.guard
            if isinstance(g, RelAtom):
                # the inner condition refers to the guard's columns instead of R_x.A
                attrs = self.schema.attrs(g.rel)
                r_name = f"T{next(self.counter)}"
                first: dict = {}
                for at, t in zip(attrs, g.terms):
                    if isinstance(t, Var):
                        first.setdefault(t.name, at)
                inner = _retarget(self.cond(f.body), {self.tv(v): (r_name, at) for v, at in first.items()})
                eqs = [CEq(Term(r_name, at), self.term(t)) for at, t in zip(attrs, g.terms)]
                where = eqs[0]
                for e in eqs[1:]:
                    where = CAnd(where, e)
                where = CAnd(where, CNot(inner))
                return CExists(SelectFromWhere(((Term(r_name, attrs[0]), attrs[0]),), ((g.rel, r_name),), where))
            if isinstance(g, EqAtom):
                x, y = g.left, g.right
                if isinstance(x, Const) or isinstance(y, Const):
                    raise NotGuardedError("constants are not supported in SQL")
                body = substitute(f.body, {x.name: y}) if x != y else f.body
                return CAnd(CEq(self.term(x), self.term(y)), CNot(self.cond(body)))
            if isinstance(g, Top):
                return CNot(self.cond(f.body))
        raise NotGuardedError(f"{type(f).__name__} has no SQL counterpart")


def _retarget(c: Cond, m: dict) -> Cond:
    """Replace terms ``R.A`` by ``m[R]`` throughout a condition."""
    def term(t: Term) -> Term:
        if t.attr == "A" and t.var in m:
            return Term(*m[t.var])
        return t

    def q(x: SqlQuery) -> SqlQuery:
        if isinstance(x, SetOp):
            return SetOp(x.op, q(x.left), q(x.right), x.pos)
        return SelectFromWhere(tuple((term(t), a) for t, a in x.select), x.from_, cond(x.where), x.pos)

    def cond(c: Cond) -> Cond:
        if isinstance(c, CEq):
            return CEq(term(c.left), term(c.right))
        if isinstance(c, CIn):
            return CIn(term(c.term), q(c.query))
        if isinstance(c, CExists):
            return CExists(q(c.query))
        if isinstance(c, CAnd):
            return CAnd(cond(c.left), cond(c.right))
        if isinstance(c, COr):
            return COr(cond(c.left), cond(c.right))
        if isinstance(c, CNot):
            return CNot(cond(c.cond), c.pos)
        return c

    return cond(c)


def output_attrs(n: int) -> list:
    width = len(str(n))
    return [f"a{str(i).zfill(width)}" for i in range(1, n + 1)]


def gnfo_to_sql(f: Formula, schema: NamedSchema, order: tuple | None = None,
                eliminate_adom: bool = False, node_cap: int = 10**6) -> SqlQuery:
    """GN-SQL query equivalent to ``f`` under the sorted-attribute convention.

    The with-ADOM form reads a unary relation ``ADOM(A)`` that must hold the
    active domain; ``eliminate_adom`` rewrites it away over ``schema``.
    Domain independence of ``f`` is the caller's responsibility.
    """
    if not is_gnfo(f):
        raise NotGuardedError("only GNFO formulas translate to SQL")
    if order is None:
        order = sorted_vars(free_vars(f))
    f = _rename_apart(f, set(order))
    full = schema.with_adom()
    tr = _ToSql(full)
    attrs = output_attrs(len(order))
    select = tuple((Term(tr.tv(v), "A"), a) for v, a in zip(order, attrs))
    from_ = tuple(dict.fromkeys((ADOM, tr.tv(v)) for v in order))
    q: SqlQuery = SelectFromWhere(select, from_, tr.cond(f))
    if eliminate_adom:
        q = eliminate_adom_query(q, schema, node_cap)
    return rename_apart(q)


def eliminate_adom_query(q: SqlQuery, schema: NamedSchema, node_cap: int = 10**6) -> SqlQuery:
    """Replace every ``ADOM R`` by a union over all (relation, attribute)
    pairs, renaming ``R.A`` to ``R.attr`` in scope."""
    pairs = [(rel, at) for rel in sorted(schema.relations) if rel != ADOM
             for at in schema.relations[rel]]
    if not pairs:
        raise NotGuardedError("the schema has no attributes to range over")
    budget = [0]

    def charge(k=1):
        budget[0] += k
        if budget[0] > node_cap:
            raise BlowUpError("ADOM elimination", node_cap)

    def query(x: SqlQuery) -> SqlQuery:
        if isinstance(x, SetOp):
            return SetOp(x.op, query(x.left), query(x.right), x.pos)
        adoms = [v for r, v in x.from_ if r == ADOM]
        if not adoms:
            charge()
            return SelectFromWhere(x.select, x.from_, cond(x.where), x.pos)
        variants = []
        for choice in itertools.product(pairs, repeat=len(adoms)):
            charge()
            m = dict(zip(adoms, choice))
            from_ = tuple((m[v][0], v) if r == ADOM else (r, v) for r, v in x.from_)
            renamed = {v: (v, at) for v, (_, at) in m.items()}
            sel = tuple((Term(*renamed[t.var]) if t.var in renamed and t.attr == "A" else t, a)
                        for t, a in x.select)
            where = _retarget(x.where, renamed)
            variants.append(SelectFromWhere(sel, from_, cond(where), x.pos))
        out = variants[0]
        for v in variants[1:]:
            out = SetOp("union", out, v)
        return out

    def cond(c: Cond) -> Cond:
        if isinstance(c, CIn):
            return CIn(c.term, query(c.query))
        if isinstance(c, CExists):
            return CExists(query(c.query))
        if isinstance(c, CAnd):
            return CAnd(cond(c.left), cond(c.right))
        if isinstance(c, COr):
            return COr(cond(c.left), cond(c.right))
        if isinstance(c, CNot):
            return CNot(cond(c.cond), c.pos)
        return c

    return rename_apart(query(q))


def add_adom(inst: Instance) -> Instance:
    """``inst`` plus ``ADOM(v)`` for each active-domain value."""
    return inst.add(*(Fact(ADOM, (v,)) for v in inst.active_domain))
