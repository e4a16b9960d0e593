"""FO-SQL: syntax tree, parser, printer, typing, set-semantics evaluation
and the negation-guardedness check.

Grammar (keywords are case-insensitive)::

    query := sfw | query union query | query intersect query | query except query | (query)
    sfw   := select [(] t [as a], ... [)] from [(] rel R, ... [)] [where cond]
    cond  := true | t = t | t in (query) | exists(query) | cond and cond
           | cond or cond | not cond | (cond)
    t     := R.attr

Attributes of a query form a set; tuples are laid out with attributes in
lexicographic order.  Instances are positional, with column order taken
from the catalog (``book(isbn, author, title)``, one relation per line).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .errors import GnqError
from .formula import Schema
from .instance import Instance
from .lexer import TokenStream, tokenize


class SqlTypeError(GnqError):
    pass


@dataclass(frozen=True)
class NamedSchema:
    relations: dict  # name -> tuple of attribute names

    def __hash__(self):
        return hash(tuple(sorted(self.relations.items())))

    def attrs(self, rel: str) -> tuple:
        try:
            return self.relations[rel]
        except KeyError:
            raise SqlTypeError(f"unknown relation {rel}") from None

    def position(self, rel: str, attr: str) -> int:
        attrs = self.attrs(rel)
        if attr not in attrs:
            raise SqlTypeError(f"relation {rel} has no attribute {attr}")
        return attrs.index(attr)

    def positional(self):
        return Schema({r: len(a) for r, a in self.relations.items()})

    def with_adom(self) -> "NamedSchema":
        rels = dict(self.relations)
        rels.setdefault(ADOM, ("A",))
        return NamedSchema(rels)


ADOM = "ADOM"


def parse_catalog(text: str, source: str | None = None) -> NamedSchema:
    ts = TokenStream(tokenize(text, source=source, line_comment="--"), source)
    rels: dict = {}
    while ts.peek.kind != "eof":
        name = ts.expect_ident("relation name")
        ts.expect("(")
        attrs = []
        if not ts.at(")"):
            attrs.append(ts.expect_ident("attribute").text)
            while ts.accept(","):
                attrs.append(ts.expect_ident("attribute").text)
        ts.expect(")")
        ts.accept(".")
        ts.accept(";")
        if name.text in rels:
            ts.error(f"relation {name.text} declared twice", name)
        if len(set(attrs)) != len(attrs):
            ts.error(f"duplicate attribute in {name.text}", name)
        rels[name.text] = tuple(attrs)
    return NamedSchema(rels)


def format_catalog(s: NamedSchema) -> str:
    return "".join(f"{r}({', '.join(a)})\n" for r, a in sorted(s.relations.items()))


# --- syntax tree ---------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    var: str
    attr: str

    def __str__(self) -> str:
        return f"{self.var}.{self.attr}"


@dataclass(frozen=True)
class SelectFromWhere:
    select: tuple  # of (Term, output attribute)
    from_: tuple  # of (relation, tuple variable)
    where: "Cond"
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SetOp:
    op: str  # "union" | "intersect" | "except"
    left: "SqlQuery"
    right: "SqlQuery"
    pos: tuple = field(default=(0, 0), compare=False)


SqlQuery = SelectFromWhere | SetOp


@dataclass(frozen=True)
class CTrue:
    pass


@dataclass(frozen=True)
class CEq:
    left: Term
    right: Term


@dataclass(frozen=True)
class CIn:
    term: Term
    query: SqlQuery


@dataclass(frozen=True)
class CExists:
    query: SqlQuery


@dataclass(frozen=True)
class CAnd:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class COr:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class CNot:
    cond: "Cond"
    pos: tuple = field(default=(0, 0), compare=False)


Cond = CTrue | CEq | CIn | CExists | CAnd | COr | CNot


def sql_union(parts: list) -> SqlQuery:
    out = parts[0]
    for p in parts[1:]:
        out = SetOp("union", out, p)
    return out


# --- parser ----------------------------------------------------------------------

SQL_OPS = ("<>", "!=", "<=", ">=", "(", ")", ",", ".", ";", "=", "<", ">", "*", "+", "-", "/", "||")


def sql_tokens(text: str, source: str | None = None):
    text = re.sub(r"/\*.*?\*/", lambda m: re.sub(r"[^\n]", " ", m.group(0)), text, flags=re.S)
    return tokenize(text, ops=SQL_OPS, source=source, line_comment="--")


def split_statements(text: str) -> list:
    """Split on ``;`` outside quotes and comments; blank statements are dropped."""
    return [s for _, s in _statement_spans(text)]


def _statement_spans(text: str) -> list:
    out, buf, i, n = [], [], 0, len(text)
    start = 0
    quote = None
    while i < n:
        ch = text[i]
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            buf.append(ch)
        elif text.startswith("--", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            buf.append(text[i:j])
            i = j
            continue
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            buf.append(text[i:j])
            i = j
            continue
        elif ch == ";":
            out.append((start, "".join(buf)))
            buf = []
            start = i + 1
        else:
            buf.append(ch)
        i += 1
    out.append((start, "".join(buf)))
    return [(k, s) for k, s in out if _has_code(s)]


def _has_code(s: str) -> bool:
    s = re.sub(r"/\*.*?\*/", "", s, flags=re.S)
    s = re.sub(r"--[^\n]*", "", s)
    return bool(s.strip())


def parse_sql(text: str, source: str | None = None) -> SqlQuery:
    text = text.rstrip()
    if text.endswith(";"):
        text = text[:-1]
    ts = TokenStream(sql_tokens(text, source), source)
    p = _SqlParser(ts)
    q = p.query()
    if ts.peek.kind != "eof":
        ts.error(f"unexpected {ts.describe(ts.peek)}")
    return q


def parse_sql_file(text: str, source: str | None = None) -> list:
    """Every statement of ``text``; positions refer to the whole file."""
    out = []
    for start, stmt in _statement_spans(text):
        before = text[:start]
        line_start = before.rfind("\n") + 1
        pad = "\n" * before.count("\n") + " " * (start - line_start)
        out.append(parse_sql(pad + stmt, source))
    return out


class _SqlParser:
    def __init__(self, ts: TokenStream):
        self.ts = ts

    def kw(self, word: str) -> bool:
        return self.ts.at_keyword(word)

    def query(self) -> SqlQuery:
        q = self.intersect_level()
        while self.kw("union") or self.kw("except"):
            tok = self.ts.next()
            q = SetOp(tok.text.lower(), q, self.intersect_level(), (tok.line, tok.column))
        return q

    def intersect_level(self) -> SqlQuery:
        q = self.primary()
        while self.kw("intersect"):
            tok = self.ts.next()
            q = SetOp("intersect", q, self.primary(), (tok.line, tok.column))
        return q

    def primary(self) -> SqlQuery:
        if self.ts.accept("("):
            q = self.query()
            self.ts.expect(")")
            return q
        return self.sfw()

    def sfw(self) -> SelectFromWhere:
        ts = self.ts
        start = ts.expect_keyword("select")
        items = []
        if ts.at("(") and not self._paren_is_term():
            ts.next()
            if not ts.at(")"):
                items.append(self.select_item())
                while ts.accept(","):
                    items.append(self.select_item())
            ts.expect(")")
        else:
            items.append(self.select_item())
            while ts.accept(","):
                items.append(self.select_item())
        ts.expect_keyword("from")
        froms = []
        if ts.accept("("):
            if not ts.at(")"):
                froms.append(self.from_item())
                while ts.accept(","):
                    froms.append(self.from_item())
            ts.expect(")")
        else:
            froms.append(self.from_item())
            while ts.accept(","):
                froms.append(self.from_item())
        where: Cond = CTrue()
        if ts.accept_keyword("where"):
            where = self.cond()
        return SelectFromWhere(tuple(items), tuple(froms), where, (start.line, start.column))

    def _paren_is_term(self) -> bool:
        return False

    def select_item(self):
        t = self.term()
        if self.ts.accept_keyword("as"):
            return (t, self.ts.expect_ident("attribute name").text)
        return (t, t.attr)

    def from_item(self):
        rel = self.ts.expect_ident("relation name").text
        self.ts.accept_keyword("as")
        tok = self.ts.peek
        if tok.kind == "ident" and tok.text.lower() not in _CLAUSE_WORDS:
            return (rel, self.ts.next().text)
        return (rel, rel)

    def term(self) -> Term:
        v = self.ts.expect_ident("tuple variable")
        self.ts.expect(".")
        a = self.ts.expect_ident("attribute")
        return Term(v.text, a.text)

    def cond(self) -> Cond:
        c = self.conj()
        while self.ts.accept_keyword("or"):
            c = COr(c, self.conj())
        return c

    def conj(self) -> Cond:
        c = self.unary()
        while self.ts.accept_keyword("and"):
            c = CAnd(c, self.unary())
        return c

    def unary(self) -> Cond:
        ts = self.ts
        tok = ts.peek
        if ts.accept_keyword("not"):
            return CNot(self.unary(), (tok.line, tok.column))
        if ts.accept_keyword("true"):
            return CTrue()
        if ts.accept_keyword("exists"):
            ts.expect("(")
            q = self.query()
            ts.expect(")")
            return CExists(q)
        if ts.accept("("):
            c = self.cond()
            ts.expect(")")
            return c
        left = self.term()
        if ts.accept("="):
            return CEq(left, self.term())
        if ts.accept_keyword("in"):
            ts.expect("(")
            q = self.query()
            ts.expect(")")
            return CIn(left, q)
        ts.error(f"expected '=' or 'in', found {ts.describe(ts.peek)}")


_CLAUSE_WORDS = {"where", "union", "intersect", "except", "as", "from", "select"}


# --- printer ---------------------------------------------------------------------

def format_sql(q: SqlQuery) -> str:
    if isinstance(q, SetOp):
        return f"({format_sql(q.left)}) {q.op} ({format_sql(q.right)})"
    items = ", ".join(f"{t} as {a}" for t, a in q.select)
    froms = ", ".join(f"{r} {v}" for r, v in q.from_)
    sel = f"({items})" if not q.select else items
    frm = f"({froms})" if not q.from_ else froms
    return f"select {sel} from {frm} where {format_cond(q.where)}"


def format_cond(c: Cond) -> str:
    if isinstance(c, CTrue):
        return "true"
    if isinstance(c, CEq):
        return f"{c.left} = {c.right}"
    if isinstance(c, CIn):
        return f"{c.term} in ({format_sql(c.query)})"
    if isinstance(c, CExists):
        return f"exists({format_sql(c.query)})"
    if isinstance(c, CNot):
        return f"not({format_cond(c.cond)})"
    if isinstance(c, CAnd):
        return f"{_wrap_or(c.left)} and {_wrap_or(c.right)}"
    if isinstance(c, COr):
        return f"{format_cond(c.left)} or {format_cond(c.right)}"
    raise TypeError(c)


def _wrap_or(c: Cond) -> str:
    s = format_cond(c)
    return f"({s})" if isinstance(c, COr) else s


# --- traversal helpers ---------------------------------------------------------

def cond_queries(c: Cond) -> list:
    if isinstance(c, (CIn, CExists)):
        return [c.query]
    if isinstance(c, (CAnd, COr)):
        return cond_queries(c.left) + cond_queries(c.right)
    if isinstance(c, CNot):
        return cond_queries(c.cond)
    return []


def query_free_vars(q: SqlQuery) -> frozenset:
    """Tuple variables used in ``q`` but not declared inside it."""
    if isinstance(q, SetOp):
        return query_free_vars(q.left) | query_free_vars(q.right)
    declared = {v for _, v in q.from_}
    used = {t.var for t, _ in q.select} | cond_free_vars(q.where)
    return frozenset(used - declared)


def cond_free_vars(c: Cond) -> frozenset:
    if isinstance(c, CTrue):
        return frozenset()
    if isinstance(c, CEq):
        return frozenset({c.left.var, c.right.var})
    if isinstance(c, CIn):
        return frozenset({c.term.var}) | query_free_vars(c.query)
    if isinstance(c, CExists):
        return query_free_vars(c.query)
    if isinstance(c, (CAnd, COr)):
        return cond_free_vars(c.left) | cond_free_vars(c.right)
    if isinstance(c, CNot):
        return cond_free_vars(c.cond)
    raise TypeError(c)


def query_size(q: SqlQuery) -> int:
    if isinstance(q, SetOp):
        return 1 + query_size(q.left) + query_size(q.right)
    return 1 + len(q.select) + len(q.from_) + cond_size(q.where)


def cond_size(c: Cond) -> int:
    if isinstance(c, (CAnd, COr)):
        return 1 + cond_size(c.left) + cond_size(c.right)
    if isinstance(c, CNot):
        return 1 + cond_size(c.cond)
    if isinstance(c, (CIn, CExists)):
        return 1 + query_size(c.query)
    return 1


# --- typing ----------------------------------------------------------------------

def typecheck_sql(q: SqlQuery, schema: NamedSchema) -> tuple:
    """The type of ``q`` as a sorted tuple of attribute names.

    Raises ``SqlTypeError`` on unknown relations or attributes, mismatched
    combinator types, non-unary ``in`` subqueries, tuple variables declared
    more than once, and free tuple variables in the outermost query.
    """
    declared: list = []
    t = _type_query(q, schema, {}, declared)
    dup = {v for v in declared if declared.count(v) > 1}
    if dup:
        raise SqlTypeError(f"tuple variable declared more than once: {', '.join(sorted(dup))}")
    return t


def _type_query(q: SqlQuery, schema: NamedSchema, env: dict, declared: list) -> tuple:
    if isinstance(q, SetOp):
        a = _type_query(q.left, schema, env, declared)
        b = _type_query(q.right, schema, env, declared)
        if a != b:
            raise SqlTypeError(f"{q.op} of queries with types {list(a)} and {list(b)}")
        return a
    local = dict(env)
    for rel, v in q.from_:
        schema.attrs(rel)
        if v in [w for _, w in q.from_ if w == v][1:]:
            raise SqlTypeError(f"tuple variable {v} declared twice in one from clause")
        declared.append(v)
        local[v] = rel
    outs = [a for _, a in q.select]
    if len(set(outs)) != len(outs):
        raise SqlTypeError(f"duplicate output attribute in select: {outs}")
    for t, _ in q.select:
        _type_term(t, schema, local)
    _type_cond(q.where, schema, local, declared)
    return tuple(sorted(outs))


def _type_term(t: Term, schema: NamedSchema, env: dict):
    if t.var not in env:
        raise SqlTypeError(f"tuple variable {t.var} is not declared")
    schema.position(env[t.var], t.attr)


def _type_cond(c: Cond, schema: NamedSchema, env: dict, declared: list):
    if isinstance(c, CTrue):
        return
    if isinstance(c, CEq):
        _type_term(c.left, schema, env)
        _type_term(c.right, schema, env)
    elif isinstance(c, CIn):
        _type_term(c.term, schema, env)
        t = _type_query(c.query, schema, env, declared)
        if len(t) != 1:
            raise SqlTypeError(f"'in' needs a unary subquery, got type {list(t)}")
    elif isinstance(c, CExists):
        _type_query(c.query, schema, env, declared)
    elif isinstance(c, (CAnd, COr)):
        _type_cond(c.left, schema, env, declared)
        _type_cond(c.right, schema, env, declared)
    elif isinstance(c, CNot):
        _type_cond(c.cond, schema, env, declared)
    else:
        raise TypeError(c)


# --- evaluation ------------------------------------------------------------------

def eval_sql(q: SqlQuery, inst: Instance, schema: NamedSchema) -> set:
    """Set semantics; answer tuples list attributes in sorted order."""
    typecheck_sql(q, schema)
    return set(_eval_query(q, inst, schema, {}))


def _eval_query(q: SqlQuery, inst: Instance, schema: NamedSchema, env: dict) -> frozenset:
    if isinstance(q, SetOp):
        a = _eval_query(q.left, inst, schema, env)
        b = _eval_query(q.right, inst, schema, env)
        if q.op == "union":
            return a | b
        if q.op == "intersect":
            return a & b
        return a - b
    order = sorted(range(len(q.select)), key=lambda i: q.select[i][1])
    rels = [sorted(inst.relation(rel)) for rel, _ in q.from_]
    out = set()
    for combo in itertools.product(*rels):
        local = dict(env)
        for (rel, v), row in zip(q.from_, combo):
            local[v] = (rel, row)
        if _eval_cond(q.where, inst, schema, local):
            vals = [_value(t, schema, local) for t, _ in q.select]
            out.add(tuple(vals[i] for i in order))
    return frozenset(out)


def _value(t: Term, schema: NamedSchema, env: dict) -> str:
    rel, row = env[t.var]
    return row[schema.position(rel, t.attr)]


def _eval_cond(c: Cond, inst, schema, env) -> bool:
    if isinstance(c, CTrue):
        return True
    if isinstance(c, CEq):
        return _value(c.left, schema, env) == _value(c.right, schema, env)
    if isinstance(c, CIn):
        return (_value(c.term, schema, env),) in _eval_query(c.query, inst, schema, env)
    if isinstance(c, CExists):
        return bool(_eval_query(c.query, inst, schema, env))
    if isinstance(c, CAnd):
        return _eval_cond(c.left, inst, schema, env) and _eval_cond(c.right, inst, schema, env)
    if isinstance(c, COr):
        return _eval_cond(c.left, inst, schema, env) or _eval_cond(c.right, inst, schema, env)
    if isinstance(c, CNot):
        return not _eval_cond(c.cond, inst, schema, env)
    raise TypeError(c)


# --- guardedness -----------------------------------------------------------------

@dataclass(frozen=True)
class SqlViolation:
    kind: str  # "except-first-argument" | "except-correlated" | "not-free-variables"
    pos: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.pos[0]}:{self.pos[1]}: {self.detail}"


@dataclass(frozen=True)
class SqlGuardReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def is_simple_projection(q: SqlQuery) -> bool:
    """A single-relation select-from-where with a trivial where clause whose
    select terms all use the declared tuple variable."""
    if not isinstance(q, SelectFromWhere) or not isinstance(q.where, CTrue):
        return False
    if len(q.from_) != 1:
        return False
    v = q.from_[0][1]
    return all(t.var == v for t, _ in q.select)


def check_sql_guarded(q: SqlQuery) -> SqlGuardReport:
    out: list = []
    _guard_query(q, out)
    return SqlGuardReport(tuple(out))


def _guard_query(q: SqlQuery, out: list):
    if isinstance(q, SetOp):
        if q.op == "except":
            if not is_simple_projection(q.left):
                out.append(SqlViolation("except-first-argument", q.pos,
                                        "first argument is not a simple projection"))
            fv = query_free_vars(q.right)
            if fv:
                out.append(SqlViolation("except-correlated", q.pos,
                                        f"second argument mentions {', '.join(sorted(fv))}"))
        _guard_query(q.left, out)
        _guard_query(q.right, out)
        return
    _guard_cond(q.where, out)


def _guard_cond(c: Cond, out: list):
    if isinstance(c, CNot):
        fv = cond_free_vars(c.cond)
        if len(fv) > 1:
            out.append(SqlViolation("not-free-variables", c.pos,
                                    f"negated condition has free tuple variables {', '.join(sorted(fv))}"))
        _guard_cond(c.cond, out)
    elif isinstance(c, (CAnd, COr)):
        _guard_cond(c.left, out)
        _guard_cond(c.right, out)
    elif isinstance(c, (CIn, CExists)):
        _guard_query(c.query, out)


def rename_apart(q: SqlQuery) -> SqlQuery:
    """Give every tuple-variable declaration a distinct name, respecting scope."""
    counter: dict = {}
    used: set = set()

    def fresh(v: str) -> str:
        if v not in used:
            used.add(v)
            return v
        i = counter.get(v, 1)
        while f"{v}_{i}" in used:
            i += 1
        counter[v] = i + 1
        name = f"{v}_{i}"
        used.add(name)
        return name

    def term(t: Term, env: dict) -> Term:
        return Term(env.get(t.var, t.var), t.attr)

    def query(x: SqlQuery, env: dict) -> SqlQuery:
        if isinstance(x, SetOp):
            return SetOp(x.op, query(x.left, env), query(x.right, env), x.pos)
        local = dict(env)
        from_ = []
        for rel, v in x.from_:
            nv = fresh(v)
            local[v] = nv
            from_.append((rel, nv))
        sel = tuple((term(t, local), a) for t, a in x.select)
        return SelectFromWhere(sel, tuple(from_), cond(x.where, local), x.pos)

    def cond(c: Cond, env: dict) -> Cond:
        if isinstance(c, CEq):
            return CEq(term(c.left, env), term(c.right, env))
        if isinstance(c, CIn):
            return CIn(term(c.term, env), query(c.query, env))
        if isinstance(c, CExists):
            return CExists(query(c.query, env))
        if isinstance(c, CAnd):
            return CAnd(cond(c.left, env), cond(c.right, env))
        if isinstance(c, COr):
            return COr(cond(c.left, env), cond(c.right, env))
        if isinstance(c, CNot):
            return CNot(cond(c.cond, env), c.pos)
        return c

    return query(q, {})
