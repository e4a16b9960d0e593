"""Token-level negation and inequality census for real-world SQL.

Benchmark SQL uses constants, aggregation, outer joins and vendor syntax
well outside the strict FO-SQL grammar, so this analyzer does not build an
AST.  It recovers just enough structure from tokens to apply the two
negation-guardedness conditions locally at each occurrence:

* ``not`` (prefix, ``not exists``, ``not in``, ``not like``, ``not between``,
  ``is not``) is guarded when its argument mentions at most one tuple
  variable declared outside the argument;
* ``except``/``minus`` is guarded when its first operand is a simple
  projection and its second operand is uncorrelated;
* ``<>``/``!=`` is read as ``not(a = b)`` and judged like a ``not``.

Unqualified columns are resolved against a catalog when one is given,
otherwise by the common ``<prefix>_column`` naming convention.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

from .sql import NamedSchema, parse_sql


@dataclass(frozen=True)
class WorkloadStats:
    queries: int = 0
    withNegation: int = 0
    withUnguardedNegation: int = 0
    withInequalities: int = 0
    withUnguardedInequalities: int = 0

    def __add__(self, other: "WorkloadStats") -> "WorkloadStats":
        return WorkloadStats(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple:
        return (self.queries, self.withNegation, self.withUnguardedNegation,
                self.withInequalities, self.withUnguardedInequalities)


@dataclass(frozen=True)
class Occurrence:
    pos: str  # "line:col" of the operator
    kind: str
    guarded: bool
    free: tuple  # tuple variables the argument depends on from outside


@dataclass
class QueryReport:
    index: int
    negations: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    outer_joins: int = 0
    strict: bool = False  # parses as strict FO-SQL
    notes: list = field(default_factory=list)
    source: str | None = None

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "negations": [asdict(o) | {"free": list(o.free)} for o in self.negations],
            "inequalities": [asdict(o) | {"free": list(o.free)} for o in self.inequalities],
            "outer_joins": self.outer_joins,
            "strict": self.strict,
            "notes": list(self.notes),
        } | ({"source": self.source} if self.source else {})

    def stats(self) -> WorkloadStats:
        return WorkloadStats(
            1,
            int(bool(self.negations)),
            int(any(not o.guarded for o in self.negations)),
            int(bool(self.inequalities)),
            int(any(not o.guarded for o in self.inequalities)),
        )


@dataclass
class WorkloadResult:
    stats: WorkloadStats
    reports: list

    def to_json(self) -> dict:
        return asdict(self.stats) | {"perQuery": [r.to_json() for r in self.reports]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


# --- tokens ------------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # ident, qident, number, string, op
    text: str  # identifiers lower-cased
    line: int
    col: int

    @property
    def pos(self) -> str:
        return f"{self.line}:{self.col}"


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*|/\*.*?(?:\*/|\Z))
  | (?P<string>'(?:[^']|'')*(?:'|\Z))
  | (?P<qident>"[^"]*(?:"|\Z)|`[^`]*(?:`|\Z)|\[[^\]]*(?:\]|\Z))
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$#@]*)
  | (?P<op><>|!=|<=|>=|\|\||::|.)
""", re.X | re.S)


def sql_lex(text: str) -> list:
    """Tolerant tokenizer: never fails, unknown characters become ops."""
    out = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        s = m.group(0)
        if kind not in ("ws", "comment"):
            if kind == "ident":
                s = s.lower()
            elif kind == "qident":
                s = s[1:-1] if len(s) > 1 else s
            out.append(_Tok(kind, s, line, col))
        nl = m.group(0).count("\n")
        if nl:
            line += nl
            col = len(m.group(0)) - m.group(0).rfind("\n")
        else:
            col += len(m.group(0))
    return out


def split_tokens(toks: list) -> list:
    """Statements separated by ``;`` at parenthesis depth 0."""
    out, cur, depth = [], [], 0
    for t in toks:
        if t.kind == "op" and t.text == ";" and depth <= 0:
            if cur:
                out.append(cur)
            cur, depth = [], 0
            continue
        if t.kind == "op" and t.text == "(":
            depth += 1
        elif t.kind == "op" and t.text == ")":
            depth -= 1
        cur.append(t)
    if cur:
        out.append(cur)
    return out


# --- structure ---------------------------------------------------------------------

_SETOPS = {"union", "except", "intersect", "minus"}
_FROM_END = {"where", "group", "having", "order", "limit", "window", "fetch", "offset",
             "qualify"} | _SETOPS
_JOIN_WORDS = {"join", "inner", "left", "right", "full", "outer", "cross", "natural", "lateral"}
_KEYWORDS = {
    "select", "from", "where", "and", "or", "not", "exists", "in", "like", "ilike",
    "between", "is", "null", "as", "on", "using", "group", "by", "order", "having", "limit",
    "distinct", "all", "any", "some", "case", "when", "then", "else", "end", "asc", "desc",
    "with", "true", "false", "interval", "date", "time", "timestamp", "extract", "year",
    "month", "day", "hour", "minute", "second", "for", "top", "offset", "fetch", "first",
    "next", "rows", "row", "only", "cast", "over", "partition", "escape", "similar", "to",
    "values", "unknown", "nulls", "last", "view", "create", "recursive", "filter",
    "within", "substring", "position", "trim", "leading", "trailing", "both", "collate",
} | _SETOPS | _JOIN_WORDS | _FROM_END
# tokens that end an operand scan
_COND_STOP = {"and", "or", "not", "where", "on", "having", "when", "then", "else", "select",
              "by", "case", "end", "between", "like", "ilike", "in", "is", "exists", "from",
              "similar", "escape", "using", "limit", "order", "group", "as", "asc", "desc"} | _SETOPS
_CMP_OPS = {"=", "<>", "!=", "<", ">", "<=", ">="}
_CLAUSE_STOP = {"where", "group", "having", "order", "limit", "then", "when", "else", "end",
                "on", "using", "window", "fetch", "offset", "qualify", "join"} | _SETOPS | _JOIN_WORDS


@dataclass
class _TupleVar:
    name: str
    block: int
    table: str | None
    columns: frozenset | None  # known output columns, if any

    @property
    def label(self) -> str:
        return self.name


@dataclass
class _Block:
    start: int  # index of the select token
    end: int    # exclusive
    depth: int
    parent: int | None = None
    vars: list = field(default_factory=list)
    from_start: int | None = None
    from_end: int | None = None
    where: int | None = None
    outputs: frozenset = frozenset()


class _Query:
    def __init__(self, toks: list, catalog: NamedSchema | None):
        self.t = toks
        self.catalog = catalog
        self.match = self._match_parens()
        self.depth = self._depths()
        self.decl: set = set()  # token indices naming tables or aliases
        self.blocks: list = []
        self.ctes: dict = {}
        self._blocks()
        self._ctes()
        for b in range(len(self.blocks)):
            self._from_items(b)
        self.owner = self._owners()
        self.refs = self._refs()

    # parentheses
    def _match_parens(self) -> dict:
        stack, m = [], {}
        for i, t in enumerate(self.t):
            if self.is_op(i, "("):
                stack.append(i)
            elif self.is_op(i, ")") and stack:
                j = stack.pop()
                m[i], m[j] = j, i
        return m

    def _depths(self) -> list:
        out, d = [], 0
        for i in range(len(self.t)):
            if self.is_op(i, ")") and i in self.match:
                d -= 1
            out.append(d)
            if self.is_op(i, "(") and i in self.match:
                d += 1
        return out

    def is_op(self, i: int, s: str) -> bool:
        return 0 <= i < len(self.t) and self.t[i].kind == "op" and self.t[i].text == s

    def is_kw(self, i: int, *words) -> bool:
        return 0 <= i < len(self.t) and self.t[i].kind == "ident" and self.t[i].text in words

    # select blocks
    def _blocks(self):
        for i, t in enumerate(self.t):
            if not self.is_kw(i, "select"):
                continue
            d = self.depth[i]
            j = i + 1
            while j < len(self.t):
                if self.depth[j] < d:
                    break
                if self.depth[j] == d and self.is_kw(j, *_SETOPS):
                    break
                j += 1
            self.blocks.append(_Block(i, j, d))
        for k, b in enumerate(self.blocks):
            best = None
            for m, c in enumerate(self.blocks):
                if m != k and c.start < b.start < c.end and (best is None or c.start > self.blocks[best].start):
                    best = m
            b.parent = best
            self._clauses(b)

    def _clauses(self, b: _Block):
        for j in range(b.start + 1, b.end):
            if self.depth[j] != b.depth:
                continue
            if self.is_kw(j, "from") and b.from_start is None:
                b.from_start = j + 1
            elif b.from_start is not None and b.from_end is None and self.is_kw(j, *_FROM_END):
                b.from_end = j
            if self.is_kw(j, "where") and b.where is None:
                b.where = j
        if b.from_start is not None and b.from_end is None:
            b.from_end = b.end
        b.outputs = frozenset(self._outputs(b))

    def _outputs(self, b: _Block) -> list:
        stop = (b.from_start - 1) if b.from_start is not None else b.end
        items, cur = [], []
        for j in range(b.start + 1, stop):
            if self.depth[j] == b.depth and self.is_op(j, ","):
                items.append(cur)
                cur = []
            elif self.depth[j] == b.depth:
                cur.append(j)
        items.append(cur)
        names = []
        for it in items:
            if it and self.t[it[-1]].kind in ("ident", "qident") and self.t[it[-1]].text not in _KEYWORDS:
                names.append(self.t[it[-1]].text)
                if len(it) >= 2 and self.is_kw(it[-2], "as"):
                    self.decl.add(it[-1])
        return names

    def _ctes(self):
        """``name [(cols)] as (select ...)`` after ``with``."""
        for i in range(len(self.t) - 2):
            if not self.is_kw(i + 1, "as") and not self.is_op(i + 1, "("):
                continue
            if not (self.is_kw(i - 1, "with", "recursive") or self.is_op(i - 1, ",")):
                continue
            if self.t[i].kind not in ("ident", "qident"):
                continue
            j = i + 1
            cols = None
            if self.is_op(j, "("):
                close = self.match.get(j)
                if close is None:
                    continue
                cols = frozenset(self.t[k].text for k in range(j + 1, close) if self.t[k].kind in ("ident", "qident"))
                j = close + 1
            if not (self.is_kw(j, "as") and self.is_op(j + 1, "(") and self.is_kw(j + 2, "select")):
                continue
            blk = next(k for k, b in enumerate(self.blocks) if b.start == j + 2)
            self.ctes[self.t[i].text] = cols if cols is not None else self.blocks[blk].outputs
            self.decl.add(i)

    def _from_items(self, k: int):
        b = self.blocks[k]
        if b.from_start is None:
            return
        segs, cur = [], []
        j = b.from_start
        skipping = False
        while j < b.from_end:
            if self.depth[j] != b.depth:
                if not skipping:
                    cur.append(j)
                j += 1
                continue
            if self.is_op(j, ",") and not skipping:
                segs.append(cur)
                cur = []
            elif self.is_op(j, ","):
                pass
            elif self.is_kw(j, *_JOIN_WORDS):
                if cur:
                    segs.append(cur)
                cur, skipping = [], False
            elif self.is_kw(j, "on", "using"):
                segs.append(cur)
                cur, skipping = [], True
            elif not skipping:
                cur.append(j)
            j += 1
        segs.append(cur)
        for seg in segs:
            self._from_item(k, [j for j in seg if self.depth[j] == b.depth])

    def _from_item(self, k: int, seg: list):
        if not seg:
            return
        first = seg[0]
        table, cols = None, None
        rest = seg[1:]
        if self.is_op(first, "("):
            close = self.match.get(first)
            inner = [c for c in self.blocks if c.start == first + 1]
            cols = inner[0].outputs if inner else None
            rest = [j for j in seg if close is not None and j > close]
        elif self.t[first].kind in ("ident", "qident"):
            # schema-qualified names keep the last component
            while rest and self.is_op(rest[0], ".") and len(rest) > 1:
                first, rest = rest[1], rest[2:]
            table = self.t[first].text
            self.decl.add(first)
            if table in self.ctes:
                cols = self.ctes[table]
            elif self.catalog is not None and table in self.catalog.relations:
                cols = frozenset(a.lower() for a in self.catalog.relations[table])
            else:
                for rel, attrs in (self.catalog.relations.items() if self.catalog else ()):
                    if rel.lower() == table:
                        cols = frozenset(a.lower() for a in attrs)
        else:
            return
        if rest and self.is_kw(rest[0], "as"):
            rest = rest[1:]
        alias = None
        if rest and self.t[rest[0]].kind in ("ident", "qident") and self.t[rest[0]].text not in _KEYWORDS:
            alias = self.t[rest[0]].text
            self.decl.add(rest[0])
            if len(rest) > 1 and self.is_op(rest[1], "("):
                close = self.match.get(rest[1], rest[1])
                cols = frozenset(self.t[c].text for c in range(rest[1] + 1, close)
                                 if self.t[c].kind in ("ident", "qident"))
                self.decl.update(range(rest[1] + 1, close))
        name = alias or table
        if name is None:
            return
        self.blocks[k].vars.append(_TupleVar(name, k, table, cols))

    def _owners(self) -> list:
        out = [None] * len(self.t)
        for k in sorted(range(len(self.blocks)), key=lambda k: self.blocks[k].start):
            b = self.blocks[k]
            for j in range(b.start, b.end):
                out[j] = k
        return out

    # column references
    def _refs(self) -> dict:
        """Token index -> resolved tuple variable for every column reference."""
        out = {}
        for i, t in enumerate(self.t):
            if t.kind not in ("ident", "qident") or i in self.decl:
                continue
            if self.is_op(i - 1, "."):
                continue
            if self.is_op(i + 1, ".") and i + 2 < len(self.t):
                v = self._resolve_alias(t.text, self.owner[i])
                if v is not None:
                    out[i] = v
                continue
            if t.kind == "ident" and (t.text in _KEYWORDS or self.is_op(i + 1, "(")):
                continue
            if self.is_kw(i - 1, "as"):
                continue
            v = self._resolve_column(t.text, self.owner[i])
            if v is not None:
                out[i] = v
        return out

    def _scopes(self, k):
        while k is not None:
            yield k
            k = self.blocks[k].parent

    def _resolve_alias(self, name: str, k):
        for s in self._scopes(k):
            for v in self.blocks[s].vars:
                if v.name == name:
                    return v
        return None

    def _resolve_column(self, col: str, k):
        for s in self._scopes(k):
            hits = [v for v in self.blocks[s].vars if v.columns is not None and col in v.columns]
            if not hits and self.catalog is None:
                hits = _prefix_hits(col, self.blocks[s].vars)
            if hits:
                return hits[0]
        if k is not None and self.catalog is None:
            vs = self.blocks[k].vars
            if len(vs) == 1 and vs[0].columns is None:
                return vs[0]
        return None

    # analysis helpers
    def free_in(self, lo: int, hi: int) -> tuple:
        """Tuple variables referenced in [lo, hi) but declared outside it."""
        inside = {k for k, b in enumerate(self.blocks) if lo <= b.start < hi}
        names = []
        for i in range(lo, hi):
            v = self.refs.get(i)
            if v is not None and v.block not in inside:
                key = (v.block, v.name)
                if key not in names:
                    names.append(key)
        return tuple(names)

    def label(self, key: tuple) -> str:
        b, name = key
        return name

    def operand_back(self, i: int) -> int:
        """Start index of the operand ending just before ``i``."""
        j = i - 1
        d = self.depth[i]
        while j >= 0:
            if self.is_op(j, ")") and j in self.match:
                j = self.match[j] - 1
                continue
            if self.depth[j] < d:
                break
            t = self.t[j]
            if t.kind == "op" and (t.text in _CMP_OPS or t.text in ",(;"):
                break
            if t.kind == "ident" and t.text in _COND_STOP:
                break
            j -= 1
        return j + 1

    def operand_fwd(self, i: int) -> int:
        """Exclusive end of the operand starting at ``i``."""
        j = i
        d = self.depth[i] if i < len(self.t) else 0
        while j < len(self.t):
            if self.is_op(j, "(") and j in self.match:
                j = self.match[j] + 1
                continue
            if self.depth[j] < d:
                break
            t = self.t[j]
            if t.kind == "op" and (t.text in _CMP_OPS or t.text in ",);"):
                break
            if t.kind == "ident" and t.text in _COND_STOP:
                break
            j += 1
        return j

    def condition_fwd(self, i: int) -> int:
        """Exclusive end of a prefix-``not`` argument: the next ``and``/``or``
        or clause boundary at the same depth."""
        j = i
        d = self.depth[i] if i < len(self.t) else 0
        in_between = False
        while j < len(self.t):
            if self.is_op(j, "(") and j in self.match:
                j = self.match[j] + 1
                continue
            if self.depth[j] < d or self.is_op(j, ";") or self.is_op(j, ","):
                break
            if self.is_kw(j, "between"):
                in_between = True
            elif self.is_kw(j, "and") and in_between:
                in_between = False
            elif self.is_kw(j, "and", "or") or self.is_kw(j, *_CLAUSE_STOP):
                break
            j += 1
        return j


def _prefix_hits(col: str, tvars: list) -> list:
    if "_" not in col.strip("_"):
        return []
    prefix = col.strip("_").split("_")[0]
    hits = []
    for v in tvars:
        t = (v.table or "").lower()
        if not t or t[0] != prefix[0]:
            continue
        it = iter(t)
        if all(ch in it for ch in prefix):
            hits.append(v)
    hits.sort(key=lambda v: len(v.table))
    return hits


# --- occurrences --------------------------------------------------------------------

def _analyze(toks: list, index: int, catalog: NamedSchema | None) -> QueryReport:
    rep = QueryReport(index)
    q = _Query(toks, catalog)
    for i, t in enumerate(toks):
        if t.kind == "ident" and t.text == "not":
            occ = _negation(q, i)
            if occ is not None:
                rep.negations.append(occ)
        elif t.kind == "ident" and t.text in ("except", "minus") and _is_setop(q, i):
            rep.negations.append(_except(q, i))
        elif t.kind == "op" and t.text in ("<>", "!="):
            lo, hi = q.operand_back(i), q.operand_fwd(i + 1)
            free = q.free_in(lo, hi)
            rep.inequalities.append(Occurrence(t.pos, t.text, len(free) <= 1,
                                               tuple(q.label(f) for f in free)))
        elif t.kind == "ident" and t.text == "join" and i > 0:
            if q.is_kw(i - 1, "outer") or q.is_kw(i - 1, "left", "right", "full"):
                rep.outer_joins += 1
    if rep.outer_joins:
        rep.notes.append("outer joins present; not counted as negation")
    try:
        parse_sql(" ".join(_detok(t) for t in toks))
        rep.strict = True
    except Exception:
        rep.strict = False
    return rep


def _detok(t: _Tok) -> str:
    return "'" + t.text.replace("'", "''") + "'" if t.kind == "string" else t.text


def _is_setop(q: _Query, i: int) -> bool:
    # "select * except (col)" is a projection modifier, not a set operator
    return not q.is_op(i - 1, "*")


def _negation(q: _Query, i: int) -> Occurrence | None:
    t = q.t[i]
    if q.is_kw(i - 1, "is"):
        lo = q.operand_back(i - 1)
        hi = i + 1
        if q.is_kw(hi, "distinct") and q.is_kw(hi + 1, "from"):
            hi = q.operand_fwd(hi + 2)
        else:
            hi = q.operand_fwd(hi)
        kind = "is not"
    elif q.is_kw(i + 1, "exists"):
        lo = i + 1
        hi = q.match.get(i + 2, i + 2) + 1 if q.is_op(i + 2, "(") else i + 2
        kind = "not exists"
    elif q.is_kw(i + 1, "in", "like", "ilike", "between", "similar") and not _starts_condition(q, i):
        lo = q.operand_back(i)
        word = q.t[i + 1].text
        j = i + 2
        if word == "similar" and q.is_kw(j, "to"):
            j += 1
        if word == "in" and q.is_op(j, "("):
            hi = q.match.get(j, j) + 1
        elif word == "between":
            hi = q.operand_fwd(j)
            if q.is_kw(hi, "and"):
                hi = q.operand_fwd(hi + 1)
        else:
            hi = q.operand_fwd(j)
            if q.is_kw(hi, "escape"):
                hi = q.operand_fwd(hi + 1)
        kind = f"not {word}"
    else:
        lo = i + 1
        hi = q.condition_fwd(i + 1)
        kind = "not"
    free = q.free_in(lo, hi)
    return Occurrence(t.pos, kind, len(free) <= 1, tuple(q.label(f) for f in free))


def _starts_condition(q: _Query, i: int) -> bool:
    """True when ``not`` at ``i`` is a prefix operator, not an infix one."""
    if i == 0:
        return True
    p = q.t[i - 1]
    if p.kind == "op":
        return p.text in ("(", ",") or p.text in _CMP_OPS
    return p.text in _COND_STOP and p.text not in ("end",)


def _except(q: _Query, i: int) -> Occurrence:
    t = q.t[i]
    d = q.depth[i]
    # left operand: back to the start of the enclosing group
    lo = i - 1
    while lo >= 0 and q.depth[lo] >= d:
        lo -= 1
    lo += 1
    hi = i + 1
    if q.is_kw(hi, "all", "distinct"):
        hi += 1
    right_lo = hi
    while hi < len(q.t) and q.depth[hi] >= d and not (q.depth[hi] == d and q.is_kw(hi, *_SETOPS)):
        hi += 1
    simple = _simple_projection(q, lo, i)
    free = q.free_in(right_lo, hi)
    labels = tuple(q.label(f) for f in free)
    return Occurrence(t.pos, t.text, simple and not free, labels)


def _simple_projection(q: _Query, lo: int, hi: int) -> bool:
    """One select block over one relation with no or a trivial where clause."""
    while q.is_op(lo, "(") and q.match.get(lo) == hi - 1:
        lo, hi = lo + 1, hi - 1
    top = [b for b in q.blocks if lo <= b.start < hi and b.depth == q.depth[lo]]
    if len(top) != 1 or top[0].start != lo or top[0].end < hi:
        return False
    b = top[0]
    if len(b.vars) != 1 or b.from_start is None:
        return False
    if any(q.depth[j] > b.depth for j in range(b.from_start, b.from_end)):
        return False
    if b.where is not None:
        if not (q.is_kw(b.where + 1, "true") and b.where + 2 >= hi):
            return False
    trail = [j for j in range(b.from_end, hi) if j != b.where and not q.is_kw(j, "true")]
    return not trail


# --- entry points -------------------------------------------------------------------

def _analyze_job(args) -> QueryReport:
    index, toks, catalog = args
    if isinstance(toks, str):
        toks = sql_lex(toks)
    return _analyze(toks, index, catalog)


def _run(jobs: list, workers: int) -> WorkloadResult:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_analyze_job, jobs))
    else:
        reports = [_analyze_job(j) for j in jobs]
    stats = sum((r.stats() for r in reports), WorkloadStats())
    return WorkloadResult(stats, reports)


def analyze_workload(queries: list, catalog: NamedSchema | None = None,
                     workers: int = 1) -> WorkloadResult:
    """Count negations and inequalities per query and classify each one.

    ``queries`` are raw SQL texts, one statement each.
    """
    return _run([(k, text, catalog) for k, text in enumerate(queries)], workers)


def analyze_sql_text(text: str, catalog: NamedSchema | None = None,
                     workers: int = 1) -> WorkloadResult:
    """Analyze every ``;``-separated statement of a file.  Positions refer
    to the file."""
    stmts = split_tokens(sql_lex(text))
    return _run([(k, toks, catalog) for k, toks in enumerate(stmts)], workers)


def bundled(name: str) -> str:
    """Text of a data file shipped with the package (``minicorpus.sql``,
    ``fig3.sql``, ``authors.catalog``)."""
    return resources.files("gnq").joinpath("data").joinpath(name).read_text()
