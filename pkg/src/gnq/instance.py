"""Facts, finite instances and the instance text format.

One fact per line, ``R(a,b).``; values are identifiers, numerals or
double-quoted strings.  ``%`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ParseError, SchemaError
from .formula import Schema
from .lexer import TokenStream, tokenize


@dataclass(frozen=True, order=True)
class Fact:
    rel: str
    values: tuple

    def __str__(self) -> str:
        return f"{self.rel}({','.join(format_value(v) for v in self.values)})"


def format_value(v: str) -> str:
    if v and all(c.isalnum() or c == "_" for c in v):
        return v
    return '"' + v + '"'


class Instance:
    """An immutable finite set of facts with an optional declared schema."""

    __slots__ = ("facts", "_schema", "_by_rel", "_adom", "_hash")

    def __init__(self, facts: Iterable[Fact] = (), schema: Schema | None = None):
        self.facts = frozenset(facts)
        by_rel: dict = {}
        for f in self.facts:
            by_rel.setdefault(f.rel, set()).add(f.values)
        rels = dict(schema.relations) if schema else {}
        for rel, rows in by_rel.items():
            arities = {len(r) for r in rows}
            if len(arities) > 1:
                raise SchemaError(f"relation {rel} used with arities {sorted(arities)}")
            (ar,) = arities
            if rel in rels and rels[rel] != ar:
                raise SchemaError(f"{rel} declared with arity {rels[rel]} but a fact has {ar} values")
            rels[rel] = ar
        self._schema = Schema(rels, schema.constants if schema else frozenset())
        self._by_rel = {k: frozenset(v) for k, v in by_rel.items()}
        self._adom = frozenset(v for f in self.facts for v in f.values)
        self._hash = None

    @classmethod
    def from_dict(cls, rels: dict, schema: Schema | None = None) -> "Instance":
        """``{"R": [("a","b")], ...}`` to an instance."""
        return cls((Fact(r, tuple(t)) for r, rows in rels.items() for t in rows), schema)

    @property
    def schema(self) -> Schema:
        return self._schema

    @property
    def active_domain(self) -> frozenset:
        return self._adom

    def relation(self, rel: str) -> frozenset:
        return self._by_rel.get(rel, frozenset())

    def relation_names(self) -> list:
        return sorted(self._schema.relations)

    def add(self, *facts: Fact) -> "Instance":
        return Instance(self.facts | set(facts), self._schema)

    def remove(self, *facts: Fact) -> "Instance":
        return Instance(self.facts - set(facts), self._schema)

    def union(self, other: "Instance") -> "Instance":
        return Instance(self.facts | other.facts, self._schema.with_relations(other.schema.relations))

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self):
        return iter(sorted(self.facts))

    def __contains__(self, fact: Fact) -> bool:
        return fact in self.facts

    def __eq__(self, other) -> bool:
        return isinstance(other, Instance) and self.facts == other.facts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.facts)
        return self._hash

    def __repr__(self) -> str:
        return "Instance{" + ", ".join(str(f) for f in self) + "}"

    def to_text(self) -> str:
        return "".join(f"{f}.\n" for f in self)


def parse_instance(text: str, source: str | None = None, schema: Schema | None = None) -> Instance:
    ts = TokenStream(tokenize(text, source=source), source)
    facts = []
    while ts.peek.kind != "eof":
        rel = ts.expect_ident("relation name")
        vals = []
        if ts.accept("("):
            if not ts.at(")"):
                vals.append(_value(ts))
                while ts.accept(","):
                    vals.append(_value(ts))
            ts.expect(")")
        ts.expect(".")
        facts.append(Fact(rel.text, tuple(vals)))
    try:
        return Instance(facts, schema)
    except SchemaError as exc:
        raise ParseError(str(exc), rel.line, rel.column, source) from None


def _value(ts: TokenStream) -> str:
    tok = ts.next()
    if tok.kind in ("ident", "string", "number"):
        return tok.text
    ts.error(f"expected a value, found {ts.describe(tok)}", tok)
