"""Generators for hardness encodings, used as test corpora and CLI demos."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .constraints import KeyConstraint, Tgd
from .datalog import AnswerClause, Literal, Rule, make_program
from .errors import GnqError, ParseError
from .formula import (
    Formula,
    GuardedNeg,
    RelAtom,
    Schema,
    Var,
    atom,
    conj,
    disj,
    exists,
)
from .instance import Fact, Instance

# --- 3-colorability ------------------------------------------------------------

@dataclass(frozen=True)
class Graph:
    nodes: tuple
    edges: tuple  # unordered pairs

    def __post_init__(self):
        ns = set(self.nodes)
        for a, b in self.edges:
            if a not in ns or b not in ns:
                raise GnqError(f"edge {a}-{b} uses an unknown node")


def threecol_query() -> Formula:
    """Holds in every extension iff the graph is not 3-colorable."""
    x, y = "x", "y"
    uncolored = GuardedNeg(atom("N", x), atom("P1", x))
    for c in ("P2", "P3"):
        uncolored = conj([uncolored, GuardedNeg(atom("N", x), atom(c, x))])
    parts = [exists([x], uncolored)]
    for c in ("P1", "P2", "P3"):
        parts.append(exists([x, y], conj([atom("E", x, y), atom(c, x), atom(c, y)])))
    return disj(parts)


def parse_graph(text: str) -> Graph:
    """One edge ``a b`` per line; a line with one name adds an isolated
    node; ``#`` starts a comment."""
    nodes, edges = {}, []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        parts = line.split()
        if not parts:
            continue
        if len(parts) > 2:
            raise ParseError("expected one or two node names", ln, raw.index(parts[2]) + 1)
        for p in parts:
            if not p.replace("_", "a").isalnum():
                raise ParseError(f"node name {p!r} must be an identifier", ln, raw.index(p) + 1)
            nodes.setdefault(p, None)
        if len(parts) == 2:
            edges.append((parts[0], parts[1]))
    return Graph(tuple(nodes), tuple(edges))


def graph_to_instance(g: Graph) -> Instance:
    facts = [Fact("N", (str(v),)) for v in g.nodes]
    for a, b in g.edges:
        facts.append(Fact("E", (str(a), str(b))))
        facts.append(Fact("E", (str(b), str(a))))
    return Instance(facts, Schema({"N": 1, "E": 2}))


# --- LEX(SAT) ------------------------------------------------------------------

@dataclass(frozen=True)
class Cnf3:
    n: int
    clauses: tuple  # tuples of nonzero signed variable indices

    def __post_init__(self):
        for c in self.clauses:
            if not c or len(c) > 3:
                raise GnqError(f"clause {c} must have one to three literals")
            for l in c:
                if l == 0 or abs(l) > self.n:
                    raise GnqError(f"literal {l} out of range 1..{self.n}")


def parse_dimacs(text: str) -> Cnf3:
    n = None
    clauses = []
    cur: list = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf" or not parts[2].isdigit():
                raise ParseError("malformed problem line", ln, 1)
            n = int(parts[2])
            continue
        for m in re.finditer(r"\S+", raw):
            try:
                v = int(m.group(0))
            except ValueError:
                raise ParseError(f"expected a literal, found {m.group(0)!r}", ln, m.start() + 1) from None
            if v == 0:
                clauses.append(tuple(cur))
                cur = []
            else:
                cur.append(v)
    if cur:
        clauses.append(tuple(cur))
    if n is None:
        n = max((abs(l) for c in clauses for l in c), default=0)
    return Cnf3(n, tuple(clauses))


def lexsat_structure() -> Instance:
    facts = [Fact("T", ("1",)), Fact("F", ("0",)), Fact("N", ("0", "1")), Fact("N", ("1", "0"))]
    for a in "01":
        for b in "01":
            for c in "01":
                if (a, b, c) != ("0", "0", "0"):
                    facts.append(Fact("OR", (a, b, c)))
    return Instance(facts, Schema({"T": 1, "F": 1, "N": 2, "OR": 3}))


def _phi_tilde(cnf: Cnf3) -> list:
    out = [Literal(RelAtom("N", (Var(f"x{i}"), Var(f"y{i}")))) for i in range(1, cnf.n + 1)]
    for c in cnf.clauses:
        lits = [Var(f"x{l}") if l > 0 else Var(f"y{-l}") for l in c]
        while len(lits) < 3:
            lits.append(lits[-1])
        out.append(Literal(RelAtom("OR", tuple(lits))))
    return out


def lexsat_program(cnf: Cnf3) -> tuple:
    """``(query, structure)``: the query is true on the structure iff the
    last variable is 1 in the lexicographically least satisfying assignment."""
    if cnf.n < 1:
        raise GnqError("need at least one variable")
    phi = _phi_tilde(cnf)
    strata = []
    for i in range(1, cnf.n + 1):
        xi = Var(f"x{i}")
        prefix = [Literal(RelAtom(f"X{j}", (Var(f"x{j}"),))) for j in range(1, i)]
        z = RelAtom(f"Z{i}", ())
        strata.append([Rule(z, tuple(prefix + [Literal(RelAtom("F", (xi,)))] + phi))])
        strata.append([
            Rule(RelAtom(f"X{i}", (xi,)), (Literal(RelAtom("F", (xi,))), Literal(z))),
            Rule(RelAtom(f"X{i}", (xi,)), (Literal(RelAtom("T", (xi,))), Literal(z, True))),
        ])
    xn = Var(f"x{cnf.n}")
    body = (RelAtom(f"X{cnf.n}", (xn,)), RelAtom("T", (xn,))) + tuple(l.atom for l in phi)
    ans = AnswerClause((), body)
    b = lexsat_structure()
    return make_program(strata, [ans], dict(b.schema.relations)), b


# --- Turing machines -----------------------------------------------------------

@dataclass(frozen=True)
class TuringMachineSpec:
    states: tuple
    alphabet: tuple
    init: str
    acc: str
    transitions: tuple
    mode: str = "deterministic"  # or "alternating"
    existential: tuple = ()
    universal: tuple = ()
    start: str = "start"
    blank: str = "blank"

    def __post_init__(self):
        st = set(self.states)
        if self.init not in st or self.acc not in st:
            raise GnqError("init and acc must be states")
        al = set(self.alphabet)
        moves = {-1, 0, 1}
        if self.mode == "deterministic":
            seen = set()
            for row in self.transitions:
                if len(row) != 5:
                    raise GnqError(f"transition {row} needs five fields")
                p, a, q, b, e = row
                if p not in st or q not in st or a not in al or b not in al or e not in moves:
                    raise GnqError(f"malformed transition {row}")
                if (p, a) in seen:
                    raise GnqError(f"two transitions for state {p} reading {a}")
                seen.add((p, a))
                if (a == self.blank) != (b == self.blank) or (a == self.start) != (b == self.start):
                    raise GnqError(f"transition {row} must leave start and blank cells as they are")
            for s in (self.start, self.blank):
                if s not in al:
                    raise GnqError(f"alphabet lacks {s}")
        elif self.mode == "alternating":
            if set(self.existential) | set(self.universal) != st or set(self.existential) & set(self.universal):
                raise GnqError("existential and universal states must partition the states")
            if set(self.alphabet) != {"0", "1"}:
                raise GnqError("alternating machines use the alphabet 0, 1")
            for row in self.transitions:
                if len(row) != 8:
                    raise GnqError(f"transition {row} needs eight fields")
                p, a, q, b, e, s, c, d = row
                if not {p, q, s} <= st or not {a, b, c} <= al or e not in moves or d not in moves:
                    raise GnqError(f"malformed transition {row}")
        else:
            raise GnqError(f"unknown machine mode {self.mode}")
        for s in self.states:
            if not s.replace("_", "a").isalnum():
                raise GnqError(f"state name {s!r} must be an identifier")
        for a in self.alphabet:
            if not a.replace("_", "a").isalnum():
                raise GnqError(f"symbol {a!r} must be an identifier")


def parse_machine(text: str) -> TuringMachineSpec:
    d = json.loads(text)
    try:
        return TuringMachineSpec(
            states=tuple(d["states"]), alphabet=tuple(d["alphabet"]), init=d["init"], acc=d["acc"],
            transitions=tuple(tuple(r) for r in d["transitions"]), mode=d.get("mode", "deterministic"),
            existential=tuple(d.get("existential", ())), universal=tuple(d.get("universal", ())),
            start=d.get("start", "start"), blank=d.get("blank", "blank"))
    except KeyError as exc:
        raise GnqError(f"machine description lacks {exc.args[0]}") from None


def machine_to_json(m: TuringMachineSpec) -> str:
    d = {"mode": m.mode, "states": list(m.states), "alphabet": list(m.alphabet), "init": m.init,
         "acc": m.acc, "transitions": [list(r) for r in m.transitions]}
    if m.mode == "alternating":
        d["existential"] = list(m.existential)
        d["universal"] = list(m.universal)
    else:
        d["start"], d["blank"] = m.start, m.blank
    return json.dumps(d, indent=2)


def _a(rel: str, *names: str) -> RelAtom:
    return RelAtom(rel, tuple(Var(n) for n in names))


def tm_to_tgds(m: TuringMachineSpec, word) -> tuple:
    """``(tgds, key, instance, goal)`` simulating a deterministic machine on a
    grid forced by guarded tgds and a key on ``next``.

    The input chain carries an ``Origin`` marker on its first element that
    seeds the initial state, since the start symbol is copied to every row.
    A transition writes its symbol on the row above the head.
    """
    if m.mode != "deterministic":
        raise GnqError("the grid encoding takes a deterministic machine")
    word = list(word)
    for s in word:
        if s not in m.alphabet or s in (m.start, m.blank):
            raise GnqError(f"input symbol {s!r} is not a plain tape symbol")
    P = lambda s: f"P_{s}"
    S = lambda q: f"S_{q}"
    t = []
    t.append(Tgd((_a("succ", "x", "y"),), (_a("succ", "y", "z"),)))
    t.append(Tgd((_a("succ", "x", "y"), _a(P(m.blank), "x")), (_a(P(m.blank), "y"),)))
    t.append(Tgd((_a("succ", "x", "y"),), (_a("cell", "x", "y", "u", "v"),)))
    t.append(Tgd((_a("cell", "x", "y", "u", "v"),),
                 (_a("next", "x", "u"), _a("next", "y", "v"), _a("succ", "u", "v"))))
    t.append(Tgd((_a(P(m.start), "x"), _a("Origin", "x")), (_a(S(m.init), "x"),)))
    for p, a, q, b, e in m.transitions:
        cell = _a("cell", "x", "y", "u", "v")
        if e == 0:
            t.append(Tgd((cell, _a(S(p), "x"), _a(P(a), "x")), (_a(P(b), "u"), _a(S(q), "u"))))
        elif e == 1:
            t.append(Tgd((cell, _a(S(p), "x"), _a(P(a), "x")), (_a(P(b), "u"), _a(S(q), "v"))))
        else:
            t.append(Tgd((cell, _a(S(p), "y"), _a(P(a), "y")), (_a(P(b), "v"), _a(S(q), "u"))))
    for q in m.states:
        t.append(Tgd((_a("succ", "x", "y"), _a(S(q), "x")), (_a("R", "y"),)))
        t.append(Tgd((_a("succ", "x", "y"), _a(S(q), "y")), (_a("L", "x"),)))
    t.append(Tgd((_a("succ", "x", "y"), _a("R", "x")), (_a("R", "y"),)))
    t.append(Tgd((_a("succ", "x", "y"), _a("L", "y")), (_a("L", "x"),)))
    for s in m.alphabet:
        t.append(Tgd((_a("cell", "x", "y", "u", "v"), _a("R", "y"), _a(P(s), "y")), (_a(P(s), "v"),)))
        t.append(Tgd((_a("cell", "x", "y", "u", "v"), _a("L", "x"), _a(P(s), "x")), (_a(P(s), "u"),)))
    key = KeyConstraint("next", (1,), (2,))
    chain = [m.start] + word + [m.blank]
    elems = [f"e{i}" for i in range(len(chain))]
    facts = [Fact("Origin", (elems[0],))]
    for i, s in enumerate(chain):
        facts.append(Fact(P(s), (elems[i],)))
        if i + 1 < len(chain):
            facts.append(Fact("succ", (elems[i], elems[i + 1])))
    goal = exists(["x"], atom(S(m.acc), "x"))
    return t, key, Instance(facts), goal


def atm_to_gndatalog(m: TuringMachineSpec, word, n_cells: int) -> tuple:
    """``(query, structure)`` true on the structure iff the alternating
    machine accepts ``word`` within ``n_cells`` tape cells.

    Tape positions past the word are filled with 0.
    """
    if m.mode != "alternating":
        raise GnqError("the space-bounded encoding takes an alternating machine")
    word = list(word)
    if len(word) > n_cells:
        raise GnqError("the word does not fit on the tape")
    if any(s not in ("0", "1") for s in word):
        raise GnqError("input symbols are 0 and 1")
    N = n_cells
    us = [f"u{i}" for i in range(1, N + 1)]
    sig = {"0": "z", "1": "o"}
    S = lambda q, i: f"S_{q}_{i}"

    def conf(q: str, i: int, at: int, sym: str) -> RelAtom:
        names = list(us)
        names[at - 1] = sig[sym]
        return _a(S(q, i), *names, "z", "o")

    rules = []
    for p, a0, q, a1, e, s, a2, d in m.transitions:
        for i in range(1, N + 1):
            if not (1 <= i + e <= N and 1 <= i + d <= N):
                continue
            head = conf(p, i, i, a0)
            left = conf(q, i + e, i, a1)
            right = conf(s, i + d, i, a2)
            if p in m.existential:
                rules.append(Rule(head, (Literal(left),)))
                rules.append(Rule(head, (Literal(right),)))
            else:
                rules.append(Rule(head, (Literal(left), Literal(right))))
    rules.append(Rule(_a(S(m.acc, 1), *(["z"] * N), "z", "o"), (Literal(_a("Bits", "z", "o")),)))
    tape = word + ["0"] * (N - len(word))
    start = _a(S(m.init, 1), *[sig[c] for c in tape], "z", "o")
    ans = AnswerClause((), (start, _a("Bits", "z", "o")))
    structure = Instance([Fact("Bits", ("0", "1"))], Schema({"Bits": 2}))
    return make_program([rules], [ans], {"Bits": 2}), structure
