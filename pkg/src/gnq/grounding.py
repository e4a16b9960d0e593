"""Ground a GNFO formula into a propositional circuit over candidate facts.

Facts of a fixed base instance are true, candidate facts are variables and
everything else is false.  Quantifiers range over the active domain of the
extension, so a value outside the base domain counts only when some chosen
candidate fact mentions it.
"""

from __future__ import annotations

from .formula import (
    And,
    Const,
    EqAtom,
    Exists,
    Formula,
    GuardedNeg,
    Or,
    RelAtom,
    Top,
)
from .instance import Fact

FALSE_NODE, TRUE_NODE = 0, 1
UNKNOWN = 2


class Circuit:
    def __init__(self):
        self.nodes: list = [("const", 0), ("const", 1)]
        self.cons: dict = {}

    def _add(self, key) -> int:
        hit = self.cons.get(key)
        if hit is None:
            hit = len(self.nodes)
            self.nodes.append(key)
            self.cons[key] = hit
        return hit

    def var(self, i: int) -> int:
        return self._add(("var", i))

    def and_(self, kids) -> int:
        out = []
        for k in kids:
            if k == FALSE_NODE:
                return FALSE_NODE
            if k != TRUE_NODE and k not in out:
                out.append(k)
        if not out:
            return TRUE_NODE
        if len(out) == 1:
            return out[0]
        return self._add(("and", tuple(sorted(out))))

    def or_(self, kids) -> int:
        out = []
        for k in kids:
            if k == TRUE_NODE:
                return TRUE_NODE
            if k != FALSE_NODE and k not in out:
                out.append(k)
        if not out:
            return FALSE_NODE
        if len(out) == 1:
            return out[0]
        return self._add(("or", tuple(sorted(out))))

    def not_(self, k: int) -> int:
        if k == FALSE_NODE:
            return TRUE_NODE
        if k == TRUE_NODE:
            return FALSE_NODE
        return self._add(("not", k))

    def evaluate(self, root: int, assign) -> int:
        """Three-valued value of ``root``; ``assign[i]`` is 0, 1 or 2."""
        vals = [0] * len(self.nodes)
        vals[1] = 1
        for n in range(2, root + 1):
            node = self.nodes[n]
            op = node[0]
            if op == "var":
                vals[n] = assign[node[1]]
            elif op == "not":
                v = vals[node[1]]
                vals[n] = 2 if v == 2 else 1 - v
            elif op == "and":
                res = 1
                for k in node[1]:
                    v = vals[k]
                    if v == 0:
                        res = 0
                        break
                    if v == 2:
                        res = 2
                vals[n] = res
            else:
                res = 0
                for k in node[1]:
                    v = vals[k]
                    if v == 1:
                        res = 1
                        break
                    if v == 2:
                        res = 2
                vals[n] = res
        return vals[root]


class Grounder:
    def __init__(self, base_facts, candidates: list, values: list, rigid: set):
        self.c = Circuit()
        self.base = set(base_facts)
        self.index = {f: i for i, f in enumerate(candidates)}
        self.values = values
        self.memo: dict = {}
        mentions: dict = {}
        for i, f in enumerate(candidates):
            for v in set(f.values):
                mentions.setdefault(v, []).append(i)
        self.in_domain = {}
        for v in values:
            if v in rigid:
                self.in_domain[v] = TRUE_NODE
            else:
                self.in_domain[v] = self.c.or_(self.c.var(i) for i in mentions.get(v, ()))

    def term(self, t, env: dict):
        return t.value if isinstance(t, Const) else env[t.name]

    def ground(self, f: Formula, env: dict) -> int:
        if isinstance(f, Top):
            return TRUE_NODE
        if isinstance(f, RelAtom):
            fact = Fact(f.rel, tuple(self.term(t, env) for t in f.terms))
            if fact in self.base:
                return TRUE_NODE
            i = self.index.get(fact)
            return FALSE_NODE if i is None else self.c.var(i)
        if isinstance(f, EqAtom):
            return TRUE_NODE if self.term(f.left, env) == self.term(f.right, env) else FALSE_NODE
        key = (id(f), tuple(sorted(env.items())))
        hit = self.memo.get(key)
        if hit is not None and hit[0] is f:
            return hit[1]
        if isinstance(f, And):
            out = self.c.and_([self.ground(f.lhs, env), self.ground(f.rhs, env)])
        elif isinstance(f, Or):
            out = self.c.or_([self.ground(f.lhs, env), self.ground(f.rhs, env)])
        elif isinstance(f, GuardedNeg):
            g = self.ground(f.guard, env)
            out = FALSE_NODE if g == FALSE_NODE else self.c.and_([g, self.c.not_(self.ground(f.body, env))])
        elif isinstance(f, Exists):
            parts = []
            for v in self.values:
                e = dict(env)
                e[f.var] = v
                parts.append(self.c.and_([self.in_domain[v], self.ground(f.body, e)]))
            out = self.c.or_(parts)
        else:
            raise TypeError(f"cannot ground {type(f).__name__}")
        self.memo[key] = (f, out)
        return out
