"""Tuple-generating dependencies, key constraints and serial queries.

Constraint file syntax::

    R(x,y), P(y) -> exists z . S(y,z).
    true -> exists y . W(y).
    W(x), Q(x) -> false.
    key F(1,2 -> 3).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dnf import DnfBlock, DnfQuery, NegLiteral, dnf_normalize, dnf_to_formula
from .errors import GnqError, NotGuardedError
from .formula import (
    TRUE,
    EqAtom,
    Formula,
    GuardedNeg,
    RelAtom,
    Top,
    Var,
    conj,
    disj,
    exists,
    free_vars,
    relations,
    sorted_vars,
    term_vars,
)
from .lexer import TokenStream, tokenize

FALSE_REL = "false"

LINEAR, GUARDED, FRONTIER_GUARDED, GENERAL = "linear", "guarded", "frontier-guarded", "general"


@dataclass(frozen=True)
class Tgd:
    body: tuple  # RelAtom or EqAtom
    head: tuple  # RelAtom; empty never, ``false()`` for the goal

    def body_vars(self) -> list:
        out: list = []
        for a in self.body:
            for v in _atom_vars(a):
                if v not in out:
                    out.append(v)
        return out

    def head_vars(self) -> list:
        out: list = []
        for a in self.head:
            for v in _atom_vars(a):
                if v not in out:
                    out.append(v)
        return out

    def frontier(self) -> list:
        hv = set(self.head_vars())
        return [v for v in self.body_vars() if v in hv]

    def existentials(self) -> list:
        bv = set(self.body_vars())
        return [v for v in self.head_vars() if v not in bv]

    def __str__(self) -> str:
        return format_tgd(self)


@dataclass(frozen=True)
class KeyConstraint:
    rel: str
    key: tuple  # 1-based positions
    determined: tuple  # 1-based positions

    def __str__(self) -> str:
        return f"key {self.rel}({','.join(map(str, self.key))} -> {','.join(map(str, self.determined))})."


def _atom_vars(a) -> list:
    if isinstance(a, RelAtom):
        return term_vars(a.terms)
    return term_vars((a.left, a.right))


def _atom_text(a) -> str:
    if isinstance(a, EqAtom):
        return f"{a.left} = {a.right}"
    if a.rel == FALSE_REL and not a.terms:
        return "false"
    return f"{a.rel}({','.join(str(t) for t in a.terms)})"


def format_tgd(t: Tgd) -> str:
    body = ", ".join(_atom_text(a) for a in t.body) if t.body else "true"
    head = ", ".join(_atom_text(a) for a in t.head)
    ex = t.existentials()
    if ex:
        head = f"exists {' '.join(ex)} . {head}"
    return f"{body} -> {head}."


def format_constraints(tgds, keys=()) -> str:
    return "".join(str(t) + "\n" for t in tgds) + "".join(str(k) + "\n" for k in keys)


# --- classification ------------------------------------------------------------

def _covering(t: Tgd, need) -> bool:
    need = set(need)
    if not need:
        return True
    return any(isinstance(a, RelAtom) and need <= set(term_vars(a.terms)) for a in t.body)


def is_linear(t: Tgd) -> bool:
    return len(t.body) == 1 and isinstance(t.body[0], RelAtom)


def is_guarded(t: Tgd) -> bool:
    return _covering(t, t.body_vars())


def is_frontier_guarded(t: Tgd) -> bool:
    return _covering(t, t.frontier())


def classify_tgd(t: Tgd) -> str:
    """The most specific of linear, guarded, frontier-guarded, general."""
    if is_linear(t):
        return LINEAR
    if is_guarded(t):
        return GUARDED
    if is_frontier_guarded(t):
        return FRONTIER_GUARDED
    return GENERAL


def _frontier_guard(t: Tgd):
    need = set(t.frontier())
    for a in t.body:
        if isinstance(a, RelAtom) and need <= set(term_vars(a.terms)):
            return a
    return TRUE if not need else None


def negate_tgd(t: Tgd) -> Formula:
    """The violation query ``∃x,y(body ∧ ¬∃z head)``."""
    g = _frontier_guard(t)
    if g is None:
        raise NotGuardedError(f"not frontier-guarded: {format_tgd(t)}")
    head = exists(t.existentials(), conj(t.head))
    body = list(t.body)
    if g in body:
        body.remove(g)
    return exists(t.body_vars(), conj(body + [GuardedNeg(g, head)]))


def tgd_to_gnfo(t: Tgd) -> Formula:
    """``¬∃x,y(body ∧ ¬∃z head)`` as a GNFO sentence."""
    return GuardedNeg(TRUE, negate_tgd(t))


def owa_query_with_tgds(q: Formula, tgds) -> Formula:
    """``q ∨ ⋁ ¬σ``: entailment under the tgds as plain entailment."""
    return disj([q] + [negate_tgd(t) for t in tgds])


# --- parsing -------------------------------------------------------------------

def parse_constraints(text: str, source: str | None = None) -> tuple:
    """``(tgds, keys)`` from constraint text."""
    ts = TokenStream(tokenize(text, source=source), source)
    tgds, keys = [], []
    while ts.peek.kind != "eof":
        if ts.at_keyword("key") and ts.peek_at(1).kind == "ident":
            ts.next()
            keys.append(_key(ts))
        else:
            tgds.append(_tgd(ts))
    return tgds, keys


def _key(ts: TokenStream) -> KeyConstraint:
    rel = ts.expect_ident("relation name").text
    ts.expect("(")
    key = _positions(ts)
    ts.expect("->")
    det = _positions(ts)
    ts.expect(")")
    ts.expect(".")
    if set(key) & set(det):
        ts.error("key and determined positions overlap")
    return KeyConstraint(rel, tuple(key), tuple(det))


def _positions(ts: TokenStream) -> list:
    out = []
    while True:
        tok = ts.next()
        if tok.kind != "number" or int(tok.text) < 1:
            ts.error(f"expected a position, found {ts.describe(tok)}", tok)
        out.append(int(tok.text))
        if not ts.accept(","):
            return out


def _tgd_atom(ts: TokenStream):
    if ts.peek.kind == "ident" and ts.peek_at(1).text == "=":
        left = Var(ts.next().text)
        ts.expect("=")
        return EqAtom(left, Var(ts.expect_ident("variable").text))
    if ts.accept_keyword("false"):
        return RelAtom(FALSE_REL, ())
    name = ts.expect_ident("relation name").text
    terms = []
    if ts.accept("("):
        if not ts.at(")"):
            terms.append(Var(ts.expect_ident("variable").text))
            while ts.accept(","):
                terms.append(Var(ts.expect_ident("variable").text))
        ts.expect(")")
    return RelAtom(name, tuple(terms))


def _atoms(ts: TokenStream) -> list:
    out = [_tgd_atom(ts)]
    while ts.accept(",") or ts.accept("&"):
        out.append(_tgd_atom(ts))
    return out


def _tgd(ts: TokenStream) -> Tgd:
    start = ts.peek
    if ts.accept_keyword("true"):
        body = []
    else:
        body = _atoms(ts)
    ts.expect("->")
    declared = []
    if ts.accept_keyword("exists"):
        while ts.peek.kind == "ident":
            declared.append(ts.next().text)
        ts.expect(".")
    head = _atoms(ts)
    ts.expect(".")
    if any(isinstance(a, EqAtom) for a in head):
        ts.error("equalities are not allowed in tgd heads", start)
    t = Tgd(tuple(body), tuple(head))
    if set(declared) != set(t.existentials()):
        ts.error("existential variables must be exactly the head variables absent from the body", start)
    return t


# --- serial queries ------------------------------------------------------------

def check_sgnq(q) -> tuple:
    """``(True, None)`` or ``(False, block)`` where ``block`` is a positively
    occurring conjunction with two or more negated conjuncts."""
    if not isinstance(q, DnfQuery):
        q = dnf_normalize(q)
    return _serial(q, True)


def _serial(q: DnfQuery, positive: bool) -> tuple:
    for b in q.blocks:
        negs = [l for l in b.literals if isinstance(l, NegLiteral)]
        if positive and len(negs) >= 2:
            return False, b
        for l in negs:
            ok, bad = _serial(l.sub, not positive)
            if not ok:
                return ok, bad
    return True, None


class _Flattener:
    def __init__(self, taken: set):
        self.taken = set(taken) | {FALSE_REL}
        self.rules: list = []
        self.counter = 0

    def fresh_rel(self) -> str:
        while True:
            self.counter += 1
            name = f"W{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def emit(self, body, head):
        t = Tgd(tuple(body), tuple(head))
        if not is_frontier_guarded(t):
            raise NotGuardedError(f"flattening produced a rule that is not frontier-guarded: {t}")
        self.rules.append(t)

    def block_negated(self, beta: list, block: DnfBlock):
        """Rules for ``beta → ∃y ψ`` where ``ψ`` is ``block``."""
        frontier = sorted_vars(_block_free(block))
        w = self.fresh_rel()
        wa = RelAtom(w, tuple(Var(v) for v in frontier) + tuple(Var(v) for v in block.qvars))
        self.emit(beta, [wa])
        gamma = []
        negs = []
        for l in block.literals:
            if isinstance(l, NegLiteral):
                if not isinstance(l.guard, Top):
                    gamma.append(l.guard)
                negs.append(l)
            elif isinstance(l, Top):
                continue
            else:
                gamma.append(l)
        head = [a for a in gamma if isinstance(a, RelAtom)]
        if any(isinstance(a, EqAtom) for a in gamma):
            raise GnqError("equalities under an odd number of negations are not supported by flattening")
        if head:
            self.emit([wa], head)
        for l in negs:
            if len(l.sub.blocks) != 1:
                raise GnqError("expected a single-block negated subquery")
            b2 = l.sub.blocks[0]
            if not b2.qvars and len(b2.literals) == 1 and not isinstance(b2.literals[0], NegLiteral):
                self.emit([wa, b2.literals[0]], [RelAtom(FALSE_REL, ())])
                continue
            inner = [x for x in b2.literals if isinstance(x, NegLiteral)]
            if len(inner) > 1:
                raise GnqError("not serial: two or more negated conjuncts occur positively")
            gprime = [x for x in b2.literals if not isinstance(x, (NegLiteral, Top))]
            if inner and not isinstance(inner[0].guard, Top):
                gprime.append(inner[0].guard)
            body = [wa] + gprime
            if not inner:
                self.emit(body, [RelAtom(FALSE_REL, ())])
                continue
            b3s = inner[0].sub.blocks
            if len(b3s) != 1:
                raise GnqError("expected a single-block negated subquery")
            b3 = b3s[0]
            if not b3.qvars and len(b3.literals) == 1 and isinstance(b3.literals[0], RelAtom):
                self.emit(body, [b3.literals[0]])
            elif not b3.qvars and len(b3.literals) == 1 and isinstance(b3.literals[0], EqAtom):
                raise GnqError("equalities under an odd number of negations are not supported by flattening")
            else:
                self.block_negated(body, b3)


def _block_free(b: DnfBlock) -> set:
    out: set = set()
    for l in b.literals:
        if isinstance(l, NegLiteral):
            out |= free_vars(l.guard)
            for sb in l.sub.blocks:
                out |= _block_free(sb)
        else:
            out |= free_vars(l)
    return out - set(b.qvars)


def flatten_sgnq(q) -> list:
    """Frontier-guarded tgds with goal ``false``: an instance entails ``q``
    under open-world semantics iff the tgds derive ``false`` from it."""
    if not isinstance(q, DnfQuery):
        q = dnf_normalize(q)
    ok, bad = check_sgnq(q)
    if not ok:
        raise GnqError("not a serial query: a positive conjunction has two or more negated conjuncts")
    if free_vars(dnf_to_formula(q)):
        raise GnqError("flattening needs a boolean query")
    fl = _Flattener(set(relations(dnf_to_formula(q))) if q.blocks else set())
    for b in q.blocks:
        negs = [l for l in b.literals if isinstance(l, NegLiteral)]
        alpha = [l for l in b.literals if not isinstance(l, (NegLiteral, Top))]
        if not negs:
            fl.emit(alpha, [RelAtom(FALSE_REL, ())])
            continue
        l = negs[0]
        if not isinstance(l.guard, Top):
            alpha.append(l.guard)
        if len(l.sub.blocks) != 1:
            raise GnqError("expected a single-block negated subquery")
        fl.block_negated(alpha, l.sub.blocks[0])
    return fl.rules
