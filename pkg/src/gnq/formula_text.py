"""ASCII surface syntax for formulas: parser and round-trip printer.

::

    R(x,y)   x = y   phi & psi   phi | psi   exists x y . phi
    guard & not(phi)             (bare not(phi) gets an x = x or true guard)
    lfp X(x) with guard alpha as phi end (t)
    lfp { X1(x) with guard alpha as phi ; X2(y) = psi } select X1 (t)
    true   false

Identifiers are variables; quoted strings and numerals are constants.
``exists`` extends as far right as possible.
"""

from __future__ import annotations

from .formula import (
    FALSE,
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
    SecondOrderAtom,
    Top,
    Var,
    free_vars,
    is_false,
)
from .lexer import TokenStream, tokenize

KEYWORDS = {"exists", "not", "lfp", "with", "guard", "as", "end", "select", "true", "false"}


def parse_formula(text: str, source: str | None = None) -> Formula:
    ts = TokenStream(tokenize(text, source=source), source)
    p = _Parser(ts)
    f = p.formula()
    if ts.peek.kind != "eof":
        ts.error(f"unexpected {ts.describe(ts.peek)}")
    return f


def default_guard(params: tuple) -> GeneralizedGuard | None:
    """The guard assumed when none is written: ``x = x`` or ``true``."""
    if len(params) == 0:
        return GeneralizedGuard((GuardDisjunct((), TRUE),))
    if len(params) == 1:
        v = Var(params[0])
        return GeneralizedGuard((GuardDisjunct((), EqAtom(v, v)),))
    return None


def guard_from_formula(f: Formula) -> GeneralizedGuard:
    """Read a disjunction of existentially quantified atoms as a guard."""
    out = []

    def visit(g, bound):
        if isinstance(g, Or):
            visit(g.lhs, bound)
            visit(g.rhs, bound)
        elif isinstance(g, Exists):
            visit(g.body, bound + (g.var,))
        elif isinstance(g, (RelAtom, EqAtom, Top)):
            names = set(free_vars(g))
            seen: list = []
            for v in reversed(bound):
                if v in names and v not in seen:
                    seen.append(v)
            out.append(GuardDisjunct(tuple(reversed(seen)), g))
        else:
            raise ValueError("a generalized guard is a disjunction of existentially quantified atoms")

    visit(f, ())
    return GeneralizedGuard(tuple(out))


class _Parser:
    def __init__(self, ts: TokenStream):
        self.ts = ts
        self.so_scope: list[set] = []

    def in_so_scope(self, name: str) -> bool:
        return any(name in s for s in self.so_scope)

    def formula(self) -> Formula:
        parts = [self.conjunction()]
        while self.ts.accept("|"):
            parts.append(self.conjunction())
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Or(p, out)
        return out

    def conjunction(self) -> Formula:
        items: list = []  # (formula, paired) ; paired marks a GuardedNeg built here
        while True:
            tok = self.ts.peek
            if self.ts.at_keyword("not"):
                self.ts.next()
                self.ts.expect("(")
                body = self.formula()
                self.ts.expect(")")
                items.append(self._pair(items, body, tok))
            else:
                items.append((self.primary(), False))
            if not self.ts.accept("&"):
                break
        fs = [f for f, _ in items]
        out = fs[-1]
        for f in reversed(fs[:-1]):
            out = And(f, out)
        return out

    def _pair(self, items: list, body: Formula, tok):
        if not items:
            fv = sorted(free_vars(body))
            if len(fv) == 0:
                return (GuardedNeg(TRUE, body), True)
            if len(fv) == 1:
                v = Var(fv[0])
                return (GuardedNeg(EqAtom(v, v), body), True)
            self.ts.error("negation of a formula with several free variables needs a guard atom", tok)
        prev, paired = items[-1]
        if paired and isinstance(prev, GuardedNeg):
            return (GuardedNeg(prev.guard, body), True)
        if isinstance(prev, (RelAtom, EqAtom, Top)):
            items.pop()
            return (GuardedNeg(prev, body), True)
        self.ts.error("the left conjunct of not(...) must be an atom", tok)

    def primary(self) -> Formula:
        ts = self.ts
        tok = ts.peek
        if ts.accept("("):
            f = self.formula()
            ts.expect(")")
            return f
        if ts.at_keyword("exists"):
            ts.next()
            names = [ts.expect_ident("variable").text]
            while ts.peek.kind == "ident" and not ts.at("."):
                names.append(ts.next().text)
            ts.expect(".")
            body = self.formula()
            for v in reversed(names):
                body = Exists(v, body)
            return body
        if ts.at_keyword("true"):
            ts.next()
            return TRUE
        if ts.at_keyword("false"):
            ts.next()
            return FALSE
        if ts.at_keyword("lfp"):
            return self.lfp()
        if tok.kind == "ident" and ts.peek_at(1).text == "(" and ts.peek_at(1).kind == "op":
            if tok.text.lower() in KEYWORDS:
                ts.error(f"keyword {tok.text!r} used as relation name")
            ts.next()
            terms = self.term_list()
            if self.in_so_scope(tok.text):
                return SecondOrderAtom(tok.text, terms)
            return RelAtom(tok.text, terms)
        if tok.kind in ("ident", "string", "number"):
            left = self.term()
            ts.expect("=")
            right = self.term()
            return EqAtom(left, right)
        ts.error(f"expected a formula, found {ts.describe(tok)}")

    def term(self):
        tok = self.ts.next()
        if tok.kind == "ident":
            if tok.text.lower() in KEYWORDS:
                self.ts.error(f"keyword {tok.text!r} used as a term", tok)
            return Var(tok.text)
        if tok.kind in ("string", "number"):
            return Const(tok.text)
        self.ts.error(f"expected a term, found {self.ts.describe(tok)}", tok)

    def term_list(self) -> tuple:
        self.ts.expect("(")
        out = []
        if not self.ts.at(")"):
            out.append(self.term())
            while self.ts.accept(","):
                out.append(self.term())
        self.ts.expect(")")
        return tuple(out)

    def var_list(self) -> tuple:
        terms = self.term_list()
        for t in terms:
            if not isinstance(t, Var):
                self.ts.error("fixpoint parameters must be variables")
        names = tuple(t.name for t in terms)
        if len(set(names)) != len(names):
            self.ts.error("fixpoint parameters must be distinct")
        return names

    def lfp(self) -> Formula:
        ts = self.ts
        ts.expect_keyword("lfp")
        if ts.accept("{"):
            heads = self._scan_block_heads()
            self.so_scope.append(set(heads))
            defs = [self.fix_def(terminators=(";", "}"))]
            while ts.accept(";"):
                if ts.at("}"):
                    break
                defs.append(self.fix_def(terminators=(";", "}")))
            ts.expect("}")
            self.so_scope.pop()
            ts.expect_keyword("select")
            name_tok = ts.expect_ident("fixpoint variable")
            names = [d.var for d in defs]
            if name_tok.text not in names:
                ts.error(f"{name_tok.text} is not defined in this block", name_tok)
            component = names.index(name_tok.text)
        else:
            name = ts.peek.text
            self.so_scope.append({name})
            defs = [self.fix_def(terminators=("end",))]
            self.so_scope.pop()
            ts.expect_keyword("end")
            component = 0
        args = self.term_list()
        if len(args) != len(defs[component].params):
            ts.error("fixpoint arguments do not match the parameter count")
        if len({d.var for d in defs}) != len(defs):
            ts.error("duplicate fixpoint variable in block")
        return Lfp(tuple(defs), component, args)

    def _scan_block_heads(self) -> list:
        # collect X_k names ahead of parsing so bodies can refer to later entries
        depth, i, heads = 0, self.ts.pos, []
        toks = self.ts.tokens
        expect_head = True
        while i < len(toks) and toks[i].kind != "eof":
            t = toks[i]
            if t.kind == "op" and t.text in "({[":
                depth += 1
            elif t.kind == "op" and t.text in ")}]":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and t.kind == "op" and t.text == ";":
                expect_head = True
                i += 1
                continue
            if expect_head and t.kind == "ident":
                heads.append(t.text)
                expect_head = False
            i += 1
        return heads

    def fix_def(self, terminators) -> FixpointDef:
        ts = self.ts
        name = ts.expect_ident("fixpoint variable").text
        params = self.var_list()
        if ts.accept_keyword("with"):
            ts.expect_keyword("guard")
            saved = self.so_scope
            self.so_scope = []
            gtok = ts.peek
            gf = self.formula()
            self.so_scope = saved
            try:
                guard = guard_from_formula(gf)
            except ValueError as exc:
                ts.error(str(exc), gtok)
            ts.expect_keyword("as")
        else:
            if not ts.accept("="):
                ts.expect_keyword("as")
            guard = default_guard(params)
            if guard is None:
                ts.error("a fixpoint of arity above one needs an explicit guard")
        body = self.formula()
        return FixpointDef(name, params, guard, body)


# --- printer ---------------------------------------------------------------

def format_term(t) -> str:
    if isinstance(t, Const):
        return f'"{t.name}"'
    return t.name


def _atom_text(name: str, terms) -> str:
    return f"{name}({','.join(format_term(t) for t in terms)})"


def format_formula(f: Formula) -> str:
    return _fmt(f)


def _wrap(s: str) -> str:
    return f"({s})"


def _fmt(f: Formula) -> str:
    if is_false(f):
        return "false"
    if isinstance(f, Top):
        return "true"
    if isinstance(f, RelAtom):
        return _atom_text(f.rel, f.terms)
    if isinstance(f, SecondOrderAtom):
        return _atom_text(f.var, f.terms)
    if isinstance(f, EqAtom):
        return f"{format_term(f.left)} = {format_term(f.right)}"
    if isinstance(f, Or):
        left = _fmt(f.lhs)
        if isinstance(f.lhs, (Or, Exists)):
            left = _wrap(left)
        right = _fmt(f.rhs)
        if isinstance(f.rhs, Exists):
            right = _wrap(right)
        return f"{left} | {right}"
    if isinstance(f, And):
        left = _fmt(f.lhs)
        if isinstance(f.lhs, (Or, Exists, And)) or is_false(f.lhs):
            left = _wrap(left)
        right = _fmt(f.rhs)
        if isinstance(f.rhs, (Or, Exists)) or is_false(f.rhs):
            right = _wrap(right)
        return f"{left} & {right}"
    if isinstance(f, GuardedNeg):
        return f"{_fmt(f.guard)} & not({_fmt(f.body)})"
    if isinstance(f, Exists):
        names = [f.var]
        body = f.body
        while isinstance(body, Exists):
            names.append(body.var)
            body = body.body
        return f"exists {' '.join(names)} . {_fmt(body)}"
    if isinstance(f, Lfp):
        args = "(" + ",".join(format_term(t) for t in f.args) + ")"
        if len(f.defs) == 1 and f.component == 0:
            return f"lfp {_fmt_def(f.defs[0])} end {args}"
        inner = " ; ".join(_fmt_def(d) for d in f.defs)
        return f"lfp {{ {inner} }} select {f.defs[f.component].var} {args}"
    raise TypeError(f"not a formula: {f!r}")


def _fmt_guard(g: GeneralizedGuard) -> str:
    parts = []
    for d in g.disjuncts:
        s = _fmt(d.atom)
        if d.bound:
            s = f"exists {' '.join(d.bound)} . {s}"
        if len(g.disjuncts) > 1:
            s = _wrap(s)
        parts.append(s)
    return " | ".join(parts)


def _fmt_def(d: FixpointDef) -> str:
    head = f"{d.var}({','.join(d.params)})"
    if default_guard(d.params) == d.guard:
        return f"{head} as {_fmt(d.body)}"
    return f"{head} with guard {_fmt_guard(d.guard)} as {_fmt(d.body)}"
