"""Well-formedness and guardedness checkers for GNFO and GNFP."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotGuardedError
from .formula import (
    And,
    Const,
    EqAtom,
    Exists,
    Formula,
    GuardedNeg,
    Lfp,
    Or,
    RelAtom,
    Schema,
    SecondOrderAtom,
    Top,
    free_vars,
)
from .formula_text import format_formula

# violation kinds
UNCOVERED = "uncovered-variable"
BAD_GUARD = "bad-guard"
ARITY = "arity-mismatch"
UNKNOWN_REL = "unknown-relation"
UNKNOWN_CONST = "unknown-constant"
NOT_GNFO = "fixpoint-in-gnfo"
NEGATIVE_FIX = "negative-fixpoint-occurrence"
GUARD_MISSING = "guard-missing-variable"
GUARD_EXTRA = "guard-free-variable"
GUARD_SO = "guard-mentions-fixpoint"
FREE_SO = "free-second-order-variable"
BODY_FREE = "body-variable-not-parameter"
FIX_ARITY = "fixpoint-arity-mismatch"


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    path: str  # dotted child indices from the root, "" is the root

    def __str__(self) -> str:
        return f"{self.kind} at [{self.path}]: {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def __bool__(self) -> bool:
        return self.ok


def check_gnfo(f: Formula, schema: Schema | None = None) -> ValidationReport:
    """Guard coverage for every negation, plus schema conformance.

    Without a schema, arities are inferred from first use and only
    inconsistencies are reported.
    """
    return _Checker(schema, allow_fixpoints=False).run(f)


def check_gnfp(f: Formula, schema: Schema | None = None) -> ValidationReport:
    """GNFO conditions plus positivity, generalized-guard coverage and
    closedness of second-order variables."""
    return _Checker(schema, allow_fixpoints=True).run(f)


class _Checker:
    def __init__(self, schema: Schema | None, allow_fixpoints: bool):
        self.schema = schema
        self.allow_fixpoints = allow_fixpoints
        self.arities: dict = dict(schema.relations) if schema else {}
        self.out: list = []

    def run(self, f: Formula) -> ValidationReport:
        self.visit(f, "", {}, 0)
        return ValidationReport(self.out)

    def add(self, kind: str, msg: str, path: str):
        self.out.append(Violation(kind, msg, path))

    def terms(self, terms, path):
        if self.schema is None:
            return
        for t in terms:
            if isinstance(t, Const) and t.name not in self.schema.constants:
                self.add(UNKNOWN_CONST, f"unknown constant {t.name}", path)

    def rel(self, a: RelAtom, path: str):
        self.terms(a.terms, path)
        known = self.arities.get(a.rel)
        if known is None:
            if self.schema is not None:
                self.add(UNKNOWN_REL, f"unknown relation {a.rel}", path)
                return
            self.arities[a.rel] = len(a.terms)
        elif known != len(a.terms):
            self.add(ARITY, f"{a.rel} has arity {known}, used with {len(a.terms)} terms", path)

    def visit(self, f: Formula, path: str, so: dict, negs: int):
        """``so`` maps a bound second-order variable to (arity, negation
        depth at its binder)."""
        sub = (lambda i: f"{path}.{i}" if path else str(i))
        if isinstance(f, Top):
            return
        if isinstance(f, RelAtom):
            self.rel(f, path)
        elif isinstance(f, EqAtom):
            self.terms((f.left, f.right), path)
        elif isinstance(f, SecondOrderAtom):
            if not self.allow_fixpoints:
                self.add(NOT_GNFO, f"second-order atom {f.var}", path)
                return
            self.terms(f.terms, path)
            if f.var not in so:
                self.add(FREE_SO, f"{f.var} is not bound by an enclosing fixpoint", path)
                return
            arity, depth = so[f.var]
            if arity != len(f.terms):
                self.add(FIX_ARITY, f"{f.var} has arity {arity}, used with {len(f.terms)}", path)
            if (negs - depth) % 2:
                self.add(NEGATIVE_FIX, f"{f.var} occurs under an odd number of negations", path)
        elif isinstance(f, (And, Or)):
            self.visit(f.lhs, sub(0), so, negs)
            self.visit(f.rhs, sub(1), so, negs)
        elif isinstance(f, Exists):
            self.visit(f.body, sub(0), so, negs)
        elif isinstance(f, GuardedNeg):
            g = f.guard
            if not isinstance(g, (RelAtom, EqAtom, Top)):
                self.add(BAD_GUARD, "guard of a negation must be an atom", sub(0))
            else:
                self.visit(g, sub(0), so, negs)
                missing = free_vars(f.body) - free_vars(g)
                for v in sorted(missing):
                    self.add(UNCOVERED, f"uncovered variable {v}", path)
            self.visit(f.body, sub(1), so, negs + 1)
        elif isinstance(f, Lfp):
            if not self.allow_fixpoints:
                self.add(NOT_GNFO, "fixpoint operator", path)
                return
            self.lfp(f, path, so, negs)
        else:
            raise TypeError(f"not a formula: {f!r}")

    def lfp(self, f: Lfp, path: str, so: dict, negs: int):
        inner = dict(so)
        for d in f.defs:
            inner[d.var] = (len(d.params), negs)
        if not 0 <= f.component < len(f.defs):
            self.add(FIX_ARITY, "selected component out of range", path)
            return
        if len(f.args) != len(f.defs[f.component].params):
            self.add(FIX_ARITY, "argument count differs from parameter count", path)
        self.terms(f.args, path)
        for k, d in enumerate(f.defs):
            dpath = f"{path}.{k}" if path else str(k)
            params = set(d.params)
            body_free = free_vars(d.body)
            for v in sorted(body_free - params):
                self.add(BODY_FREE, f"{v} is free in the body of {d.var} but not a parameter", dpath)
            if not d.guard.disjuncts:
                self.add(BAD_GUARD, f"empty guard for {d.var}", dpath)
            for j, dis in enumerate(d.guard.disjuncts):
                gpath = f"{dpath}.g{j}"
                a = dis.atom
                if isinstance(a, SecondOrderAtom) or (isinstance(a, RelAtom) and a.rel in inner):
                    self.add(GUARD_SO, f"guard of {d.var} mentions a fixpoint variable", gpath)
                    continue
                if not isinstance(a, (RelAtom, EqAtom, Top)):
                    self.add(BAD_GUARD, f"guard disjunct of {d.var} is not an atom", gpath)
                    continue
                self.visit(a, gpath, so, negs)
                dfree = free_vars(a) - set(dis.bound)
                for v in sorted((body_free & params) - dfree):
                    self.add(GUARD_MISSING, f"guard disjunct misses free variable {v} of {d.var}", gpath)
                for v in sorted(dfree - params):
                    self.add(GUARD_EXTRA, f"guard disjunct has non-parameter variable {v}", gpath)
            self.visit(d.body, f"{dpath}.b", inner, negs)


def describe(report: ValidationReport, f: Formula | None = None) -> str:
    if report.ok:
        return "ok"
    lines = [str(v) for v in report.violations]
    if f is not None:
        lines.insert(0, format_formula(f))
    return "\n".join(lines)


def require_gnfo(f: Formula, schema: Schema | None = None):
    rep = check_gnfo(f, schema)
    if not rep.ok:
        raise NotGuardedError("; ".join(str(v) for v in rep.violations))
