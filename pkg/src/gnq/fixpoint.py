"""Greatest fixpoints expressed through least fixpoints and guarded negation."""

from __future__ import annotations

from .checks import check_gnfp
from .errors import GnqError
from .formula import (
    And,
    Exists,
    FixpointDef,
    Formula,
    GeneralizedGuard,
    GuardedNeg,
    Lfp,
    Or,
    SecondOrderAtom,
    Var,
    disj,
    exists,
    fresh_name,
    substitute,
    term_vars,
)


def instantiate_guard(guard: GeneralizedGuard, params: tuple, args: tuple, inner_of) -> Formula:
    """``α(args) ∧ inner`` as a disjunction of guarded pieces.

    ``inner_of(atom)`` builds the guarded conjunct for one disjunct atom.
    """
    parts = []
    arg_vars = set(term_vars(args))
    for d in guard.disjuncts:
        atom = d.atom
        bound = list(d.bound)
        avoid = arg_vars | set(params) | set(bound)
        m = {}
        for b in bound:
            if b in arg_vars:
                nb = fresh_name(b, avoid)
                avoid.add(nb)
                m[b] = Var(nb)
        atom = substitute(atom, m)
        bound = [m[b].name if b in m else b for b in bound]
        atom = substitute(atom, dict(zip(params, args)))
        parts.append(exists(bound, inner_of(atom)))
    return disj(parts)


def _dual_body(f: Formula, x: str, guard: GeneralizedGuard, params: tuple) -> Formula:
    if isinstance(f, SecondOrderAtom) and f.var == x:
        return instantiate_guard(guard, params, f.terms, lambda a: GuardedNeg(a, f))
    if isinstance(f, And):
        return And(_dual_body(f.lhs, x, guard, params), _dual_body(f.rhs, x, guard, params))
    if isinstance(f, Or):
        return Or(_dual_body(f.lhs, x, guard, params), _dual_body(f.rhs, x, guard, params))
    if isinstance(f, Exists):
        return Exists(f.var, _dual_body(f.body, x, guard, params))
    if isinstance(f, GuardedNeg):
        return GuardedNeg(f.guard, _dual_body(f.body, x, guard, params))
    if isinstance(f, Lfp):
        if any(d.var == x for d in f.defs):
            return f
        defs = tuple(FixpointDef(d.var, d.params, d.guard, _dual_body(d.body, x, guard, params))
                     for d in f.defs)
        return Lfp(defs, f.component, f.args)
    return f


def gfp_via_lfp(guard: GeneralizedGuard, body: Formula, x: str, params: tuple, args: tuple) -> Formula:
    """``[GFP_{X,x} α∧φ](t)`` as ``α(t) ∧ ¬[LFP_{X,x} α∧¬φ'](t)`` where
    ``φ'`` replaces each ``X(t')`` by ``α(t') ∧ ¬X(t')``."""
    probe = Lfp((FixpointDef(x, tuple(params), guard, body),), 0, tuple(args))
    rep = check_gnfp(probe)
    if not rep.ok:
        raise GnqError("ill-formed greatest fixpoint: " + "; ".join(str(v) for v in rep.violations))
    dual = _dual_body(body, x, guard, tuple(params))
    pvars = [Var(p) for p in params]
    lfp_body = instantiate_guard(guard, tuple(params), tuple(pvars), lambda a: GuardedNeg(a, dual))
    lfp = Lfp((FixpointDef(x, tuple(params), guard, lfp_body),), 0, tuple(args))
    return instantiate_guard(guard, tuple(params), tuple(args), lambda a: GuardedNeg(a, lfp))
