import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import SCHEMA, FormulaGen, random_instance
from gnq.checks import (
    ARITY,
    NEGATIVE_FIX,
    UNCOVERED,
    UNKNOWN_REL,
    check_gnfo,
    check_gnfp,
)
from gnq.dnf import (
    NegLiteral,
    check_dnf_shape,
    dnf_normalize,
    is_ucq,
    negation_rank,
    width,
)
from gnq.errors import BlowUpError, GnqError, NotGuardedError, ParseError
from gnq.evaluator import answers, holds
from gnq.fixpoint import gfp_via_lfp
from gnq.formula import (
    And,
    EqAtom,
    Exists,
    FixpointDef,
    GeneralizedGuard,
    GuardDisjunct,
    GuardedNeg,
    Lfp,
    Or,
    RelAtom,
    Schema,
    SecondOrderAtom,
    Var,
    atom,
    free_vars,
    substitute,
)
from gnq.formula_text import format_formula, parse_formula
from gnq.instance import Fact, Instance, parse_instance
from gnq.reductions import threecol_query
from oracles import direct_gfp

P = parse_formula


# --- parsing and printing --------------------------------------------------------

def test_parse_shapes():
    f = P("R(x,y) & not(S(x))")
    assert f == GuardedNeg(atom("R", "x", "y"), atom("S", "x"))
    assert P("exists x y . R(x,y)") == Exists("x", Exists("y", atom("R", "x", "y")))
    assert P("x = y") == EqAtom(Var("x"), Var("y"))
    assert isinstance(P("P(x) | Q(x)"), Or)


def test_unary_negation_without_guard_gets_equality_guard():
    f = P("not(P(x))")
    assert f == GuardedNeg(EqAtom(Var("x"), Var("x")), atom("P", "x"))
    assert check_gnfo(f).ok


def test_negation_needs_atom_on_left():
    with pytest.raises(ParseError) as exc:
        P("(R(x,y) | S(x,y)) & not(T(x,y))")
    assert exc.value.line == 1 and exc.value.column > 0


def test_negation_of_binary_formula_without_guard_rejected():
    with pytest.raises(ParseError):
        P("not(R(x,y))")


@pytest.mark.parametrize("text", [
    "R(x,y) & not(S(x,y))",
    "exists z . R(x,z) & not(exists w . T(z,w) & not(S(w)))",
    "lfp X(x) with guard S(x) as P(x) | exists y . R(x,y) & X(y) end (z)",
    "lfp { A(x) = S(x) & B(x) ; B(x) = P(x) | A(x) } select B (z)",
    "true",
    "R(x,\"a b\") & x = \"c\"",
])
def test_print_parse_roundtrip(text):
    f = P(text)
    assert P(format_formula(f)) == f


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_printer_roundtrip_random(seed):
    rng = random.Random(seed)
    f = FormulaGen(rng, top_guards=True).formula(["x1", "x2"][: rng.randint(0, 2)])
    assert P(format_formula(f)) == f


# --- checks ----------------------------------------------------------------------

def test_check_gnfo_examples():
    assert check_gnfo(P("R(x,y) & not(S(x,y))")).ok
    rep = check_gnfo(GuardedNeg(atom("S", "x"), atom("T", "x", "y")))
    assert UNCOVERED in rep.kinds()
    assert "y" in str(rep.violations[0])
    assert check_gnfo(P("x = x & not(P(x))")).ok


def test_check_gnfo_schema_violations():
    schema = Schema({"R": 2})
    assert ARITY in check_gnfo(atom("R", "x"), schema).kinds()
    assert UNKNOWN_REL in check_gnfo(atom("Q", "x"), schema).kinds()


def test_check_gnfo_bad_guard():
    f = GuardedNeg(And(atom("S", "x"), atom("S", "y")), atom("T", "x", "y"))
    assert not check_gnfo(f).ok


def test_check_gnfo_rejects_fixpoints():
    f = P("lfp X(x) with guard S(x) as P(x) end (z)")
    assert not check_gnfo(f).ok
    assert check_gnfp(f).ok


def test_check_gnfp_examples():
    assert check_gnfp(P("lfp X(x) with guard S(x) as P(x) | exists y . R(x,y) & X(y) end (z)")).ok
    bad = P("lfp X(x) with guard S(x) as S(x) & not(X(x)) end (z)")
    assert NEGATIVE_FIX in check_gnfp(bad).kinds()
    gen = P("lfp X(x,y) with guard (exists u v . R4(x,y,u,v)) | (exists u v . R4(y,x,u,v)) "
            "as T(x,y) | exists w . T(x,w) & X(w,y) end (a,b)")
    assert check_gnfp(gen).ok


def test_check_gnfp_guard_missing_variable():
    g = GeneralizedGuard((GuardDisjunct((), atom("S", "x")),))
    f = Lfp(((_def("X", ("x", "y"), g, atom("T", "x", "y"))),), 0, (Var("a"), Var("b")))
    assert not check_gnfp(f).ok


def _def(name, params, guard, body):
    return FixpointDef(name, params, guard, body)


def test_translations_produce_checked_formulas():
    assert check_gnfo(threecol_query()).ok


# --- DNF, width, negation rank ---------------------------------------------------

def test_dnf_examples():
    q = dnf_normalize(P("exists x . (P(x) | Q(x))"))
    assert len(q.blocks) == 2
    assert all(b.qvars == ("v0",) for b in q.blocks)
    q = dnf_normalize(P("R(x,y) & not(P(x) & Q(y))"))
    assert len(q.blocks) == 2
    assert {str(l.sub) for b in q.blocks for l in b.literals if isinstance(l, NegLiteral)} == {
        "P(x)", "Q(y)"}


def test_dnf_fixed_point_on_dnf_input():
    q = dnf_normalize(P("exists y . R(x,y) & not(S(y))"))
    assert dnf_normalize(q.to_formula()) == q


def test_dnf_blowup_cap():
    f = P(" & ".join(f"(P{i}(x) | Q{i}(x))" for i in range(12)))
    with pytest.raises(BlowUpError):
        dnf_normalize(f, node_cap=1000)


def test_dnf_rejects_non_gnfo():
    with pytest.raises(NotGuardedError):
        dnf_normalize(GuardedNeg(atom("S", "x"), atom("T", "x", "y")))


def test_width_examples():
    assert width(P("R(x,y)")) == 2
    assert width(P("exists y . R(x,y) & exists z . R(y,z)")) == 3
    assert width(P("exists x . (P(x) | Q(x))")) == 1


def test_negation_rank_examples():
    assert negation_rank(dnf_normalize(P("exists y . R(x,y) | P(x)"))) == 0
    assert negation_rank(dnf_normalize(P("R(x,y) & not(S(x))"))) == 1
    assert negation_rank(dnf_normalize(P("R(x,y) & not(S(x) & not(P(x)))"))) == 2


def test_is_ucq_examples():
    assert is_ucq(dnf_normalize(P("exists y . R(x,y)")))
    assert not is_ucq(dnf_normalize(P("R(x,y) & not(S(x))")))
    assert not is_ucq(dnf_normalize(threecol_query()))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_dnf_shape_and_equivalence(seed):
    rng = random.Random(seed)
    f = FormulaGen(rng, top_guards=True).formula(["x1", "x2"][: rng.randint(0, 2)])
    q = dnf_normalize(f)
    assert check_dnf_shape(q)
    order = tuple(sorted(free_vars(f)))
    for _ in range(3):
        inst = random_instance(rng)
        assert answers(q.to_formula(), inst, order) == answers(f, inst, order)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_negation_rank_invariant_under_renaming(seed):
    rng = random.Random(seed)
    f = FormulaGen(rng).formula(["x1"])
    renamed = _rename_bound(f, "r_")
    assert negation_rank(dnf_normalize(f)) == negation_rank(dnf_normalize(renamed))
    assert width(f) == width(renamed)


def _rename_bound(f, prefix):
    if isinstance(f, Exists):
        nv = prefix + f.var
        return Exists(nv, _rename_bound(substitute(f.body, {f.var: Var(nv)}), prefix))
    if isinstance(f, (And, Or)):
        return type(f)(_rename_bound(f.lhs, prefix), _rename_bound(f.rhs, prefix))
    if isinstance(f, GuardedNeg):
        return GuardedNeg(f.guard, _rename_bound(f.body, prefix))
    return f


# --- evaluation ------------------------------------------------------------------

def test_reachability_lfp():
    f = P("lfp X(x) with guard (exists y . R(x,y)) | P(x) as P(x) | exists y . R(x,y) & X(y) end (z)")
    inst = parse_instance("R(a,b). P(b).")
    assert answers(f, inst) == {("a",), ("b",)}


def test_guarded_negation_evaluation():
    inst = parse_instance("R(a,b). S(a).")
    assert answers(P("R(x,y) & not(S(x))"), inst) == set()


def test_threecol_sentence_on_colored_triangle():
    facts = "N(a). N(b). N(c). E(a,b). E(b,a). E(b,c). E(c,b). E(a,c). E(c,a). P1(a). P2(b). P3(c)."
    inst = parse_instance(facts)
    assert not holds(threecol_query(), inst)
    assert holds(threecol_query(), inst.remove(Fact("P3", ("c",))))


def test_sentence_answers_are_empty_or_unit():
    inst = parse_instance("R(a,b).")
    assert answers(P("exists x y . R(x,y)"), inst) == {()}
    assert answers(P("exists x . S2(x)"), Instance(inst.facts, Schema({"R": 2, "S2": 1}))) == set()


# --- greatest fixpoints ----------------------------------------------------------

def _guard(rel):
    return GeneralizedGuard((GuardDisjunct((), atom(rel, "x")),))


def _gfp_answers(guard_rel, body, inst):
    f = gfp_via_lfp(_guard(guard_rel), body, "X", ("x",), (Var("t"),))
    assert check_gnfp(f).ok
    return {t[0] for t in answers(f, inst, ("t",))}


def _direct(guard_rel, body, inst):
    return {t[0] for t in direct_gfp(atom(guard_rel, "x"), body, "X", ("x",), inst)}


def test_gfp_identity_body_is_guard():
    inst = parse_instance("S(a). S(b). R(a,c).", schema=SCHEMA)
    body = SecondOrderAtom("X", (Var("x"),))
    assert _gfp_answers("S", body, inst) == {"a", "b"}


def test_gfp_constant_body():
    inst = parse_instance("S(a). S(b). R(a,c).", schema=SCHEMA)
    body = P("exists y . R(x,y)")
    assert _gfp_answers("S", body, inst) == {"a"}


def _safety_body():
    # every R-successor is again in X
    x, y = Var("x"), Var("y")
    inner = GuardedNeg(RelAtom("R", (x, y)), SecondOrderAtom("X", (y,)))
    return GuardedNeg(EqAtom(x, x), Exists("y", inner))


def test_gfp_safety_matches_direct_iteration():
    rng = random.Random(7)
    body = _safety_body()
    for _ in range(40):
        inst = random_instance(rng, max_elems=5, max_facts=12)
        assert _gfp_answers("S", body, inst) == _direct("S", body, inst)


def test_gfp_rejects_negative_occurrence():
    body = GuardedNeg(EqAtom(Var("x"), Var("x")), SecondOrderAtom("X", (Var("x"),)))
    with pytest.raises(GnqError):
        gfp_via_lfp(_guard("S"), body, "X", ("x",), (Var("t"),))


def test_lfp_stages_monotone():
    f = P("lfp X(x) with guard (exists y . R(x,y)) | P(x) as P(x) | exists y . R(x,y) & X(y) end (z)")
    inst = parse_instance("R(a,b). R(b,c). R(c,d). P(d).")
    seen = []

    def on_stage(lfp, step, prev, cur):
        assert prev <= cur
        seen.append(step)

    answers(f, inst, on_stage=on_stage)
    assert seen and len(seen) <= len(inst.active_domain) + 1
