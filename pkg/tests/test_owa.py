import random

import pytest

from generators import random_instance
from gnq.chase import (
    EXHAUSTED,
    FAILED,
    TERMINATED,
    chase,
    find_homomorphism,
    replay,
    violations,
)
from gnq.checks import check_gnfo
from gnq.constraints import (
    FALSE_REL,
    FRONTIER_GUARDED,
    GENERAL,
    GUARDED,
    LINEAR,
    check_sgnq,
    classify_tgd,
    flatten_sgnq,
    owa_query_with_tgds,
    parse_constraints,
    tgd_to_gnfo,
)
from gnq.datalog import parse_datalog
from gnq.datalog_translate import guard_datalog_for_containment
from gnq.errors import GnqError, NotGuardedError
from gnq.evaluator import answers, holds
from gnq.formula import Schema, free_vars
from gnq.formula_text import parse_formula
from gnq.instance import Fact, Instance, parse_instance
from gnq.reductions import Graph, graph_to_instance, threecol_query
from gnq.search import (
    ENTAILED,
    FOUND,
    NONE_WITHIN,
    NOT_ENTAILED,
    NOT_WITHIN,
    SearchBudget,
    containment_counterexample_bounded,
    enumerate_instances,
    owa_answer_cq,
    owa_refute_bounded,
    sat_bounded,
)

P = parse_formula


def T(text):
    (t,), _ = parse_constraints(text)
    return t


# --- classification --------------------------------------------------------------

def test_classify_examples():
    assert classify_tgd(T("R(x,y) -> exists z . S(y,z).")) == LINEAR
    assert classify_tgd(T("E(x,y), P(y) -> exists z . S(y,z).")) == GUARDED
    assert classify_tgd(T("E(x,y), E(y,w), P(w) -> S(w).")) == FRONTIER_GUARDED
    assert classify_tgd(T("E(x,y), E(y,w) -> S(x,w).")) == GENERAL


def test_tgd_to_gnfo():
    f = tgd_to_gnfo(T("E(x,y), E(y,w), P(w) -> exists z . S(w,z)."))
    assert check_gnfo(f).ok and not free_vars(f)
    inst = parse_instance("E(a,b). E(b,c). P(c).", schema=Schema({"E": 2, "P": 1, "S": 2}))
    assert not holds(f, inst)
    assert holds(f, inst.add(Fact("S", ("c", "a"))))
    with pytest.raises(NotGuardedError):
        tgd_to_gnfo(T("E(x,y), E(y,w) -> S(x,w)."))


def test_constraint_parse_and_print():
    tgds, keys = parse_constraints("R(x,y), P(y) -> exists z . S(y,z).\nkey F(1 -> 2).")
    assert str(keys[0]) == "key F(1 -> 2)."
    again, _ = parse_constraints(str(tgds[0]))
    assert again == tgds


# --- chase -----------------------------------------------------------------------

def test_chase_budget_example():
    t = T("succ(x,y) -> exists z . succ(y,z).")
    st = chase(parse_instance("succ(a,b)."), [t], max_steps=2)
    assert st.status == EXHAUSTED
    assert st.facts == {Fact("succ", ("a", "b")), Fact("succ", ("b", "_:n1")),
                        Fact("succ", ("_:n1", "_:n2"))}


def test_key_unifies_null():
    _, keys = parse_constraints("key next(1 -> 2).")
    st = chase(parse_instance('next(a,b). next(a,"_:n1").'), [], keys)
    assert st.status == TERMINATED and st.facts == {Fact("next", ("a", "b"))}


def test_key_fails_on_constants():
    _, keys = parse_constraints("key next(1 -> 2).")
    st = chase(parse_instance("next(a,b). next(a,c)."), [], keys)
    assert st.status == FAILED


def test_restricted_chase_skips_satisfied_heads():
    t = T("R(x,y) -> exists z . S(y,z).")
    st = chase(parse_instance("R(a,b). S(b,c)."), [t])
    assert st.status == TERMINATED and st.steps == 0


def _random_constraints(rng):
    pool = [
        "R(x,y) -> exists z . T(y,z).",
        "T(x,y), S(y) -> R(y,x).",
        "R(x,y), S(x) -> S(y).",
        "S(x) -> exists y . R(x,y).",
        "T(x,y) -> S(x).",
    ]
    return parse_constraints("\n".join(rng.sample(pool, rng.randint(1, 3))))[0]


def test_chase_soundness_and_universality():
    rng = random.Random(13)
    checked = 0
    for _ in range(30):
        tgds = _random_constraints(rng)
        inst = random_instance(rng, max_elems=3, max_facts=4)
        st = chase(inst, tgds, max_steps=200)
        if st.status != TERMINATED:
            continue
        checked += 1
        assert violations(st.facts, tgds) == []
        assert replay(inst, tgds, st.trace) == st.facts
        for model in enumerate_instances({"R": 2, "S": 1, "T": 2}, 2, 3):
            big = Instance(model.facts | inst.facts)
            if not violations(big.facts, tgds):
                assert find_homomorphism(st.facts, big.facts) is not None
    assert checked >= 10


def test_chase_trace_deterministic():
    tgds = parse_constraints("S(x) -> exists y . R(x,y).\nR(x,y) -> exists z . T(y,z).")[0]
    inst = parse_instance("S(b). S(a).")
    assert chase(inst, tgds).to_json() == chase(inst, tgds).to_json()


# --- open-world answering ----------------------------------------------------------

def test_owa_cq_without_tgds_is_closed_world():
    inst = parse_instance("R(a,b). R(b,c).")
    q = P("exists x y z . R(x,y) & R(y,z)")
    assert owa_answer_cq(inst, [], [], q).status == ENTAILED
    q2 = P("exists x . R(x,x)")
    assert owa_answer_cq(inst, [], [], q2).status == NOT_ENTAILED


def test_owa_cq_uses_tgds():
    tgds = parse_constraints("R(x,y) -> exists z . S(y,z).")[0]
    inst = parse_instance("R(a,b).")
    v = owa_answer_cq(inst, tgds, [], P("S(x,y)"), answer=("b", "c"))
    assert v.status == NOT_ENTAILED
    v = owa_answer_cq(inst, tgds, [], P("exists y . S(x,y)"), answer=("b",))
    assert v.status == ENTAILED


def test_owa_cq_budget_is_not_negative():
    tgds = parse_constraints("succ(x,y) -> exists z . succ(y,z).")[0]
    v = owa_answer_cq(parse_instance("succ(a,b)."), tgds, [], P("exists x . succ(x,x)"),
                      budget=SearchBudget(max_chase_steps=5))
    assert v.status == NOT_WITHIN


def test_owa_cq_failed_key_entails():
    _, keys = parse_constraints("key F(1 -> 2).")
    v = owa_answer_cq(parse_instance("F(a,b). F(a,c)."), [], keys, P("exists x . Q(x)"))
    assert v.status == ENTAILED


def _graph(nodes, edges):
    return graph_to_instance(Graph(tuple(nodes), tuple(edges)))


def test_refute_triangle_finds_coloring():
    inst = _graph("abc", [("a", "b"), ("b", "c"), ("a", "c")])
    r = owa_refute_bounded(inst, threecol_query(), SearchBudget(max_extra_facts=9))
    assert r.status == FOUND
    assert not holds(threecol_query(), r.instance)
    assert inst.facts <= r.instance.facts


def test_refute_k4_none_within_budget():
    nodes = "abcd"
    inst = _graph(nodes, [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]])
    r = owa_refute_bounded(inst, threecol_query(), SearchBudget(max_extra_facts=12))
    assert r.status == NONE_WITHIN


def test_refute_unsatisfiable_query_returns_input():
    inst = parse_instance("P(a).")
    r = owa_refute_bounded(inst, P("exists x . P(x) & not(P(x))"))
    assert r.found and r.added == () and r.instance.facts == inst.facts


def test_refute_grounded_equals_enumeration():
    rng = random.Random(21)
    for _ in range(15):
        n = rng.randint(1, 3)
        edges = [e for e in [("a", "b"), ("b", "c"), ("a", "c")] if rng.random() < 0.6]
        nodes = "abc"[:n]
        edges = [e for e in edges if e[0] in nodes and e[1] in nodes]
        inst = _graph(nodes, edges)
        b = SearchBudget(max_extra_facts=n)
        fast = owa_refute_bounded(inst, threecol_query(), b)
        slow = owa_refute_bounded(inst, threecol_query(), b, enumerate_only=True)
        assert fast.status == slow.status


def test_refute_workers_do_not_change_result():
    inst = _graph("abc", [("a", "b"), ("b", "c")])
    b = SearchBudget(max_extra_facts=3)
    one = owa_refute_bounded(inst, threecol_query(), b, enumerate_only=True)
    two = owa_refute_bounded(inst, threecol_query(), b, enumerate_only=True, workers=2)
    assert one.added == two.added


def test_refute_with_answer_tuple():
    inst = parse_instance("S(a). S(b). R(a,b).")
    q = P("S(x) & not(T(x))")
    r = owa_refute_bounded(inst, q, SearchBudget(max_extra_facts=1), answer=("a",))
    assert r.found and Fact("T", ("a",)) in r.added


def test_refute_and_chase_agree_on_ucq_with_tgds():
    rng = random.Random(8)
    tgds = parse_constraints("R(x,y) -> S(y).\nS(x), T(x,y) -> R(y,x).")[0]
    q = P("exists x . S(x) & exists y . T(x,y) & S(y)")
    for _ in range(20):
        inst = random_instance(rng, max_elems=3, max_facts=5)
        v = owa_answer_cq(inst, tgds, [], q)
        r = owa_refute_bounded(inst, owa_query_with_tgds(q, tgds), SearchBudget(max_extra_facts=3))
        assert v.status in (ENTAILED, NOT_ENTAILED)
        assert (v.status == ENTAILED) == (r.status == NONE_WITHIN)


# --- satisfiability and containment ---------------------------------------------------

def test_sat_examples():
    r = sat_bounded(P("exists x . P(x)"), 2)
    assert r.found and len(r.instance.active_domain) == 1 and len(r.instance) == 1
    assert sat_bounded(P("exists x . P(x) & not(P(x))"), 2).status == NONE_WITHIN


def test_containment_reflexive():
    q = P("exists y . R(x,y) & not(S(y))")
    assert containment_counterexample_bounded(q, q, 2).status == NONE_WITHIN


def test_containment_witness():
    r = containment_counterexample_bounded(P("exists y . R(x,y)"), P("S(x)"), 2)
    assert r.found
    assert r.answer in answers(P("exists y . R(x,y)"), r.instance)


def test_containment_guarded_tc_vs_two_step_path():
    tc = parse_datalog("T(x,y) :- E(x,y).\nT(x,y) :- E(x,z), T(z,y).\n?- ans(x,y) :- T(x,y).")
    g = guard_datalog_for_containment(tc)
    two = parse_datalog("?- ans(x,y) :- E(x,y).\n?- ans(x,y) :- E(x,z), E(z,y).")
    r = containment_counterexample_bounded(g, two, 4, max_facts=3)
    assert r.found
    assert len(r.instance.relation("E")) == 3
    assert containment_counterexample_bounded(two, g, 3, max_facts=3).status == NONE_WITHIN


def test_containment_arity_mismatch():
    with pytest.raises(GnqError):
        containment_counterexample_bounded(P("P(x)"), P("exists x . P(x)"), 1)


# --- serial queries -------------------------------------------------------------------

def test_check_sgnq_examples():
    assert check_sgnq(P("exists x y . R(x,y) | exists x . S(x)"))[0]
    ok, block = check_sgnq(threecol_query())
    assert not ok and block is not None


def test_sgnq_with_negated_tgds_stays_serial():
    tgds = parse_constraints("R(x,y) -> exists z . S(y,z).\nS(x,y), P(y) -> P(x).")[0]
    q = owa_query_with_tgds(P("exists x . P(x)"), tgds)
    assert check_sgnq(q)[0]


def test_flatten_examples():
    q = P("(exists x . P(x)) | exists x y . R(x,y) & not(S(y))")
    rules = flatten_sgnq(q)
    assert all(classify_tgd(t) != GENERAL for t in rules)
    assert any(a.rel == FALSE_REL for t in rules for a in t.head)
    assert any(a.rel == "S" for t in rules for a in t.head)
    derived = chase(parse_instance("R(a,b)."), rules)
    assert derived.status == TERMINATED
    assert Fact("S", ("b",)) in derived.facts
    assert not any(f.rel == FALSE_REL for f in derived.facts)
    assert any(f.rel == FALSE_REL for f in chase(parse_instance("P(a)."), rules).facts)


def test_flatten_rejects_non_serial_and_open_queries():
    with pytest.raises(GnqError):
        flatten_sgnq(threecol_query())
    with pytest.raises(GnqError):
        flatten_sgnq(P("exists y . R(x,y)"))


def test_flatten_single_negated_existential():
    q = P("x = x & not(exists y . P(y))")
    with pytest.raises(GnqError):
        flatten_sgnq(q)
    rules = flatten_sgnq(P("exists x . S(x) & not(exists y . R(x,y) & P(y))"))
    assert all(classify_tgd(t) in (LINEAR, GUARDED, FRONTIER_GUARDED) for t in rules)
    assert any(t.existentials() for t in rules)


def test_nulls_rigid_unless_flagged():
    inst = parse_instance('R("_:n1",a).')
    q = P("not(exists x . R(x,x))")
    b = SearchBudget(max_extra_facts=0)
    assert owa_refute_bounded(inst, q, b).status == NONE_WITHIN
    r = owa_refute_bounded(inst, q, b, nulls_as_fresh=True)
    assert r.found and Fact("R", ("a", "a")) in r.instance.facts


def test_answer_outside_active_domain_is_refutable():
    q = parse_formula("R(x,x)")
    r = owa_refute_bounded(Instance(frozenset()), q, SearchBudget(), answer=("a",), order=("x",))
    assert r.found and not r.added
