import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import SCHEMA, FormulaGen, ra_text, random_instance
from gnq.checks import check_gnfo
from gnq.errors import NotGuardedError, ParseError, SchemaError
from gnq.evaluator import answers
from gnq.formula import Schema, size
from gnq.formula_text import format_formula, parse_formula
from gnq.instance import Fact, Instance, parse_instance
from gnq.ra import (
    Atom,
    Diff,
    Project,
    check_ra_guarded,
    eval_ra,
    format_ra,
    infer_ra_schema,
    normalize_atoms,
    parse_ra,
    ra_size,
)
from gnq.ra_translate import gnfo_to_ra, ra_to_gnfo

RS = Schema({"R": 2, "S": 1})
UNGUARDED = [
    "(project[1](R) x S) - project[1,1](R)",
    "project[1,4](select[2=3](R x R)) - R",
    "project[1](R) - project[1]((project[1](R) x S) - R)",
]


@pytest.mark.parametrize("text", UNGUARDED)
def test_paper_unguarded_expressions(text):
    assert not check_ra_guarded(parse_ra(text, RS)).ok


def test_guarded_difference():
    assert check_ra_guarded(parse_ra("project[1](R) - project[1](S2)", Schema({"R": 2, "S2": 2}))).ok
    assert check_ra_guarded(parse_ra("project[1](R) - S", RS)).ok


def test_bare_atom_difference_normalized():
    e = parse_ra("R - project[1,1](R)", RS)
    assert check_ra_guarded(e).ok
    n = normalize_atoms(e)
    assert isinstance(n, Diff) and isinstance(n.left, Project) and n.left.indices == (1, 2)
    assert check_ra_guarded(n).ok == check_ra_guarded(normalize_atoms(n)).ok


def test_violation_path():
    c = check_ra_guarded(parse_ra(UNGUARDED[2], RS))
    assert c.path == ("diff.right", "project")


def test_eval_examples():
    inst = parse_instance("R(a,b).")
    assert eval_ra(Atom("R", 2), inst) == {("a", "b")}
    inst = parse_instance("R(a,a). R(a,b).")
    assert eval_ra(parse_ra("select[1=2](R)", RS), inst) == {("a", "a")}
    inst = parse_instance("R(a,b). R(b,c).")
    assert eval_ra(parse_ra(UNGUARDED[1], RS), inst) == {("a", "c")}


def test_unguarded_expressions_still_evaluate():
    inst = parse_instance("R(a,b). R(b,c). S(a). S(b).", schema=RS)
    assert eval_ra(parse_ra(UNGUARDED[0], RS), inst) == {("a", "b"), ("b", "a")}
    assert eval_ra(parse_ra(UNGUARDED[2], RS), inst) == set()


def test_eval_schema_mismatch():
    inst = Instance([Fact("R", ("a",))], Schema({"R": 1}))
    with pytest.raises(SchemaError):
        eval_ra(Atom("R", 2), inst)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_ra("project[3](R)", RS)
    with pytest.raises(ParseError):
        parse_ra("R + S", RS)
    with pytest.raises(ParseError) as exc:
        parse_ra("R -", RS)
    assert exc.value.line == 1


def test_format_roundtrip():
    for t in UNGUARDED:
        e = parse_ra(t, RS)
        assert parse_ra(format_ra(e), RS) == e


def test_infer_schema():
    assert infer_ra_schema("project[1](R) - project[1](S)").relations == {"R": 1, "S": 1}
    assert infer_ra_schema("project[1,4](select[2=3](R x R)) - R").relations == {"R": 2}


def test_ra_to_gnfo_shapes():
    f = ra_to_gnfo(parse_ra("select[1=2](R)", RS))
    assert format_formula(f) == "R(x1,x2) & x1 = x2"
    f = ra_to_gnfo(parse_ra("S + project[1](R)", RS))
    assert check_gnfo(f).ok
    f = ra_to_gnfo(parse_ra("project[1](R) - S", RS))
    assert check_gnfo(f).ok and "not" in format_formula(f)


def test_ra_to_gnfo_rejects_unguarded():
    with pytest.raises(NotGuardedError):
        ra_to_gnfo(parse_ra(UNGUARDED[1], RS))


def test_ra_to_gnfo_linear_size():
    e = parse_ra("S", RS)
    sizes = []
    for _ in range(6):
        e = parse_ra(f"project[1](R) - ({format_ra(e)})", RS)
        sizes.append(size(ra_to_gnfo(e)) / ra_size(e))
    assert max(sizes) <= 2 * min(sizes)


def test_gnfo_to_ra_paper_shapes():
    inst = parse_instance("R(a,b). R(b,b). R(c,a).", schema=RS)
    e = gnfo_to_ra(parse_formula("x1 = x2"), ("x1", "x2", "x3"), RS)
    assert check_ra_guarded(e).ok
    dom = sorted(inst.active_domain)
    assert eval_ra(e, inst) == {(a, a, c) for a in dom for c in dom}
    e = gnfo_to_ra(parse_formula("R(x2,x2)"), ("x1", "x2", "x3"), RS)
    assert eval_ra(e, inst) == {(a, "b", c) for a in dom for c in dom}


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_ra_to_gnfo_equivalence(seed):
    rng = random.Random(seed)
    e = parse_ra(ra_text(rng, rng.randint(1, 2)), SCHEMA)
    assert check_ra_guarded(e).ok
    f = ra_to_gnfo(e)
    assert check_gnfo(f).ok
    order = tuple(f"x{i}" for i in range(1, e.arity + 1))
    for _ in range(4):
        inst = random_instance(rng)
        assert answers(f, inst, order) == eval_ra(e, inst)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_gnfo_to_ra_equivalence(seed):
    rng = random.Random(seed)
    f = FormulaGen(rng, max_depth=2).formula(["x1", "x2"][: rng.randint(0, 2)])
    e = gnfo_to_ra(f, schema=SCHEMA)
    assert check_ra_guarded(e).ok
    for _ in range(4):
        inst = random_instance(rng)
        assert eval_ra(e, inst) == answers(f, inst)


def test_round_trip_ra_gnfo_ra():
    rng = random.Random(3)
    for _ in range(10):
        e = parse_ra(ra_text(rng, 2), SCHEMA)
        back = gnfo_to_ra(ra_to_gnfo(e), schema=SCHEMA)
        for _ in range(10):
            inst = random_instance(rng)
            assert eval_ra(back, inst) == eval_ra(e, inst)
