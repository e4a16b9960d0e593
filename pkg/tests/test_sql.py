import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import CATALOG, FormulaGen, SqlGen, random_instance
from gnq.checks import check_gnfo
from gnq.errors import NotGuardedError, ParseError
from gnq.evaluator import answers
from gnq.formula import Or
from gnq.formula_text import parse_formula
from gnq.instance import parse_instance
from gnq.sql import (
    SqlTypeError,
    check_sql_guarded,
    eval_sql,
    format_sql,
    parse_catalog,
    parse_sql,
    parse_sql_file,
    typecheck_sql,
)
from gnq.sql_translate import add_adom, gnfo_to_sql, sql_to_gnfo
from gnq.workload import bundled

AUTHORS = parse_catalog(bundled("authors.catalog"))
FIG3 = parse_sql_file(bundled("fig3.sql"))
AUTHOR_SCHEMA = AUTHORS.positional()


def authors(text):
    return parse_instance(text, schema=AUTHOR_SCHEMA)


def test_fig3_parses_and_types():
    assert len(FIG3) == 2
    assert typecheck_sql(FIG3[0], AUTHORS) == ("name",)


def test_fig3_guardedness():
    assert check_sql_guarded(FIG3[0]).ok
    rep = check_sql_guarded(FIG3[1])
    assert not rep.ok
    (v,) = rep.violations
    assert v.pos == (5, 36)


def test_fig3_eval():
    q = FIG3[0]
    assert eval_sql(q, authors("author(n1). book(t1,n1)."), AUTHORS) == set()
    assert eval_sql(q, authors("author(n1). author(n2). book(t1,n1)."), AUTHORS) == {("n2",)}


def test_type_errors():
    with pytest.raises(SqlTypeError):
        typecheck_sql(parse_sql("select A.name as x from author A union "
                                "select B.title as y from book B"), AUTHORS)
    with pytest.raises(SqlTypeError):
        typecheck_sql(parse_sql("select A.name from author A where A.name in "
                                "(select B.title, B.auth from book B)"), AUTHORS)
    with pytest.raises(SqlTypeError):
        typecheck_sql(parse_sql("select A.nope from author A"), AUTHORS)
    with pytest.raises(SqlTypeError):
        typecheck_sql(parse_sql("select A.name from author A where exists "
                                "(select A.name from author A)"), AUTHORS)


def test_syntax_error_position():
    with pytest.raises(ParseError) as exc:
        parse_sql("select A.name from author A\nwhere A.name = ")
    assert exc.value.line == 2


def test_except_rules():
    simple = "select A.name as x from author A"
    closed = "select B.auth as x from book B"
    assert check_sql_guarded(parse_sql(f"{simple} except {closed}")).ok
    filtered = "select A.name as x from author A where A.name = A.name"
    assert not check_sql_guarded(parse_sql(f"{filtered} except {closed}")).ok


def test_where_true_projection():
    q = parse_sql("select B.auth from book B where true")
    inst = authors("book(t1,n1). book(t2,n1). book(t3,n2).")
    assert eval_sql(q, inst, AUTHORS) == {("n1",), ("n2",)}


def test_format_roundtrip():
    for q in FIG3:
        assert parse_sql(format_sql(q)) == q


def test_sql_to_gnfo_fig3():
    f = sql_to_gnfo(FIG3[0], AUTHORS)
    assert check_gnfo(f).ok
    rng = random.Random(1)
    for _ in range(30):
        inst = random_instance(rng, AUTHOR_SCHEMA)
        assert answers(f, inst, ("x1",)) == eval_sql(FIG3[0], inst, AUTHORS)


def test_sql_to_gnfo_rejects_unguarded():
    with pytest.raises(NotGuardedError):
        sql_to_gnfo(FIG3[1], AUTHORS)


def test_union_is_disjunction():
    q = parse_sql("select A.name as x from author A union select B.auth as x from book B")
    f = sql_to_gnfo(q, AUTHORS)
    assert isinstance(f, Or)


def test_gnfo_to_sql_output_is_guarded_and_typed():
    f = parse_formula("exists y . T(x,y) & not(S(y))")
    for elim in (False, True):
        q = gnfo_to_sql(f, CATALOG, eliminate_adom=elim)
        schema = CATALOG if elim else CATALOG.with_adom()
        assert typecheck_sql(q, schema) == ("a1",)
        assert check_sql_guarded(q).ok


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_sql_to_gnfo_equivalence(seed):
    rng = random.Random(seed)
    q = parse_sql(SqlGen(rng).query([], rng.randint(1, 2)))
    typecheck_sql(q, CATALOG)
    assert check_sql_guarded(q).ok
    f = sql_to_gnfo(q, CATALOG)
    assert check_gnfo(f).ok
    n = len(typecheck_sql(q, CATALOG))
    order = tuple(f"x{i}" for i in range(1, n + 1))
    for _ in range(4):
        inst = random_instance(rng)
        assert answers(f, inst, order) == eval_sql(q, inst, CATALOG)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_gnfo_to_sql_equivalence(seed):
    rng = random.Random(seed)
    f = FormulaGen(rng, max_depth=2).formula(["x1", "x2"][: rng.randint(1, 2)])
    with_adom = gnfo_to_sql(f, CATALOG)
    without = gnfo_to_sql(f, CATALOG, eliminate_adom=True)
    for _ in range(3):
        inst = random_instance(rng)
        want = answers(f, inst)
        assert eval_sql(with_adom, add_adom(inst), CATALOG.with_adom()) == want
        assert eval_sql(without, inst, CATALOG) == want


def test_catalog_parse_errors():
    with pytest.raises(ParseError):
        parse_catalog("book(a, a)")
    with pytest.raises(ParseError):
        parse_catalog("book(a\n")
