"""Command-line front end.

Exit codes: 0 success or positive verdict, 1 negative verdict, 2 budget
exhausted, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .errors import BlowUpError, GnqError, ParseError

OK, NEGATIVE, BUDGET, INPUT_ERROR = 0, 1, 2, 3


@dataclass
class CommandResult:
    exit_code: int
    payload: object  # dict for --json, otherwise text

    def render(self) -> str:
        if isinstance(self.payload, str):
            return self.payload
        return json.dumps(self.payload, indent=2, sort_keys=True)


class InputError(GnqError):
    pass


# --- input helpers -------------------------------------------------------------------

def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _source(path: str) -> str:
    return "<stdin>" if path == "-" else path


def _catalog(args):
    if not getattr(args, "schema", None):
        return None
    from .sql import parse_catalog
    return parse_catalog(_read(args.schema), _source(args.schema))


def _positional_schema(args):
    cat = _catalog(args)
    return cat.positional() if cat is not None else None


def _formula(path: str):
    from .formula_text import parse_formula
    return parse_formula(_read(path), _source(path))


def _instance(path: str, schema=None):
    from .instance import parse_instance
    return parse_instance(_read(path), _source(path), schema)


def _ra(path: str, args):
    from .ra import infer_ra_schema, parse_ra
    text = _read(path)
    schema = _positional_schema(args) or infer_ra_schema(text, source=_source(path))
    return parse_ra(text, schema, _source(path))


def _sql_queries(path: str):
    from .sql import parse_sql_file
    return parse_sql_file(_read(path), _source(path))


def _sql(path: str):
    qs = _sql_queries(path)
    if len(qs) != 1:
        raise InputError(f"{path}: expected one SQL statement, found {len(qs)}")
    return qs[0]


def _datalog(path: str):
    from .datalog import parse_datalog
    return parse_datalog(_read(path), _source(path))


def _answer(text: str | None) -> tuple:
    if not text:
        return ()
    return tuple(v.strip() for v in text.split(","))


def _rows(rows) -> list:
    return [list(r) for r in sorted(rows)]


def _rows_text(rows) -> str:
    return "".join("(" + ", ".join(r) + ")\n" for r in sorted(rows))


def _ensure_sql_schema(args):
    cat = _catalog(args)
    if cat is None:
        raise InputError("SQL evaluation and translation need --schema CATALOG")
    return cat


def _load(lang: str, path: str, args):
    """A query object of the given language, for containment and evaluation."""
    if lang in ("gnfo", "gnfp", "formula"):
        return _formula(path)
    if lang == "ra":
        return _ra(path, args)
    if lang == "sql":
        return _sql(path)
    if lang == "datalog":
        return _datalog(path)
    raise InputError(f"unknown query language {lang}")


def _lang_of(path: str) -> str:
    ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    return {"ra": "ra", "sql": "sql", "dl": "datalog", "datalog": "datalog"}.get(ext, "gnfo")


# --- commands ------------------------------------------------------------------------

def cmd_check(args) -> CommandResult:
    kind = args.kind
    if kind in ("gnfo", "gnfp"):
        from .checks import check_gnfo, check_gnfp
        f = _formula(args.file)
        rep = (check_gnfo if kind == "gnfo" else check_gnfp)(f, _positional_schema(args))
        items = [{"kind": v.kind, "path": v.path, "message": v.message} for v in rep.violations]
        text = "ok\n" if rep.ok else "".join(f"{v}\n" for v in rep.violations)
        return _verdict(rep.ok, {"guarded": rep.ok, "violations": items}, text, args)
    if kind == "ra":
        from .ra import check_ra_guarded
        rep = check_ra_guarded(_ra(args.file, args))
        path = "/".join(rep.path)
        text = "ok\n" if rep.ok else f"unguarded difference at [{path}]\n"
        return _verdict(rep.ok, {"guarded": rep.ok, "path": list(rep.path)}, text, args)
    if kind == "sql":
        from .sql import check_sql_guarded, typecheck_sql
        cat = _catalog(args)
        out, lines, ok = [], [], True
        for k, q in enumerate(_sql_queries(args.file)):
            typ = list(typecheck_sql(q, cat)) if cat is not None else None
            rep = check_sql_guarded(q)
            ok = ok and rep.ok
            vs = [{"kind": v.kind, "pos": f"{v.pos[0]}:{v.pos[1]}", "detail": v.detail}
                  for v in rep.violations]
            out.append({"index": k, "guarded": rep.ok, "type": typ, "violations": vs})
            lines.append(f"query {k}: " + ("ok" if rep.ok else "unguarded")
                         + (f" type {{{', '.join(typ)}}}" if typ is not None else ""))
            lines.extend(f"  {v}" for v in rep.violations)
        return _verdict(ok, {"guarded": ok, "queries": out}, "\n".join(lines) + "\n", args)
    if kind == "datalog":
        from .datalog import check_gn_datalog
        p = _datalog(args.file)
        rep = check_gn_datalog(p, idb_guards=args.relaxed)
        vs = [{"rule": i + 1, "target": v.target, "missing": sorted(v.missing)}
              for i, v in rep.violations()]
        text = "ok\n" if rep.ok else "".join(
            f"rule {d['rule']}: {d['target']} not covered, missing {', '.join(d['missing'])}\n" for d in vs)
        return _verdict(rep.ok, {"guarded": rep.ok, "mode": "relaxed" if args.relaxed else "strict",
                                 "violations": vs}, text, args)
    raise InputError(f"unknown check target {kind}")


def _verdict(ok: bool, payload: dict, text: str, args) -> CommandResult:
    return CommandResult(OK if ok else NEGATIVE, payload if args.json else text)


def cmd_translate(args) -> CommandResult:
    from .formula_text import format_formula
    src, dst = args.source, args.target
    pair = (src, dst)
    payload: dict = {"from": src, "to": dst}
    if pair == ("ra", "gnfo"):
        from .ra_translate import ra_to_gnfo
        out = format_formula(ra_to_gnfo(_ra(args.file, args)))
    elif pair == ("gnfo", "ra"):
        from .ra import format_ra
        from .ra_translate import gnfo_to_ra
        out = format_ra(gnfo_to_ra(_formula(args.file), schema=_positional_schema(args)))
    elif pair == ("sql", "gnfo"):
        from .sql_translate import sql_to_gnfo
        out = format_formula(sql_to_gnfo(_sql(args.file), _ensure_sql_schema(args)))
    elif pair == ("gnfo", "sql"):
        from .sql import format_sql
        from .sql_translate import gnfo_to_sql
        out = format_sql(gnfo_to_sql(_formula(args.file), _ensure_sql_schema(args),
                                     eliminate_adom=args.eliminate_adom))
    elif pair == ("datalog", "gnfo"):
        from .datalog_translate import nonrecursive_to_gnfo
        f, order = nonrecursive_to_gnfo(_datalog(args.file))
        out = format_formula(f)
        payload["order"] = list(order)
    elif pair == ("gnfo", "datalog"):
        from .datalog import format_program
        from .datalog_translate import gnfo_to_nonrecursive
        out = format_program(gnfo_to_nonrecursive(_formula(args.file), _positional_schema(args)))
    elif pair == ("datalog", "gnfp"):
        from .datalog_translate import gndatalog_to_gnfp
        phi, psi, schema_hat = gndatalog_to_gnfp(_datalog(args.file))
        payload |= {"phi": format_formula(phi), "psi": format_formula(psi),
                    "schema": dict(sorted(schema_hat.relations.items()))}
        text = (f"% phi\n{format_formula(phi)}\n% psi\n{format_formula(psi)}\n% schema\n"
                + "".join(f"{r}/{n}\n" for r, n in sorted(schema_hat.relations.items())))
        return CommandResult(OK, payload if args.json else text)
    elif pair == ("datalog", "guarded"):
        from .datalog import format_program
        from .datalog_translate import guard_datalog_for_containment
        out = format_program(guard_datalog_for_containment(_datalog(args.file)))
    elif pair == ("gnfo", "tgds"):
        from .constraints import flatten_sgnq, format_constraints
        out = format_constraints(flatten_sgnq(_formula(args.file)))
    else:
        raise InputError(f"no translation from {src} to {dst}")
    out = out.rstrip("\n") + "\n"
    payload["output"] = out
    return CommandResult(OK, payload if args.json else out)


def cmd_eval(args) -> CommandResult:
    kind = args.kind
    if kind == "formula":
        from .evaluator import answers
        from .formula import free_vars, sorted_vars
        f = _formula(args.query)
        inst = _instance(args.instance, _positional_schema(args))
        order = tuple(sorted_vars(free_vars(f)))
        rows = answers(f, inst, order, schema=inst.schema)
        payload = {"order": list(order), "answers": _rows(rows)}
    elif kind == "ra":
        from .ra import eval_ra
        e = _ra(args.query, args)
        rows = eval_ra(e, _instance(args.instance))
        payload = {"answers": _rows(rows)}
    elif kind == "sql":
        from .sql import eval_sql, typecheck_sql
        cat = _ensure_sql_schema(args)
        q = _sql(args.query)
        typ = typecheck_sql(q, cat)
        rows = eval_sql(q, _instance(args.instance, cat.positional()), cat)
        payload = {"type": list(typ), "answers": _rows(rows)}
    elif kind == "datalog":
        from .datalog import eval_stratified
        p = _datalog(args.query)
        model, rows = eval_stratified(p, _instance(args.instance), mode=args.mode)
        payload = {"model": [str(f) for f in model]}
        if rows is not None:
            payload["answers"] = _rows(rows)
        if p.answer_arity == 0 and rows is not None:
            payload["holds"] = bool(rows)
        if args.json:
            return CommandResult(OK, payload)
        if rows is None:
            return CommandResult(OK, model.to_text())
        if p.answer_arity == 0:
            return CommandResult(OK, "true\n" if rows else "false\n")
        return CommandResult(OK, _rows_text(rows))
    else:
        raise InputError(f"unknown evaluation target {kind}")
    return CommandResult(OK, payload if args.json else _rows_text(payload["answers"]))


def cmd_dnf(args) -> CommandResult:
    from .dnf import dnf_normalize, negation_rank
    q = dnf_normalize(_formula(args.file), args.node_cap)
    text = str(q)
    payload = {"dnf": text, "blocks": len(q.blocks), "negation_rank": negation_rank(q)}
    return CommandResult(OK, payload if args.json else text + "\n")


def cmd_width(args) -> CommandResult:
    from .dnf import dnf_normalize, negation_rank, width
    f = _formula(args.file)
    w = width(f, args.node_cap)
    rank = negation_rank(dnf_normalize(f, args.node_cap))
    payload = {"width": w, "negation_rank": rank}
    return CommandResult(OK, payload if args.json else f"width {w}\nnegation rank {rank}\n")


def cmd_chase(args) -> CommandResult:
    from .chase import EXHAUSTED, FAILED, chase
    from .constraints import parse_constraints
    inst = _instance(args.instance)
    tgds, keys = parse_constraints(_read(args.constraints), _source(args.constraints))
    state = chase(inst, tgds, keys, max_steps=args.max_steps)
    code = {FAILED: NEGATIVE, EXHAUSTED: BUDGET}.get(state.status, OK)
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            json.dump(state.to_json(), fh, indent=2, sort_keys=True)
    if args.json:
        return CommandResult(code, state.to_json())
    lines = [f"% status {state.status}, {state.steps} steps, {state.rounds} rounds"]
    if state.failure:
        lines.append(f"% failure {state.failure}")
    lines.extend(f"{f}." for f in state.to_json()["facts"])
    return CommandResult(code, "\n".join(lines) + "\n")


def _budget(args):
    from .search import SearchBudget
    return SearchBudget(max_extra_facts=args.budget_facts, max_fresh_values=args.fresh,
                        max_chase_steps=args.max_steps)


def _search_payload(res) -> dict:
    out = {"status": res.status, "explored": res.explored}
    if res.instance is not None:
        out["instance"] = [str(f) for f in res.instance]
    if res.answer is not None:
        out["answer"] = list(res.answer)
    if res.added:
        out["added"] = [str(f) for f in res.added]
    return out


def _search_text(res, found_label: str) -> str:
    if not res.found:
        return f"{res.status} ({res.explored} candidates)\n"
    head = f"% {found_label}"
    if res.answer:
        head += " for (" + ", ".join(res.answer) + ")"
    return head + "\n" + res.instance.to_text()


def cmd_owa(args) -> CommandResult:
    from .search import ENTAILED, NOT_ENTAILED, owa_answer_cq, owa_refute_bounded
    inst = _instance(args.instance)
    if args.mode == "refute":
        q = _formula(args.query)
        res = owa_refute_bounded(inst, q, _budget(args), answer=_answer(args.answer),
                                 workers=args.workers, nulls_as_fresh=args.nulls_as_fresh)
        code = OK if res.found else BUDGET
        return CommandResult(code, _search_payload(res) if args.json else _search_text(res, "countermodel"))
    from .constraints import parse_constraints
    if not args.constraints:
        raise InputError("owa cq needs --constraints FILE")
    tgds, keys = parse_constraints(_read(args.constraints), _source(args.constraints))
    verdict = owa_answer_cq(inst, tgds, keys, _formula(args.query), answer=_answer(args.answer),
                            budget=_budget(args))
    code = {ENTAILED: OK, NOT_ENTAILED: NEGATIVE}.get(verdict.status, BUDGET)
    payload = {"status": verdict.status}
    if verdict.chase is not None:
        payload |= {"chase_status": verdict.chase.status, "chase_steps": verdict.chase.steps}
    return CommandResult(code, payload if args.json else verdict.status + "\n")


def cmd_sat(args) -> CommandResult:
    from .search import sat_bounded
    res = sat_bounded(_formula(args.file), args.max_size, args.budget_facts, args.workers,
                      _positional_schema(args))
    code = OK if res.found else BUDGET
    return CommandResult(code, _search_payload(res) if args.json else _search_text(res, "model"))


def cmd_contain(args) -> CommandResult:
    from .search import containment_counterexample_bounded
    l1 = args.lang1 or _lang_of(args.q1)
    l2 = args.lang2 or _lang_of(args.q2)
    cat = _catalog(args)
    q1, q2 = _load(l1, args.q1, args), _load(l2, args.q2, args)
    if args.guard:
        from .datalog import StratifiedProgram
        from .datalog_translate import guard_datalog_for_containment
        if isinstance(q1, StratifiedProgram):
            q1 = guard_datalog_for_containment(q1)
    res = containment_counterexample_bounded(q1, q2, args.max_size, args.budget_facts,
                                             args.workers, cat)
    code = NEGATIVE if res.found else BUDGET
    return CommandResult(code, _search_payload(res) if args.json else _search_text(res, "counterexample"))


def cmd_analyze(args) -> CommandResult:
    from .workload import WorkloadResult, WorkloadStats, analyze_sql_text, bundled
    cat = _catalog(args)
    if args.corpus:
        sources = [(f"{args.corpus}.sql", bundled(f"{args.corpus}.sql"))]
    else:
        sources = [(_source(p), _read(p)) for p in args.files or ["-"]]
    reports, stats = [], WorkloadStats()
    for name, text in sources:
        res = analyze_sql_text(text, cat, args.workers)
        for r in res.reports:
            r.index += len(reports)
            r.source = name
        reports.extend(res.reports)
        stats = stats + res.stats
    res = WorkloadResult(stats, reports)
    if args.json:
        return CommandResult(OK, res.to_json())
    lines = [f"queries {stats.queries}", f"with negation {stats.withNegation}",
             f"with unguarded negation {stats.withUnguardedNegation}",
             f"with inequalities {stats.withInequalities}",
             f"with unguarded inequalities {stats.withUnguardedInequalities}"]
    for r in reports:
        for o in r.negations + r.inequalities:
            if not o.guarded:
                lines.append(f"{r.source}:{o.pos}: query {r.index}: unguarded {o.kind} over {', '.join(o.free)}")
    return CommandResult(OK, "\n".join(lines) + "\n")


def cmd_gen(args) -> CommandResult:
    from . import reductions as rd
    from .formula_text import format_formula
    kind = args.kind
    if kind == "3col":
        g = rd.parse_graph(_read(args.input))
        parts = {"instance": rd.graph_to_instance(g).to_text(),
                 "query": format_formula(rd.threecol_query()) + "\n"}
    elif kind == "lexsat":
        from .datalog import format_program
        prog, struct = rd.lexsat_program(rd.parse_dimacs(_read(args.input)))
        parts = {"program": format_program(prog), "instance": struct.to_text()}
    elif kind == "tm":
        from .constraints import format_constraints
        m = rd.parse_machine(_read(args.input))
        tgds, key, inst, goal = rd.tm_to_tgds(m, _word(args.word))
        parts = {"constraints": format_constraints(tgds, [key]), "instance": inst.to_text(),
                 "query": format_formula(goal) + "\n"}
    elif kind == "atm":
        from .datalog import format_program
        m = rd.parse_machine(_read(args.input))
        if args.cells is None:
            raise InputError("gen atm needs --cells N")
        prog, struct = rd.atm_to_gndatalog(m, _word(args.word), args.cells)
        parts = {"program": format_program(prog), "instance": struct.to_text()}
    else:
        raise InputError(f"unknown generator {kind}")
    parts = {k: v if v.endswith("\n") or not v else v + "\n" for k, v in parts.items()}
    if args.out:
        import os
        os.makedirs(args.out, exist_ok=True)
        ext = {"instance": "facts", "query": "gnfo", "program": "dl", "constraints": "tgd"}
        written = []
        for name, text in parts.items():
            path = os.path.join(args.out, f"{name}.{ext[name]}")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            written.append(path)
        return CommandResult(OK, {"written": written} if args.json else "".join(p + "\n" for p in written))
    if args.json:
        return CommandResult(OK, parts)
    return CommandResult(OK, "".join(f"%% {name}\n{text}" for name, text in parts.items()))


def _word(text: str | None) -> list:
    if not text:
        return []
    return text.split(",") if "," in text else list(text)


# --- argument parsing ----------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--schema", metavar="CATALOG", help="named schema, one relation per line")
    common.add_argument("--workers", type=int, default=1, help="worker processes for searches")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--budget-facts", type=int, default=None, metavar="N",
                        help="extra facts (owa) or facts per instance (sat, contain)")
    budget.add_argument("--fresh", type=int, default=1, help="fresh values for owa refute")
    budget.add_argument("--max-steps", type=int, default=10_000, help="chase step budget")

    p = argparse.ArgumentParser(prog="gnq", description="Guarded-negation query toolkit.")
    # kept apart from the subcommand flag, whose default would overwrite it
    p.add_argument("--json", dest="json_top", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="guardedness check")
    c.add_argument("kind", choices=["gnfo", "gnfp", "ra", "sql", "datalog"])
    c.add_argument("file")
    c.add_argument("--relaxed", action="store_true", help="datalog: allow same-stratum IDB guards")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("translate", parents=[common], help="translate between formalisms")
    t.add_argument("source", choices=["ra", "sql", "gnfo", "datalog"])
    t.add_argument("target", choices=["ra", "sql", "gnfo", "gnfp", "datalog", "guarded", "tgds"])
    t.add_argument("file")
    t.add_argument("--eliminate-adom", action="store_true", help="sql output without ADOM")
    t.set_defaults(func=cmd_translate)

    e = sub.add_parser("eval", parents=[common], help="closed-world evaluation")
    e.add_argument("kind", choices=["formula", "ra", "sql", "datalog"])
    e.add_argument("query")
    e.add_argument("instance")
    e.add_argument("--mode", choices=["semi-naive", "naive"], default="semi-naive")
    e.set_defaults(func=cmd_eval)

    for name, func in (("dnf", cmd_dnf), ("width", cmd_width)):
        d = sub.add_parser(name, parents=[common], help=f"{name} of a GNFO formula")
        d.add_argument("file")
        d.add_argument("--node-cap", type=int, default=10**6)
        d.set_defaults(func=func)

    ch = sub.add_parser("chase", parents=[common, budget], help="restricted chase")
    ch.add_argument("instance")
    ch.add_argument("constraints")
    ch.add_argument("--trace-out", metavar="FILE", help="write the JSON trace for replay")
    ch.set_defaults(func=cmd_chase)

    o = sub.add_parser("owa", parents=[common, budget], help="open-world answering")
    o.add_argument("mode", choices=["refute", "cq"])
    o.add_argument("instance")
    o.add_argument("query")
    o.add_argument("--constraints", metavar="FILE", help="tgds and keys for owa cq")
    o.add_argument("--answer", metavar="A,B", help="candidate answer tuple")
    o.add_argument("--nulls-as-fresh", action="store_true")
    o.set_defaults(func=cmd_owa)

    s = sub.add_parser("sat", parents=[common, budget], help="bounded model search")
    s.add_argument("file")
    s.add_argument("--max-size", type=int, default=3)
    s.set_defaults(func=cmd_sat)

    k = sub.add_parser("contain", parents=[common, budget], help="bounded containment counterexample")
    k.add_argument("q1")
    k.add_argument("q2")
    k.add_argument("--lang1", choices=["gnfo", "ra", "sql", "datalog"])
    k.add_argument("--lang2", choices=["gnfo", "ra", "sql", "datalog"])
    k.add_argument("--max-size", type=int, default=3)
    k.add_argument("--guard", action="store_true", help="apply the guarding construction to a Datalog q1")
    k.set_defaults(func=cmd_contain)

    a = sub.add_parser("analyze", parents=[common], help="negation census of SQL workloads")
    a.add_argument("files", nargs="*")
    a.add_argument("--corpus", choices=["minicorpus", "fig3"], help="analyze a bundled corpus")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen", parents=[common], help="reduction generators")
    g.add_argument("kind", choices=["3col", "lexsat", "tm", "atm"])
    g.add_argument("input", help="graph, DIMACS file or machine JSON")
    g.add_argument("--word", default="", help="input word, symbols or comma-separated")
    g.add_argument("--cells", type=int, help="tape cells for atm")
    g.add_argument("-o", "--out", metavar="DIR", help="write one file per artifact")
    g.set_defaults(func=cmd_gen)
    return p


def run(argv: list | None = None) -> CommandResult:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CommandResult(OK if exc.code == 0 else INPUT_ERROR, "")
    args.json = args.json or args.json_top
    try:
        return args.func(args)
    except ParseError as exc:
        return _error(args, "parse", str(exc), exc.line, exc.column)
    except BlowUpError as exc:
        return CommandResult(BUDGET, {"error": "budget", "message": str(exc)} if args.json else f"error: {exc}\n")
    except (GnqError, ValueError) as exc:
        return _error(args, type(exc).__name__, str(exc))


def _error(args, kind: str, msg: str, line: int | None = None, col: int | None = None) -> CommandResult:
    if getattr(args, "json", False):
        payload = {"error": kind, "message": msg}
        if line is not None:
            payload |= {"line": line, "column": col}
        return CommandResult(INPUT_ERROR, payload)
    return CommandResult(INPUT_ERROR, f"error: {msg}\n")


def main(argv: list | None = None) -> int:
    res = run(argv)
    text = res.render()
    if text:
        stream = sys.stderr if res.exit_code == INPUT_ERROR and not isinstance(res.payload, dict) else sys.stdout
        stream.write(text if text.endswith("\n") else text + "\n")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
