"""Command-line driver.

Exit status: 0 success or holds, 1 semantic failure (type error,
violation, failing verdict), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .checker import TypeCheckError, check_program
from .evaluator import FRAME_MODES, EvalError, check_refinement, eval_update, eval_value, reify
from .ffi import default_input_locs, default_registry, nominal_footprints, sweep
from .generator import random_case
from .heap import FootprintError, Store
from .seplogic import (
    MAX_LOCATIONS,
    MAX_VALUES,
    AssertionSyntaxError,
    PreViolation,
    Universe,
    check_triple,
    footprint_triple,
    parse_triple,
    triple_implies_frames,
)
from .syntax import ParseError, UnitT, parse_program, print_program
from .values import Location, UnitP, UnitV, render_locset
from .verdict import Verdict

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Out:
    """Collects text lines or JSON records."""

    def __init__(self, fmt: str):
        self.json = fmt == "json"

    def line(self, text: str = ""):
        if not self.json:
            print(text)

    def record(self, **fields):
        if self.json:
            print(json.dumps(fields, ensure_ascii=False, default=str))


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


# -- argument helpers -----------------------------------------------------------


def _loc_list(text: Optional[str]) -> Optional[list]:
    """``"l1,l2"`` (or ``"1,2"``) -> locations; None when the flag was absent."""
    if text is None:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        digits = part[1:] if part[:1] in ("l", "ℓ") else part
        if not digits.isdigit() or int(digits) < 1:
            raise UsageError(f"bad location {part!r}")
        out.append(Location(int(digits)))
    return out


def _universe(args) -> Universe:
    try:
        vals = [int(v) for v in args.vals.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--vals expects integers, got {args.vals!r}")
    if not 1 <= args.locs <= MAX_LOCATIONS:
        raise UsageError(f"--locs must be between 1 and {MAX_LOCATIONS}")
    if not 1 <= len(vals) <= MAX_VALUES:
        raise UsageError(f"--vals must list between 1 and {MAX_VALUES} values")
    return Universe.make(args.locs, vals)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}")


def _load(path: str):
    """Parse and check; parse errors are usage errors, type errors are not."""
    try:
        program = parse_program(_read(path))
    except ParseError as e:
        raise UsageError(f"{path}:{e}")
    return program, check_program(program)


def _diag(path: str, e: TypeCheckError) -> str:
    line, col = e.pos if e.pos else (0, 0)
    msg = str(e).split(": ", 2)[-1] if e.pos else str(e).split(": ", 1)[-1]
    return f"{path}:{line}:{col}: {e.kind}: {msg}"


def _verdict_record(out: _Out, command: str, name: str, v: Verdict, **extra):
    cx = v.counterexample
    out.record(
        command=command,
        name=name,
        verdict="holds" if v.holds else "fails",
        checked=v.checked,
        witness=None if cx is None or cx.witness is None else str(cx.witness),
        store=None if cx is None or cx.store is None else str(cx.store),
        step=None if cx is None else cx.step,
        explanation=None if cx is None else cx.explanation,
        **extra,
    )


# -- commands -------------------------------------------------------------------


def cmd_typecheck(args, out: _Out) -> int:
    try:
        _load(args.path)
    except TypeCheckError as e:
        out.line(_diag(args.path, e))
        out.record(command="typecheck", path=args.path, verdict="rejected", kind=e.kind,
                   position=list(e.pos) if e.pos else None, message=str(e))
        return FAIL
    out.line(f"{args.path}: ok")
    out.record(command="typecheck", path=args.path, verdict="accepted")
    return OK


def cmd_run(args, out: _Out) -> int:
    try:
        _, tp = _load(args.path)
    except TypeCheckError as e:
        out.line(_diag(args.path, e))
        out.record(command="run", path=args.path, verdict="rejected", kind=e.kind, message=str(e))
        return FAIL
    if not isinstance(tp.main_type.arg, UnitT):
        raise UsageError(f"run needs main to take Unit, not {tp.main_type.arg}")
    if args.semantics == "value":
        try:
            v = eval_value(tp, UnitP())
        except EvalError as e:
            out.line(f"error: {e}")
            out.record(command="run", path=args.path, semantics="value", verdict="error",
                       kind=e.kind, message=str(e))
            return FAIL
        out.line(str(v))
        out.record(command="run", path=args.path, semantics="value", verdict="ok", result=str(v))
        return OK

    registry = default_registry()
    try:
        outcome = eval_update(tp, UnitV(), Store(), args.frame_mode, registry)
    except EvalError as e:
        witness = None if e.location is None else str(e.location)
        out.line(f"error: {e}")
        if witness is not None:
            out.line(f"witness: {witness}")
        out.record(command="run", path=args.path, semantics="update", frame_mode=args.frame_mode,
                   verdict="error", kind=e.kind, witness=witness, message=str(e))
        return FAIL
    result = reify(outcome.result, tp.main_type.ret, outcome.store, registry)
    failed = outcome.failed_reports()
    out.line(str(result))
    out.line(str(outcome.store))
    for name, report in failed:
        for cond, witness in report.failed().items():
            out.line(f"frame violation in {name}: {cond}, witness {witness}")
    out.record(
        command="run", path=args.path, semantics="update", frame_mode=args.frame_mode,
        verdict="violation" if failed else "ok", result=str(result), store=str(outcome.store),
        violations=[
            {"function": name, "condition": cond, "witness": str(w)}
            for name, report in failed
            for cond, w in report.failed().items()
        ],
    )
    return FAIL if failed else OK


def _ul_files(paths) -> list:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.rglob("*.ul")))
        elif p.is_file():
            files.append(p)
        else:
            raise UsageError(f"no such file or directory: {p}")
    return files


def cmd_check_refinement(args, out: _Out) -> int:
    cases = []  # (label, program or None, verdict)
    if args.random is not None:
        seed, count, depth = args.random
        if count < 0 or depth < 1:
            raise UsageError("--random expects SEED COUNT DEPTH with COUNT >= 0, DEPTH >= 1")
        for i in range(seed, seed + count):
            program, arg = random_case(i, depth)
            tp = check_program(program)
            cases.append((f"seed {i}", program, check_refinement(tp, arg)))
    if not args.paths and args.random is None:
        raise UsageError("give paths or --random SEED COUNT DEPTH")
    for f in _ul_files(args.paths):
        try:
            program, tp = _load(str(f))
        except TypeCheckError as e:
            cases.append((str(f), None, Verdict.fail(None, "typecheck", _diag(str(f), e))))
            continue
        if not isinstance(tp.main_type.arg, UnitT):
            raise UsageError(f"{f}: main must take Unit")
        cases.append((str(f), program, check_refinement(tp, UnitP())))

    passed = sum(1 for *_, v in cases if v.holds)
    for label, _, v in cases:
        _verdict_record(out, "check-refinement", label, v)
    out.line(f"{passed}/{len(cases)} pass")
    first = next(((label, prog, v) for label, prog, v in cases if not v.holds), None)
    if first is not None:
        label, program, v = first
        out.line(f"first failure: {label}: {v}")
        if program is not None:
            out.line(print_program(program))
        return FAIL
    return OK


def _transformer(args, registry):
    """Resolve NAME/--pre/--post/--triple into (name, fn, arg, p, p_out, triple)."""
    triple = None
    name = args.name
    if getattr(args, "triple", None):
        try:
            name, triple = parse_triple(args.triple)
        except AssertionSyntaxError as e:
            raise UsageError(str(e))
        if args.name and args.name != name:
            raise UsageError(f"name {args.name} does not match the triple's {name}")
    if not name:
        raise UsageError("give a catalog name")
    if name not in registry:
        raise UsageError(f"{name} is not in the catalog")
    f = registry[name]
    pre = _loc_list(args.pre)
    locs = pre if pre is not None else default_input_locs(f, registry)
    try:
        arg, p, p_nominal = nominal_footprints(f, locs, registry)
    except ValueError as e:
        raise UsageError(f"--pre does not fit {f.arg_type}: {e}")
    except FootprintError as e:
        raise UsageError(f"{name} cannot run on its canonical argument: {e}")
    post = _loc_list(args.post)
    p_out = frozenset(post) if post is not None else p_nominal
    if triple is None:
        triple = footprint_triple(p, p_out)
    return name, f, arg, p, p_out, triple


def cmd_check_triple(args, out: _Out) -> int:
    u = _universe(args)
    registry = default_registry()
    name, f, arg, p, p_out, triple = _transformer(args, registry)
    v = check_triple(f.transformer(arg), triple, u)
    out.line(triple.render(name))
    out.line(f"{name}: {v}")
    _verdict_record(out, "check-triple", name, v, triple=triple.render(name))
    return OK if v.holds else FAIL


def cmd_check_frames(args, out: _Out) -> int:
    u = _universe(args)
    registry = default_registry()
    if args.name not in registry:
        raise UsageError(f"{args.name} is not in the catalog")
    f = registry[args.name]
    ints = sorted({v.value for v in u.values if hasattr(v, "value") and isinstance(v.value, int)} | {0, 1})
    res = sweep(f, list(u.stores()), ints, registry)
    if res.clean:
        out.line(f"{f.name}: no violations ({res.calls} calls over {res.sessions} sessions)")
        out.record(command="check-frames", name=f.name, verdict="holds", calls=res.calls,
                   sessions=res.sessions, violations=[])
        return OK
    violations = []
    for cond in sorted(res.conditions()):
        fl = res.first(cond)
        out.line(f"{f.name}: {cond} violation, witness {fl.witness}, store {fl.store}, "
                 f"argument {fl.arg}, call {fl.call}")
        violations.append({"condition": cond, "witness": str(fl.witness), "store": str(fl.store),
                           "argument": str(fl.arg), "call": fl.call,
                           "count": sum(1 for x in res.flags if x.condition == cond)})
    out.record(command="check-frames", name=f.name, verdict="fails", calls=res.calls,
               sessions=res.sessions, violations=violations)
    return FAIL


def cmd_prove_frames(args, out: _Out) -> int:
    u = _universe(args)
    registry = default_registry()
    name, f, arg, p, p_out, _ = _transformer(args, registry)
    try:
        v = triple_implies_frames(f.transformer(arg), p, p_out, u)
    except PreViolation as e:
        out.line(f"{name}: footprint triple fails, nothing to prove: {e.verdict}")
        _verdict_record(out, "prove-frames", name, e.verdict, premise="fails")
        return FAIL
    label = f"p = {render_locset(p)}, p' = {render_locset(p_out)}"
    if v.holds:
        out.line(f"{name}: holds ({label}; {v.checked} stores checked)")
        cases = ", ".join(f"{k} {n}" for k, n in v.stats.items() if k != "stores")
        out.line(f"  cases: {cases}")
    else:
        out.line(f"{name}: {v}")
    _verdict_record(out, "prove-frames", name, v, premise="holds", cases=v.stats)
    return OK if v.holds else FAIL


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unisep", description=__doc__.splitlines()[0])
    ap.add_argument("--format", choices=("text", "json"), default="text",
                    help="json prints one record per check")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("typecheck", help="check a .ul file")
    p.add_argument("path")
    p.set_defaults(func=cmd_typecheck)

    p = sub.add_parser("run", help="evaluate main applied to unit")
    p.add_argument("path")
    p.add_argument("--semantics", choices=("value", "update"), default="update")
    p.add_argument("--frame-mode", choices=FRAME_MODES, default="strict")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-refinement", help="compare value and update semantics")
    p.add_argument("paths", nargs="*", help=".ul files or directories")
    p.add_argument("--random", nargs=3, type=int, metavar=("SEED", "COUNT", "DEPTH"))
    p.set_defaults(func=cmd_check_refinement)

    def bounds(p):
        p.add_argument("--locs", type=int, default=4, help="universe locations (default 4)")
        p.add_argument("--vals", default="0,1", help="universe values (default 0,1)")

    def footprints(p):
        p.add_argument("--pre", help="input footprint, e.g. l1,l2 (default: canonical)")
        p.add_argument("--post", nargs="?", const="",
                       help="output footprint; bare --post means empty (default: observed)")

    p = sub.add_parser("check-triple", help="bounded check of a footprint triple")
    p.add_argument("name", nargs="?")
    footprints(p)
    p.add_argument("--triple", help="explicit triple, e.g. '{l1 |-> _} free_box {emp}'")
    bounds(p)
    p.set_defaults(func=cmd_check_triple)

    p = sub.add_parser("check-frames", help="sweep a catalog entry for frame violations")
    p.add_argument("name")
    bounds(p)
    p.set_defaults(func=cmd_check_frames)

    p = sub.add_parser("prove-frames", help="replay the triple-implies-frames argument")
    p.add_argument("name")
    footprints(p)
    bounds(p)
    p.set_defaults(func=cmd_prove_frames)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    out = _Out(args.format)
    try:
        return args.func(args, out)
    except UsageError as e:
        _err(str(e))
        out.record(command=args.command, verdict="error", message=str(e))
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
