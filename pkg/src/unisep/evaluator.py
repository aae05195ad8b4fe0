"""Two interpreters for the same typed program, and the check that they agree.

``eval_value`` treats every data structure as immutable: a reference is a
box, ``put`` builds a new box.  ``eval_update`` threads a store and mutates
it in place.  ``check_refinement`` runs both and compares the results
through ``reify``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .checker import TypedProgram
from .ffi import ModelError, Registry, default_registry, instrument_call
from .heap import EMPTY_LOCS, FootprintError, FrameReport, Store, StoreError, alloc, dealloc, footprint_of
from .syntax import (
    AbstractDecl,
    AbstractT,
    App,
    BoolT,
    Expr,
    Free,
    FnDecl,
    Get,
    If,
    IntT,
    Let,
    Lit,
    New,
    PairE,
    PairT,
    PrimOp,
    Put,
    RefT,
    Type,
    UnitT,
    Var,
)
from .values import (
    AbstractP,
    AbstractV,
    BoolP,
    BoolV,
    BoxP,
    IntP,
    IntV,
    Loc,
    PairP,
    PairV,
    PureValue,
    UnitP,
    UnitV,
    UValue,
    wrap_int,
)
from .verdict import Verdict

FRAME_MODES = ("strict", "audit", "off")


class EvalError(Exception):
    """``kind`` is one of Dangling, DoubleFree, FrameViolation, Footprint, Model."""

    def __init__(self, kind: str, message: str, location=None, report: Optional[FrameReport] = None):
        self.kind = kind
        self.location = location
        self.report = report
        self.reports: list = []  # (function, FrameReport) for calls completed before the error
        super().__init__(f"{kind}: {message}")


class RefinementUnsupported(ValueError):
    pass


def _prim(op: str, a, b):
    if op == "+":
        return wrap_int(a + b)
    if op == "-":
        return wrap_int(a - b)
    if op == "<":
        return a < b
    return a == b


def _bind(pattern, v, env: dict, split) -> dict:
    env = dict(env)
    if isinstance(pattern, str):
        env[pattern] = v
    else:
        env[pattern[0]], env[pattern[1]] = split(v)
    return env


# -- value semantics ------------------------------------------------------------


class _ValueEval:
    def __init__(self, tp: TypedProgram, registry: Registry):
        self.program = tp.program
        self.registry = registry

    def call(self, name: str, arg: PureValue) -> PureValue:
        d = self.program.decl(name)
        if isinstance(d, FnDecl):
            return self.eval(d.body, {d.param: arg})
        f = self.registry[d.builtin]
        if f.pure_model is None:
            raise RefinementUnsupported(f"{d.builtin} has no pure model")
        try:
            return f.pure_model(arg)
        except (ModelError, AttributeError) as e:
            raise EvalError("Model", f"{d.builtin}: {e}") from e

    def eval(self, e: Expr, env: dict) -> PureValue:
        if isinstance(e, Lit):
            if e.value is None:
                return UnitP()
            if isinstance(e.value, bool):
                return BoolP(e.value)
            return IntP(e.value)
        if isinstance(e, Var):
            return env[e.name]
        if isinstance(e, Let):
            v = self.eval(e.bound, env)
            return self.eval(e.body, _bind(e.pattern, v, env, lambda p: (p.left, p.right)))
        if isinstance(e, PairE):
            return PairP(self.eval(e.left, env), self.eval(e.right, env))
        if isinstance(e, New):
            return BoxP(self.eval(e.value, env))
        if isinstance(e, Free):
            return self.eval(e.ref, env).contents
        if isinstance(e, Get):
            box = self.eval(e.ref, env)
            return PairP(box, box.contents)
        if isinstance(e, Put):
            self.eval(e.target, env)
            return BoxP(self.eval(e.value, env))
        if isinstance(e, If):
            c = self.eval(e.cond, env)
            return self.eval(e.then if c.value else e.orelse, env)
        if isinstance(e, App):
            return self.call(e.fn, self.eval(e.arg, env))
        if isinstance(e, PrimOp):
            a = self.eval(e.left, env).value
            b = self.eval(e.right, env).value
            r = _prim(e.op, a, b)
            return BoolP(r) if isinstance(r, bool) else IntP(r)
        raise AssertionError(e)


def eval_value(tp: TypedProgram, arg: PureValue, registry: Optional[Registry] = None) -> PureValue:
    registry = registry if registry is not None else default_registry()
    registry.reset()
    return _ValueEval(tp, registry).call("main", arg)


# -- update semantics -----------------------------------------------------------


@dataclass
class EvalOutcome:
    result: UValue
    store: Store
    frame_reports: list = field(default_factory=list)
    calls: list = field(default_factory=list)  # foreign function name per report

    def failed_reports(self) -> list:
        return [(n, r) for n, r in zip(self.calls, self.frame_reports) if not r.ok]


class _UpdateEval:
    def __init__(self, tp: TypedProgram, registry: Registry, frame_mode: str):
        self.program = tp.program
        self.registry = registry
        self.mode = frame_mode
        self.reports: list = []
        self.calls: list = []

    def call(self, name: str, arg: UValue, s: Store):
        d = self.program.decl(name)
        if isinstance(d, FnDecl):
            return self.eval(d.body, {d.param: arg}, s)
        f = self.registry[d.builtin]
        try:
            if self.mode == "off":
                return f.update_model(arg, s, EMPTY_LOCS)
            result, s_out, report = instrument_call(f, arg, s)
        except FootprintError as e:
            raise EvalError("Footprint", f"call to {d.builtin}: {e}", e.location) from e
        except StoreError as e:
            raise EvalError(e.kind, f"inside {d.builtin}: {e}", e.location) from e
        except ModelError as e:
            raise EvalError("Model", f"{d.builtin}: {e}") from e
        self.reports.append(report)
        self.calls.append(d.builtin)
        if not report.ok and self.mode == "strict":
            cond, witness = next(iter(report.failed().items()))
            raise EvalError(
                "FrameViolation", f"{d.builtin}: {report}", witness, report
            )
        return result, s_out

    def deref(self, v: UValue, s: Store):
        if v.loc not in s:
            raise EvalError("Dangling", f"access to unallocated {v.loc}", v.loc)
        return s[v.loc]

    def eval(self, e: Expr, env: dict, s: Store):
        if isinstance(e, Lit):
            if e.value is None:
                return UnitV(), s
            if isinstance(e.value, bool):
                return BoolV(e.value), s
            return IntV(e.value), s
        if isinstance(e, Var):
            return env[e.name], s
        if isinstance(e, Let):
            v, s = self.eval(e.bound, env, s)
            return self.eval(e.body, _bind(e.pattern, v, env, lambda p: (p.left, p.right)), s)
        if isinstance(e, PairE):
            a, s = self.eval(e.left, env, s)
            b, s = self.eval(e.right, env, s)
            return PairV(a, b), s
        if isinstance(e, New):
            v, s = self.eval(e.value, env, s)
            l, s = alloc(s, v)
            return Loc(l), s
        if isinstance(e, Free):
            r, s = self.eval(e.ref, env, s)
            try:
                s2 = dealloc(s, r.loc)
            except StoreError as err:
                raise EvalError("DoubleFree", str(err), r.loc) from err
            return s[r.loc], s2
        if isinstance(e, Get):
            r, s = self.eval(e.ref, env, s)
            return PairV(r, self.deref(r, s)), s
        if isinstance(e, Put):
            r, s = self.eval(e.target, env, s)
            v, s = self.eval(e.value, env, s)
            self.deref(r, s)
            return r, s.set(r.loc, v)
        if isinstance(e, If):
            c, s = self.eval(e.cond, env, s)
            return self.eval(e.then if c.value else e.orelse, env, s)
        if isinstance(e, App):
            a, s = self.eval(e.arg, env, s)
            return self.call(e.fn, a, s)
        if isinstance(e, PrimOp):
            a, s = self.eval(e.left, env, s)
            b, s = self.eval(e.right, env, s)
            r = _prim(e.op, a.value, b.value)
            return (BoolV(r) if isinstance(r, bool) else IntV(r)), s
        raise AssertionError(e)


def eval_update(
    tp: TypedProgram,
    arg: UValue,
    s0: Store,
    frame_mode: str = "strict",
    registry: Optional[Registry] = None,
) -> EvalOutcome:
    """Store-passing evaluation of ``main``.

    Every foreign call is checked against the frame conditions unless
    ``frame_mode`` is ``off``; ``strict`` aborts on the first violation,
    ``audit`` records it and carries on.
    """
    if frame_mode not in FRAME_MODES:
        raise ValueError(f"frame mode must be one of {FRAME_MODES}")
    registry = registry if registry is not None else default_registry()
    registry.reset()
    try:
        footprint_of(arg, tp.main_type.arg, s0)
    except FootprintError as e:
        raise EvalError("Footprint", f"bad argument: {e}", e.location) from e
    ev = _UpdateEval(tp, registry, frame_mode)
    try:
        result, s = ev.call("main", arg, s0)
    except EvalError as e:
        e.reports = list(zip(ev.calls, ev.reports))
        raise
    return EvalOutcome(result, s, ev.reports, ev.calls)


# -- coupling the two ---------------------------------------------------------------


def reify(v: UValue, t: Type, s: Store, registry: Optional[Registry] = None) -> PureValue:
    """Read the tree-shaped value denoted by ``v`` in store ``s``."""
    if isinstance(t, UnitT):
        return UnitP()
    if isinstance(t, BoolT):
        return BoolP(v.value)
    if isinstance(t, IntT):
        return IntP(v.value)
    if isinstance(t, RefT):
        return BoxP(reify(s[v.loc], t.inner, s, registry))
    if isinstance(t, PairT):
        return PairP(reify(v.left, t.left, s, registry), reify(v.right, t.right, s, registry))
    if isinstance(t, AbstractT):
        registry = registry if registry is not None else default_registry()
        return registry.abstract_types[t.name].project(v, s)
    raise ValueError(f"cannot reify at type {t}")


def box_argument(pv: PureValue, t: Type, s: Store, registry: Optional[Registry] = None):
    """Lay ``pv`` out in ``s``, allocating depth-first and left to right.

    Returns ``(value, store)``.
    """
    registry = registry if registry is not None else default_registry()
    if isinstance(t, UnitT) and isinstance(pv, UnitP):
        return UnitV(), s
    if isinstance(t, BoolT) and isinstance(pv, BoolP):
        return BoolV(pv.value), s
    if isinstance(t, IntT) and isinstance(pv, IntP):
        return IntV(pv.value), s
    if isinstance(t, RefT) and isinstance(pv, BoxP):
        inner, s = box_argument(pv.contents, t.inner, s, registry)
        l, s = alloc(s, inner)
        return Loc(l), s
    if isinstance(t, PairT) and isinstance(pv, PairP):
        a, s = box_argument(pv.left, t.left, s, registry)
        b, s = box_argument(pv.right, t.right, s, registry)
        return PairV(a, b), s
    if isinstance(t, AbstractT) and isinstance(pv, AbstractP) and pv.tag == t.name:
        return registry.abstract_types[t.name].embed(pv, s, EMPTY_LOCS)
    raise ValueError(f"{pv} is not a value of type {t}")


def check_refinement(
    tp: TypedProgram,
    arg: PureValue,
    registry: Optional[Registry] = None,
    frame_mode: str = "audit",
) -> Verdict:
    """Run both semantics on ``arg`` and compare.

    Passes iff the reified update result equals the value result, the final
    store holds exactly the result's footprint, and no foreign call broke a
    frame condition.
    """
    registry = registry if registry is not None else default_registry()
    for d in tp.program.decls:
        if isinstance(d, AbstractDecl) and registry[d.builtin].pure_model is None:
            raise RefinementUnsupported(f"{d.builtin} has no pure model")
    ret = tp.main_type.ret

    v0, s0 = box_argument(arg, tp.main_type.arg, Store(), registry)
    try:
        out = eval_update(tp, v0, s0, frame_mode, registry)
    except EvalError as e:
        for name, report in e.reports:
            if not report.ok:
                cond, witness = next(iter(report.failed().items()))
                return Verdict.fail(None, "frame", f"{name}: {cond} violated (then {e})", witness)
        step = "frame" if e.kind == "FrameViolation" else "update-eval"
        return Verdict.fail(None, step, str(e), e.location)

    for name, report in out.failed_reports():
        cond, witness = next(iter(report.failed().items()))
        return Verdict.fail(out.store, "frame", f"{name}: {cond} violated", witness)

    try:
        expected = eval_value(tp, arg, registry)
    except EvalError as e:
        return Verdict.fail(None, "value-eval", str(e))

    try:
        p_out = footprint_of(out.result, ret, out.store)
    except FootprintError as e:
        return Verdict.fail(out.store, "footprint", f"result footprint: {e}", e.location)
    got = reify(out.result, ret, out.store, registry)
    if got != expected:
        return Verdict.fail(out.store, "result", f"update gives {got}, value gives {expected}")
    if out.store.dom() != p_out:
        stray = min(out.store.dom() ^ p_out)
        return Verdict.fail(out.store, "conservation", f"final store is not the result footprint", stray)
    return Verdict(True, checked=1)
