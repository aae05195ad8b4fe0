"""Static uniqueness checking.

Values of linear kind (references, foreign objects, and pairs containing
either) must be used exactly once on every path.  The checker threads the
set of already-consumed linear bindings through the expression left to
right, which is equivalent to splitting the linear context between
subexpressions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .ffi import Registry, default_registry
from .syntax import (
    BOOL,
    INT,
    UNIT,
    AbstractDecl,
    AbstractT,
    App,
    BoolT,
    Expr,
    Free,
    FnDecl,
    FnT,
    Get,
    If,
    IntT,
    Let,
    Lit,
    New,
    PairE,
    PairT,
    PrimOp,
    Program,
    Put,
    RefT,
    Type,
    UnitT,
    Var,
)


class Kind(enum.Enum):
    UNRESTRICTED = "Unrestricted"
    LINEAR = "Linear"


def kind_of(t: Type) -> Kind:
    if isinstance(t, (UnitT, BoolT, IntT)):
        return Kind.UNRESTRICTED
    if isinstance(t, (RefT, AbstractT)):
        return Kind.LINEAR
    if isinstance(t, PairT):
        if Kind.LINEAR in (kind_of(t.left), kind_of(t.right)):
            return Kind.LINEAR
        return Kind.UNRESTRICTED
    raise ValueError(f"no kind for {t}")


def is_linear(t: Type) -> bool:
    return kind_of(t) is Kind.LINEAR


ERROR_KINDS = (
    "UnusedLinear",
    "ReusedLinear",
    "Mismatch",
    "UnknownName",
    "BranchMismatch",
    # program-level well-formedness
    "DuplicateName",
    "NoMain",
    "Recursion",
)


class TypeCheckError(Exception):
    def __init__(self, kind: str, message: str, pos=None):
        assert kind in ERROR_KINDS, kind
        self.kind = kind
        self.pos = pos
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{kind}: {message}")


@dataclass
class TypedProgram:
    program: Program
    signatures: dict  # decl name -> FnT
    _types: dict = field(default_factory=dict, repr=False)  # id(expr) -> Type

    def type_of(self, e: Expr) -> Type:
        return self._types[id(e)]

    @property
    def main_type(self) -> FnT:
        return self.signatures["main"]


@dataclass(frozen=True)
class _Binding:
    name: str
    type: Type
    uid: int


class _Checker:
    def __init__(self, signatures: dict, types: dict):
        self.signatures = signatures
        self.types = types
        self.uids = 0

    def bind(self, name: str, t: Type) -> _Binding:
        self.uids += 1
        return _Binding(name, t, self.uids)

    def fail(self, kind, msg, e):
        raise TypeCheckError(kind, msg, getattr(e, "pos", None))

    def expect(self, got: Type, want: Type, e: Expr, what: str):
        if got != want:
            self.fail("Mismatch", f"{what}: expected {want}, got {got}", e)

    def ref_of(self, t: Type, e: Expr, what: str) -> Type:
        if not isinstance(t, RefT):
            self.fail("Mismatch", f"{what}: expected a reference, got {t}", e)
        return t.inner

    def release(self, bindings, used: frozenset, e: Expr):
        for b in bindings:
            if is_linear(b.type) and b.uid not in used:
                self.fail("UnusedLinear", f"linear variable {b.name} : {b.type} is never used", e)

    def check(self, e: Expr, env: dict, used: frozenset):
        """Return ``(type, used')``."""
        t, used = self._check(e, env, used)
        self.types[id(e)] = t
        return t, used

    def _check(self, e, env, used):
        if isinstance(e, Lit):
            if e.value is None:
                return UNIT, used
            if isinstance(e.value, bool):
                return BOOL, used
            return INT, used
        if isinstance(e, Var):
            b = env.get(e.name)
            if b is None:
                self.fail("UnknownName", f"unbound variable {e.name}", e)
            if is_linear(b.type):
                if b.uid in used:
                    self.fail("ReusedLinear", f"linear variable {e.name} used twice", e)
                used = used | {b.uid}
            return b.type, used
        if isinstance(e, Let):
            t, used = self.check(e.bound, env, used)
            if isinstance(e.pattern, str):
                new = [self.bind(e.pattern, t)]
            else:
                if not isinstance(t, PairT):
                    self.fail("Mismatch", f"pair pattern bound to {t}", e)
                new = [self.bind(e.pattern[0], t.left), self.bind(e.pattern[1], t.right)]
            inner = dict(env)
            for b in new:
                inner[b.name] = b
            t, used = self.check(e.body, inner, used)
            self.release(new, used, e)
            return t, used
        if isinstance(e, PairE):
            a, used = self.check(e.left, env, used)
            b, used = self.check(e.right, env, used)
            return PairT(a, b), used
        if isinstance(e, New):
            t, used = self.check(e.value, env, used)
            return RefT(t), used
        if isinstance(e, Free):
            t, used = self.check(e.ref, env, used)
            return self.ref_of(t, e, "free"), used
        if isinstance(e, Get):
            t, used = self.check(e.ref, env, used)
            inner = self.ref_of(t, e, "get")
            if is_linear(inner):
                self.fail("Mismatch", f"get of linear contents {inner}", e)
            return PairT(t, inner), used
        if isinstance(e, Put):
            t, used = self.check(e.target, env, used)
            inner = self.ref_of(t, e, "put")
            if is_linear(inner):
                self.fail("Mismatch", f"put into linear contents {inner}", e)
            v, used = self.check(e.value, env, used)
            self.expect(v, inner, e, "put value")
            return t, used
        if isinstance(e, If):
            c, used = self.check(e.cond, env, used)
            self.expect(c, BOOL, e, "if condition")
            t1, used1 = self.check(e.then, env, used)
            t2, used2 = self.check(e.orelse, env, used)
            self.expect(t2, t1, e, "if branches")
            outer = {b.uid for b in env.values()}
            if (used1 & outer) != (used2 & outer):
                diff = sorted(b.name for b in env.values() if b.uid in (used1 ^ used2))
                self.fail("BranchMismatch", f"branches consume different variables: {diff}", e)
            return t1, used1 | used2
        if isinstance(e, App):
            sig = self.signatures.get(e.fn)
            if sig is None:
                self.fail("UnknownName", f"unknown function {e.fn}", e)
            a, used = self.check(e.arg, env, used)
            self.expect(a, sig.arg, e, f"argument of {e.fn}")
            return sig.ret, used
        if isinstance(e, PrimOp):
            a, used = self.check(e.left, env, used)
            b, used = self.check(e.right, env, used)
            if e.op in ("+", "-", "<"):
                self.expect(a, INT, e.left, f"operand of {e.op}")
                self.expect(b, INT, e.right, f"operand of {e.op}")
                return (INT if e.op != "<" else BOOL), used
            if a not in (INT, BOOL):
                self.fail("Mismatch", f"== on {a}", e)
            self.expect(b, a, e.right, "operand of ==")
            return BOOL, used
        raise AssertionError(f"unknown expression {e!r}")


def _calls(e: Expr, out: set) -> set:
    if isinstance(e, App):
        out.add(e.fn)
    for name in getattr(e, "__dataclass_fields__", ()):
        child = getattr(e, name)
        if isinstance(child, Expr):
            _calls(child, out)
    return out


def _check_acyclic(program: Program):
    graph = {d.name: _calls(d.body, set()) for d in program.decls if isinstance(d, FnDecl)}
    state = {}

    def visit(n, path):
        if state.get(n) == "done" or n not in graph:
            return
        if state.get(n) == "active":
            d = program.decl(n)
            raise TypeCheckError("Recursion", f"recursive call cycle {' -> '.join(path + [n])}", d.pos)
        state[n] = "active"
        for m in sorted(graph[n]):
            visit(m, path + [n])
        state[n] = "done"

    for n in graph:
        visit(n, [])


def check_program(program: Program, registry: Optional[Registry] = None) -> TypedProgram:
    """Type-check ``program``; raise ``TypeCheckError`` on the first error.

    Abstract declarations must name a registry entry with the same
    signature.  Recursion (direct or mutual) is rejected.
    """
    registry = registry if registry is not None else default_registry()
    signatures = {}
    for d in program.decls:
        if d.name in signatures:
            raise TypeCheckError("DuplicateName", f"{d.name} declared twice", d.pos)
        if isinstance(d, FnDecl):
            signatures[d.name] = FnT(d.param_type, d.ret_type)
        else:
            if d.builtin not in registry:
                raise TypeCheckError("UnknownName", f"no foreign function {d.builtin}", d.pos)
            f = registry[d.builtin]
            if (f.arg_type, f.ret_type) != (d.arg_type, d.ret_type):
                raise TypeCheckError(
                    "Mismatch",
                    f"{d.builtin} has type {f.arg_type} -> {f.ret_type}, "
                    f"declared {d.arg_type} -> {d.ret_type}",
                    d.pos,
                )
            signatures[d.name] = FnT(d.arg_type, d.ret_type)
    main = program.decl("main")
    if not isinstance(main, FnDecl):
        raise TypeCheckError("NoMain", "program needs exactly one fn main", None)
    for t in signatures.values():
        for part in (t.arg, t.ret):
            kind_of(part)  # rejects nested function types
    _check_acyclic(program)

    types: dict = {}
    checker = _Checker(signatures, types)
    for d in program.decls:
        if not isinstance(d, FnDecl):
            continue
        param = checker.bind(d.param, d.param_type)
        t, used = checker.check(d.body, {d.param: param}, frozenset())
        checker.expect(t, d.ret_type, d.body, f"result of {d.name}")
        checker.release([param], used, d.body)
    return TypedProgram(program, signatures, types)
