"""Type-directed generation of random well-typed programs.

Generation threads the set of linear variables that the expression being
built still has to consume.  Any leftover linear variable can always be
disposed of by a chain of ``let``s that frees references, splits pairs and
hands foreign objects back to their destructor, so every production can
accept any partition of the linear context and generation never gets
stuck.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .checker import TypeCheckError, check_program, is_linear
from .ffi import POOL_T, REF_INT, REF_PAIR, Registry, default_registry
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
from .values import INT_MAX, INT_MIN, AbstractP, BoolP, BoxP, IntP, PairP, PureValue, UnitP

MAX_DEPTH = 8

# production weights: introduction forms, let, store operations, control
DEFAULT_WEIGHTS = {"intro": 40, "let": 30, "store": 15, "control": 15}

TYPE_POOL = (
    INT,
    BOOL,
    UNIT,
    REF_INT,
    RefT(BOOL),
    RefT(REF_INT),
    PairT(INT, BOOL),
    PairT(INT, REF_INT),
    REF_PAIR,
    POOL_T,
)

# catalog entries the generator may call; misbehaving ones never appear
SAFE_BUILTINS = ("box_incr", "swap", "alloc_one", "free_box", "mk_abs", "use_abs", "pool_bump")


class GenerationFailure(Exception):
    pass


@dataclass
class GenConfig:
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    max_helpers: int = 2
    types: tuple = TYPE_POOL


class _Gen:
    def __init__(self, rng: random.Random, config: GenConfig, registry: Registry):
        self.rng = rng
        self.config = config
        self.registry = registry
        self.n = 0
        self.builtins_used: set = set()
        self.helpers: list = []  # (name, arg type, ret type)

    def fresh(self, prefix="v") -> str:
        self.n += 1
        return f"{prefix}{self.n}"

    def split(self, lin: list, parts: int) -> list:
        out = [[] for _ in range(parts)]
        for b in lin:
            out[self.rng.randrange(parts)].append(b)
        return out

    def builtin(self, name: str) -> str:
        self.builtins_used.add(name)
        return name

    def callables(self, goal: Type) -> list:
        out = []
        for name in SAFE_BUILTINS:
            f = self.registry[name]
            if f.ret_type == goal:
                out.append((name, f.arg_type, True))
        for name, arg, ret in self.helpers:
            if ret == goal:
                out.append((name, arg, False))
        return out

    # -- disposal of unused linear variables --------------------------------

    def dispose(self, lin: list, unr: list) -> tuple:
        """Return ``(wrap, unr')``: ``wrap(body)`` consumes every var in ``lin``."""
        lets = []
        unr = list(unr)
        todo = list(lin)
        while todo:
            name, t = todo.pop(0)
            if isinstance(t, RefT):
                d = self.fresh("d")
                lets.append((d, Free(Var(name))))
                (todo if is_linear(t.inner) else unr).append((d, t.inner))
            elif isinstance(t, PairT):
                a, b = self.fresh("d"), self.fresh("d")
                lets.append(((a, b), Var(name)))
                for n, tt in ((a, t.left), (b, t.right)):
                    (todo if is_linear(tt) else unr).append((n, tt))
            elif isinstance(t, AbstractT):
                d = self.fresh("d")
                lets.append((d, App(self.builtin("use_abs"), Var(name))))
                unr.append((d, INT))
            else:
                raise AssertionError(f"cannot dispose of {t}")

        def wrap(body: Expr) -> Expr:
            for pat, bound in reversed(lets):
                body = Let(pat, bound, body)
            return body

        return wrap, unr

    # -- leaves ---------------------------------------------------------------

    def literal_int(self) -> int:
        r = self.rng.random()
        if r < 0.03:
            return self.rng.choice((INT_MAX, INT_MIN, INT_MAX - 1))
        return self.rng.randint(-3, 12)

    def leaf(self, goal: Type, unr: list) -> Expr:
        matching = [n for n, t in unr if t == goal]
        if matching and self.rng.random() < 0.5:
            return Var(self.rng.choice(matching))
        if isinstance(goal, IntT):
            return Lit(self.literal_int())
        if isinstance(goal, BoolT):
            return Lit(self.rng.random() < 0.5)
        if isinstance(goal, UnitT):
            return Lit(None)
        if isinstance(goal, RefT):
            if goal == REF_INT and self.rng.random() < 0.2:
                return App(self.builtin("alloc_one"), Lit(None))
            return New(self.leaf(goal.inner, unr))
        if isinstance(goal, PairT):
            return PairE(self.leaf(goal.left, unr), self.leaf(goal.right, unr))
        if isinstance(goal, AbstractT):
            return App(self.builtin("mk_abs"), self.leaf(INT, unr))
        raise AssertionError(goal)

    def terminal(self, goal: Type, lin: list, unr: list) -> Expr:
        same = [b for b in lin if b[1] == goal]
        if same:
            keep = self.rng.choice(same)
            rest = [b for b in lin if b is not keep]
            wrap, _ = self.dispose(rest, unr)
            return wrap(Var(keep[0]))
        wrap, unr = self.dispose(lin, unr)
        return wrap(self.leaf(goal, unr))

    # -- productions ----------------------------------------------------------

    def expr(self, goal: Type, lin: list, unr: list, depth: int) -> Expr:
        if depth <= 0:
            return self.terminal(goal, lin, unr)
        w = self.config.weights
        kinds = list(w)
        kind = self.rng.choices(kinds, weights=[w[k] for k in kinds])[0]
        e = getattr(self, "gen_" + kind)(goal, lin, unr, depth - 1)
        return e if e is not None else self.terminal(goal, lin, unr)

    def gen_intro(self, goal, lin, unr, depth):
        if isinstance(goal, IntT):
            a, b = self.split(lin, 2)
            op = self.rng.choice(("+", "-"))
            return PrimOp(op, self.expr(INT, a, unr, depth), self.expr(INT, b, unr, depth))
        if isinstance(goal, BoolT):
            a, b = self.split(lin, 2)
            op, t = self.rng.choice((("<", INT), ("==", INT), ("==", BOOL)))
            return PrimOp(op, self.expr(t, a, unr, depth), self.expr(t, b, unr, depth))
        if isinstance(goal, RefT):
            return New(self.expr(goal.inner, lin, unr, depth))
        if isinstance(goal, PairT):
            a, b = self.split(lin, 2)
            return PairE(self.expr(goal.left, a, unr, depth), self.expr(goal.right, b, unr, depth))
        if isinstance(goal, AbstractT):
            if self.rng.random() < 0.5:
                return App(self.builtin("mk_abs"), self.expr(INT, lin, unr, depth))
            return App(self.builtin("pool_bump"), self.expr(goal, lin, unr, depth))
        return None

    def bind(self, pattern, t: Type, lin: list, unr: list) -> tuple:
        lin, unr = list(lin), list(unr)
        if isinstance(pattern, str):
            (lin if is_linear(t) else unr).append((pattern, t))
        else:
            for n, tt in zip(pattern, (t.left, t.right)):
                (lin if is_linear(tt) else unr).append((n, tt))
        return lin, unr

    def gen_let(self, goal, lin, unr, depth):
        t = self.rng.choice(self.config.types)
        a, b = self.split(lin, 2)
        bound = self.expr(t, a, unr, depth)
        if isinstance(t, PairT) and self.rng.random() < 0.6:
            pattern = (self.fresh(), self.fresh())
        else:
            pattern = self.fresh()
        lin2, unr2 = self.bind(pattern, t, b, unr)
        return Let(pattern, bound, self.expr(goal, lin2, unr2, depth))

    def gen_store(self, goal, lin, unr, depth):
        options = ["free", "get-let", "put-let"]
        if isinstance(goal, RefT) and not is_linear(goal.inner):
            options.append("put")
        if isinstance(goal, PairT) and isinstance(goal.left, RefT) and goal.left.inner == goal.right \
                and not is_linear(goal.right):
            options.append("get")
        choice = self.rng.choice(options)
        if choice == "free":
            return Free(self.expr(RefT(goal), lin, unr, depth))
        if choice == "put":
            a, b = self.split(lin, 2)
            return Put(self.expr(goal, a, unr, depth), self.expr(goal.inner, b, unr, depth))
        if choice == "get":
            return Get(self.expr(goal.left, lin, unr, depth))
        inner = self.rng.choice((INT, BOOL))
        if choice == "put-let":
            a, b, c = self.split(lin, 3)
            bound = Put(self.expr(RefT(inner), a, unr, depth), self.expr(inner, b, unr, depth))
            pattern = self.fresh("r")
            lin2, unr2 = self.bind(pattern, RefT(inner), c, unr)
            return Let(pattern, bound, self.expr(goal, lin2, unr2, depth))
        a, b = self.split(lin, 2)
        bound = Get(self.expr(RefT(inner), a, unr, depth))
        pattern = (self.fresh("r"), self.fresh())
        lin2, unr2 = self.bind(pattern, PairT(RefT(inner), inner), b, unr)
        return Let(pattern, bound, self.expr(goal, lin2, unr2, depth))

    def gen_control(self, goal, lin, unr, depth):
        calls = self.callables(goal)
        if calls and self.rng.random() < 0.5:
            name, arg, is_builtin = self.rng.choice(calls)
            if is_builtin:
                self.builtin(name)
            return App(name, self.expr(arg, lin, unr, depth))
        c, rest = self.split(lin, 2)
        return If(
            self.expr(BOOL, c, unr, depth),
            self.expr(goal, rest, unr, depth),
            self.expr(goal, rest, unr, depth),
        )

    def fn(self, name: str, param: str, pt: Type, rt: Type, depth: int) -> FnDecl:
        lin, unr = self.bind(param, pt, [], [])
        return FnDecl(name, param, pt, rt, self.expr(rt, lin, unr, depth))


def generate_program(
    seed: int,
    depth: int,
    goal: Type,
    param: Type = UNIT,
    config: Optional[GenConfig] = None,
    registry: Optional[Registry] = None,
) -> Program:
    """A random program whose ``main : param -> goal`` passes the checker.

    Deterministic in ``seed``.  Raises ``GenerationFailure`` if the result
    does not type-check, which would indicate a generator bug.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must be in 0..{MAX_DEPTH}")
    config = config or GenConfig()
    registry = registry if registry is not None else default_registry()
    rng = random.Random(seed)
    g = _Gen(rng, config, registry)

    decls = []
    for i in range(rng.randint(0, config.max_helpers)):
        pt, rt = rng.choice(config.types), rng.choice(config.types)
        name = f"h{i}"
        decls.append(g.fn(name, "x", pt, rt, max(depth - 1, 0)))
        g.helpers.append((name, pt, rt))
    decls.append(g.fn("main", "arg", param, goal, depth))

    abstracts = [
        AbstractDecl(n, registry[n].arg_type, registry[n].ret_type, n)
        for n in SAFE_BUILTINS
        if n in g.builtins_used
    ]
    program = Program(tuple(abstracts + decls))
    try:
        check_program(program, registry)
    except TypeCheckError as e:
        raise GenerationFailure(f"seed {seed}: {e}") from e
    return program


def random_value(rng: random.Random, t: Type) -> PureValue:
    """A random pure value of type ``t`` (for ``main`` arguments)."""
    if isinstance(t, UnitT):
        return UnitP()
    if isinstance(t, BoolT):
        return BoolP(rng.random() < 0.5)
    if isinstance(t, IntT):
        return IntP(rng.randint(-5, 20))
    if isinstance(t, RefT):
        return BoxP(random_value(rng, t.inner))
    if isinstance(t, PairT):
        return PairP(random_value(rng, t.left), random_value(rng, t.right))
    if isinstance(t, AbstractT):
        return AbstractP(t.name, IntP(rng.randint(-5, 20)))
    raise ValueError(t)


def random_case(seed: int, depth: int = 5, config: Optional[GenConfig] = None):
    """``(program, argument)`` for one differential-testing case.

    The goal and parameter types are drawn from the seed; a third of the
    cases take ``Unit`` so they can also be run from the command line.
    """
    rng = random.Random(f"case-{seed}")
    types = (config or GenConfig()).types
    goal = rng.choice(types)
    param = UNIT if rng.random() < 1 / 3 else rng.choice(types)
    program = generate_program(seed, depth, goal, param, config)
    return program, random_value(rng, param)
