"""Surface syntax of the core language: types, AST, parser and printer.

Concrete grammar::

    program  := decl+
    decl     := "fn" ID "(" ID ":" type ")" "->" type "{" expr "}"
              | "abstract" ID ":" type "->" type "=" ID
    type     := "Unit" | "Bool" | "Int" | "Ref" type
              | "(" type "," type ")" | "Abs" ID
    expr     := "let" pat "=" expr "in" expr
              | "if" expr "then" expr "else" expr
              | cmp
    cmp      := sum [("==" | "<") sum]
    sum      := app {("+" | "-") app}
    app      := "new" app | "free" app | "get" app | "put" atom atom
              | ID atom | atom
    atom     := INT | "-" INT | "true" | "false" | "unit" | ID
              | "(" expr ")" | "(" expr "," expr ")"
    pat      := ID | "(" ID "," ID ")"

``--`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .values import INT_MAX, INT_MIN

# -- types --------------------------------------------------------------------


@dataclass(frozen=True)
class UnitT:
    def __str__(self) -> str:
        return "Unit"


@dataclass(frozen=True)
class BoolT:
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class IntT:
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class RefT:
    inner: "Type"

    def __str__(self) -> str:
        return f"Ref {self.inner}"


@dataclass(frozen=True)
class PairT:
    left: "Type"
    right: "Type"

    def __str__(self) -> str:
        return f"({self.left}, {self.right})"


@dataclass(frozen=True)
class AbstractT:
    name: str

    def __str__(self) -> str:
        return f"Abs {self.name}"


@dataclass(frozen=True)
class FnT:
    arg: "Type"
    ret: "Type"

    def __str__(self) -> str:
        return f"{self.arg} -> {self.ret}"


Type = Union[UnitT, BoolT, IntT, RefT, PairT, AbstractT, FnT]

UNIT, BOOL, INT = UnitT(), BoolT(), IntT()

# -- expressions --------------------------------------------------------------

Pos = Optional[tuple]  # (line, column), 1-based


@dataclass(frozen=True)
class Expr:
    pos: Pos = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True, eq=False)
class Lit(Expr):
    value: Union[int, bool, None]  # None is the unit literal

    # bool is an int subclass; keep Lit(True) != Lit(1)
    def __eq__(self, other):
        if not isinstance(other, Lit):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Let(Expr):
    pattern: Union[str, tuple]  # a name, or a pair of distinct names
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class PairE(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class New(Expr):
    value: Expr


@dataclass(frozen=True)
class Free(Expr):
    ref: Expr


@dataclass(frozen=True)
class Get(Expr):
    ref: Expr


@dataclass(frozen=True)
class Put(Expr):
    target: Expr
    value: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class App(Expr):
    fn: str
    arg: Expr


PRIM_OPS = ("+", "-", "==", "<")


@dataclass(frozen=True)
class PrimOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class FnDecl:
    name: str
    param: str
    param_type: Type
    ret_type: Type
    body: Expr
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AbstractDecl:
    name: str
    arg_type: Type
    ret_type: Type
    builtin: str
    pos: Pos = field(default=None, compare=False, repr=False)


Decl = Union[FnDecl, AbstractDecl]


@dataclass(frozen=True)
class Program:
    decls: tuple

    def decl(self, name: str) -> Optional[Decl]:
        for d in self.decls:
            if d.name == name:
                return d
        return None

    @property
    def main(self) -> FnDecl:
        d = self.decl("main")
        if not isinstance(d, FnDecl):
            raise LookupError("program has no fn main")
        return d


# -- lexer --------------------------------------------------------------------

KEYWORDS = frozenset(
    "fn abstract let in if then else new free get put true false unit "
    "Unit Bool Int Ref Abs".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|==|[(){}:,=+\-<])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, expected, found: str):
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        self.found = found
        exp = ", ".join(sorted(self.expected))
        super().__init__(f"{line}:{col}: expected one of {{{exp}}}, found {found!r}")


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "id", "kw", "sym", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(line, i - line_start + 1, {"token"}, text[i])
        kind = m.lastgroup
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "id", word, line, col))
        elif kind in ("int", "sym"):
            tokens.append(Token(kind, m.group(), line, col))
        i = m.end()
    tokens.append(Token("eof", "<eof>", line, i - line_start + 1))
    return tokens


# -- parser -------------------------------------------------------------------

_ATOM_START_KW = {"true", "false", "unit"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.text == text

    def fail(self, *expected):
        t = self.tok
        raise ParseError(t.line, t.col, expected, t.text)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(text)
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "id":
            self.fail("identifier")
        self.i += 1
        return t.text

    def program(self) -> Program:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.decl())
        if not decls:
            self.fail("fn", "abstract")
        return Program(tuple(decls))

    def decl(self) -> Decl:
        t = self.tok
        pos = (t.line, t.col)
        if self.at("fn"):
            self.i += 1
            name = self.ident()
            self.expect("(")
            param = self.ident()
            self.expect(":")
            pty = self.type()
            self.expect(")")
            self.expect("->")
            rty = self.type()
            self.expect("{")
            body = self.expr()
            self.expect("}")
            return FnDecl(name, param, pty, rty, body, pos=pos)
        if self.at("abstract"):
            self.i += 1
            name = self.ident()
            self.expect(":")
            aty = self.type()
            self.expect("->")
            rty = self.type()
            self.expect("=")
            return AbstractDecl(name, aty, rty, self.ident(), pos=pos)
        self.fail("fn", "abstract")

    def type(self) -> Type:
        t = self.tok
        if t.kind == "kw":
            if t.text == "Unit":
                self.i += 1
                return UNIT
            if t.text == "Bool":
                self.i += 1
                return BOOL
            if t.text == "Int":
                self.i += 1
                return INT
            if t.text == "Ref":
                self.i += 1
                return RefT(self.type())
            if t.text == "Abs":
                self.i += 1
                return AbstractT(self.ident())
        if self.at("("):
            self.i += 1
            left = self.type()
            self.expect(",")
            right = self.type()
            self.expect(")")
            return PairT(left, right)
        self.fail("Unit", "Bool", "Int", "Ref", "Abs", "(")

    def pattern(self):
        if self.at("("):
            t = self.tok
            self.i += 1
            a = self.ident()
            self.expect(",")
            b = self.ident()
            self.expect(")")
            if a == b:
                raise ParseError(t.line, t.col, {"distinct names"}, b)
            return (a, b)
        return self.ident()

    def expr(self) -> Expr:
        t = self.tok
        pos = (t.line, t.col)
        if self.at("let"):
            self.i += 1
            pat = self.pattern()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            return Let(pat, bound, self.expr(), pos=pos)
        if self.at("if"):
            self.i += 1
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            return If(cond, then, self.expr(), pos=pos)
        return self.cmp()

    def cmp(self) -> Expr:
        left = self.sum()
        if self.at("==") or self.at("<"):
            t = self.tok
            self.i += 1
            left = PrimOp(t.text, left, self.sum(), pos=(t.line, t.col))
            if self.at("==") or self.at("<"):
                self.fail("non-associative comparison")
        return left

    def sum(self) -> Expr:
        left = self.app()
        while self.at("+") or self.at("-"):
            t = self.tok
            self.i += 1
            left = PrimOp(t.text, left, self.app(), pos=(t.line, t.col))
        return left

    def _atom_starts(self) -> bool:
        t = self.tok
        if t.kind in ("int", "id"):
            return True
        if t.kind == "kw":
            return t.text in _ATOM_START_KW
        return t.kind == "sym" and t.text == "("

    def app(self) -> Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "kw" and t.text in ("new", "free", "get"):
            self.i += 1
            inner = self.app()
            return {"new": New, "free": Free, "get": Get}[t.text](inner, pos=pos)
        if self.at("put"):
            self.i += 1
            target = self.atom()
            return Put(target, self.atom(), pos=pos)
        if t.kind == "id":
            self.i += 1
            if self._atom_starts():
                return App(t.text, self.atom(), pos=pos)
            return Var(t.text, pos=pos)
        return self.atom()

    def _int(self, negative: bool) -> Expr:
        t = self.tok
        self.i += 1
        n = -int(t.text) if negative else int(t.text)
        if not INT_MIN <= n <= INT_MAX:
            raise ParseError(t.line, t.col, {"64-bit integer"}, t.text)
        return n

    def atom(self) -> Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int":
            return Lit(self._int(False), pos=pos)
        if self.at("-") and self.toks[self.i + 1].kind == "int":
            self.i += 1
            return Lit(self._int(True), pos=pos)
        if t.kind == "kw" and t.text in _ATOM_START_KW:
            self.i += 1
            return Lit({"true": True, "false": False, "unit": None}[t.text], pos=pos)
        if t.kind == "id":
            self.i += 1
            return Var(t.text, pos=pos)
        if self.at("("):
            self.i += 1
            first = self.expr()
            if self.at(","):
                self.i += 1
                second = self.expr()
                self.expect(")")
                return PairE(first, second, pos=pos)
            self.expect(")")
            return first
        self.fail("literal", "identifier", "(")


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail("<eof>")
    return e


def parse_type(text: str) -> Type:
    p = _Parser(text)
    t = p.type()
    if p.tok.kind != "eof":
        p.fail("<eof>")
    return t


# -- printer ------------------------------------------------------------------

# precedence levels: 0 let/if, 1 comparison, 2 sum, 3 application, 4 atom
_LEVEL = {Let: 0, If: 0, New: 3, Free: 3, Get: 3, Put: 3, App: 3}


def _level(e: Expr) -> int:
    if isinstance(e, PrimOp):
        return 1 if e.op in ("==", "<") else 2
    if isinstance(e, Lit) and isinstance(e.value, int) and not isinstance(e.value, bool):
        return 4 if e.value >= 0 else 3  # "-5" needs parens as an argument
    return _LEVEL.get(type(e), 4)


def _at(e: Expr, level: int) -> str:
    s = print_expr(e)
    return s if _level(e) >= level else f"({s})"


def _pat(pat) -> str:
    return pat if isinstance(pat, str) else f"({pat[0]}, {pat[1]})"


def print_expr(e: Expr) -> str:
    if isinstance(e, Lit):
        if e.value is None:
            return "unit"
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Let):
        return f"let {_pat(e.pattern)} = {print_expr(e.bound)} in {print_expr(e.body)}"
    if isinstance(e, If):
        return (
            f"if {print_expr(e.cond)} then {print_expr(e.then)} "
            f"else {print_expr(e.orelse)}"
        )
    if isinstance(e, PairE):
        return f"({print_expr(e.left)}, {print_expr(e.right)})"
    if isinstance(e, New):
        return f"new {_at(e.value, 3)}"
    if isinstance(e, Free):
        return f"free {_at(e.ref, 3)}"
    if isinstance(e, Get):
        return f"get {_at(e.ref, 3)}"
    if isinstance(e, Put):
        return f"put {_at(e.target, 4)} {_at(e.value, 4)}"
    if isinstance(e, App):
        return f"{e.fn} {_at(e.arg, 4)}"
    if isinstance(e, PrimOp):
        if e.op in ("==", "<"):
            return f"{_at(e.left, 2)} {e.op} {_at(e.right, 2)}"
        return f"{_at(e.left, 2)} {e.op} {_at(e.right, 3)}"
    raise TypeError(f"not an expression: {e!r}")


def print_decl(d: Decl) -> str:
    if isinstance(d, FnDecl):
        return (
            f"fn {d.name}({d.param}: {d.param_type}) -> {d.ret_type} {{\n"
            f"  {print_expr(d.body)}\n}}"
        )
    return f"abstract {d.name} : {d.arg_type} -> {d.ret_type} = {d.builtin}"


def print_program(p: Program) -> str:
    return "\n\n".join(print_decl(d) for d in p.decls) + "\n"
