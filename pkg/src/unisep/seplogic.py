"""Separation-logic assertions over stores, checked by finite enumeration.

Satisfaction is decided directly on a store.  Separating implication needs
to quantify over store extensions, so it is only available in bounded form,
against a finite ``Universe`` of locations and values.  Triples, the frame
rule and the footprint triple are all checked by enumerating every store
over a universe.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

from .ffi import ModelError, StoreTransformer
from .heap import EMPTY_LOCS, FootprintError, Store, StoreError, check_frame_conditions, footprint_of
from .values import BoolV, IntV, Loc, Location, PairV, UnitV, UValue
from .verdict import Verdict

# -- assertions -----------------------------------------------------------------


def _vtext(v: UValue) -> str:
    if isinstance(v, Loc):
        return f"l{v.loc.id}"
    if isinstance(v, PairV):
        return f"({_vtext(v.left)}, {_vtext(v.right)})"
    return str(v)


@dataclass(frozen=True)
class Emp:
    def __str__(self) -> str:
        return "emp"


@dataclass(frozen=True)
class PointsTo:
    loc: Location
    value: UValue

    def __str__(self) -> str:
        return f"l{self.loc.id} |-> {_vtext(self.value)}"


@dataclass(frozen=True)
class PointsToAny:
    """``∃v. loc ↦ v``"""

    loc: Location

    def __str__(self) -> str:
        return f"l{self.loc.id} |-> _"


@dataclass(frozen=True)
class Star:
    left: "Assertion"
    right: "Assertion"

    def __str__(self) -> str:
        l = f"({self.left})" if isinstance(self.left, Wand) else str(self.left)
        r = f"({self.right})" if isinstance(self.right, (Wand, Star)) else str(self.right)
        return f"{l} * {r}"


@dataclass(frozen=True)
class Wand:
    left: "Assertion"
    right: "Assertion"

    def __str__(self) -> str:
        l = f"({self.left})" if isinstance(self.left, Wand) else str(self.left)
        return f"{l} -* {self.right}"


@dataclass(frozen=True)
class Pure:
    """A store-independent fact, read precisely: it also demands ``emp``."""

    value: bool

    def __str__(self) -> str:
        return f"pure({'true' if self.value else 'false'})"


Assertion = Union[Emp, PointsTo, PointsToAny, Star, Wand, Pure]


@dataclass(frozen=True)
class Triple:
    """``{pre} P {∃fresh. post}``.

    Locations in ``fresh`` are existentially bound in the postcondition: a
    run may satisfy it with any injective renaming of them that avoids the
    other locations the triple mentions.  This is how allocation is
    specified without naming the cell the allocator will pick.
    """

    pre: Assertion
    post: Assertion
    fresh: frozenset = frozenset()

    def render(self, name: str = "P") -> str:
        binder = "".join(f"exists l{l.id}. " for l in sorted(self.fresh))
        return f"{{{self.pre}}} {name} {{{binder}{self.post}}}"

    def __str__(self) -> str:
        return self.render()


def star_all(parts: Iterable[Assertion]) -> Assertion:
    """Left-nested separating conjunction; ``emp`` when empty."""
    out = None
    for a in parts:
        out = a if out is None else Star(out, a)
    return Emp() if out is None else out


def mentioned(a: Assertion) -> frozenset:
    if isinstance(a, (PointsTo, PointsToAny)):
        return frozenset({a.loc})
    if isinstance(a, (Star, Wand)):
        return mentioned(a.left) | mentioned(a.right)
    return frozenset()


def rename(a: Assertion, rho: dict) -> Assertion:
    """Rename the locations of ``a`` (not the locations inside values)."""
    if isinstance(a, PointsTo):
        return PointsTo(rho.get(a.loc, a.loc), a.value)
    if isinstance(a, PointsToAny):
        return PointsToAny(rho.get(a.loc, a.loc))
    if isinstance(a, Star):
        return Star(rename(a.left, rho), rename(a.right, rho))
    if isinstance(a, Wand):
        return Wand(rename(a.left, rho), rename(a.right, rho))
    return a


def contains_wand(a: Assertion) -> bool:
    if isinstance(a, Wand):
        return True
    if isinstance(a, Star):
        return contains_wand(a.left) or contains_wand(a.right)
    return False


class UnboundedWand(Exception):
    pass


class OutOfUniverse(Exception):
    pass


class PreViolation(Exception):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict
        super().__init__(f"footprint triple does not hold: {verdict}")


# -- universe -------------------------------------------------------------------

MAX_LOCATIONS = 6
MAX_VALUES = 4


def _as_value(v) -> UValue:
    if isinstance(v, bool):
        return BoolV(v)
    if isinstance(v, int):
        return IntV(v)
    return v


@dataclass(frozen=True)
class Universe:
    locations: frozenset
    values: tuple

    def __post_init__(self):
        if not self.locations or not self.values:
            raise ValueError("universe must have at least one location and one value")
        if len(self.locations) > MAX_LOCATIONS or len(self.values) > MAX_VALUES:
            raise ValueError(
                f"universe bounded by {MAX_LOCATIONS} locations and {MAX_VALUES} values"
            )

    @classmethod
    def make(cls, n_locations: int = 4, values: Iterable = (0, 1)) -> "Universe":
        return cls(
            frozenset(Location(i) for i in range(1, n_locations + 1)),
            tuple(_as_value(v) for v in values),
        )

    def stores(self, locations: Optional[Iterable[Location]] = None) -> Iterator[Store]:
        """Every store over ``locations`` (default: all universe locations)."""
        locs = sorted(self.locations if locations is None else locations)
        choices = (None,) + self.values
        for combo in itertools.product(choices, repeat=len(locs)):
            yield Store({l: v for l, v in zip(locs, combo) if v is not None})

    def contains(self, s: Store) -> bool:
        return s.dom() <= self.locations and all(v in self.values for v in s.values())


DEFAULT_UNIVERSE = Universe.make()


# -- satisfaction -------------------------------------------------------------------


def _splits(s: Store) -> Iterator[tuple]:
    dom = sorted(s.dom())
    for k in range(len(dom) + 1):
        for part in itertools.combinations(dom, k):
            yield s.restrict(part), s.without(part)


_UNSAT = "unsat"


def exact_domain(a: Assertion):
    """The one domain a store satisfying ``a`` can have, if fixed by syntax.

    Returns a frozenset, ``_UNSAT`` when nothing satisfies ``a``, or None
    when the domain is not determined (wands).
    """
    if isinstance(a, (Emp, Pure)):
        return frozenset() if getattr(a, "value", True) else _UNSAT
    if isinstance(a, (PointsTo, PointsToAny)):
        return frozenset({a.loc})
    if isinstance(a, Star):
        l, r = exact_domain(a.left), exact_domain(a.right)
        if _UNSAT in (l, r):
            return _UNSAT
        if l is None or r is None:
            return None
        return _UNSAT if l & r else l | r
    return None


def _star(s: Store, a: Star, u, enumerate_all: bool) -> bool:
    if not enumerate_all:
        for side, other in ((a.left, a.right), (a.right, a.left)):
            d = exact_domain(side)
            if d is _UNSAT:
                return False
            if d is not None:
                if not d <= s.dom():
                    return False
                return _sat(s.restrict(d), side, u) and _sat(s.without(d), other, u)
    return any(
        _sat(s1, a.left, u, enumerate_all) and _sat(s2, a.right, u, enumerate_all)
        for s1, s2 in _splits(s)
    )


def _sat(s: Store, a: Assertion, u: Optional[Universe], enumerate_all: bool = False) -> bool:
    if isinstance(a, Emp):
        return len(s) == 0
    if isinstance(a, PointsTo):
        return s.dom() == {a.loc} and s[a.loc] == a.value
    if isinstance(a, PointsToAny):
        return s.dom() == {a.loc}
    if isinstance(a, Pure):
        return a.value and len(s) == 0
    if isinstance(a, Star):
        return _star(s, a, u, enumerate_all)
    if isinstance(a, Wand):
        if u is None:
            raise UnboundedWand(f"{a} needs a universe")
        free = u.locations - s.dom()
        for ext in u.stores(free):
            if _sat(ext, a.left, u, enumerate_all) and not _sat(s.union(ext), a.right, u, enumerate_all):
                return False
        return True
    raise TypeError(f"not an assertion: {a!r}")


def satisfies(s: Store, a: Assertion, enumerate_all: bool = False) -> bool:
    """``s ⊨ a`` for wand-free assertions.

    ``enumerate_all`` disables the exact-domain shortcut for ``*`` and tries
    every split of ``s``.
    """
    if contains_wand(a):
        raise UnboundedWand(f"{a} contains -*; use satisfies_bounded")
    return _sat(s, a, None, enumerate_all)


def satisfies_bounded(s: Store, a: Assertion, u: Universe, enumerate_all: bool = False) -> bool:
    """``s ⊨ a`` with separating implication quantified over stores in ``u``."""
    if not u.contains(s):
        raise OutOfUniverse(f"store {s} is not over the universe")
    return _sat(s, a, u, enumerate_all)


def _holds(s: Store, a: Assertion, u: Universe) -> bool:
    # stores produced by a transformer may leave the universe (fresh ids,
    # incremented values); only wands need the universe at all
    if contains_wand(a):
        return satisfies_bounded(s, a, u)
    return _sat(s, a, None)


# -- triples --------------------------------------------------------------------------


def footprint_triple(p, p_out) -> Triple:
    """``{⋆_{ℓ∈p} ∃v. ℓ ↦ v} P {⋆_{ℓ∈p_out} ∃v. ℓ ↦ v}``.

    Output locations that are not inputs are the freshly allocated ones and
    are bound in the postcondition.
    """
    p, p_out = frozenset(p), frozenset(p_out)
    return Triple(
        star_all(PointsToAny(l) for l in sorted(p)),
        star_all(PointsToAny(l) for l in sorted(p_out)),
        p_out - p,
    )


def _renamings(tr: Triple, s: Store) -> Iterator[dict]:
    fresh = sorted(tr.fresh)
    if not fresh:
        yield {}
        return
    pinned = mentioned(tr.pre) | (mentioned(tr.post) - tr.fresh)
    targets = sorted((s.dom() | tr.fresh) - pinned)
    for image in itertools.permutations(targets, len(fresh)):
        yield dict(zip(fresh, image))


def _post_holds(s: Store, tr: Triple, u: Universe, frame: Optional[Assertion] = None) -> bool:
    for rho in _renamings(tr, s):
        post = rename(tr.post, rho)
        if _holds(s, post if frame is None else Star(post, frame), u):
            return True
    return False


_FAULTS = (ModelError, StoreError, FootprintError, KeyError, AttributeError)


def _run(T: StoreTransformer, s: Store, forbidden=EMPTY_LOCS):
    try:
        return T.run(s, forbidden), None
    except _FAULTS as e:
        return None, f"{T.name} faulted: {e!r}"


def check_triple(T: StoreTransformer, tr: Triple, u: Universe) -> Verdict:
    """Bounded validity of ``{tr.pre} T {tr.post}`` over every store in ``u``."""
    checked = 0
    for s in u.stores():
        if not _holds(s, tr.pre, u):
            continue
        checked += 1
        out, fault = _run(T, s)
        if fault:
            return Verdict.fail(s, "run", fault, checked=checked)
        s_out = out[1]
        try:
            ok = _post_holds(s_out, tr, u)
        except OutOfUniverse as e:
            return Verdict.fail(s, "post", str(e), checked=checked)
        if not ok:
            return Verdict.fail(s, "post", f"output {s_out} does not satisfy {tr.post}", checked=checked)
    return Verdict(True, checked=checked)


def point_frames(u: Universe) -> list:
    """``⋆ ∃v. ℓ ↦ v`` over every subset of the universe's locations."""
    locs = sorted(u.locations)
    return [
        star_all(PointsToAny(l) for l in combo)
        for k in range(len(locs) + 1)
        for combo in itertools.combinations(locs, k)
    ]


def valued_frames(u: Universe) -> list:
    """``⋆ ℓ ↦ v`` for every non-empty store over the universe."""
    return [
        star_all(PointsTo(l, s[l]) for l in s)
        for s in u.stores()
        if len(s)
    ]


def check_frame_rule(
    T: StoreTransformer, tr: Triple, frame: Assertion, u: Universe, local: bool = True
) -> Verdict:
    """Check ``{pre * frame} T {post * frame}`` given ``{pre} T {post}``.

    Fresh locations of ``tr`` are bound in ``post`` only, never in ``frame``.

    In local mode ``T`` only sees the part of the store that satisfies
    ``pre``; its output is recombined with the framed remainder and it may
    not allocate inside the remainder.  Non-local mode hands ``T`` the whole
    store.
    """
    premise = check_triple(T, tr, u)
    if not premise:
        cx = premise.counterexample
        return Verdict.fail(cx.store, "premise", f"unframed triple fails: {cx.explanation}")
    pre = Star(tr.pre, frame)
    checked = 0
    for s in u.stores():
        if not _holds(s, pre, u):
            continue
        checked += 1
        if local:
            outs = []
            for s1, s2 in _splits(s):
                if not (_holds(s1, tr.pre, u) and _holds(s2, frame, u)):
                    continue
                out, fault = _run(T, s1, s2.dom())
                if fault:
                    return Verdict.fail(s, "run", fault, checked=checked)
                s1_out = out[1]
                clash = s1_out.dom() & s2.dom()
                if clash:
                    return Verdict.fail(s, "frame", "local output overlaps the frame", min(clash), checked)
                outs.append(s1_out.union(s2))
        else:
            out, fault = _run(T, s)
            if fault:
                return Verdict.fail(s, "run", fault, checked=checked)
            outs = [out[1]]
        for s_out in outs:
            try:
                ok = _post_holds(s_out, tr, u, frame)
            except OutOfUniverse:
                ok = False
            if not ok:
                return Verdict.fail(
                    s, "post", f"output {s_out} does not satisfy {tr.post} * {frame}", checked=checked
                )
    return Verdict(True, checked=checked)


def _same_up_to_fresh(actual: frozenset, nominal: frozenset, p: frozenset) -> bool:
    return actual & p == nominal & p and len(actual - p) == len(nominal - p)


def triple_implies_frames(T: StoreTransformer, p, p_out, u: Universe) -> Verdict:
    """Replay, store by store, the argument that the footprint triple
    entails leak freedom, fresh allocation and inertia.

    For every store ``s`` over ``u`` containing ``p``: split it into
    ``s1 = s|p`` and the frame ``s2``, run ``T`` locally on ``s1`` (never
    allocating into ``dom(s2)``), glue ``s' = s1' ∪ s2`` and check each
    intermediate fact of the three cases for every location, then confirm
    the conclusion with ``check_frame_conditions``.  Freshly allocated
    output locations may differ from the nominal ``p_out`` by renaming.
    """
    p, p_out = frozenset(p), frozenset(p_out)
    premise = check_triple(T, footprint_triple(p, p_out), u)
    if not premise:
        raise PreViolation(premise)

    stats = {"stores": 0, "leak freedom": 0, "fresh allocation": 0, "inertia": 0}

    def fail(s, step, why, l=None):
        return Verdict.fail(s, step, why, l, stats["stores"], dict(stats))

    for s in u.stores():
        if not p <= s.dom():
            continue
        stats["stores"] += 1
        s1, s2 = s.restrict(p), s.without(p)
        if not satisfies(s1, footprint_triple(p, p_out).pre):  # (*)
            return fail(s, "(*)", f"{s1} does not satisfy the precondition")
        out, fault = _run(T, s1, s2.dom())
        if fault:
            return fail(s, "run", fault)
        result, s1_out = out
        if T.ret_type is None:
            actual = p_out
        else:
            try:
                actual = footprint_of(result, T.ret_type, s1_out)
            except FootprintError as e:
                return fail(s, "(**)", f"result footprint: {e}", e.location)
            if not _same_up_to_fresh(actual, p_out, p):
                return fail(s, "(**)", f"output footprint {sorted(actual)} is not {sorted(p_out)} up to fresh names")
        if not satisfies(s1_out, footprint_triple(p, actual).post):  # (**)
            return fail(s, "(**)", f"dom({s1_out}) is not the output footprint")
        if s1_out.dom() & s2.dom():
            return fail(s, "frame rule", "local output overlaps the frame", min(s1_out.dom() & s2.dom()))
        s_out = s1_out.union(s2)

        for l in sorted(u.locations | s.dom() | s_out.dom() | p | actual):
            in_p, in_out = l in p, l in actual
            if in_p and not in_out:
                stats["leak freedom"] += 1
                if l not in s1.dom():
                    return fail(s, "leak freedom", "ℓ ∈ p but ℓ ∉ dom(σ1)", l)
                if l in s2.dom():
                    return fail(s, "leak freedom", "ℓ ∈ dom(σ2)", l)
                if l in s1_out.dom():
                    return fail(s, "leak freedom", "ℓ ∈ dom(σ1')", l)
                if l in s_out.dom():
                    return fail(s, "leak freedom", "ℓ ∈ dom(σ')", l)
            elif in_out and not in_p:
                stats["fresh allocation"] += 1
                if l not in s1_out.dom():
                    return fail(s, "fresh allocation", "ℓ ∈ p' but ℓ ∉ dom(σ1')", l)
                if l in s2.dom():
                    return fail(s, "fresh allocation", "ℓ ∈ dom(σ2)", l)
                if l in s1.dom():
                    return fail(s, "fresh allocation", "ℓ ∈ dom(σ1)", l)
                if l in s.dom():
                    return fail(s, "fresh allocation", "ℓ ∈ dom(σ)", l)
            elif not in_p and not in_out:
                stats["inertia"] += 1
                if l in s1.dom() or l in s1_out.dom():
                    return fail(s, "inertia", "ℓ touched by the local run", l)
                if l in s2.dom():
                    if not (s[l] == s2[l] == s_out[l]):
                        return fail(s, "inertia", "σ(ℓ) ≠ σ'(ℓ)", l)
                elif l in s.dom() or l in s_out.dom():
                    return fail(s, "inertia", "ℓ ∉ dom(σ2) but defined in σ or σ'", l)

        report = check_frame_conditions(s, p, s_out, actual)
        if not report.ok:
            cond, l = next(iter(report.failed().items()))
            return fail(s, cond, str(report), l)
    return Verdict(True, checked=stats["stores"], stats=stats)


# -- text syntax ----------------------------------------------------------------------

_TOK = re.compile(r"\s*(?:(?P<sym>\|->|-\*|[*(){},_])|(?P<loc>l[0-9]+)|(?P<int>-?[0-9]+)|(?P<word>[A-Za-z_][A-Za-z0-9_]*))")


class AssertionSyntaxError(ValueError):
    pass


class _AParser:
    def __init__(self, text: str):
        self.toks = []
        i = 0
        text = text.rstrip()
        while i < len(text):
            m = _TOK.match(text, i)
            if not m or m.end() == i:
                raise AssertionSyntaxError(f"bad character at {i}: {text[i:]!r}")
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind)))
            i = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, text=None):
        tok = self.peek()
        if tok[0] is None or (text is not None and tok[1] != text):
            raise AssertionSyntaxError(f"expected {text or 'token'}, found {tok[1]!r}")
        self.i += 1
        return tok

    def done(self):
        if self.i != len(self.toks):
            raise AssertionSyntaxError(f"trailing input {self.peek()[1]!r}")

    def wand(self) -> Assertion:
        left = self.star()
        if self.peek()[1] == "-*":
            self.take()
            return Wand(left, self.wand())
        return left

    def star(self) -> Assertion:
        left = self.atom()
        while self.peek()[1] == "*":
            self.take()
            left = Star(left, self.atom())
        return left

    def atom(self) -> Assertion:
        kind, text = self.peek()
        if text == "emp":
            self.take()
            return Emp()
        if text == "pure":
            self.take()
            self.take("(")
            _, b = self.take()
            if b not in ("true", "false"):
                raise AssertionSyntaxError(f"pure expects true or false, found {b!r}")
            self.take(")")
            return Pure(b == "true")
        if kind == "loc":
            self.take()
            if int(text[1:]) < 1:
                raise AssertionSyntaxError(f"location ids start at 1, found {text!r}")
            l = Location(int(text[1:]))
            self.take("|->")
            if self.peek()[1] == "_":
                self.take()
                return PointsToAny(l)
            return PointsTo(l, self.value())
        if text == "(":
            self.take()
            a = self.wand()
            self.take(")")
            return a
        raise AssertionSyntaxError(f"expected an assertion, found {text!r}")

    def value(self) -> UValue:
        kind, text = self.take()
        if kind == "int":
            return IntV(int(text))
        if kind == "loc":
            return Loc(Location(int(text[1:])))
        if text in ("true", "false"):
            return BoolV(text == "true")
        if text == "unit":
            return UnitV()
        if text == "(":
            a = self.value()
            self.take(",")
            b = self.value()
            self.take(")")
            return PairV(a, b)
        raise AssertionSyntaxError(f"expected a value, found {text!r}")


def parse_assertion(text: str) -> Assertion:
    p = _AParser(text)
    a = p.wand()
    p.done()
    return a


def parse_triple(text: str) -> tuple:
    """``{A} name {exists l3. B}`` -> ``(name, Triple)``; binders are optional."""
    m = re.fullmatch(r"\s*\{(?P<pre>[^{}]*)\}\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*\{(?P<post>[^{}]*)\}\s*", text)
    if not m:
        raise AssertionSyntaxError(f"expected {{A}} name {{B}}, got {text!r}")
    post, fresh = m["post"], set()
    while True:
        b = re.match(r"\s*exists\s+l([0-9]+)\s*\.", post)
        if not b:
            break
        fresh.add(Location(int(b[1])))
        post = post[b.end():]
    return m["name"], Triple(parse_assertion(m["pre"]), parse_assertion(post), frozenset(fresh))
