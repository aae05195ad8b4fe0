"""Registry of foreign ("abstract") functions and per-call frame checking.

Each foreign function is a pair of models: an update model that transforms
the store, and (optionally) a pure model over tree-shaped values.  Some
catalog entries deliberately break exactly one frame condition so that the
checkers have something to catch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .heap import (
    EMPTY_LOCS,
    FRESH_ALLOCATION,
    INERTIA,
    LEAK_FREEDOM,
    FootprintError,
    FrameReport,
    Store,
    alloc,
    check_frame_conditions,
    dealloc,
    footprint_of,
)
from .syntax import INT, UNIT, AbstractT, BoolT, IntT, PairT, RefT, Type, UnitT
from .values import (
    AbstractP,
    AbstractV,
    BoolV,
    BoxP,
    IntP,
    IntV,
    Loc,
    Location,
    PairP,
    PairV,
    PureValue,
    UnitP,
    UnitV,
    UValue,
    wrap_int,
)

DISJOINTNESS = "Disjointness"  # the p ∩ q = ∅ premise of the tuple rule

UpdateModel = Callable[[UValue, Store, frozenset], tuple]
PureModel = Callable[[PureValue], PureValue]


class ModelError(Exception):
    """A model was applied to a value outside its domain."""


@dataclass
class AbstractFn:
    name: str
    arg_type: Type
    ret_type: Type
    update_model: UpdateModel
    pure_model: Optional[PureModel] = None
    violates: Optional[str] = None  # None means well behaved
    reset: Callable[[], None] = field(default=lambda: None, repr=False)

    @property
    def well_behaved(self) -> bool:
        return self.violates is None

    def transformer(self, arg: UValue) -> "StoreTransformer":
        """Fix ``arg`` to get a total store transformer.

        Hidden state is reset before every run so the transformer is a
        function of its input store alone.
        """

        def run(s: Store, forbidden=EMPTY_LOCS):
            self.reset()
            return self.update_model(arg, s, frozenset(forbidden))

        return StoreTransformer(f"{self.name} {arg}", run, self.ret_type)


@dataclass(frozen=True)
class StoreTransformer:
    """``(store, forbidden) -> (result, store)``.

    ``ret_type`` is None for bare transformers (such as the identity) that
    produce no typed result.
    """

    name: str
    fn: Callable = field(repr=False)
    ret_type: Optional[Type] = None

    def run(self, s: Store, forbidden=EMPTY_LOCS):
        return self.fn(s, frozenset(forbidden))

    def __call__(self, s: Store, forbidden=EMPTY_LOCS) -> Store:
        return self.run(s, forbidden)[1]


IDENTITY = StoreTransformer("identity", lambda s, forbidden: (None, s))


def instrument_call(f: AbstractFn, arg: UValue, s: Store, forbidden=EMPTY_LOCS):
    """Run ``f`` on ``arg`` and check the three frame conditions.

    Returns ``(result, store', report)``.  A malformed argument or result
    footprint raises ``FootprintError``.
    """
    p = footprint_of(arg, f.arg_type, s)
    result, s_out = f.update_model(arg, s, frozenset(forbidden))
    p_out = footprint_of(result, f.ret_type, s_out)
    return result, s_out, check_frame_conditions(s, p, s_out, p_out)


# -- abstract types -----------------------------------------------------------


@dataclass(frozen=True)
class AbstractType:
    """How a foreign object type maps between the two semantics."""

    tag: str
    cells: int  # number of locations an object owns
    project: Callable  # (AbstractV, Store) -> PureValue
    embed: Callable  # (AbstractP, Store, forbidden) -> (AbstractV, Store)
    layout: Callable  # owned locations -> {Location: StoredValue}


# A Pool is a data cell plus a header cell holding two pointers to that same
# data cell, so its owned set is internally aliased.

POOL = "Pool"
POOL_T = AbstractT(POOL)


def _pool_data(v: AbstractV, s: Store) -> Optional[Location]:
    for l in sorted(v.owned):
        if isinstance(s.get(l), IntV):
            return l
    return None


def _pool_read(v: AbstractV, s: Store) -> int:
    d = _pool_data(v, s)
    return 0 if d is None else s[d].value


def _pool_new(n: int, s: Store, forbidden):
    d, s = alloc(s, IntV(n), forbidden)
    h, s = alloc(s, PairV(Loc(d), Loc(d)), forbidden)
    return AbstractV(POOL, frozenset({d, h})), s


def _pool_project(v: AbstractV, s: Store) -> PureValue:
    return AbstractP(POOL, IntP(_pool_read(v, s)))


def _pool_embed(pv: AbstractP, s: Store, forbidden):
    if not isinstance(pv.contents, IntP):
        raise ModelError(f"bad Pool contents {pv}")
    return _pool_new(pv.contents.value, s, forbidden)


def _pool_layout(owned) -> dict:
    d, *rest = sorted(owned)
    cells = {d: IntV(0)}
    for h in rest:
        cells[h] = PairV(Loc(d), Loc(d))
    return cells


POOL_TYPE = AbstractType(POOL, 2, _pool_project, _pool_embed, _pool_layout)


# -- catalog ------------------------------------------------------------------

REF_INT = RefT(INT)
REF_PAIR = PairT(REF_INT, REF_INT)


def _expect(cond: bool, what):
    if not cond:
        raise ModelError(f"model applied to {what}")


def _read_int(s: Store, v: UValue) -> tuple:
    _expect(isinstance(v, Loc) and isinstance(s.get(v.loc), IntV), v)
    return v.loc, s[v.loc].value


def _box_int(pv: PureValue) -> int:
    _expect(isinstance(pv, BoxP) and isinstance(pv.contents, IntP), pv)
    return pv.contents.value


def _box_incr(arg, s, forbidden):
    l, n = _read_int(s, arg)
    return arg, s.set(l, IntV(wrap_int(n + 1)))


def _swap(arg, s, forbidden):
    _expect(isinstance(arg, PairV), arg)
    a, x = _read_int(s, arg.left)
    b, y = _read_int(s, arg.right)
    return arg, s.set(a, IntV(y)).set(b, IntV(x))


def _swap_pure(pv):
    _expect(isinstance(pv, PairP), pv)
    return PairP(BoxP(IntP(_box_int(pv.right))), BoxP(IntP(_box_int(pv.left))))


def _alloc_one(arg, s, forbidden):
    l, s = alloc(s, IntV(0), forbidden)
    return Loc(l), s


def _free_box(arg, s, forbidden):
    l, n = _read_int(s, arg)
    return IntV(n), dealloc(s, l)


def _mk_abs(arg, s, forbidden):
    _expect(isinstance(arg, IntV), arg)
    return _pool_new(arg.value, s, forbidden)


def _pool_arg(pv) -> int:
    _expect(isinstance(pv, AbstractP) and pv.tag == POOL and isinstance(pv.contents, IntP), pv)
    return pv.contents.value


def _use_abs(arg, s, forbidden):
    _expect(isinstance(arg, AbstractV) and arg.tag == POOL, arg)
    n = _pool_read(arg, s)
    for l in sorted(arg.owned):
        s = dealloc(s, l)
    return IntV(n), s


def _pool_bump(arg, s, forbidden):
    _expect(isinstance(arg, AbstractV) and arg.tag == POOL, arg)
    d = _pool_data(arg, s)
    if d is not None:
        s = s.set(d, IntV(wrap_int(s[d].value + 1)))
    return arg, s


def _leaker(arg, s, forbidden):
    # returns the contents but never frees the cell
    l, n = _read_int(s, arg)
    return IntV(n), s


def _global_mutator(arg, s, forbidden):
    # writes to the first cell it can see outside its own footprint
    _expect(isinstance(arg, Loc) and arg.loc in s, arg)
    for l in s:
        if l != arg.loc and l not in forbidden:
            old = s[l]
            new = IntV(wrap_int(old.value + 1)) if isinstance(old, IntV) else IntV(0)
            return arg, s.set(l, new)
    return arg, s


class _Resurrector:
    """Hands back a cell it allocated earlier instead of allocating afresh."""

    def __init__(self):
        self.remembered: Optional[Location] = None

    def reset(self):
        self.remembered = None

    def update(self, arg, s, forbidden):
        l = self.remembered
        if l is not None and isinstance(s.get(l), IntV):
            return Loc(l), s
        l, s = alloc(s, IntV(0), forbidden)
        self.remembered = l
        return Loc(l), s


def _aliaser(arg, s, forbidden):
    l, s = alloc(s, IntV(0), forbidden)
    return PairV(Loc(l), Loc(l)), s


def builtin_catalog() -> list:
    """A fresh list of catalog entries (stateful entries get fresh state)."""
    res = _Resurrector()
    return [
        AbstractFn("box_incr", REF_INT, REF_INT, _box_incr,
                   lambda pv: BoxP(IntP(wrap_int(_box_int(pv) + 1)))),
        AbstractFn("swap", REF_PAIR, REF_PAIR, _swap, _swap_pure),
        AbstractFn("alloc_one", UNIT, REF_INT, _alloc_one, lambda pv: BoxP(IntP(0))),
        AbstractFn("free_box", REF_INT, INT, _free_box, lambda pv: IntP(_box_int(pv))),
        AbstractFn("mk_abs", INT, POOL_T, _mk_abs,
                   lambda pv: AbstractP(POOL, IntP(pv.value))),
        AbstractFn("use_abs", POOL_T, INT, _use_abs, lambda pv: IntP(_pool_arg(pv))),
        AbstractFn("pool_bump", POOL_T, POOL_T, _pool_bump,
                   lambda pv: AbstractP(POOL, IntP(wrap_int(_pool_arg(pv) + 1)))),
        AbstractFn("leaker", REF_INT, INT, _leaker, lambda pv: IntP(_box_int(pv)),
                   violates=LEAK_FREEDOM),
        AbstractFn("resurrector", UNIT, REF_INT, res.update, lambda pv: BoxP(IntP(0)),
                   violates=FRESH_ALLOCATION, reset=res.reset),
        AbstractFn("global_mutator", REF_INT, REF_INT, _global_mutator, lambda pv: pv,
                   violates=INERTIA),
        AbstractFn("aliaser", UNIT, REF_PAIR, _aliaser,
                   lambda pv: PairP(BoxP(IntP(0)), BoxP(IntP(0))),
                   violates=DISJOINTNESS),
    ]


class Registry:
    """Catalog entries by name, plus the abstract types they traffic in.

    Hidden state of an entry belongs to one evaluation at a time; build a
    separate registry per concurrent evaluation.
    """

    def __init__(self, entries: Iterable[AbstractFn] = (), abstract_types=(POOL_TYPE,)):
        self.entries = {f.name: f for f in entries}
        self.abstract_types = {a.tag: a for a in abstract_types}

    def __getitem__(self, name: str) -> AbstractFn:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    def reset(self):
        for f in self.entries.values():
            f.reset()

    def well_behaved(self) -> list:
        return [f for f in self if f.well_behaved]

    def violators(self) -> list:
        return [f for f in self if not f.well_behaved]


def default_registry() -> Registry:
    return Registry(builtin_catalog())


# -- canonical arguments and sweeps --------------------------------------------


def canonical_arg(t: Type, locs, registry: Optional[Registry] = None) -> UValue:
    """Build a value of type ``t`` whose references use ``locs`` in order.

    Raises ``ValueError`` if ``locs`` is not used up exactly.
    """
    registry = registry or default_registry()
    pool = list(locs)

    def build(t):
        if isinstance(t, UnitT):
            return UnitV()
        if isinstance(t, BoolT):
            return BoolV(True)
        if isinstance(t, IntT):
            return IntV(1)
        if isinstance(t, RefT):
            if not pool:
                raise ValueError(f"not enough locations for {t}")
            return Loc(pool.pop(0))
        if isinstance(t, PairT):
            return PairV(build(t.left), build(t.right))
        if isinstance(t, AbstractT):
            n = registry.abstract_types[t.name].cells
            if len(pool) < n:
                raise ValueError(f"{t} owns {n} locations")
            owned = frozenset(pool[:n])
            del pool[:n]
            return AbstractV(t.name, owned)
        raise ValueError(f"no canonical value of type {t}")

    v = build(t)
    if pool:
        raise ValueError(f"unused locations {pool} for argument of type {t}")
    return v


def minimal_store(arg: UValue, t: Type, registry: Optional[Registry] = None) -> Store:
    """The smallest store in which ``arg : t`` is well formed."""
    registry = registry or default_registry()
    cells = {}

    def fill(v, t):
        if isinstance(t, RefT) and isinstance(v, Loc):
            inner = t.inner
            if isinstance(inner, IntT):
                cells[v.loc] = IntV(0)
            elif isinstance(inner, BoolT):
                cells[v.loc] = BoolV(False)
            elif isinstance(inner, UnitT):
                cells[v.loc] = UnitV()
            else:
                raise ValueError(f"no minimal store for {t}")
        elif isinstance(t, PairT) and isinstance(v, PairV):
            fill(v.left, t.left)
            fill(v.right, t.right)
        elif isinstance(t, AbstractT) and isinstance(v, AbstractV):
            cells.update(registry.abstract_types[t.name].layout(v.owned))

    fill(arg, t)
    return Store(cells)


def nominal_footprints(f: AbstractFn, locs, registry: Optional[Registry] = None):
    """``(arg, p, p_out)`` for ``f`` run on its minimal store."""
    arg = canonical_arg(f.arg_type, locs, registry)
    s = minimal_store(arg, f.arg_type, registry)
    p = footprint_of(arg, f.arg_type, s)
    f.reset()
    result, s_out = f.update_model(arg, s, EMPTY_LOCS)
    f.reset()
    return arg, p, footprint_of(result, f.ret_type, s_out)


def default_input_locs(f: AbstractFn, registry: Optional[Registry] = None) -> list:
    """Locations ℓ1..ℓn, n the number of references in ``f``'s argument."""
    registry = registry or default_registry()

    def count(t):
        if isinstance(t, RefT):
            return 1
        if isinstance(t, PairT):
            return count(t.left) + count(t.right)
        if isinstance(t, AbstractT):
            return registry.abstract_types[t.name].cells
        return 0

    return [Location(i) for i in range(1, count(f.arg_type) + 1)]


def candidate_args(t: Type, s: Store, ints=(0, 1), registry: Optional[Registry] = None):
    """Every argument of type ``t`` with a well-formed footprint in ``s``."""
    registry = registry or default_registry()

    def cands(t):
        if isinstance(t, UnitT):
            return [UnitV()]
        if isinstance(t, BoolT):
            return [BoolV(False), BoolV(True)]
        if isinstance(t, IntT):
            return [IntV(i) for i in ints]
        if isinstance(t, RefT):
            return [Loc(l) for l in s]
        if isinstance(t, PairT):
            return [PairV(a, b) for a in cands(t.left) for b in cands(t.right)]
        if isinstance(t, AbstractT):
            n = registry.abstract_types[t.name].cells
            return [AbstractV(t.name, frozenset(c)) for c in itertools.combinations(s, n)]
        return []

    out = []
    for v in cands(t):
        try:
            footprint_of(v, t, s)
        except FootprintError:
            continue
        out.append(v)
    return out


@dataclass
class Flag:
    condition: str
    witness: Optional[Location]
    store: Store
    arg: UValue
    call: int  # 1 or 2 within the session


@dataclass
class SweepResult:
    name: str
    sessions: int = 0
    calls: int = 0
    flags: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.flags

    def conditions(self) -> set:
        return {fl.condition for fl in self.flags}

    def first(self, condition: str) -> Optional[Flag]:
        for fl in self.flags:
            if fl.condition == condition:
                return fl
        return None


def sweep(f: AbstractFn, stores: Iterable[Store], ints=(0, 1),
          registry: Optional[Registry] = None) -> SweepResult:
    """Run ``instrument_call`` over every store and every valid argument.

    Each (store, argument) pair starts a two-call session with fresh hidden
    state: the second call runs on the first call's output store with that
    store's first valid argument, so entries that misbehave only on a repeat
    call are exercised too.
    """
    res = SweepResult(f.name)
    for s in stores:
        for arg in candidate_args(f.arg_type, s, ints, registry):
            res.sessions += 1
            f.reset()
            cur_store, cur_arg = s, arg
            for call in (1, 2):
                res.calls += 1
                try:
                    _, out, report = instrument_call(f, cur_arg, cur_store)
                except FootprintError as e:
                    res.flags.append(Flag(DISJOINTNESS if e.kind == "Alias" else e.kind,
                                          e.location, cur_store, cur_arg, call))
                    break
                for cond, witness in report.failed().items():
                    res.flags.append(Flag(cond, witness, cur_store, cur_arg, call))
                nxt = candidate_args(f.arg_type, out, ints, registry)
                if not nxt:
                    break
                cur_store, cur_arg = out, nxt[0]
            f.reset()
    return res
