"""Stores, heap footprints and the three frame conditions.

A ``Store`` is an immutable finite partial map from locations to values.
Every operation returns a new store, so stores can be shared freely between
checkers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .syntax import AbstractT, BoolT, IntT, PairT, RefT, Type, UnitT
from .values import (
    AbstractV,
    BoolV,
    IntV,
    Loc,
    Location,
    PairV,
    StoredValue,
    UnitV,
    UValue,
)

EMPTY_LOCS: frozenset = frozenset()


class Store(Mapping):
    __slots__ = ("_cells", "_hash")

    def __init__(self, cells: Optional[Mapping] = None):
        cells = dict(cells or {})
        for l in cells:
            if not isinstance(l, Location):
                raise TypeError(f"store keys must be locations, got {l!r}")
        self._cells = cells
        self._hash = None

    @classmethod
    def of(cls, **cells) -> "Store":
        """``Store.of(l1=IntV(7))`` -- keyword names are ``l<id>``."""
        return cls({Location(int(k[1:])): v for k, v in cells.items()})

    def __getitem__(self, l: Location) -> StoredValue:
        return self._cells[l]

    def __iter__(self):
        return iter(sorted(self._cells))

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other) -> bool:
        if isinstance(other, Store):
            return self._cells == other._cells
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._cells.items()))
        return self._hash

    def dom(self) -> frozenset:
        return frozenset(self._cells)

    def set(self, l: Location, v: StoredValue) -> "Store":
        cells = dict(self._cells)
        cells[l] = v
        return Store(cells)

    def remove(self, l: Location) -> "Store":
        cells = dict(self._cells)
        del cells[l]
        return Store(cells)

    def restrict(self, locs: Iterable[Location]) -> "Store":
        keep = set(locs)
        return Store({l: v for l, v in self._cells.items() if l in keep})

    def without(self, locs: Iterable[Location]) -> "Store":
        drop = set(locs)
        return Store({l: v for l, v in self._cells.items() if l not in drop})

    def union(self, other: "Store") -> "Store":
        """Disjoint union; overlapping domains are a programming error."""
        clash = self.dom() & other.dom()
        if clash:
            raise ValueError(f"union of overlapping stores at {min(clash)}")
        return Store({**self._cells, **other._cells})

    def __str__(self) -> str:
        return "{" + ", ".join(f"{l} ↦ {self[l]}" for l in self) + "}"

    def __repr__(self) -> str:
        return f"Store({self})"


class StoreError(Exception):
    def __init__(self, kind: str, location: Location):
        self.kind = kind
        self.location = location
        super().__init__(f"{kind} at {location}")


class FootprintError(Exception):
    """``kind`` is ``Dangling``, ``Alias`` or ``Shape``."""

    def __init__(self, kind: str, location: Optional[Location] = None, detail: str = ""):
        self.kind = kind
        self.location = location
        msg = kind if location is None else f"{kind}({location})"
        super().__init__(f"{msg}: {detail}" if detail else msg)


def alloc(s: Store, v: StoredValue, forbidden: Iterable[Location] = EMPTY_LOCS):
    """Allocate at the smallest positive id outside ``dom(s) ∪ forbidden``."""
    taken = {l.id for l in s.dom()} | {l.id for l in forbidden}
    i = 1
    while i in taken:
        i += 1
    l = Location(i)
    return l, s.set(l, v)


def dealloc(s: Store, l: Location) -> Store:
    if l not in s:
        raise StoreError("DoubleFree", l)
    return s.remove(l)


def footprint_of(v: UValue, t: Type, s: Store) -> frozenset:
    """Dynamic typing ``v : t ⟨p⟩`` in store ``s``; returns ``p``.

    Footprints of the two halves of a pair must be disjoint.  Abstract
    values report their owned set as-is: aliasing inside a foreign object is
    its own business.
    """
    if isinstance(t, UnitT):
        if isinstance(v, UnitV):
            return EMPTY_LOCS
    elif isinstance(t, BoolT):
        if isinstance(v, BoolV):
            return EMPTY_LOCS
    elif isinstance(t, IntT):
        if isinstance(v, IntV):
            return EMPTY_LOCS
    elif isinstance(t, RefT):
        if isinstance(v, Loc):
            l = v.loc
            if l not in s:
                raise FootprintError("Dangling", l)
            inner = footprint_of(s[l], t.inner, s)
            if l in inner:
                raise FootprintError("Alias", l, "reference reaches itself")
            return inner | {l}
    elif isinstance(t, PairT):
        if isinstance(v, PairV):
            p = footprint_of(v.left, t.left, s)
            q = footprint_of(v.right, t.right, s)
            shared = p & q
            if shared:
                raise FootprintError("Alias", min(shared), "pair halves overlap")
            return p | q
    elif isinstance(t, AbstractT):
        if isinstance(v, AbstractV) and v.tag == t.name:
            missing = v.owned - s.dom()
            if missing:
                raise FootprintError("Dangling", min(missing))
            return frozenset(v.owned)
    raise FootprintError("Shape", None, f"{v} is not a value of type {t}")


LEAK_FREEDOM = "Leak freedom"
FRESH_ALLOCATION = "Fresh allocation"
INERTIA = "Inertia"
CONDITIONS = (LEAK_FREEDOM, FRESH_ALLOCATION, INERTIA)


@dataclass(frozen=True)
class FrameReport:
    leak_free: bool = True
    fresh_alloc: bool = True
    inertia: bool = True
    leak_witness: Optional[Location] = None
    fresh_witness: Optional[Location] = None
    inertia_witness: Optional[Location] = None

    @property
    def ok(self) -> bool:
        return self.leak_free and self.fresh_alloc and self.inertia

    def failed(self) -> dict:
        """Failed condition name -> witness location."""
        out = {}
        if not self.leak_free:
            out[LEAK_FREEDOM] = self.leak_witness
        if not self.fresh_alloc:
            out[FRESH_ALLOCATION] = self.fresh_witness
        if not self.inertia:
            out[INERTIA] = self.inertia_witness
        return out

    def __str__(self) -> str:
        if self.ok:
            return "frame conditions hold"
        return "; ".join(f"{c} violated at {w}" for c, w in self.failed().items())


def check_frame_conditions(s_in: Store, p, s_out: Store, p_out) -> FrameReport:
    """Check leak freedom, fresh allocation and inertia for one call.

    Only locations in ``dom(s_in) ∪ dom(s_out) ∪ p ∪ p_out`` can falsify a
    condition; everywhere else both stores are undefined.  Witnesses are the
    smallest violating location.
    """
    p, p_out = frozenset(p), frozenset(p_out)
    leak = fresh = inert = None
    for l in sorted(s_in.dom() | s_out.dom() | p | p_out):
        in_p, in_out = l in p, l in p_out
        if in_p and not in_out:
            if l in s_out and leak is None:
                leak = l
        elif in_out and not in_p:
            if l in s_in and fresh is None:
                fresh = l
        elif not in_p and not in_out:
            if s_in.get(l) != s_out.get(l) and inert is None:
                inert = l
    return FrameReport(
        leak_free=leak is None,
        fresh_alloc=fresh is None,
        inertia=inert is None,
        leak_witness=leak,
        fresh_witness=fresh,
        inertia_witness=inert,
    )
