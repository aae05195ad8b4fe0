"""Runtime values for both interpretations of the language.

``UValue`` is what the update semantics manipulates: unboxed scalars,
locations into a store, pairs, and opaque abstract objects that own a set
of locations.  ``PureValue`` is the tree-shaped counterpart used by the
value semantics, where a reference is just a box around its contents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

INT_BITS = 64
_MOD = 1 << INT_BITS
_HALF = 1 << (INT_BITS - 1)
INT_MIN = -_HALF
INT_MAX = _HALF - 1


def wrap_int(n: int) -> int:
    """Reduce ``n`` into the signed 64-bit range (two's complement wrap)."""
    return ((n + _HALF) % _MOD) - _HALF


@dataclass(frozen=True, order=True)
class Location:
    id: int

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id <= 0:
            raise ValueError(f"invalid location id {self.id!r}")

    def __str__(self) -> str:
        return f"ℓ{self.id}"


LocationSet = frozenset  # frozenset[Location]


def locset(*ids: int) -> frozenset[Location]:
    return frozenset(Location(i) for i in ids)


def render_locset(p) -> str:
    return "{" + ", ".join(str(l) for l in sorted(p)) + "}"


# -- update-semantics values --------------------------------------------------


@dataclass(frozen=True)
class UnitV:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class BoolV:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class IntV:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Loc:
    loc: Location

    def __str__(self) -> str:
        return str(self.loc)


@dataclass(frozen=True)
class PairV:
    left: "UValue"
    right: "UValue"

    def __str__(self) -> str:
        return f"({self.left}, {self.right})"


@dataclass(frozen=True)
class AbstractV:
    """An opaque foreign object.  ``owned`` may alias internally."""

    tag: str
    owned: frozenset

    def __str__(self) -> str:
        return f"<{self.tag} {render_locset(self.owned)}>"


UValue = Union[UnitV, BoolV, IntV, Loc, PairV, AbstractV]
StoredValue = UValue


def loc(i: int) -> Loc:
    return Loc(Location(i))


# -- value-semantics values ---------------------------------------------------


@dataclass(frozen=True)
class UnitP:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class BoolP:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class IntP:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BoxP:
    contents: "PureValue"

    def __str__(self) -> str:
        return f"box({self.contents})"


@dataclass(frozen=True)
class PairP:
    left: "PureValue"
    right: "PureValue"

    def __str__(self) -> str:
        return f"({self.left}, {self.right})"


@dataclass(frozen=True)
class AbstractP:
    tag: str
    contents: "PureValue"

    def __str__(self) -> str:
        return f"{self.tag}<{self.contents}>"


PureValue = Union[UnitP, BoolP, IntP, BoxP, PairP, AbstractP]
