from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .heap import Store


@dataclass(frozen=True)
class Counterexample:
    store: Optional[Store]
    step: str
    explanation: str
    witness: Any = None  # a Location when one is meaningful

    def __str__(self) -> str:
        parts = [f"[{self.step}] {self.explanation}"]
        if self.witness is not None:
            parts.append(f"witness {self.witness}")
        if self.store is not None:
            parts.append(f"store {self.store}")
        return "; ".join(parts)


@dataclass(frozen=True)
class Verdict:
    holds: bool
    counterexample: Optional[Counterexample] = None
    checked: int = 0
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.holds != (self.counterexample is None):
            raise ValueError("counterexample must be present exactly when the verdict fails")

    def __bool__(self) -> bool:
        return self.holds

    @classmethod
    def fail(cls, store, step, explanation, witness=None, checked=0, stats=None):
        return cls(False, Counterexample(store, step, explanation, witness), checked, stats or {})

    def __str__(self) -> str:
        if self.holds:
            return f"holds ({self.checked} checked)"
        return f"fails: {self.counterexample}"
