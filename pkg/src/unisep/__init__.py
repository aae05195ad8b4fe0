"""A small uniqueness-typed language with two semantics, frame-condition
instrumentation for foreign functions, and a bounded separation-logic
checker for the footprint triple."""

from .checker import Kind, TypeCheckError, TypedProgram, check_program, kind_of
from .evaluator import EvalError, check_refinement, eval_update, eval_value, reify
from .ffi import AbstractFn, Registry, StoreTransformer, builtin_catalog, default_registry, instrument_call
from .heap import FootprintError, FrameReport, Store, StoreError, alloc, check_frame_conditions, dealloc, footprint_of
from .seplogic import (
    Emp,
    PointsTo,
    PointsToAny,
    Pure,
    Star,
    Triple,
    Universe,
    Wand,
    check_frame_rule,
    check_triple,
    footprint_triple,
    satisfies,
    satisfies_bounded,
    triple_implies_frames,
)
from .syntax import parse_expr, parse_program, print_expr, print_program
from .verdict import Counterexample, Verdict

__version__ = "0.1.0"
