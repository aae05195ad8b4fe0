import pytest

from unisep.ffi import (
    DISJOINTNESS,
    IDENTITY,
    POOL,
    builtin_catalog,
    canonical_arg,
    candidate_args,
    default_input_locs,
    default_registry,
    instrument_call,
    minimal_store,
    nominal_footprints,
    sweep,
)
from unisep.heap import CONDITIONS, FootprintError, Store, footprint_of
from unisep.seplogic import DEFAULT_UNIVERSE
from unisep.syntax import UNIT, AbstractT
from unisep.values import AbstractV, BoxP, IntP, IntV, Loc, Location, PairP, PairV, UnitV, locset

l1, l2, l3 = Location(1), Location(2), Location(3)
REG = default_registry()
STORES = list(DEFAULT_UNIVERSE.stores())


def test_box_incr_call():
    result, s, report = instrument_call(REG["box_incr"], Loc(l1), Store.of(l1=IntV(3)))
    assert (result, s) == (Loc(l1), Store.of(l1=IntV(4)))
    assert report.ok


def test_leaker_call():
    result, s, report = instrument_call(REG["leaker"], Loc(l1), Store.of(l1=IntV(3)))
    assert (result, s) == (IntV(3), Store.of(l1=IntV(3)))
    assert report.failed() == {"Leak freedom": l1}


def test_swap_call():
    arg = PairV(Loc(l1), Loc(l2))
    result, s, report = instrument_call(REG["swap"], arg, Store.of(l1=IntV(1), l2=IntV(2)))
    assert result == arg and s == Store.of(l1=IntV(2), l2=IntV(1))
    assert report.ok


def test_global_mutator_call():
    _, s, report = instrument_call(REG["global_mutator"], Loc(l2), Store.of(l1=IntV(0), l2=IntV(5)))
    assert s == Store.of(l1=IntV(1), l2=IntV(5))
    assert report.failed() == {"Inertia": l1}


def test_resurrector_second_call():
    f = REG["resurrector"]
    f.reset()
    r1, s1, rep1 = instrument_call(f, UnitV(), Store())
    r2, s2, rep2 = instrument_call(f, UnitV(), s1)
    assert rep1.ok and r1 == r2 == Loc(l1)
    assert rep2.failed() == {"Fresh allocation": l1}
    f.reset()


def test_aliaser_rejected_at_call():
    with pytest.raises(FootprintError) as ei:
        instrument_call(REG["aliaser"], UnitV(), Store())
    assert (ei.value.kind, ei.value.location) == ("Alias", l1)


def test_catalog_contents():
    cat = builtin_catalog()
    assert len(cat) >= 9
    names = {f.name for f in cat}
    assert {"box_incr", "swap", "alloc_one", "free_box", "mk_abs", "use_abs",
            "leaker", "resurrector", "global_mutator", "aliaser"} <= names
    behaviour = {f.name: f.violates for f in cat}
    assert behaviour["leaker"] == "Leak freedom"
    assert behaviour["resurrector"] == "Fresh allocation"
    assert behaviour["global_mutator"] == "Inertia"
    assert behaviour["aliaser"] == DISJOINTNESS
    assert all(f.pure_model is not None for f in cat if f.well_behaved)


def test_catalog_is_fresh_per_call():
    a, b = builtin_catalog(), builtin_catalog()
    ra = next(f for f in a if f.name == "resurrector")
    rb = next(f for f in b if f.name == "resurrector")
    ra.update_model(UnitV(), Store(), frozenset())
    _, s = rb.update_model(UnitV(), Store.of(l1=IntV(0)), frozenset())
    assert s.dom() == locset(1, 2)


def test_mk_abs_internal_aliasing_allowed():
    result, s, report = instrument_call(REG["mk_abs"], IntV(7), Store())
    assert result == AbstractV(POOL, locset(1, 2))
    assert s[l2] == PairV(Loc(l1), Loc(l1))  # header points at the data cell twice
    assert footprint_of(result, AbstractT(POOL), s) == locset(1, 2)
    assert report.ok


def test_use_abs_frees_everything():
    obj, s, _ = instrument_call(REG["mk_abs"], IntV(7), Store())
    n, s2, report = instrument_call(REG["use_abs"], obj, s)
    assert n == IntV(7) and s2 == Store() and report.ok


def test_pure_models():
    assert REG["box_incr"].pure_model(BoxP(IntP(1))) == BoxP(IntP(2))
    assert REG["swap"].pure_model(PairP(BoxP(IntP(1)), BoxP(IntP(2)))) == PairP(BoxP(IntP(2)), BoxP(IntP(1)))
    assert REG["free_box"].pure_model(BoxP(IntP(4))) == IntP(4)


def test_canonical_arguments():
    assert canonical_arg(UNIT, []) == UnitV()
    f = REG["swap"]
    assert default_input_locs(f) == [l1, l2]
    arg, p, p_out = nominal_footprints(f, [l1, l2])
    assert arg == PairV(Loc(l1), Loc(l2)) and p == p_out == locset(1, 2)
    assert minimal_store(arg, f.arg_type) == Store.of(l1=IntV(0), l2=IntV(0))
    with pytest.raises(ValueError):
        canonical_arg(f.arg_type, [l1])


def test_candidate_args_respect_disjointness():
    s = Store.of(l1=IntV(0), l2=IntV(0))
    args = candidate_args(REG["swap"].arg_type, s)
    assert PairV(Loc(l1), Loc(l2)) in args
    assert PairV(Loc(l1), Loc(l1)) not in args


def test_identity_transformer():
    s = Store.of(l1=IntV(1))
    assert IDENTITY(s) == s


@pytest.mark.parametrize("f", REG.well_behaved(), ids=lambda f: f.name)
def test_well_behaved_sweep_clean(f):
    res = sweep(f, STORES)
    assert res.clean, res.flags[:3]
    assert res.calls > 0


@pytest.mark.parametrize("f", REG.violators(), ids=lambda f: f.name)
def test_violator_flags_exactly_its_condition(f):
    res = sweep(f, STORES)
    assert res.conditions() == {f.violates}
    flag = res.first(f.violates)
    assert isinstance(flag.witness, Location)
    assert f.violates in CONDITIONS + (DISJOINTNESS,)


def test_transformer_resets_hidden_state():
    t = REG["resurrector"].transformer(UnitV())
    _, s1 = t.run(Store())
    _, s2 = t.run(s1)
    assert s2.dom() == locset(1, 2)
