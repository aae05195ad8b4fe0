import json
from pathlib import Path

import pytest

from unisep.cli import main

CORPUS = Path(__file__).resolve().parents[1] / "corpus"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_typecheck_ok(capsys):
    code, out, _ = run(capsys, "typecheck", CORPUS / "refine" / "alloc_free.ul")
    assert code == 0 and out.strip().endswith(": ok")


def test_typecheck_reused(capsys):
    path = CORPUS / "reject" / "reuse_pair.ul"
    code, out, _ = run(capsys, "typecheck", path)
    assert code == 1
    lines = out.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith(f"{path}:3:") and "ReusedLinear" in lines[0]


def test_typecheck_missing_file(capsys):
    code, _, err = run(capsys, "typecheck", "does/not/exist.ul")
    assert code == 2 and "cannot read" in err


def test_typecheck_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.ul"
    bad.write_text("fn main(u: Unit) -> Int { let = 1 }")
    code, _, err = run(capsys, "typecheck", bad)
    assert code == 2 and "1:" in err


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "check-triple", "no_such_fn")[0] == 2
    assert run(capsys, "check-frames", "swap", "--locs", "9")[0] == 2
    assert run(capsys, "check-triple", "swap", "--pre", "l1")[0] == 2
    assert run(capsys, "check-refinement")[0] == 2


def test_help_is_success(capsys):
    assert run(capsys, "--help")[0] == 0


def test_run_update(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "refine" / "alloc_free.ul", "--semantics", "update")
    assert code == 0 and out == "3\n{}\n"


def test_run_value_and_update_agree(capsys):
    path = CORPUS / "refine" / "return_ref.ul"
    _, value_out, _ = run(capsys, "run", path, "--semantics", "value")
    _, update_out, _ = run(capsys, "run", path)
    assert value_out == "box(10)\n"
    assert update_out == "box(10)\n{ℓ1 ↦ 10}\n"


def test_run_leaker_strict(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "ffi" / "leaker.ul")
    assert code == 1
    assert "FrameViolation" in out and "Leak freedom" in out and "witness: ℓ1" in out


def test_run_mutator_audit(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "ffi" / "global_mutator.ul", "--frame-mode", "audit")
    assert code == 1
    assert out.splitlines()[-1] == "frame violation in global_mutator: Inertia, witness ℓ1"


def test_run_frame_mode_off(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "ffi" / "leaker.ul", "--frame-mode", "off")
    assert code == 0 and out == "3\n{ℓ1 ↦ 3}\n"


def test_run_needs_unit_main(capsys, tmp_path):
    f = tmp_path / "arg.ul"
    f.write_text("fn main(x: Int) -> Int { x }")
    assert run(capsys, "run", f)[0] == 2


def test_check_refinement_corpus(capsys):
    code, out, _ = run(capsys, "check-refinement", CORPUS / "refine")
    n = len(list((CORPUS / "refine").glob("*.ul")))
    assert code == 0 and out.strip() == f"{n}/{n} pass"


def test_check_refinement_mutator(capsys):
    code, out, _ = run(capsys, "check-refinement", CORPUS / "ffi" / "global_mutator.ul")
    assert code == 1
    assert "0/1 pass" in out and "Inertia" in out and "witness ℓ1" in out
    assert "abstract touch : Ref Int -> Ref Int = global_mutator" in out


def test_check_refinement_random(capsys):
    code, out, _ = run(capsys, "check-refinement", "--random", 42, 50, 5)
    assert code == 0 and out.strip() == "50/50 pass"


def test_check_triple_free_box(capsys):
    code, out, _ = run(capsys, "check-triple", "free_box", "--pre", "l1", "--post")
    assert code == 0
    assert out == "{l1 |-> _} free_box {emp}\nfree_box: holds (2 checked)\n"


def test_check_triple_leaker(capsys):
    code, out, _ = run(capsys, "check-triple", "leaker", "--pre", "l1", "--post")
    assert code == 1 and "fails" in out and "store {ℓ1 ↦ 0}" in out


def test_check_triple_text(capsys):
    code, out, _ = run(capsys, "check-triple", "--triple", "{emp} alloc_one {exists l1. l1 |-> _}")
    assert code == 0 and "holds" in out
    assert run(capsys, "check-triple", "--triple", "{emp alloc_one")[0] == 2


def test_check_frames_leaker(capsys):
    code, out, _ = run(capsys, "check-frames", "leaker")
    assert code == 1
    assert out.startswith("leaker: Leak freedom violation, witness ℓ")
    assert "store {" in out


def test_check_frames_clean(capsys):
    code, out, _ = run(capsys, "check-frames", "box_incr")
    assert code == 0 and "no violations" in out


def test_prove_frames_swap(capsys):
    code, out, _ = run(capsys, "prove-frames", "swap", "--pre", "l1,l2", "--post", "l1,l2")
    assert code == 0
    assert out.splitlines()[0] == "swap: holds (p = {ℓ1, ℓ2}, p' = {ℓ1, ℓ2}; 36 stores checked)"


def test_prove_frames_premise(capsys):
    code, out, _ = run(capsys, "prove-frames", "leaker", "--pre", "l1", "--post")
    assert code == 1 and "footprint triple fails" in out


def test_json_records(capsys):
    code, out, _ = run(capsys, "--format", "json", "check-frames", "leaker")
    rec = json.loads(out)
    assert code == 1 and rec["verdict"] == "fails"
    assert rec["violations"][0]["condition"] == "Leak freedom"
    assert rec["violations"][0]["witness"].startswith("ℓ")

    code, out, _ = run(capsys, "--format", "json", "check-refinement", CORPUS / "refine")
    records = [json.loads(line) for line in out.splitlines()]
    assert len(records) == len(list((CORPUS / "refine").glob("*.ul")))
    assert all(r["verdict"] == "holds" and r["witness"] is None for r in records)

    code, out, _ = run(capsys, "--format", "json", "prove-frames", "swap", "--pre", "l1,l2", "--post", "l1,l2")
    rec = json.loads(out)
    assert rec["verdict"] == "holds" and rec["checked"] == 36


@pytest.mark.parametrize("path", sorted((CORPUS / "reject").glob("*.ul")), ids=lambda p: p.stem)
def test_typecheck_rejects(capsys, path):
    code, out, _ = run(capsys, "typecheck", path)
    assert code == 1 and len(out.strip().splitlines()) == 1
