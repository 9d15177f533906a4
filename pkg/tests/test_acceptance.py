"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import contextlib
import io as _io
from pathlib import Path

import numpy as np
import pytest

from topovessel import acceptance, io
from topovessel.cli import main
from topovessel.raster import encode_rite_label
from topovessel.synthgen import TreeSpec, generate


def report(capsys, result):
    with capsys.disabled():
        print("\n" + result.line())


@pytest.mark.parametrize("number", sorted(acceptance.CHECKS))
def test_criterion(number, capsys):
    result = acceptance.run_check(number)
    report(capsys, result)
    assert result.passed, result.line()
    assert result.within_budget, f"criterion {number} took {result.elapsed:.2f}s, budget {result.budget}s"


# --- 10. determinism -----------------------------------------------------------------


def prepare_inputs(root: Path):
    truth = generate(TreeSpec(seed=7, n_trees=2, canvas=(128, 128)))
    gt = truth.ground_truth()
    (root / "gt").mkdir()
    (root / "pred").mkdir()
    for i in range(3):
        io.write_png(root / "gt" / f"img{i}.png", encode_rite_label(gt))
        rng = np.random.default_rng(i)
        for c in ("arteriole", "venule", "vessel"):
            noisy = np.clip(gt.channel(c) * 0.8 + 0.2 * rng.random(gt.shape), 0, 1)
            io.write_raw(root / "pred" / f"img{i}_{c}.f64", noisy)
    (root / "loss").mkdir()
    for c in ("arteriole", "venule", "vessel"):
        io.write_raw(root / "loss" / f"{c}.f64", io.read_raw(root / "pred" / f"img0_{c}.f64"))
    io.write_png(root / "gt.png", encode_rite_label(gt))
    io.write_png(root / "vessel.png", gt.vessel)
    io.write_png(root / "fundus.png", np.random.default_rng(9).random((48, 64, 3)))


COMMANDS = [
    ["selftest"],
    ["synth", "--out-dir", "synth", "--seed", "3"],
    ["skeleton", "--in", "vessel.png", "--out", "skel.png", "--labels", "branches.png"],
    ["geodist", "--mask", "vessel.png", "--seeds", "skel.png", "--out", "dist.f64"],
    ["preprocess", "--in", "fundus.png", "--out", "corrected.png"],
    ["cakebank", "--out-dir", "bank"],
    ["orientation-scores", "--image", "fundus.png", "--bank", "bank", "--out", "scores"],
    ["loss", "--pred-dir", "loss", "--gt", "gt.png"],
    ["grad-check", "--seeds", "4"],
    ["metrics", "--pred-dir", "pred", "--gt-dir", "gt", "--json", "metrics.json", "--csv", "metrics.csv"],
    ["roc", "--pred", "pred/img0_vessel.f64", "--gt", "vessel.png", "--csv", "roc.csv"],
]


def snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run_all(jobs: int) -> list[tuple[int, bytes]]:
    outputs = []
    for argv in COMMANDS:
        out = _io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(_io.StringIO()):
            code = main(argv + ["--jobs", str(jobs)])
        outputs.append((code, out.getvalue().encode()))
    return outputs


def test_criterion_10_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    prepare_inputs(tmp_path)
    first = run_all(1)
    files_first = snapshot(tmp_path)
    second = run_all(8)
    files_second = snapshot(tmp_path)
    diffs = [" ".join(argv[:1]) for argv, a, b in zip(COMMANDS, first, second) if a != b]
    diffs += [name for name in files_first if files_first[name] != files_second.get(name)]
    diffs += sorted(set(files_second) - set(files_first))
    result = acceptance.CheckResult(
        10, "byte-identical manifests and artifacts for --jobs 1 and --jobs 8", not diffs,
        {"commands": len(COMMANDS), "artifacts": len(files_first), "differences": len(diffs)},
    )
    report(capsys, result)
    assert all(code in (0, 1) for code, _ in first), [code for code, _ in first]
    assert not diffs, diffs
