import json
import subprocess
import sys

import numpy as np
import pytest

from topovessel import io
from topovessel.cli import main
from topovessel.raster import encode_rite_label
from topovessel.synthgen import TreeSpec, generate


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture
def dataset(tmp_path):
    """Two synthetic label images and perfect predictions for them."""
    gt_dir, pred_dir = tmp_path / "gt", tmp_path / "pred"
    gt_dir.mkdir()
    pred_dir.mkdir()
    for i, seed in enumerate((1, 2)):
        truth = generate(TreeSpec(seed=seed, n_trees=2, canvas=(128, 128)))
        gt = truth.ground_truth()
        io.write_png(gt_dir / f"img{i}.png", encode_rite_label(gt))
        for c in ("arteriole", "venule", "vessel"):
            io.write_png(pred_dir / f"img{i}_{c}.png", gt.channel(c))
    return tmp_path


def test_metrics_on_perfect_predictions(capsys, dataset):
    code, manifest, _ = run(capsys, "metrics", "--pred-dir", dataset / "pred", "--gt-dir", dataset / "gt",
                            "--json", dataset / "m.json", "--csv", dataset / "m.csv")
    assert code == 0 and manifest["schema"] == 1
    pooled = manifest["results"]["pooled"]
    for key in ("f1_all", "acc_all", "acc_centerline", "vessel_rate", "tree_length_rate", "branch_rate"):
        assert pooled[key] == 100.0
    assert len(manifest["results"]["images"]) == 2
    assert json.loads((dataset / "m.json").read_text())["pooled"] == pooled
    assert (dataset / "m.csv").read_text().splitlines()[0].startswith("name,f1_all")


def test_metrics_size_mismatch_exit_2(capsys, dataset):
    io.write_png(dataset / "pred" / "img0_venule.png", np.zeros((40, 50)))
    code, manifest, err = run(capsys, "metrics", "--pred-dir", dataset / "pred", "--gt-dir", dataset / "gt")
    assert code == 2 and manifest is None
    assert "(128, 128)" in err and "(40, 50)" in err


def test_loss_on_identical_inputs(capsys, tmp_path):
    truth = generate(TreeSpec(seed=3, n_trees=2, canvas=(128, 128)))
    gt = truth.ground_truth()
    io.write_png(tmp_path / "gt.png", encode_rite_label(gt))
    for c in ("arteriole", "venule", "vessel"):
        io.write_raw(tmp_path / f"{c}.f64", gt.channel(c).astype(float))
    code, manifest, _ = run(capsys, "loss", "--pred-dir", tmp_path, "--gt", tmp_path / "gt.png")
    assert code == 0
    assert manifest["results"]["total"] < 1e-3
    assert set(manifest["results"]["per_class"]) == {"arteriole", "venule", "vessel"}


def test_missing_file_exit_3(capsys, tmp_path):
    code, _, err = run(capsys, "skeleton", "--in", tmp_path / "nope.png", "--out", tmp_path / "s.png")
    assert code == 3 and "nope.png" in err


def test_bad_config_value_names_field(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[preprocess]\nhp_sigma = wide\n")
    code, _, err = run(capsys, "preprocess", "--config", cfg, "--in", "x.png", "--out", "y.png")
    assert code == 2 and "hp_sigma" in err


def test_invalid_value_names_field(capsys, tmp_path):
    code, _, err = run(capsys, "synth", "--out-dir", tmp_path, "--depth", "-1")
    assert code == 2 and "depth" in err
    code, _, err = run(capsys, "cakebank", "--out-dir", tmp_path, "--n", "5")
    assert code == 2 and "n_orientations" in err


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[synthgen]\ncolour = red\n")
    code, _, err = run(capsys, "synth", "--config", cfg, "--out-dir", tmp_path)
    assert code == 2 and "colour" in err


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[synthgen]\nseed = 5\ndepth = 1\n")
    code, manifest, _ = run(capsys, "synth", "--config", cfg, "--out-dir", tmp_path / "s", "--seed", 9)
    assert code == 0
    assert manifest["params"]["seed"] == 9 and manifest["params"]["depth"] == 1
    assert manifest["results"]["n_branches"] == 3


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["preprocess", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "(default: 7)" in out and "(default: 10.0)" in out


def test_synth_skeleton_geodist_roundtrip(capsys, tmp_path):
    code, manifest, _ = run(capsys, "synth", "--out-dir", tmp_path, "--seed", 4)
    assert code == 0
    names = [o["path"] for o in manifest["outputs"]]
    assert [n.rsplit("/", 1)[-1] for n in names] == ["mask.png", "centerline.png", "labels.png", "truth.json"]
    truth = json.loads((tmp_path / "truth.json").read_text())
    code, manifest, _ = run(capsys, "skeleton", "--in", tmp_path / "mask.png", "--out", tmp_path / "skel.png",
                            "--labels", tmp_path / "branches.png")
    assert code == 0 and manifest["results"]["n_branches"] == truth["n_branches"]
    code, manifest, _ = run(capsys, "geodist", "--mask", tmp_path / "mask.png", "--seeds", tmp_path / "skel.png",
                            "--out", tmp_path / "d.f64")
    assert code == 0
    d = io.read_raw(tmp_path / "d.f64")
    mask = io.read_png(tmp_path / "mask.png") > 0.5
    assert np.array_equal(np.isfinite(d), mask)
    assert manifest["results"]["max_distance"] == pytest.approx(d[mask].max())


def test_roc_csv(capsys, tmp_path):
    rng = np.random.default_rng(0)
    gt = rng.random((20, 20)) < 0.5
    io.write_png(tmp_path / "gt.png", gt)
    io.write_raw(tmp_path / "p.f64", gt.astype(float))
    code, manifest, _ = run(capsys, "roc", "--pred", tmp_path / "p.f64", "--gt", tmp_path / "gt.png",
                            "--csv", tmp_path / "roc.csv")
    assert code == 0 and manifest["results"]["auc"] == 1.0
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and lines[-1] == "auc,1.0"


def test_cakebank_and_scores(capsys, tmp_path):
    code, manifest, _ = run(capsys, "cakebank", "--n", 24, "--size", 7, "--out-dir", tmp_path / "bank")
    assert code == 0 and manifest["results"]["n_kernels"] == 24
    assert len(list((tmp_path / "bank").glob("kernel_*.f64"))) == 24
    img = np.zeros((30, 30))
    img[:, 15] = 1.0
    io.write_png(tmp_path / "bar.png", img)
    code, manifest, _ = run(capsys, "orientation-scores", "--image", tmp_path / "bar.png",
                            "--bank", tmp_path / "bank", "--out", tmp_path / "scores")
    assert code == 0
    assert io.read_raw(tmp_path / "scores" / "score_00.f64").shape == (30, 30)


def test_preprocess_writes_both_images(capsys, tmp_path):
    rgb = np.random.default_rng(1).random((24, 32, 3))
    io.write_png(tmp_path / "in.png", rgb)
    code, manifest, _ = run(capsys, "preprocess", "--in", tmp_path / "in.png", "--out", tmp_path / "out.png",
                            "--hp-sigma", 3)
    assert code == 0
    assert io.read_png(tmp_path / "out.png").shape == (24, 32, 3)
    assert io.read_png(tmp_path / "out_enhanced.png").shape == (24, 32)


def test_grad_check_small(capsys):
    code, manifest, _ = run(capsys, "grad-check", "--seeds", 2)
    assert code == 0 and manifest["results"]["passed"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "topovessel", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "selftest" in proc.stdout


def test_selftest_passes_on_clean_checkout(capsys):
    code, manifest, err = run(capsys, "selftest")
    assert manifest["results"]["total"] == 9
    assert code == 0, err
