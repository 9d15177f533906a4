import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topovessel.metrics import av_classification_metrics, branch_detection_rate, tree_length_rate
from topovessel.skeletal import branch_decompose, thin
from topovessel.synthgen import SynthError, TreeSpec, generate, perturb


def test_depth_zero_single_branch():
    t = generate(TreeSpec(depth=0))
    assert t.n_branches == 1


def test_depth_one_three_branches():
    t = generate(TreeSpec(depth=1, seed=4))
    assert t.n_branches == 3
    assert int(t.junctions.sum()) == 1


def test_same_seed_bit_identical():
    a, b = generate(TreeSpec(seed=11)), generate(TreeSpec(seed=11))
    for name in ("mask", "centerline", "branch_labels", "junctions"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_different_seeds_differ():
    assert not np.array_equal(generate(TreeSpec(seed=1)).mask, generate(TreeSpec(seed=2)).mask)


@given(st.integers(0, 10_000), st.integers(0, 2))
@settings(max_examples=30)
def test_truth_invariants(seed, depth):
    t = generate(TreeSpec(seed=seed, depth=depth))
    assert not np.any(t.centerline & ~t.mask)
    assert t.n_branches == 2 ** (depth + 1) - 1
    assert set(np.unique(t.branch_labels)) - {0} == set(range(1, t.n_branches + 1))
    assert t.to_json()["seed"] == seed


@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_thinned_mask_follows_recorded_centerline(seed):
    t = generate(TreeSpec(seed=seed))
    assert tree_length_rate(thin(t.mask), t.centerline) >= 90.0


@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_branch_count_recovered(seed):
    t = generate(TreeSpec(seed=seed))
    assert branch_decompose(thin(t.mask)).n_branches == t.n_branches


def test_too_small_canvas():
    with pytest.raises(SynthError):
        generate(TreeSpec(depth=3, canvas=(16, 16), max_retries=20))


@pytest.mark.parametrize(
    "kw",
    [
        dict(depth=-1),
        dict(arm_length=(6, 3)),
        dict(width=0),
        dict(width=(3, 0)),
        dict(canvas=(4, 40)),
        dict(bend=-0.1),
        dict(n_trees=0),
        dict(split_angle=(0.9, 0.5)),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        TreeSpec(**kw)


def test_two_trees_get_both_classes():
    t = generate(TreeSpec(seed=3, n_trees=2, canvas=(128, 128)))
    assert set(t.branch_class) == {"arteriole", "venule"}
    gt = t.ground_truth()
    assert gt.arteriole.any() and gt.venule.any() and not (gt.arteriole & gt.venule).any()


# --- perturbations ----------------------------------------------------------------------


def single_branch():
    return generate(TreeSpec(depth=0, arm_length=(20, 0), seed=2))


def test_gap_of_four_on_twenty_pixels():
    t = single_branch()
    assert int(t.centerline.sum()) == 20
    pert = perturb(t, "gap", length=4)
    assert pert.expected["tree_length_rate"] == 80.0
    assert tree_length_rate(pert.pred_vessel, t.centerline) == 80.0


def test_erase_branch_on_y():
    t = generate(TreeSpec(depth=1, seed=5))
    pert = perturb(t, "erase_branch", branch=2)
    assert pert.expected["branch_rate"] == pytest.approx(200 / 3)
    assert branch_detection_rate(pert.pred_vessel, t.branches(), 0.8) == pytest.approx(200 / 3)


def test_identity_has_no_deltas():
    t = generate(TreeSpec(seed=6))
    pert = perturb(t)
    assert pert.expected["tree_length_rate"] == 100.0
    assert pert.expected["branch_rate"] == 100.0
    assert pert.expected["removed_pixels"] == 0
    np.testing.assert_array_equal(pert.pred_vessel, t.mask)


def test_swap_labels_accuracy():
    t = generate(TreeSpec(seed=8, n_trees=2, canvas=(128, 128)))
    region = np.zeros(t.shape, bool)
    region[:, :64] = True
    pert = perturb(t, "swap_labels", region=region)
    _, acc, _ = av_classification_metrics(pert.pred_arteriole, pert.pred_venule, t.ground_truth())
    assert acc == pytest.approx(pert.expected["acc_all"], abs=1e-12)
    everything = perturb(t, "swap_labels", region=np.ones(t.shape, bool))
    assert everything.expected["acc_all"] == 0.0


def test_perturb_errors():
    t = generate(TreeSpec(depth=1, seed=5))
    with pytest.raises(IndexError):
        perturb(t, "erase_branch", branch=4)
    with pytest.raises(IndexError):
        perturb(t, "gap", branch=0, length=2)
    with pytest.raises(ValueError):
        perturb(t, "gap", branch=1, length=10_000)
    with pytest.raises(ValueError):
        perturb(t, "melt")
