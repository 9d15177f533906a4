import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from topovessel import oracles
from topovessel.skeletal import (
    GeodesicError,
    branch_decompose,
    geodesic_distance,
    junction_nodes,
    neighbor_count,
    thin,
)

EIGHT = np.ones((3, 3), dtype=bool)
blobs = arrays(bool, (14, 14), elements=st.booleans())


def components(m):
    return ndimage.label(m, structure=EIGHT)


# --- thinning -------------------------------------------------------------------------


def test_thin_line_unchanged():
    m = np.zeros((7, 12), dtype=bool)
    m[3, 1:11] = True
    np.testing.assert_array_equal(thin(m), m)


def test_thin_square():
    m = np.zeros((13, 13), dtype=bool)
    m[2:11, 2:11] = True
    t = thin(m)
    assert 0 < t.sum() <= 17
    assert components(t)[1] == 1
    assert not np.any(t & ~m)


def test_thin_empty():
    assert not thin(np.zeros((5, 5), dtype=bool)).any()


def test_thin_is_one_pixel_wide_on_thick_bar():
    m = np.zeros((9, 30), dtype=bool)
    m[2:7, 2:28] = True
    t = thin(m)
    assert np.all(t.sum(axis=0) <= 1)


@given(blobs)
def test_thin_properties(m):
    t = thin(m)
    assert not np.any(t & ~m)
    np.testing.assert_array_equal(thin(t), t)
    labels, n = components(m)
    for i in range(1, n + 1):
        assert components(t & (labels == i))[1] == 1


# --- geodesic distance ----------------------------------------------------------------


def test_corridor_walls_at_unit_distance():
    g, skel = oracles.bar_instance()
    d = geodesic_distance(g, skel).dist
    np.testing.assert_array_equal(d[skel], 0.0)
    np.testing.assert_array_equal(d[[1, 3], 1:21], 1.0)


def test_open_grid_close_to_euclidean():
    from topovessel.acceptance import open_grid_error

    assert open_grid_error() <= 0.4


def l_corridor(width):
    m = np.zeros((40, 40), dtype=bool)
    m[3 : 3 + width, 3:36] = True
    m[3:36, 36 - width : 36] = True
    seeds = np.zeros_like(m)
    seeds[3 : 3 + width, 3] = True
    return m, seeds


@pytest.mark.parametrize("width", [1, 3, 5, 7])
def test_l_corridor_matches_chamfer_oracle(width):
    m, seeds = l_corridor(width)
    fast = geodesic_distance(m, seeds).dist
    ref = oracles.chamfer_dijkstra(m, seeds)
    np.testing.assert_array_equal(np.isfinite(fast), np.isfinite(ref))
    sel = np.isfinite(ref) & (ref > 0)
    assert np.max(np.abs(fast[sel] - ref[sel]) / ref[sel]) <= 0.05


def test_geodesic_errors():
    m = np.ones((4, 4), dtype=bool)
    with pytest.raises(GeodesicError):
        geodesic_distance(m, np.zeros_like(m))
    with pytest.raises(ValueError):
        geodesic_distance(m, np.ones((3, 3), dtype=bool))
    with pytest.raises(ValueError):
        geodesic_distance(m, m, order=3)


def test_unreachable_pixels_stay_infinite():
    m = np.zeros((5, 9), dtype=bool)
    m[:, :3] = True
    m[:, 6:] = True
    seeds = np.zeros_like(m)
    seeds[2, 0] = True
    f = geodesic_distance(m, seeds)
    assert np.all(np.isinf(f.dist[:, 6:])) and not f.reached[:, 6:].any()
    assert np.all(np.isinf(f.dist[~m]))


@given(blobs, st.integers(0, 10_000))
def test_geodesic_field_invariants(m, seed):
    if not m.any():
        return
    rng = np.random.default_rng(seed)
    seeds = np.zeros_like(m)
    idx = np.flatnonzero(m)
    seeds.flat[rng.choice(idx, size=min(2, len(idx)), replace=False)] = True
    f = geodesic_distance(m, seeds)
    d = f.dist
    np.testing.assert_array_equal(d == 0, seeds & m)
    np.testing.assert_array_equal(np.isfinite(d), f.reached)
    padded = np.pad(d, 1, constant_values=np.inf)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = padded[1 + dr : 1 + dr + d.shape[0], 1 + dc : 1 + dc + d.shape[1]]
        sel = f.reached & np.isfinite(nb)
        assert np.all(d[sel] <= nb[sel] + 1 + 1e-9)


# --- branches -------------------------------------------------------------------------


def y_shape():
    s = np.zeros((31, 31), dtype=bool)
    c = 15
    s[c, c] = True
    for i in range(1, 11):
        s[c - i, c] = True
        s[c + i, c - i] = True
        s[c + i, c + i] = True
    return s


def plus_shape():
    s = np.zeros((25, 25), dtype=bool)
    s[12, 2:23] = True
    s[2:23, 12] = True
    return s


def test_line_is_one_branch():
    s = np.zeros((5, 15), dtype=bool)
    s[2, 2:13] = True
    b = branch_decompose(s)
    assert (b.n_branches, int(b.junctions.sum()), int(b.endpoints.sum())) == (1, 0, 2)


def test_y_shape():
    b = branch_decompose(y_shape())
    assert b.n_branches == 3
    assert int(b.junctions.sum()) == 1 and junction_nodes(b) == 1
    assert int(b.endpoints.sum()) == 3
    np.testing.assert_array_equal(b.branch_sizes(), [10, 10, 10])


def test_plus_shape():
    b = branch_decompose(plus_shape())
    assert b.n_branches == 4
    assert junction_nodes(b) == 1
    assert int(b.endpoints.sum()) == 4


def test_labels_follow_raster_order():
    b = branch_decompose(y_shape())
    first = [np.flatnonzero(b.labels.ravel() == i)[0] for i in range(1, b.n_branches + 1)]
    assert first == sorted(first)


def test_neighbor_count_zero_off_skeleton():
    s = plus_shape()
    n = neighbor_count(s)
    assert not n[~s].any()


@given(blobs)
def test_branch_pixel_identity_and_label_range(m):
    skel = thin(m)
    b = branch_decompose(skel)
    assert int(b.branch_sizes().sum()) + int(b.junctions.sum()) == int(skel.sum())
    assert set(np.unique(b.labels)) - {0} == set(range(1, b.n_branches + 1))
    for i in range(1, b.n_branches + 1):
        assert components(b.labels == i)[1] == 1


@given(blobs, st.integers(0, 6), st.integers(0, 6))
def test_branch_count_translation_invariant(m, dy, dx):
    skel = thin(m)
    moved = np.zeros((14 + 6, 14 + 6), dtype=bool)
    moved[dy : dy + 14, dx : dx + 14] = skel
    assert branch_decompose(moved).n_branches == branch_decompose(skel).n_branches
