import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topovessel.preprocess import (
    PreprocessError,
    PreprocessParams,
    correct_illumination,
    dark_channel,
    enhance_vessels,
    enhance_vessels_rgb,
)


def test_uniform_gray_stays_uniform():
    out = correct_illumination(np.full((20, 30, 3), 0.5))
    assert np.ptp(out) == 0.0


def test_all_white_is_identity():
    img = np.ones((16, 16, 3))
    np.testing.assert_allclose(correct_illumination(img), img, atol=1e-9)


def test_black_image_has_degenerate_reference():
    with pytest.raises(PreprocessError):
        correct_illumination(np.zeros((8, 8, 3)))


def haze_ramp_image(seed=0, t_low=0.3):
    """Textured scene with a dark blue channel, seen through a veil whose
    transmission ramps linearly across the columns."""
    rng = np.random.default_rng(seed)
    h, w = 64, 96
    tex = 0.03 * rng.standard_normal((h, w))
    scene = np.stack([0.6 + tex, 0.3 + tex, np.zeros((h, w))], axis=-1).clip(0, 1)
    t = (t_low + (1 - t_low) * np.linspace(0, 1, w))[None, :, None]
    return scene * t + (1 - t)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_brightness_ramp_reduces_green_spread(seed):
    img = haze_ramp_image(seed)
    out = correct_illumination(img)
    assert out[..., 1].std() < img[..., 1].std()


def test_output_in_unit_range():
    img = np.random.default_rng(3).random((24, 24, 3))
    out = correct_illumination(img)
    assert out.min() >= 0 and out.max() <= 1


def test_dark_channel_is_windowed_channel_minimum():
    img = np.ones((9, 9, 3))
    img[4, 4, 2] = 0.2
    d = dark_channel(img, 1)
    assert d[3:6, 3:6].max() == 0.2 and d[0, 0] == 1.0


@pytest.mark.parametrize(
    "kw",
    [
        dict(dark_patch=0),
        dict(atmosphere_quantile=0.0),
        dict(atmosphere_quantile=1.5),
        dict(transmission_floor=0.0),
        dict(transmission_floor=1.0),
        dict(hp_sigma=0.0),
    ],
)
def test_params_validated(kw):
    with pytest.raises(ValueError):
        PreprocessParams(**kw)


def test_rejects_non_rgb():
    with pytest.raises(ValueError):
        correct_illumination(np.zeros((4, 4)))


def test_constant_enhances_to_half():
    np.testing.assert_array_equal(enhance_vessels(np.full((10, 12), 0.3)), 0.5)


def test_bright_line_sign_structure():
    img = np.zeros((101, 101))
    img[:, 50] = 1.0
    out = enhance_vessels(img, hp_sigma=5.0)
    assert np.all(out[:, 50] > 0.5)
    far = out[:, :10]
    assert abs(far.mean() - out.mean()) < 0.02
    assert far.max() < 0.5


def test_low_frequencies_attenuated():
    sigma = 5.0
    n = 400
    x = np.arange(n)
    slow = np.sin(2 * np.pi * x / 200.0)
    fast = np.sin(2 * np.pi * x / (2 * sigma))
    img = np.tile(slow + fast, (8, 1))
    out = enhance_vessels(img, hp_sigma=sigma)[4]
    centered = out - out.mean()
    amp_slow = abs(np.dot(centered, np.exp(-2j * np.pi * x / 200.0))) * 2 / n
    amp_fast = abs(np.dot(centered, np.exp(-2j * np.pi * x / (2 * sigma)))) * 2 / n
    assert amp_slow <= 0.5 * amp_fast


@given(arrays(np.float64, (12, 15), elements=st.floats(-5, 5)), st.floats(0.5, 20))
def test_enhanced_output_in_unit_range(img, sigma):
    out = enhance_vessels(img, sigma)
    assert out.min() >= 0.0 and out.max() <= 1.0


@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 10_000))
def test_enhancement_commutes_with_translation(dy, dx, seed):
    sigma = 2.0
    margin = int(4 * sigma) + 6
    img = np.zeros((64, 64))
    img[margin:-margin, margin:-margin] = np.random.default_rng(seed).random((64 - 2 * margin,) * 2)
    moved = np.roll(img, (dy, dx), axis=(0, 1))
    a = np.roll(enhance_vessels(img, sigma), (dy, dx), axis=(0, 1))
    b = enhance_vessels(moved, sigma)
    inner = (slice(int(4 * sigma), -int(4 * sigma)),) * 2
    np.testing.assert_allclose(a[inner], b[inner], atol=1e-9)


def test_rgb_variant_matches_per_channel():
    img = np.random.default_rng(4).random((20, 20, 3))
    out = enhance_vessels_rgb(img, 3.0)
    for c in range(3):
        np.testing.assert_array_equal(out[..., c], enhance_vessels(img[..., c], 3.0))


def test_enhance_rejects_bad_sigma():
    with pytest.raises(ValueError):
        enhance_vessels(np.zeros((4, 4)), 0.0)
