"""Illumination correction (dark channel prior) and Gaussian high-pass vessel enhancement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessParams:
    dark_patch: int = 7
    atmosphere_quantile: float = 0.999
    transmission_floor: float = 0.1
    hp_sigma: float = 10.0

    def __post_init__(self):
        if int(self.dark_patch) != self.dark_patch or self.dark_patch < 1:
            raise ValueError(f"dark_patch must be an integer >= 1, got {self.dark_patch}")
        if not 0.0 < self.atmosphere_quantile <= 1.0:
            raise ValueError(f"atmosphere_quantile must lie in (0, 1], got {self.atmosphere_quantile}")
        if not 0.0 < self.transmission_floor < 1.0:
            raise ValueError(f"transmission_floor must lie in (0, 1), got {self.transmission_floor}")
        if not self.hp_sigma > 0:
            raise ValueError(f"hp_sigma must be positive, got {self.hp_sigma}")


def dark_channel(rgb, half_size: int) -> np.ndarray:
    """Minimum over color channels and over a (2*half_size+1)^2 window."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return ndimage.minimum_filter(rgb.min(axis=2), size=2 * half_size + 1, mode="nearest")


def bright_reference(rgb, dark, quantile: float) -> np.ndarray:
    """Per-channel mean color of the pixels in the top quantile of the dark channel."""
    cut = np.quantile(dark, quantile)
    sel = dark >= cut
    return np.asarray(rgb, dtype=np.float64)[sel].mean(axis=0)


def correct_illumination(rgb, params: PreprocessParams | None = None) -> np.ndarray:
    """Homogenize illumination of an RGB image with values in [0, 1].

    The transmission estimate is ``1 - dark / max(A)`` floored at
    ``params.transmission_floor``, and each channel is recovered as
    ``(I - A (1 - T)) / T``, clamped to [0, 1].
    """
    params = params or PreprocessParams()
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError(f"expected a nonempty (H, W, 3) image, got {rgb.shape}")
    dark = dark_channel(rgb, params.dark_patch)
    atmosphere = bright_reference(rgb, dark, params.atmosphere_quantile)
    if np.any(atmosphere <= 0):
        raise PreprocessError(f"degenerate bright reference {atmosphere.tolist()}")
    transmission = np.maximum(1.0 - dark / atmosphere.max(), params.transmission_floor)
    t = transmission[..., None]
    out = (rgb - atmosphere * (1.0 - t)) / t
    return np.clip(out, 0.0, 1.0)


def highpass(gray, sigma: float) -> np.ndarray:
    gray = np.asarray(gray, dtype=np.float64)
    return gray - ndimage.gaussian_filter(gray, sigma, mode="reflect")


def enhance_vessels(gray, hp_sigma: float = 10.0) -> np.ndarray:
    """Subtract the Gaussian blur and rescale the result to [0, 1].

    A result without dynamic range (constant input) becomes a uniform 0.5 map.
    """
    if not hp_sigma > 0:
        raise ValueError(f"hp_sigma must be positive, got {hp_sigma}")
    hp = highpass(gray, hp_sigma)
    lo, hi = hp.min(), hp.max()
    if hi - lo <= 1e-12:
        return np.full(hp.shape, 0.5)
    return (hp - lo) / (hi - lo)


def enhance_vessels_rgb(rgb, hp_sigma: float = 10.0) -> np.ndarray:
    """Per-channel variant of :func:`enhance_vessels` for network-style inputs."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.stack([enhance_vessels(rgb[..., c], hp_sigma) for c in range(3)], axis=-1)
