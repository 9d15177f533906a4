"""Grid types, RITE label decoding, thresholding and grayscale projection.

Images are plain numpy arrays: ``(H, W)`` for scalar rasters and ``(H, W, 3)``
for RGB. Probability maps are float64 in [0, 1]; binary masks are bool.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

CLASSES = ("arteriole", "venule", "vessel")

# color -> role; roles understood by decode_rite_label
ROLES = ("arteriole", "venule", "crossing", "uncertain", "background")

LUMINANCE = (0.299, 0.587, 0.114)


class LabelDecodeError(ValueError):
    """Raised when a label image contains colors the policy does not know."""


@dataclass(frozen=True)
class LabelPolicy:
    """Color table for RITE-style arteriole/venule label images.

    ``uncertain_in_vessel`` controls whether uncertain (white by default)
    pixels count as vessel; they never enter the arteriole or venule channel.
    """

    colors: Mapping[tuple[int, int, int], str] = field(
        default_factory=lambda: {
            (255, 0, 0): "arteriole",
            (0, 0, 255): "venule",
            (0, 255, 0): "crossing",
            (255, 255, 255): "uncertain",
            (0, 0, 0): "background",
        }
    )
    uncertain_in_vessel: bool = True

    def __post_init__(self):
        for color, role in self.colors.items():
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r} for color {color}")

    def color_of(self, role: str) -> tuple[int, int, int]:
        for color, r in self.colors.items():
            if r == role:
                return color
        raise KeyError(role)


@dataclass(frozen=True)
class AVGroundTruth:
    arteriole: np.ndarray
    venule: np.ndarray
    vessel: np.ndarray
    fov: np.ndarray

    def __post_init__(self):
        shape = self.vessel.shape
        for name in ("arteriole", "venule", "vessel", "fov"):
            arr = getattr(self, name)
            if arr.shape != shape or arr.ndim != 2:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if arr.dtype != bool:
                object.__setattr__(self, name, as_mask(arr))
        if np.any((self.arteriole | self.venule) & ~self.vessel):
            raise ValueError("vessel channel must contain arteriole and venule")

    @property
    def shape(self) -> tuple[int, int]:
        return self.vessel.shape

    @property
    def crossing(self) -> np.ndarray:
        return self.arteriole & self.venule

    @property
    def uncertain(self) -> np.ndarray:
        return self.vessel & ~(self.arteriole | self.venule)

    def channel(self, name: str) -> np.ndarray:
        if name not in CLASSES:
            raise KeyError(name)
        return getattr(self, name)


def as_prob(p, name: str = "probability map") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ValueError(f"{name} must be a nonempty 2D array, got shape {p.shape}")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise ValueError(f"{name} has samples outside [0, 1]")
    return p


def as_mask(m, name: str = "mask") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{name} must be a nonempty 2D array, got shape {m.shape}")
    if m.dtype == bool:
        return m
    if not np.all((m == 0) | (m == 1)):
        raise ValueError(f"{name} must only contain 0 and 1")
    return m.astype(bool)


def check_same_shape(**arrays) -> tuple[int, ...]:
    """Raise ValueError naming every array whose shape differs from the first."""
    items = list(arrays.items())
    ref_name, ref = items[0]
    for name, arr in items[1:]:
        if np.shape(arr) != np.shape(ref):
            raise ValueError(
                f"shape mismatch: {ref_name} is {np.shape(ref)}, {name} is {np.shape(arr)}"
            )
    return np.shape(ref)


def decode_rite_label(rgb, policy: LabelPolicy | None = None, fov=None) -> AVGroundTruth:
    """Split an 8-bit RGB label image into arteriole/venule/vessel channels.

    Crossing pixels land in both the arteriole and the venule channel.
    Unknown colors raise :class:`LabelDecodeError` with per-color counts.
    """
    policy = policy or LabelPolicy()
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"label image must be (H, W, 3), got {rgb.shape}")
    rgb = rgb.astype(np.int64)
    code = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]

    role_masks = {role: np.zeros(code.shape, dtype=bool) for role in ROLES}
    known = np.zeros(code.shape, dtype=bool)
    for (r, g, b), role in policy.colors.items():
        hit = code == ((r << 16) | (g << 8) | b)
        role_masks[role] |= hit
        known |= hit
    if not known.all():
        values, counts = np.unique(code[~known], return_counts=True)
        listing = ", ".join(
            f"({v >> 16}, {(v >> 8) & 255}, {v & 255}): {c} px"
            for v, c in zip(values.tolist(), counts.tolist())
        )
        raise LabelDecodeError(f"unrecognized label colors: {listing}")

    crossing = role_masks["crossing"]
    arteriole = role_masks["arteriole"] | crossing
    venule = role_masks["venule"] | crossing
    vessel = arteriole | venule
    if policy.uncertain_in_vessel:
        vessel = vessel | role_masks["uncertain"]
    if fov is None:
        fov = np.ones(code.shape, dtype=bool)
    return AVGroundTruth(arteriole, venule, vessel, as_mask(fov, "fov"))


def encode_rite_label(gt: AVGroundTruth, policy: LabelPolicy | None = None) -> np.ndarray:
    """Inverse of :func:`decode_rite_label` for images with policy colors only."""
    policy = policy or LabelPolicy()
    out = np.zeros(gt.shape + (3,), dtype=np.uint8)
    out[gt.uncertain] = policy.color_of("uncertain")
    out[gt.arteriole & ~gt.venule] = policy.color_of("arteriole")
    out[gt.venule & ~gt.arteriole] = policy.color_of("venule")
    out[gt.crossing] = policy.color_of("crossing")
    return out


def threshold(p, t: float = 0.5) -> np.ndarray:
    """Binarize a probability map; a sample equal to ``t`` is foreground."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    return as_prob(p) >= t


def rgb_to_gray(rgb, weights=LUMINANCE) -> np.ndarray:
    """Weighted channel average, normalized by the weight sum."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (3,) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError(f"weights must be 3 nonnegative values with positive sum, got {weights}")
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {rgb.shape}")
    return rgb @ (w / w.sum())
