"""PNG and raw float raster I/O."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image


def read_png(path) -> np.ndarray:
    """Read a PNG as float64 in [0, 1] (gray ``(H, W)`` or RGB ``(H, W, 3)``).

    Integer images are divided by the largest value of their bit depth.
    """
    with Image.open(path) as im:
        if im.mode in ("P", "PA", "RGBA", "CMYK", "YCbCr", "LA"):
            im = im.convert("RGB" if im.mode != "LA" else "L")
        arr = np.asarray(im)
    if arr.dtype == bool:
        return arr.astype(np.float64)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype in (np.uint16, np.int32) or im.mode.startswith("I"):
        # PIL reports 16-bit PNGs as mode I / I;16
        return arr.astype(np.float64) / 65535.0
    return arr.astype(np.float64)


def read_label_png(path) -> np.ndarray:
    """Read an RGB label image as raw 8-bit values."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def to_uint8(values) -> np.ndarray:
    """Scale [0, 1] values to 0..255 with round-half-to-even nearest rounding."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def write_png(path, values) -> None:
    """Write a [0, 1] float or bool raster (gray or RGB) as 8-bit PNG."""
    arr = np.asarray(values)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    elif arr.dtype != np.uint8:
        arr = to_uint8(arr)
    mode = "RGB" if arr.ndim == 3 else "L"
    Image.fromarray(arr, mode=mode).save(path, optimize=False)


def write_label_png(path, labels) -> None:
    """Write a small-integer label raster as a paletted PNG with a fixed palette."""
    labels = np.asarray(labels)
    if labels.max(initial=0) > 255:
        raise ValueError("paletted label images hold at most 255 labels")
    rng = np.random.default_rng(0)
    palette = rng.integers(64, 256, size=(256, 3), dtype=np.uint8)
    palette[0] = 0
    im = Image.fromarray(labels.astype(np.uint8), mode="P")
    im.putpalette(palette.ravel().tolist())
    im.save(path, optimize=False)


def read_label_indices(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "P":
            raise ValueError(f"{path} is not a paletted image")
        return np.asarray(im, dtype=np.int64)


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_raw(path, values) -> None:
    """Write a 2D float64 raster as little-endian raw bytes plus a JSON header."""
    path = Path(path)
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("raw rasters must be 2D")
    path.write_bytes(arr.tobytes())
    header = {"dtype": "<f8", "height": arr.shape[0], "width": arr.shape[1]}
    _header_path(path).write_text(json.dumps(header, sort_keys=True) + "\n")


def read_raw(path) -> np.ndarray:
    path = Path(path)
    header = json.loads(_header_path(path).read_text())
    data = np.frombuffer(path.read_bytes(), dtype=header.get("dtype", "<f8"))
    shape = (int(header["height"]), int(header["width"]))
    if data.size != shape[0] * shape[1]:
        raise ValueError(f"{path}: {data.size} samples, header says {shape}")
    return data.reshape(shape).astype(np.float64)


def read_raster(path) -> np.ndarray:
    """Read a scalar raster from ``.f64`` (raw + header) or PNG."""
    path = Path(path)
    if path.suffix == ".f64":
        return read_raw(path)
    arr = read_png(path)
    if arr.ndim == 3:
        raise ValueError(f"{path}: expected a single-channel image")
    return arr
