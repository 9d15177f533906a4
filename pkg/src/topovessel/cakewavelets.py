"""Single-sided cake wavelets and orientation scores.

Each wavelet is an angular slice of the frequency disk: a B-spline profile in
the frequency angle times a smooth radial window, with a small Gaussian
neighbourhood of DC cut out and kept as a separate low-pass piece. The
spatial kernel is the negated real part of the inverse FFT, cropped.

Angles are measured from the +column axis towards the +row axis, in both the
frequency and the spatial domain. The kernel for angle ``theta`` responds to
lines running perpendicular to ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class CakeParams:
    n_orientations: int = 24
    kernel_size: int = 7
    design_size: int = 65
    spline_order: int = 3
    radial_decay: float = 0.9
    dc_sigma: float = 1.5

    def __post_init__(self):
        if self.n_orientations < 2 or self.n_orientations % 2:
            raise ValueError(f"n_orientations must be even and >= 2, got {self.n_orientations}")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.design_size % 2 == 0 or self.design_size < self.kernel_size:
            raise ValueError(
                f"design_size must be odd and >= kernel_size, got {self.design_size}"
            )
        if self.spline_order < 0:
            raise ValueError(f"spline_order must be >= 0, got {self.spline_order}")
        if (self.spline_order + 1) >= self.n_orientations:
            raise ValueError("spline support must be narrower than the full circle")
        if not 0.0 < self.radial_decay <= 1.0:
            raise ValueError(f"radial_decay must lie in (0, 1], got {self.radial_decay}")
        if not self.dc_sigma > 0:
            raise ValueError(f"dc_sigma must be positive, got {self.dc_sigma}")

    @property
    def angular_step(self) -> float:
        return 2 * np.pi / self.n_orientations

    def thetas(self) -> np.ndarray:
        return self.angular_step * np.arange(self.n_orientations)


@dataclass(frozen=True)
class CakeBank:
    params: CakeParams
    thetas: np.ndarray
    spectra: np.ndarray  # (n, design, design) complex, centered (DC in the middle)
    kernels: np.ndarray  # (n, k, k) real
    dc_window: np.ndarray
    radial_window: np.ndarray


def bspline(order: int, x) -> np.ndarray:
    """Centered cardinal B-spline of the given order, supported on |x| < (order+1)/2.

    Evaluated with the truncated-power formula; integer shifts sum to one.
    """
    x = np.asarray(x, dtype=np.float64)
    if order == 0:
        return ((x >= -0.5) & (x < 0.5)).astype(np.float64)
    n = order
    out = np.zeros_like(x)
    fact = float(np.prod(np.arange(1, n + 1)))
    for k in range(n + 2):
        shifted = x + (n + 1) / 2.0 - k
        out += (-1) ** k * _binom(n + 1, k) * np.where(shifted > 0, shifted, 0.0) ** n
    out /= fact
    out[np.abs(x) >= (n + 1) / 2.0] = 0.0
    return np.maximum(out, 0.0)


def _binom(n: int, k: int) -> float:
    from math import comb

    return float(comb(n, k))


def frequency_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Radius (fraction of Nyquist) and angle of a centered ``size`` x ``size`` grid."""
    c = size // 2
    rows, cols = np.mgrid[0:size, 0:size]
    fy = (rows - c).astype(np.float64)
    fx = (cols - c).astype(np.float64)
    rho = np.hypot(fx, fy) / (size / 2.0)
    phi = np.arctan2(fy, fx)
    return rho, phi


def radial_window(size: int, decay_start: float) -> np.ndarray:
    """1 up to ``decay_start`` (fraction of Nyquist), raised-cosine roll-off to 0 at Nyquist."""
    rho, _ = frequency_grid(size)
    out = np.zeros_like(rho)
    out[rho <= decay_start] = 1.0
    if decay_start < 1.0:
        band = (rho > decay_start) & (rho < 1.0)
        t = (rho[band] - decay_start) / (1.0 - decay_start)
        out[band] = 0.5 * (1.0 + np.cos(np.pi * t))
    return out


def dc_window(size: int, sigma: float) -> np.ndarray:
    c = size // 2
    rows, cols = np.mgrid[0:size, 0:size]
    r2 = (rows - c) ** 2 + (cols - c) ** 2
    return np.exp(-r2 / (2.0 * sigma**2))


def angular_profile(theta: float, params: CakeParams) -> np.ndarray:
    _, phi = frequency_grid(params.design_size)
    step = params.angular_step
    d = np.mod(phi - theta + np.pi, 2 * np.pi) - np.pi
    return bspline(params.spline_order, d / step)


def build_cake_spectrum(theta: float, params: CakeParams | None = None) -> np.ndarray:
    """Centered frequency-domain cake piece for orientation ``theta``.

    The piece equals ``B(angle offset / step) * M(rho) * (1 - G_dc)``; adding
    all pieces and ``G_dc * M`` gives back the radial window ``M``.
    """
    params = params or CakeParams()
    m = radial_window(params.design_size, params.radial_decay)
    g = dc_window(params.design_size, params.dc_sigma)
    piece = angular_profile(theta, params) * m * (1.0 - g)
    return piece.astype(np.complex128)


def spatial_wavelet(spectrum) -> np.ndarray:
    """Inverse FFT of a centered spectrum, returned spatially centered."""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(spectrum)))


def crop_center(arr, size: int) -> np.ndarray:
    h, w = arr.shape
    r0 = h // 2 - size // 2
    c0 = w // 2 - size // 2
    return arr[r0 : r0 + size, c0 : c0 + size]


def build_bank(params: CakeParams | None = None) -> CakeBank:
    """Spectra and cropped zero-mean kernels (negated real part) for every orientation."""
    params = params or CakeParams()
    thetas = params.thetas()
    spectra = np.stack([build_cake_spectrum(t, params) for t in thetas])
    kernels = []
    for spec in spectra:
        x = spatial_wavelet(spec)
        k = -crop_center(x.real, params.kernel_size)
        kernels.append(k - k.mean())
    m = radial_window(params.design_size, params.radial_decay)
    return CakeBank(
        params=params,
        thetas=thetas,
        spectra=spectra,
        kernels=np.stack(kernels),
        dc_window=dc_window(params.design_size, params.dc_sigma) * m,
        radial_window=m,
    )


def partition_error(bank: CakeBank) -> float:
    """Max deviation of (sum of pieces + DC piece) from the radial window."""
    total = bank.spectra.sum(axis=0).real + bank.dc_window
    return float(np.max(np.abs(total - bank.radial_window)))


def orientation_scores(gray, bank: CakeBank) -> np.ndarray:
    """Cross-correlate ``gray`` with every kernel; returns ``(n_orientations, H, W)``."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or gray.size == 0:
        raise ValueError(f"expected a nonempty 2D image, got shape {gray.shape}")
    return np.stack([ndimage.correlate(gray, k, mode="reflect") for k in bank.kernels])
