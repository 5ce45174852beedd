"""Lab color difference map and adaptive just-noticeable color threshold."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionMismatch, InputError, KernelTooLarge, TooSmall
from .image import ColorSpace, PlanarImage

__all__ = [
    "ColorParams",
    "ColorMaps",
    "gaussian_kernel",
    "gaussian_blur",
    "color_distance",
    "luminance_gradient",
    "ajncd_threshold",
]


@dataclass(frozen=True)
class ColorParams:
    jncd: float = 2.3
    gaussian_sigma: float = 1.5
    gaussian_radius: int | None = None
    mean_lum_window: int = 5
    rho_dark: float = 0.12
    rho_bright: float = 0.08
    rho_mid: float = 0.025
    dark_limit: float = 48.0
    bright_limit: float = 80.0

    def __post_init__(self):
        if not self.jncd > 0:
            raise InputError("jncd must be positive")
        if not self.gaussian_sigma > 0:
            raise InputError("gaussian_sigma must be positive")
        if self.gaussian_radius is not None and self.gaussian_radius < 0:
            raise InputError("gaussian_radius must be >= 0")
        if self.mean_lum_window < 1 or self.mean_lum_window % 2 == 0:
            raise InputError("mean_lum_window must be odd and >= 1")
        if min(self.rho_dark, self.rho_bright, self.rho_mid) < 0:
            raise InputError("luminance masking weights must be >= 0")

    @property
    def radius(self) -> int:
        if self.gaussian_radius is not None:
            return self.gaussian_radius
        return int(math.floor(3.0 * self.gaussian_sigma + 0.5))

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ColorMaps:
    d_c: np.ndarray
    alpha_c: np.ndarray


def _lab(img) -> np.ndarray:
    if isinstance(img, PlanarImage):
        if img.space is not ColorSpace.LAB:
            raise InputError(f"expected a Lab image, got {img.space.value}")
        return img.data
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError(f"expected an (h, w, 3) Lab raster, got shape {arr.shape}")
    return arr


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, params: ColorParams | None = None) -> PlanarImage:
    """Separable normalized Gaussian per channel, edge-clamped borders."""
    params = params or ColorParams()
    data = _lab(img)
    radius = params.radius
    if 2 * radius > min(data.shape[:2]):
        raise KernelTooLarge(
            f"kernel radius {radius} exceeds half the {data.shape[1]}x{data.shape[0]} image"
        )
    k = gaussian_kernel(params.gaussian_sigma, radius)
    out = correlate1d(data, k, axis=0, mode="nearest")
    out = correlate1d(out, k, axis=1, mode="nearest")
    return PlanarImage(out, ColorSpace.LAB)


def color_distance(ref_lab, rec_lab) -> np.ndarray:
    """Euclidean Lab distance between co-located pixels."""
    r = _lab(ref_lab)
    i = _lab(rec_lab)
    if r.shape != i.shape:
        raise DimensionMismatch(f"raster shapes differ: {r.shape[:2]} vs {i.shape[:2]}")
    d = r - i
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2)


def luminance_gradient(L: np.ndarray) -> np.ndarray:
    """Largest absolute central difference over the horizontal, vertical
    and both diagonal directions, borders clamped."""
    p = np.pad(L, 1, mode="edge")
    c = slice(1, -1)
    pairs = [
        (p[c, 2:], p[c, :-2]),
        (p[2:, c], p[:-2, c]),
        (p[2:, 2:], p[:-2, :-2]),
        (p[2:, :-2], p[:-2, 2:]),
    ]
    grad = np.zeros_like(L)
    for fwd, back in pairs:
        np.maximum(grad, 0.5 * np.abs(fwd - back), out=grad)
    return grad


def _mean_filter(x: np.ndarray, w: int) -> np.ndarray:
    k = np.full(w, 1.0 / w)
    return correlate1d(correlate1d(x, k, axis=0, mode="nearest"), k, axis=1, mode="nearest")


def ajncd_threshold(ref_lab, params: ColorParams | None = None) -> np.ndarray:
    """Per-pixel visibility threshold for Lab differences.

    ``jncd * s_L * s_C`` where ``s_C = 1 + 0.045 * chroma`` and
    ``s_L = rho(E(L)) * dL + 1`` with E(L) the local mean lightness and
    dL the largest local lightness gradient.
    """
    params = params or ColorParams()
    data = _lab(ref_lab)
    if min(data.shape[:2]) < params.mean_lum_window:
        raise TooSmall(
            f"image smaller than the {params.mean_lum_window}-pixel mean luminance window"
        )
    L, a, b = data[..., 0], data[..., 1], data[..., 2]
    s_c = 1.0 + 0.045 * np.sqrt(a * a + b * b)
    mean_L = _mean_filter(L, params.mean_lum_window)
    rho = np.where(
        mean_L < params.dark_limit,
        params.rho_dark,
        np.where(mean_L > params.bright_limit, params.rho_bright, params.rho_mid),
    )
    s_l = rho * luminance_gradient(L) + 1.0
    return params.jncd * s_l * s_c
