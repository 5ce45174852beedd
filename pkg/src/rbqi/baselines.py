"""Statistical background-evaluation measures and classic IQA baselines.

AGE and the error-pixel family compare co-located gray levels. PSNR,
SSIM and MS-SSIM follow their usual published formulations.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionMismatch, InputError, TooSmall
from .image import ImagePair, PlanarImage, to_gray
from .pyramid import downsample

__all__ = [
    "BaselineParams",
    "ErrorPixels",
    "PSNR_IDENTICAL",
    "age",
    "error_pixels",
    "psnr",
    "ssim",
    "ssim_components",
    "msssim",
]

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class BaselineParams:
    ep_threshold: float = 20.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    ssim_K1: float = 0.01
    ssim_K2: float = 0.03
    dynamic_range: float = 255.0
    msssim_levels: int = 5
    msssim_weights: tuple[float, ...] = MSSSIM_WEIGHTS

    def __post_init__(self):
        if not self.ep_threshold > 0:
            raise InputError("ep_threshold must be positive")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise InputError("ssim_window must be odd")
        if len(self.msssim_weights) != self.msssim_levels:
            raise InputError("need one MS-SSIM weight per level")
        if abs(sum(self.msssim_weights) - 1.0) > 1e-4:
            raise InputError("MS-SSIM weights must sum to 1")

    def as_dict(self):
        out = asdict(self)
        out["msssim_weights"] = list(self.msssim_weights)
        return out


class _IdenticalPSNR(float):
    """PSNR of an error-free pair. Compares as +inf, prints as 'identical'."""

    def __new__(cls):
        return super().__new__(cls, math.inf)

    def __repr__(self):
        return "PSNR_IDENTICAL"

    def __str__(self):
        return "identical"

    def __format__(self, spec):
        return "identical"

    def __reduce__(self):
        return (_identical_psnr, ())


def _identical_psnr():
    return PSNR_IDENTICAL


PSNR_IDENTICAL = _IdenticalPSNR()


@dataclass(frozen=True)
class ErrorPixels:
    ep: int
    pep: float
    cep: int
    pcep: float


def _gray_pair(ref, rec=None):
    """Accept an ImagePair, two PlanarImages or two arrays; return gray float arrays."""
    if isinstance(ref, ImagePair):
        ref, rec = ref.reference, ref.reconstructed

    def conv(x):
        if isinstance(x, PlanarImage):
            return (x if x.channels == 1 else to_gray(x)).data
        return np.asarray(x, dtype=np.float64)

    r, i = conv(ref), conv(rec)
    if r.shape != i.shape:
        raise DimensionMismatch(f"image shapes differ: {r.shape} vs {i.shape}")
    if r.ndim != 2:
        raise InputError(f"expected gray rasters, got shape {r.shape}")
    return r, i


def age(ref, rec=None) -> float:
    """Average gray-level error."""
    r, i = _gray_pair(ref, rec)
    return float(np.mean(np.abs(r - i)))


def error_pixels(ref, rec=None, tau: float = 20.0) -> ErrorPixels:
    """Error pixels (|r - i| > tau) and clustered error pixels.

    A clustered error pixel is an error pixel whose four neighbors are
    error pixels too; neighbors outside the image count as non-error.
    """
    r, i = _gray_pair(ref, rec)
    err = np.abs(r - i) > tau
    p = np.pad(err, 1, constant_values=False)
    clustered = err & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    n = err.size
    ep, cep = int(err.sum()), int(clustered.sum())
    return ErrorPixels(ep=ep, pep=ep / n, cep=cep, pcep=cep / n)


def psnr(ref, rec=None, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; :data:`PSNR_IDENTICAL` when MSE is 0."""
    r, i = _gray_pair(ref, rec)
    mse = float(np.mean((r - i) ** 2))
    if mse == 0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(peak**2 / mse)


def _gaussian_window(size, sigma):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(x, g):
    h = len(g) // 2
    y = correlate1d(x, g, axis=0, mode="nearest")[h : x.shape[0] - h]
    return correlate1d(y, g, axis=1, mode="nearest")[:, h : x.shape[1] - h]


def _ssim_maps(r, i, params: BaselineParams):
    """Luminance and contrast-structure maps over fully contained windows."""
    w = params.ssim_window
    if min(r.shape) < w:
        raise TooSmall(f"SSIM needs at least {w}x{w}, got {r.shape[1]}x{r.shape[0]}")
    g = _gaussian_window(w, params.ssim_sigma)
    C1 = (params.ssim_K1 * params.dynamic_range) ** 2
    C2 = (params.ssim_K2 * params.dynamic_range) ** 2
    mu_r = _filter_valid(r, g)
    mu_i = _filter_valid(i, g)
    var_r = _filter_valid(r * r, g) - mu_r**2
    var_i = _filter_valid(i * i, g) - mu_i**2
    cov = _filter_valid(r * i, g) - mu_r * mu_i
    lum = (2 * mu_r * mu_i + C1) / (mu_r**2 + mu_i**2 + C1)
    cs = (2 * cov + C2) / (var_r + var_i + C2)
    return lum, cs


def ssim_components(ref, rec=None, params: BaselineParams | None = None):
    """Mean luminance term and mean contrast-structure term."""
    params = params or BaselineParams()
    r, i = _gray_pair(ref, rec)
    lum, cs = _ssim_maps(r, i, params)
    return float(lum.mean()), float(cs.mean())


def ssim(ref, rec=None, params: BaselineParams | None = None) -> float:
    params = params or BaselineParams()
    r, i = _gray_pair(ref, rec)
    lum, cs = _ssim_maps(r, i, params)
    return float(np.mean(lum * cs))


def msssim(ref, rec=None, params: BaselineParams | None = None) -> float:
    """Multi-scale SSIM.

    Contrast-structure terms at every scale, luminance at the coarsest,
    combined as a weighted product. Negative contrast-structure means
    are clamped to 0 before exponentiation.
    """
    params = params or BaselineParams()
    r, i = _gray_pair(ref, rec)
    M = params.msssim_levels
    need = params.ssim_window * 2 ** (M - 1)
    if min(r.shape) < need:
        raise TooSmall(f"MS-SSIM with {M} scales needs at least {need}x{need}")
    score = 1.0
    for j, weight in enumerate(params.msssim_weights):
        lum, cs = _ssim_maps(r, i, params)
        if j == M - 1:
            score *= max(float(np.mean(lum * cs)), 0.0) ** weight
        else:
            score *= max(float(cs.mean()), 0.0) ** weight
            r, i = downsample(r), downsample(i)
    return score
