"""Neighborhood-searched structure index and the structure difference map.

The structure index drops the luminance term of SSIM and keeps the
contrast-structure ratio, maximized over a square search window in the
reconstructed image so that small background motion is tolerated.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import BadWindow, DimensionMismatch, InputError, TooSmall
from .image import PlanarImage

__all__ = [
    "TextureThresholds",
    "StructureParams",
    "StructureMaps",
    "PixelType",
    "local_stats",
    "structure_index",
    "texture_types",
    "classify_texture",
    "structure_difference",
]


@dataclass(frozen=True)
class TextureThresholds:
    """Two-stage edge/texture/uniform classifier configuration.

    Stage 1 labels each pixel from its 3x3 variance. Stage 2 counts the
    stage-1 labels in the 8x8 neighborhood; the ``*_frac`` fields are
    fractions of the 64 neighborhood pixels.
    """

    t_uniform: float = 25.0
    t_edge: float = 10000.0
    uniform_frac: float = 0.9
    uniform_texture_frac: float = 0.5
    texture_frac: float = 0.5
    edge_texture_edge_frac: float = 0.2
    edge_texture_texture_frac: float = 0.3
    strong_edge_frac: float = 0.5

    def __post_init__(self):
        if not 0 <= self.t_uniform <= self.t_edge:
            raise InputError("need 0 <= t_uniform <= t_edge")


@dataclass(frozen=True)
class StructureParams:
    nhood: int = 17
    K: float = 0.03
    dynamic_range: float = 255.0
    stat_window: int = 11
    a_textured: float = 1000.0
    texture: TextureThresholds = field(default_factory=TextureThresholds)

    def __post_init__(self):
        if self.nhood < 1 or self.nhood % 2 == 0:
            raise InputError(f"nhood must be odd and >= 1, got {self.nhood}")
        if self.stat_window < 1 or self.stat_window % 2 == 0:
            raise InputError(f"stat_window must be odd and >= 1, got {self.stat_window}")
        if not self.K > 0:
            raise InputError("K must be positive")
        if not self.dynamic_range > 0:
            raise InputError("dynamic_range must be positive")
        if not self.a_textured >= 1:
            raise InputError("a_textured must be >= 1")

    @property
    def C(self) -> float:
        return (self.K * self.dynamic_range) ** 2

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class StructureMaps:
    si: np.ndarray
    d_s: np.ndarray
    alpha_s: np.ndarray
    texture_flags: np.ndarray


class PixelType(enum.IntEnum):
    UNIFORM = 0
    UNIFORM_TEXTURE = 1
    TEXTURE = 2
    EDGE_TEXTURE = 3
    MEDIUM_EDGE = 4
    STRONG_EDGE = 5


def _raster(img) -> np.ndarray:
    if isinstance(img, PlanarImage):
        if img.channels != 1:
            raise InputError(f"expected a gray image, got {img.space.value}")
        return img.data
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D raster, got shape {arr.shape}")
    return arr


def _box_valid(a: np.ndarray, w: int) -> np.ndarray:
    # Window means for every fully contained w x w window.
    if w == 1:
        return a.copy()
    h = w // 2
    v = uniform_filter1d(a, w, axis=0)[h:-h]
    return uniform_filter1d(v, w, axis=1)[:, h:-h]


def local_stats(img, window: int):
    """Windowed mean and population variance with edge-clamped borders."""
    x = _raster(img)
    if window < 1 or window % 2 == 0:
        raise BadWindow(f"window must be odd and >= 1, got {window}")
    if window > min(x.shape):
        raise BadWindow(f"window {window} exceeds image size {x.shape[1]}x{x.shape[0]}")
    offset = x.mean()
    xp = np.pad(x - offset, window // 2, mode="edge")
    mean = _box_valid(xp, window)
    var = _box_valid(xp * xp, window) - mean * mean
    return mean + offset, np.maximum(var, 0.0)


def structure_index(ref, rec, params: StructureParams | None = None) -> np.ndarray:
    """Per-pixel structure index, maximized over the search window.

    For each reference pixel (x, y) every candidate center (m, n) of the
    ``nhood`` x ``nhood`` window in the reconstruction is scored with

        (2 cov(r_xy, i_mn) + C) / (var(r_xy) + var(i_mn) + C)

    using ``stat_window`` uniform windows; the maximum is kept. Window
    samples and candidate centers are clamped to the image. A clamped
    center repeats a candidate that is already in the window, so only
    in-bounds centers are visited.
    """
    params = params or StructureParams()
    r = _raster(ref)
    i = _raster(rec)
    if r.shape != i.shape:
        raise DimensionMismatch(f"raster shapes differ: {r.shape} vs {i.shape}")
    H, W = r.shape
    if min(H, W) < params.nhood:
        raise TooSmall(f"{W}x{H} raster is smaller than nhood={params.nhood}")
    w = params.stat_window
    if w > min(H, W):
        raise BadWindow(f"stat_window {w} exceeds raster size {W}x{H}")
    a = w // 2
    hs = params.nhood // 2
    C = params.C

    # Covariances are shift invariant; centering limits cancellation.
    rp = np.pad(r - r.mean(), a, mode="edge")
    ip = np.pad(i - i.mean(), a, mode="edge")
    mu_r = _box_valid(rp, w)
    mu_i = _box_valid(ip, w)
    var_r = _box_valid(rp * rp, w) - mu_r * mu_r
    var_i = _box_valid(ip * ip, w) - mu_i * mu_i

    best = np.full((H, W), -np.inf)
    for dy in range(-hs, hs + 1):
        y0, y1 = max(0, -dy), min(H, H - dy)
        for dx in range(-hs, hs + 1):
            x0, x1 = max(0, -dx), min(W, W - dx)
            prod = rp[y0 : y1 + 2 * a, x0 : x1 + 2 * a] * ip[
                y0 + dy : y1 + dy + 2 * a, x0 + dx : x1 + dx + 2 * a
            ]
            num = _box_valid(prod, w)
            num -= mu_r[y0:y1, x0:x1] * mu_i[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            num *= 2.0
            num += C
            den = var_r[y0:y1, x0:x1] + var_i[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            # Same association as the numerator so identical inputs give 1 exactly.
            den += C
            num /= den
            tile = best[y0:y1, x0:x1]
            np.maximum(tile, num, out=tile)
    return np.clip(best, -1.0, 1.0)


def _neighborhood_count(mask: np.ndarray, size: int = 8) -> np.ndarray:
    # Exact counts over windows spanning offsets -size//2 .. size//2 - 1.
    lo = size // 2
    hi = size - lo - 1
    p = np.pad(mask.astype(np.int64), ((lo, hi), (lo, hi)), mode="edge")
    s = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.int64)
    s[1:, 1:] = p.cumsum(0).cumsum(1)
    return s[size:, size:] - s[:-size, size:] - s[size:, :-size] + s[:-size, :-size]


def texture_types(img, thresholds: TextureThresholds | None = None) -> np.ndarray:
    """Six-way pixel classification (values of :class:`PixelType`)."""
    th = thresholds or TextureThresholds()
    x = _raster(img)
    if min(x.shape) < 8:
        raise TooSmall(f"texture classification needs at least 8x8, got {x.shape[1]}x{x.shape[0]}")
    _, var = local_stats(x, 3)
    edge = var > th.t_edge
    uniform = var < th.t_uniform
    texture = ~edge & ~uniform

    n = 64
    e = _neighborhood_count(edge)
    t = _neighborhood_count(texture)
    u = _neighborhood_count(uniform)

    out = np.full(x.shape, PixelType.MEDIUM_EDGE, dtype=np.int8)
    # Rules are applied in priority order; the first match wins.
    rules = [
        (u >= th.uniform_frac * n, PixelType.UNIFORM),
        ((u >= th.uniform_texture_frac * n) & (t > e), PixelType.UNIFORM_TEXTURE),
        (t >= th.texture_frac * n, PixelType.TEXTURE),
        (
            (e >= th.edge_texture_edge_frac * n) & (t >= th.edge_texture_texture_frac * n),
            PixelType.EDGE_TEXTURE,
        ),
        (e >= th.strong_edge_frac * n, PixelType.STRONG_EDGE),
    ]
    assigned = np.zeros(x.shape, dtype=bool)
    for cond, kind in rules:
        hit = cond & ~assigned
        out[hit] = kind
        assigned |= hit
    return out


def classify_texture(img, thresholds: TextureThresholds | None = None) -> np.ndarray:
    """Binary texture flag: 1 for texture and edge/texture pixels."""
    kinds = texture_types(img, thresholds)
    return ((kinds == PixelType.TEXTURE) | (kinds == PixelType.EDGE_TEXTURE)).astype(np.uint8)


def structure_difference(si, texture_flags, params: StructureParams | None = None) -> StructureMaps:
    params = params or StructureParams()
    si = np.asarray(si, dtype=np.float64)
    flags = np.asarray(texture_flags)
    if si.shape != flags.shape:
        raise DimensionMismatch(f"raster shapes differ: {si.shape} vs {flags.shape}")
    d_s = (1.0 - si) / 2.0
    alpha_s = np.where(flags != 0, params.a_textured, 1.0)
    return StructureMaps(si=si, d_s=d_s, alpha_s=alpha_s, texture_flags=(flags != 0).astype(np.uint8))
