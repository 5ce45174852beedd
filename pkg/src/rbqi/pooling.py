"""Probability-summation pooling and the end-to-end quality index.

Per-pixel detection terms ``|d / alpha| ** beta`` are pooled over 8x8
regions, then over the levels of the pyramid. Because every stage uses
the same exponent, the staged Minkowski pooling collapses to a plain
sum of the per-pixel terms; both forms are computed here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .color import ColorMaps, ColorParams, ajncd_threshold, color_distance, gaussian_blur
from .errors import DimensionMismatch, EmptyInput, InputError, NonFiniteInput
from .image import ImagePair
from .pyramid import build_pyramid
from .structure import (
    StructureMaps,
    StructureParams,
    classify_texture,
    structure_difference,
    structure_index,
)

__all__ = [
    "PoolingParams",
    "LevelMaps",
    "RbqiResult",
    "detection_probability_maps",
    "detection_terms",
    "staged_pool",
    "pool_to_score",
    "difference_maps",
    "rbqi",
]

REGION = 8


@dataclass(frozen=True)
class PoolingParams:
    beta_s: float = 3.5
    beta_c: float = 3.5
    region: int = REGION

    def __post_init__(self):
        if not self.beta_s >= 1 or not self.beta_c >= 1:
            raise InputError("pooling exponents must be >= 1")
        if self.region != REGION:
            raise InputError(f"region size is fixed at {REGION}")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LevelMaps:
    """Difference and threshold rasters of one pyramid level."""

    d_s: np.ndarray
    alpha_s: np.ndarray
    d_c: np.ndarray
    alpha_c: np.ndarray
    structure: StructureMaps | None = field(default=None, repr=False)

    def __post_init__(self):
        shape = np.shape(self.d_s)
        for name in ("alpha_s", "d_c", "alpha_c"):
            if np.shape(getattr(self, name)) != shape:
                raise DimensionMismatch(f"{name} shape differs from d_s shape {shape}")


@dataclass(frozen=True)
class RbqiResult:
    rbqi: float
    D: float
    D_s_per_level: tuple[float, ...]
    D_c_per_level: tuple[float, ...]
    p_detect: float
    structure_term: float
    color_term: float
    level_terms: tuple[float, ...]
    params: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        out = asdict(self)
        out["D_s_per_level"] = list(self.D_s_per_level)
        out["D_c_per_level"] = list(self.D_c_per_level)
        out["level_terms"] = list(self.level_terms)
        return out


def _check_same(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise DimensionMismatch(f"raster shapes differ: {shape} vs {np.shape(a)}")


def detection_terms(d, alpha, beta):
    """Per-pixel Minkowski summand ``|d / alpha| ** beta``."""
    return np.abs(np.asarray(d, dtype=np.float64) / alpha) ** beta


def detection_probability_maps(d_s, alpha_s, d_c, alpha_c, params: PoolingParams | None = None):
    """Structure and color detection probabilities ``1 - exp(-|d/alpha|^beta)``."""
    params = params or PoolingParams()
    _check_same(d_s, alpha_s, d_c, alpha_c)
    p_ds = -np.expm1(-detection_terms(d_s, alpha_s, params.beta_s))
    p_dc = -np.expm1(-detection_terms(d_c, alpha_c, params.beta_c))
    return p_ds, p_dc


def _regions(shape, size=REGION):
    h, w = shape
    for y in range(0, h, size):
        for x in range(0, w, size):
            yield slice(y, y + size), slice(x, x + size)


def _as_level(level) -> LevelMaps:
    if isinstance(level, LevelMaps):
        return level
    return LevelMaps(*level)


def _validate(levels):
    levels = [_as_level(lv) for lv in levels]
    if not levels:
        raise EmptyInput("need at least one level")
    for lv in levels:
        for name in ("d_s", "alpha_s", "d_c", "alpha_c"):
            if not np.all(np.isfinite(getattr(lv, name))):
                raise NonFiniteInput(f"{name} contains non-finite values")
    return levels


def staged_pool(levels, params: PoolingParams | None = None):
    """Region -> level -> scale Minkowski pooling.

    Returns ``(D_s, D_c, D_s_per_level, D_c_per_level)``; the pooled
    detection sum is ``D_s ** beta_s + D_c ** beta_c``.
    """
    params = params or PoolingParams()
    levels = _validate(levels)
    bs, bc = params.beta_s, params.beta_c
    ds_levels, dc_levels = [], []
    for lv in levels:
        ts = detection_terms(lv.d_s, lv.alpha_s, bs)
        tc = detection_terms(lv.d_c, lv.alpha_c, bc)
        ds_regions = [ts[r].sum() ** (1.0 / bs) for r in _regions(ts.shape, params.region)]
        dc_regions = [tc[r].sum() ** (1.0 / bc) for r in _regions(tc.shape, params.region)]
        ds_levels.append(math.fsum(v**bs for v in ds_regions) ** (1.0 / bs))
        dc_levels.append(math.fsum(v**bc for v in dc_regions) ** (1.0 / bc))
    D_s = math.fsum(v**bs for v in ds_levels) ** (1.0 / bs)
    D_c = math.fsum(v**bc for v in dc_levels) ** (1.0 / bc)
    return D_s, D_c, tuple(ds_levels), tuple(dc_levels)


def pool_to_score(levels, params: PoolingParams | None = None) -> RbqiResult:
    """Pool per-level difference maps into the detection sum ``D`` and
    ``rbqi = log10(1 + D)``.

    ``levels`` is a sequence of :class:`LevelMaps` or
    ``(d_s, alpha_s, d_c, alpha_c)`` tuples. ``D`` is the flat sum over
    levels (level-major), then pixels (row-major); the staged Minkowski
    aggregates are reported per level for diagnostics.
    """
    params = params or PoolingParams()
    levels = _validate(levels)
    s_terms, c_terms = [], []
    for lv in levels:
        s_terms.append(float(detection_terms(lv.d_s, lv.alpha_s, params.beta_s).sum()))
        c_terms.append(float(detection_terms(lv.d_c, lv.alpha_c, params.beta_c).sum()))
    structure_term = math.fsum(s_terms)
    color_term = math.fsum(c_terms)
    level_terms = tuple(s + c for s, c in zip(s_terms, c_terms))
    D = math.fsum(s_terms + c_terms)
    _, _, ds_levels, dc_levels = staged_pool(levels, params)
    return RbqiResult(
        rbqi=math.log10(1.0 + D),
        D=D,
        D_s_per_level=ds_levels,
        D_c_per_level=dc_levels,
        p_detect=-math.expm1(-D),
        structure_term=structure_term,
        color_term=color_term,
        level_terms=level_terms,
        params={"pooling": params.as_dict()},
    )


def difference_maps(
    pair: ImagePair,
    levels: int = 3,
    structure: StructureParams | None = None,
    color: ColorParams | None = None,
    min_coarsest: int | None = None,
) -> list[LevelMaps]:
    """Per-level structure and color difference maps with their thresholds."""
    structure = structure or StructureParams()
    color = color or ColorParams()
    kwargs = {} if min_coarsest is None else {"min_coarsest": min_coarsest}
    pyr = build_pyramid(pair, levels, **kwargs)
    out = []
    for lv in pyr:
        si = structure_index(lv.ref_gray, lv.rec_gray, structure)
        flags = classify_texture(lv.ref_gray, structure.texture)
        smaps = structure_difference(si, flags, structure)
        ref_blur = gaussian_blur(lv.ref_lab, color)
        rec_blur = gaussian_blur(lv.rec_lab, color)
        cmaps = ColorMaps(
            d_c=color_distance(ref_blur, rec_blur),
            alpha_c=ajncd_threshold(ref_blur, color),
        )
        out.append(LevelMaps(smaps.d_s, smaps.alpha_s, cmaps.d_c, cmaps.alpha_c, structure=smaps))
    return out


def rbqi(
    pair: ImagePair,
    levels: int = 3,
    structure: StructureParams | None = None,
    color: ColorParams | None = None,
    pooling: PoolingParams | None = None,
    min_coarsest: int | None = None,
) -> RbqiResult:
    """Reconstructed Background Quality Index of ``pair``.

    0 means no perceptible difference; larger is worse.
    """
    structure = structure or StructureParams()
    color = color or ColorParams()
    pooling = pooling or PoolingParams()
    maps = difference_maps(pair, levels, structure, color, min_coarsest)
    res = pool_to_score(maps, pooling)
    params = {
        "levels": levels,
        "structure": structure.as_dict(),
        "color": color.as_dict(),
        "pooling": pooling.as_dict(),
    }
    return replace(res, params=params)
