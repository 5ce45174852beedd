"""Dyadic multiscale decomposition of an image pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooSmallForLevels
from .image import ColorSpace, ImagePair, PlanarImage, to_gray, to_lab, to_srgb

__all__ = ["PyramidLevel", "PyramidPair", "downsample", "build_pyramid", "MIN_COARSEST"]

# Smallest side allowed at the coarsest level: keeps the 17-wide search
# window and the 8x8 pooling regions meaningful.
MIN_COARSEST = 24


@dataclass(frozen=True)
class PyramidLevel:
    ref_gray: PlanarImage
    rec_gray: PlanarImage
    ref_lab: PlanarImage
    rec_lab: PlanarImage

    @property
    def shape(self):
        return self.ref_gray.shape


@dataclass(frozen=True)
class PyramidPair:
    levels: tuple[PyramidLevel, ...]

    @property
    def L(self) -> int:
        return len(self.levels)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, l):
        return self.levels[l]

    def __iter__(self):
        return iter(self.levels)


def downsample(data: np.ndarray) -> np.ndarray:
    """2x2 box average followed by stride-2 decimation.

    A trailing odd row or column is dropped. Works on (h, w) and
    (h, w, c) arrays.
    """
    h, w = data.shape[0] // 2, data.shape[1] // 2
    if h == 0 or w == 0:
        raise TooSmallForLevels(f"cannot halve a {data.shape[1]}x{data.shape[0]} raster")
    d = data[: 2 * h, : 2 * w]
    return 0.25 * (d[0::2, 0::2] + d[1::2, 0::2] + d[0::2, 1::2] + d[1::2, 1::2])


def check_levels(shape, levels: int, min_coarsest: int = MIN_COARSEST):
    if levels < 1:
        raise TooSmallForLevels(f"need at least one level, got {levels}")
    h, w = shape
    coarsest = min(h, w) / 2 ** (levels - 1)
    if coarsest < min_coarsest:
        raise TooSmallForLevels(
            f"{w}x{h} image gives a {coarsest:g}-pixel coarsest side at L={levels}; "
            f"need >= {min_coarsest}"
        )


def build_pyramid(pair: ImagePair, levels: int, min_coarsest: int = MIN_COARSEST) -> PyramidPair:
    """Gray and Lab pyramids of both images of ``pair``.

    Level 0 is the input. The Lab planes are computed once at full
    resolution and then reduced with the same filter as the gray planes.
    ``min_coarsest`` bounds the shortest side at the coarsest level.
    """
    check_levels(pair.reference.shape, levels, min_coarsest)

    def split(img):
        if img.space is ColorSpace.GRAY:
            return img.data, to_lab(to_srgb(img)).data
        return to_gray(img).data, to_lab(img).data

    rg, rl = split(pair.reference)
    ig, il = split(pair.reconstructed)
    out = []
    for l in range(levels):
        if l:
            rg, ig, rl, il = downsample(rg), downsample(ig), downsample(rl), downsample(il)
        out.append(
            PyramidLevel(
                PlanarImage(rg, ColorSpace.GRAY),
                PlanarImage(ig, ColorSpace.GRAY),
                PlanarImage(rl, ColorSpace.LAB),
                PlanarImage(il, ColorSpace.LAB),
            )
        )
    return PyramidPair(tuple(out))
