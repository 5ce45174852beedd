"""Image container, raster file I/O and color-space conversions.

All pixel data is carried as float64. Gray and sRGB samples live in
[0, 255]; Lab samples are in native CIELAB units (L in [0, 100]).
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptData,
    DimensionMismatch,
    UnsupportedFormat,
    WrongColorSpace,
)

__all__ = [
    "ColorSpace",
    "PlanarImage",
    "ImagePair",
    "load_image",
    "load_pair",
    "to_gray",
    "to_lab",
    "to_srgb",
    "write_pgm",
]


class ColorSpace(enum.Enum):
    GRAY = "gray"
    SRGB = "srgb"
    LAB = "lab"


# D65 reference white, CIE 1931 2-degree observer, normalized to Y = 1.
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# IEC 61966-2-1 linear sRGB -> XYZ (D65).
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

REC601_LUMA = np.array([0.299, 0.587, 0.114])

_LAB_EPSILON = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


@dataclass(frozen=True, eq=False)
class PlanarImage:
    """Immutable floating-point raster.

    ``data`` has shape ``(height, width)`` for gray images and
    ``(height, width, 3)`` for sRGB and Lab images.
    """

    data: np.ndarray
    space: ColorSpace

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if self.space is ColorSpace.GRAY:
            if data.ndim != 2:
                raise ValueError(f"gray image needs a 2-D array, got shape {data.shape}")
        elif data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(
                f"{self.space.value} image needs shape (h, w, 3), got {data.shape}"
            )
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("image must have at least one pixel")
        if not np.all(np.isfinite(data)):
            raise ValueError("image samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def plane(self, k: int) -> np.ndarray:
        if self.channels == 1:
            if k != 0:
                raise IndexError(k)
            return self.data
        return self.data[..., k]

    @classmethod
    def gray(cls, data) -> "PlanarImage":
        return cls(np.asarray(data, dtype=np.float64), ColorSpace.GRAY)

    @classmethod
    def srgb(cls, data) -> "PlanarImage":
        return cls(np.asarray(data, dtype=np.float64), ColorSpace.SRGB)

    @classmethod
    def lab(cls, data) -> "PlanarImage":
        return cls(np.asarray(data, dtype=np.float64), ColorSpace.LAB)

    def __eq__(self, other):
        if not isinstance(other, PlanarImage):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class ImagePair:
    """Reference and reconstructed image of identical geometry and space."""

    reference: PlanarImage
    reconstructed: PlanarImage

    def __post_init__(self):
        r, i = self.reference, self.reconstructed
        if r.shape != i.shape:
            raise DimensionMismatch(
                f"reference is {r.width}x{r.height}, reconstructed is {i.width}x{i.height}"
            )
        if r.space is not i.space:
            raise WrongColorSpace(
                f"reference is {r.space.value}, reconstructed is {i.space.value}"
            )


def load_image(path) -> PlanarImage:
    """Read an 8-bit PNG or binary PPM/PGM file.

    Gray files give a ``GRAY`` image, everything else is decoded to
    ``SRGB`` (palette images are expanded, alpha is dropped).
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise UnsupportedFormat(f"{path}: format {im.format} is not supported")
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise UnsupportedFormat(f"{path}: only 8-bit samples are supported")
            if mode in ("1", "L"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                return PlanarImage(arr, ColorSpace.GRAY)
            if mode == "LA":
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                return PlanarImage(arr, ColorSpace.GRAY)
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
            return PlanarImage(arr, ColorSpace.SRGB)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: unrecognized image format") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, UnsupportedFormat):
            raise
        raise CorruptData(f"{path}: {exc}") from exc


def load_pair(ref_path, rec_path) -> ImagePair:
    """Load a reference/reconstruction pair.

    When one file is gray and the other color, the gray one is promoted
    to sRGB so both share a space.
    """
    ref, rec = load_image(ref_path), load_image(rec_path)
    if ref.shape != rec.shape:
        raise DimensionMismatch(
            f"reference is {ref.width}x{ref.height}, reconstructed is {rec.width}x{rec.height}"
        )
    if ref.space is not rec.space:
        ref, rec = to_srgb(ref), to_srgb(rec)
    return ImagePair(ref, rec)


def _require(img: PlanarImage, space: ColorSpace):
    if img.space is not space:
        raise WrongColorSpace(f"expected {space.value} image, got {img.space.value}")


def to_gray(img: PlanarImage) -> PlanarImage:
    """Rec.601 luma of an sRGB image."""
    _require(img, ColorSpace.SRGB)
    return PlanarImage(img.data @ REC601_LUMA, ColorSpace.GRAY)


def _srgb_to_linear(c):
    c = c / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t):
    return np.where(t > _LAB_EPSILON, np.cbrt(t), (_LAB_KAPPA * t + 16.0) / 116.0)


def to_lab(img: PlanarImage) -> PlanarImage:
    """Convert sRGB to CIELAB under D65 (IEC 61966-2-1 transfer curve)."""
    _require(img, ColorSpace.SRGB)
    xyz = _srgb_to_linear(img.data) @ SRGB_TO_XYZ.T
    f = _lab_f(xyz / D65_WHITE)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return PlanarImage(np.stack([L, a, b], axis=-1), ColorSpace.LAB)


def to_srgb(img: PlanarImage) -> PlanarImage:
    """Replicate a gray image into three identical sRGB planes."""
    if img.space is ColorSpace.SRGB:
        return img
    _require(img, ColorSpace.GRAY)
    return PlanarImage(np.repeat(img.data[..., None], 3, axis=-1), ColorSpace.SRGB)


def write_pgm(path, raster: np.ndarray, lo: float | None = None, hi: float | None = None):
    """Dump a 2-D raster as an 8-bit binary PGM, mapping [lo, hi] to [0, 255].

    Bounds default to the raster's own min and max.
    """
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise ValueError("write_pgm needs a 2-D raster")
    lo = float(raster.min()) if lo is None else lo
    hi = float(raster.max()) if hi is None else hi
    span = hi - lo
    if span <= 0:
        scaled = np.zeros_like(raster)
    else:
        scaled = (raster - lo) / span * 255.0
    out = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = out.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(out.tobytes())
