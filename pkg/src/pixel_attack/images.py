"""
Images, pixel coordinates and coordinate bounds.

Coordinates are 1-based in the public API: a pixel is PixelLoc(x, y) with
x in [1..w] (column) and y in [1..h] (row). Image data is stored as a
read-only numpy array shaped (channels, width, height), so data[b, x-1, y-1]
is the value I(b, x, y). Location lists are always returned in row-major
order: row y outer, column x inner.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Tuple

import numpy as np

from .errors import BoundsError, ShapeError


@dataclass(frozen=True)
class Bounds:
    lb: float
    ub: float

    def __post_init__(self):
        if not self.lb < self.ub:
            raise BoundsError(f"lower bound {self.lb} must be below upper bound {self.ub}")
        if self.lb > 0 or self.ub < 0:
            raise BoundsError(f"bounds [{self.lb}, {self.ub}] must contain 0")

    @property
    def span(self) -> float:
        return self.ub - self.lb


class PixelLoc(NamedTuple):
    x: int
    y: int

    def index(self, width: int) -> int:
        """Row-major flat index (0-based)."""
        return (self.y - 1) * width + (self.x - 1)

    @classmethod
    def from_index(cls, index: int, width: int) -> "PixelLoc":
        return cls(int(index % width) + 1, int(index // width) + 1)


def row_major(locs: Iterable[PixelLoc]) -> List[PixelLoc]:
    return sorted(set(locs), key=lambda loc: (loc.y, loc.x))


def all_locations(width: int, height: int) -> List[PixelLoc]:
    return [PixelLoc(x, y) for y in range(1, height + 1) for x in range(1, width + 1)]


@dataclass(frozen=True, eq=False)
class Image:
    data: np.ndarray  # (channels, width, height)
    bounds: Bounds

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeError("image data must be (channels, width, height) with positive sizes", got=arr.shape)
        dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float32
        arr = np.array(arr, dtype=dtype)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data, bounds: Bounds, dtype=np.float32) -> "Image":
        return cls(np.asarray(data, dtype=dtype), bounds)

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.channels, self.width, self.height

    def contains(self, loc: PixelLoc) -> bool:
        return 1 <= loc.x <= self.width and 1 <= loc.y <= self.height

    def pixel(self, loc: PixelLoc) -> np.ndarray:
        return self.data[:, loc.x - 1, loc.y - 1]

    def with_data(self, data: np.ndarray) -> "Image":
        """A new image with the same bounds; shape must not change."""
        if np.shape(data) != self.shape:
            raise ShapeError("replacement data", expected=self.shape, got=np.shape(data))
        return Image(np.asarray(data, dtype=self.data.dtype), self.bounds)


@dataclass(frozen=True, eq=False)
class LabeledImage:
    image: Image
    label: int  # 1-based class label c(I)


def _check_same_shape(a: Image, b: Image) -> None:
    if a.shape != b.shape:
        raise ShapeError("images differ in shape", expected=a.shape, got=b.shape)


def l1_per_coordinate(a: Image, b: Image) -> float:
    """Mean absolute difference per coordinate, accumulated in float64."""
    _check_same_shape(a, b)
    return float(np.abs(a.data.astype(np.float64) - b.data.astype(np.float64)).mean())


def diff_pixels(a: Image, b: Image) -> List[PixelLoc]:
    """Locations where any channel differs (exact comparison), row-major."""
    _check_same_shape(a, b)
    changed = np.any(a.data != b.data, axis=0)  # (width, height)
    return [PixelLoc(int(x) + 1, int(y) + 1) for y, x in np.argwhere(changed.T)]


def validate(img: Image) -> bool:
    """True iff every coordinate lies in the closed range [lb, ub]."""
    d = img.data
    return bool(np.all(np.isfinite(d)) and np.all(d >= img.bounds.lb) and np.all(d <= img.bounds.ub))


def clip_to_bounds(data: np.ndarray, bounds: Bounds, dtype=np.float32) -> np.ndarray:
    """
    Clip to [lb, ub] in `dtype`, using the innermost representable bounds so
    the result still validates after rounding.
    """
    dtype = np.dtype(dtype)
    lo, hi = dtype.type(bounds.lb), dtype.type(bounds.ub)
    if lo < bounds.lb:
        lo = np.nextafter(lo, dtype.type(np.inf))
    if hi > bounds.ub:
        hi = np.nextafter(hi, dtype.type(-np.inf))
    return np.clip(np.asarray(data).astype(dtype), lo, hi)
