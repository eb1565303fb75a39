"""
Point perturbations.

- pert / pert_set: set every channel of the chosen pixel(s) to p * sign(value),
  with sign(0) = +1. Results may leave [lb, ub].
- cyclic: scale a coordinate by r in [0, 2] and wrap once by (ub - lb) so the
  result stays inside [lb, ub].
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import ParameterError
from .images import Bounds, Image, PixelLoc


@dataclass(frozen=True)
class PerturbParams:
    p: float
    r: float

    def __post_init__(self):
        _check_r(self.r)


def _check_r(r: float) -> None:
    if not 0.0 <= r <= 2.0:
        raise ParameterError(f"cyclic factor r={r} outside [0, 2]")


def sign_of(values: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(values) >= 0, 1.0, -1.0)


def _checked(img: Image, locs: Iterable[PixelLoc]) -> List[PixelLoc]:
    locs = list(locs)
    for loc in locs:
        if not img.contains(loc):
            raise ParameterError(f"pixel {tuple(loc)} outside {img.width}x{img.height} image")
    return locs


def pert(img: Image, p: float, loc: PixelLoc) -> Image:
    return pert_set(img, p, [loc])


def pert_set(img: Image, p: float, locs: Iterable[PixelLoc]) -> Image:
    locs = _checked(img, locs)
    if not locs:
        raise ParameterError("pert_set needs at least one pixel location")
    xs = np.array([loc.x - 1 for loc in locs])
    ys = np.array([loc.y - 1 for loc in locs])
    data = img.data.copy()
    data[:, xs, ys] = p * sign_of(img.data[:, xs, ys])
    return Image(data, img.bounds)


def pert_candidates(data: np.ndarray, p: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    Stack of single-pixel perturbations of `data` (channels, width, height):
    row n is `data` with pixel (xs[n], ys[n]) (0-based) set to p * sign(value).
    """
    n = len(xs)
    batch = np.repeat(data[None], n, axis=0)
    batch[np.arange(n), :, xs, ys] = (p * sign_of(data[:, xs, ys])).T
    return batch


def cyclic(r: float, value: float, bounds: Bounds) -> float:
    _check_r(r)
    v = r * float(value)
    if v < bounds.lb:
        return v + bounds.span
    if v > bounds.ub:
        return v - bounds.span
    return v


def cyclic_array(r: float, values: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Elementwise cyclic over an array, in float64."""
    _check_r(r)
    v = r * np.asarray(values, dtype=np.float64)
    return np.where(v < bounds.lb, v + bounds.span, np.where(v > bounds.ub, v - bounds.span, v))
