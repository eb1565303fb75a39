import numpy as np
import pytest
from pixel_attack.errors import BoundsError, ShapeError
from pixel_attack.images import (
    Bounds, Image, PixelLoc, all_locations, clip_to_bounds, diff_pixels,
    l1_per_coordinate, row_major, validate,
)

B = Bounds(-1.0, 1.0)

def test_bounds_must_contain_zero_and_be_ordered():
    assert B.span == 2.0
    with pytest.raises(BoundsError):
        Bounds(0.5, 1.0)
    with pytest.raises(BoundsError):
        Bounds(0.0, 0.0)
    with pytest.raises(BoundsError):
        Bounds(1.0, -1.0)

def test_pixel_loc_index_is_row_major():
    loc = PixelLoc(3, 2)
    assert loc.index(5) == 7
    assert PixelLoc.from_index(7, 5) == loc
    assert all_locations(2, 2) == [PixelLoc(1, 1), PixelLoc(2, 1), PixelLoc(1, 2), PixelLoc(2, 2)]
    assert row_major([PixelLoc(1, 2), PixelLoc(2, 1), PixelLoc(1, 1), PixelLoc(2, 1)]) == [
        PixelLoc(1, 1), PixelLoc(2, 1), PixelLoc(1, 2)
    ]

def test_image_is_read_only_float32_copy():
    src = np.zeros((1, 2, 3))
    img = Image.from_array(src, B)
    assert img.data.dtype == np.float32
    assert Image(src, B).data.dtype == np.float64
    assert Image(src.astype(np.int64), B).data.dtype == np.float32
    assert img.shape == (1, 2, 3) and img.width == 2 and img.height == 3
    src[0, 0, 0] = 5.0
    assert img.data[0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0

def test_image_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        Image(np.zeros((2, 2)), B)
    with pytest.raises(ShapeError):
        Image(np.zeros((1, 0, 2)), B)
    with pytest.raises(ShapeError):
        Image(np.zeros((1, 2, 2)), B).with_data(np.zeros((1, 3, 2)))

def test_pixel_access_uses_one_based_coordinates():
    data = np.arange(12, dtype=np.float32).reshape(3, 2, 2) / 12
    img = Image(data, B)
    np.testing.assert_array_equal(img.pixel(PixelLoc(2, 1)), data[:, 1, 0])
    assert img.contains(PixelLoc(2, 2))
    assert not img.contains(PixelLoc(3, 1))
    assert not img.contains(PixelLoc(0, 1))

def test_ptb_on_single_changed_coordinate():
    a = Image(np.zeros((1, 2, 2)), B)
    d = np.zeros((1, 2, 2))
    d[0, 1, 0] = 1.0
    b = Image(d, B)
    assert l1_per_coordinate(a, b) == pytest.approx(0.25)
    assert l1_per_coordinate(b, a) == l1_per_coordinate(a, b)
    assert l1_per_coordinate(a, a) == 0.0
    assert diff_pixels(a, b) == [PixelLoc(2, 1)]
    assert len(diff_pixels(a, b)) / 4 * 100 == 25.0

def test_diff_pixels_is_row_major_over_channels():
    a = Image(np.zeros((3, 3, 3)), B)
    d = np.zeros((3, 3, 3))
    d[2, 0, 1] = 0.5   # (x=1, y=2) in the last channel only
    d[0, 2, 0] = -0.5  # (x=3, y=1)
    assert diff_pixels(a, Image(d, B)) == [PixelLoc(3, 1), PixelLoc(1, 2)]

def test_diff_pixels_shape_mismatch():
    with pytest.raises(ShapeError):
        diff_pixels(Image(np.zeros((1, 2, 2)), B), Image(np.zeros((1, 3, 2)), B))

def test_validate_closed_bounds():
    assert validate(Image(np.full((1, 2, 2), 1.0), B))
    assert validate(Image(np.full((1, 2, 2), -1.0), B))
    assert not validate(Image(np.full((1, 2, 2), 1.5), B))
    d = np.zeros((1, 2, 2))
    d[0, 0, 0] = np.nan
    assert not validate(Image(d, B))

def test_clip_to_bounds_survives_float32_rounding():
    b = Bounds(-0.1, 0.1)  # neither bound is a float32 value
    clipped = clip_to_bounds(np.array([[[5.0, -5.0]]]), b)
    assert clipped.dtype == np.float32
    assert validate(Image(clipped, b))

def test_diff_pixels_never_exceeds_pixel_count():
    rng = np.random.default_rng(6)
    for _ in range(200):
        c, w, h = rng.integers(1, 4), rng.integers(1, 6), rng.integers(1, 6)
        a = Image(rng.integers(0, 2, size=(c, w, h)).astype(np.float32), Bounds(-1.0, 1.0))
        b = Image(rng.integers(0, 2, size=(c, w, h)).astype(np.float32), Bounds(-1.0, 1.0))
        assert len(diff_pixels(a, b)) <= w * h
    full = Image(np.ones((2, 3, 4), dtype=np.float32), B)
    assert len(diff_pixels(full, full.with_data(-np.ones((2, 3, 4))))) == 12
