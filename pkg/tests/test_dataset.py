import gzip
import numpy as np
import pytest
from PIL import Image as PILImage
from pixel_attack.dataset import (
    CIFAR_RECORD, NormStats, RawDataset, denormalize, encode_idx, export_png, fit_stats,
    load_cifar10, load_idx, load_norm_stats, make_blobs, normalize, read_idx_files,
    save_norm_stats, subset,
)
from pixel_attack.errors import DegenerateStatsError, FormatError, LengthError
from pixel_attack.images import validate

def _blobs():
    # two 3x2 (rows x cols) images
    pixels = np.array([[[0, 1], [2, 3], [4, 5]], [[255, 254], [253, 252], [251, 250]]], dtype=np.uint8)
    images = bytes([0, 0, 8, 3]) + (2).to_bytes(4, "big") + (3).to_bytes(4, "big") + (2).to_bytes(4, "big") + pixels.tobytes()
    labels = bytes([0, 0, 8, 1]) + (2).to_bytes(4, "big") + bytes([7, 0])
    return pixels, images, labels

def test_idx_hand_built_blob():
    pixels, images, labels = _blobs()
    raw = load_idx(images, labels)
    assert raw.images.shape == (2, 1, 2, 3)  # (N, channels, width=cols, height=rows)
    assert raw.labels.tolist() == [8, 1]
    # I(1, x, y) is row y, column x of the file
    assert raw.images[0, 0, 1, 2] == pixels[0, 2, 1] == 5
    assert encode_idx(pixels) == images
    assert encode_idx(raw.labels - 1) == labels

def test_idx_labels_can_be_one_based():
    _, images, _ = _blobs()
    labels = bytes([0, 0, 8, 1]) + (2).to_bytes(4, "big") + bytes([1, 3])
    raw = load_idx(images, labels, zero_based=False)
    assert raw.labels.tolist() == [1, 3]

def test_idx_rejects_wrong_magic_and_truncation():
    _, images, labels = _blobs()
    with pytest.raises(FormatError):
        load_idx(labels, labels)
    with pytest.raises(FormatError):
        load_idx(b"\x00\x00\x09\x03" + images[4:], labels)
    with pytest.raises(LengthError):
        load_idx(b"", labels)
    with pytest.raises(LengthError):
        load_idx(images[:-1], labels)
    with pytest.raises(LengthError):
        load_idx(images[:10], labels)
    with pytest.raises(FormatError):
        load_idx(images + b"\x00", labels)
    short_labels = bytes([0, 0, 8, 1]) + (1).to_bytes(4, "big") + bytes([7])
    with pytest.raises(FormatError):
        load_idx(images, short_labels)

def test_read_idx_files_accepts_gzip(tmp_path):
    _, images, labels = _blobs()
    (tmp_path / "img.gz").write_bytes(gzip.compress(images))
    (tmp_path / "lab").write_bytes(labels)
    raw = read_idx_files(tmp_path / "img.gz", tmp_path / "lab")
    assert len(raw) == 2
    assert len(subset(raw, 1)) == 1
    assert subset(raw, None) is raw

def test_cifar_records():
    rec = bytearray(CIFAR_RECORD * 2)
    rec[0] = 3
    rec[1 + 5] = 200                   # red channel, row 0, column 5
    rec[CIFAR_RECORD] = 9
    raw = load_cifar10(bytes(rec))
    assert raw.images.shape == (2, 3, 32, 32)
    assert raw.labels.tolist() == [4, 10]
    assert raw.images[0, 0, 5, 0] == 200
    with pytest.raises(LengthError):
        load_cifar10(bytes(rec[:-1]))

def test_normalize_bounds_and_values():
    raw = RawDataset(np.array([[[[0, 255], [51, 102]]]], dtype=np.uint8), np.array([1]), 2)
    stats = NormStats((0.5,), (0.25,))
    (li,) = normalize(raw, stats)
    assert li.label == 1
    assert li.image.bounds.lb == -2.0 and li.image.bounds.ub == 2.0
    np.testing.assert_allclose(li.image.data[0], [[-2.0, 2.0], [-1.2, -0.4]], rtol=1e-6)
    assert validate(li.image)

def test_fit_stats_bounds_contain_the_data():
    rng = np.random.default_rng(0)
    raw = RawDataset(rng.integers(0, 256, size=(20, 1, 4, 4), dtype=np.uint8), np.ones(20, dtype=np.int64), 2)
    stats = fit_stats(raw)
    data = normalize(raw)
    assert all(validate(li.image) for li in data)
    assert data[0].image.bounds == stats.bounds
    assert stats.bounds.lb <= 0 <= stats.bounds.ub

def test_degenerate_statistics():
    raw = RawDataset(np.full((3, 1, 2, 2), 7, dtype=np.uint8), np.ones(3, dtype=np.int64), 2)
    with pytest.raises(DegenerateStatsError):
        fit_stats(raw)
    with pytest.raises(DegenerateStatsError):
        NormStats((0.5,), (0.0,))

def test_export_png_round_trips_bytes(tmp_path):
    rng = np.random.default_rng(1)
    pixels = rng.integers(0, 256, size=(4, 1, 5, 3), dtype=np.uint8)
    raw = RawDataset(pixels, np.ones(4, dtype=np.int64), 2)
    stats = fit_stats(raw)
    for i, li in enumerate(normalize(raw, stats)):
        res = export_png(li.image, stats, tmp_path / f"{i}.png")
        assert res.clamped == 0
        back = np.asarray(PILImage.open(res.path))
        assert back.shape == (3, 5)  # rows = height, columns = width
        np.testing.assert_array_equal(back.T, pixels[i, 0])

def test_export_png_reports_clamping(tmp_path):
    stats = NormStats((0.5,), (0.25,))
    raw = RawDataset(np.zeros((1, 1, 2, 2), dtype=np.uint8), np.array([1]), 2)
    img = normalize(raw, stats)[0].image.with_data(np.array([[[-2.0, 5.0], [0.0, -9.0]]]))
    pixels, clamped = denormalize(img, stats)
    assert clamped == 2
    assert pixels[0].tolist() == [[0, 255], [128, 0]]
    res = export_png(img, stats, tmp_path / "c.png")
    assert res.clamped == 2
    assert (tmp_path / "c.png.clamped.txt").read_text().startswith("2 coordinate(s)")

def test_norm_stats_file_round_trip(tmp_path):
    stats = NormStats((0.1307,), (0.3081,))
    save_norm_stats(stats, tmp_path / "m.stats")
    assert load_norm_stats(tmp_path / "m.stats") == stats
    (tmp_path / "bad.stats").write_text("mean 0.1\n")
    with pytest.raises(FormatError):
        load_norm_stats(tmp_path / "bad.stats")

def test_make_blobs_is_seeded():
    a = make_blobs(10, (1, 2, 2), seed=4)
    b = make_blobs(10, (1, 2, 2), seed=4)
    assert [li.label for li in a] == [1, 2] * 5
    assert all(np.array_equal(x.image.data, y.image.data) for x, y in zip(a, b))
    assert all(validate(li.image) for li in a)
