"""
Dataset ingestion, normalization and export.

- load_idx / read_idx_files: MNIST-style IDX image + label streams (optionally gzipped)
- load_cifar10: CIFAR-10 binary batches
- fit_stats / normalize: (byte/255 - mean)/std per channel; bounds [lb, ub]
  derived from the statistics with the same float32 arithmetic as the pixels
- export_png / denormalize: back to 8-bit PNG, clamping out-of-range values
- save_norm_stats / load_norm_stats: small key = value text file

Raw images are uint8 arrays shaped (N, channels, width, height); labels are
stored 1-based.
"""
from __future__ import annotations
import gzip, struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image as PILImage

from .errors import DegenerateStatsError, ExportError, FormatError, LengthError
from .images import Bounds, Image, LabeledImage

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_UBYTE = 0x08
MAX_IDX_ITEMS = 1 << 31
CIFAR_RECORD = 1 + 3 * 32 * 32


@dataclass(frozen=True)
class NormStats:
    means: Tuple[float, ...]
    stds: Tuple[float, ...]

    def __post_init__(self):
        if len(self.means) != len(self.stds) or not self.means:
            raise DegenerateStatsError("need one mean and one std per channel")
        for b, s in enumerate(self.stds):
            if not s > 0:
                raise DegenerateStatsError(f"channel {b} has std {s}; normalization is undefined")

    @property
    def channels(self) -> int:
        return len(self.means)

    def _f32(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.means, dtype=np.float32), np.asarray(self.stds, dtype=np.float32)

    @property
    def bounds(self) -> Bounds:
        # same float32 arithmetic as normalize(), so bytes 0 and 255 land exactly on lb and ub
        m, s = self._f32()
        lows = (np.float32(0.0) - m) / s
        highs = (np.float32(1.0) - m) / s
        return Bounds(float(lows.min()), float(highs.max()))


@dataclass(frozen=True, eq=False)
class RawDataset:
    images: np.ndarray  # uint8 (N, channels, width, height)
    labels: np.ndarray  # int64 (N,), 1-based
    class_count: int
    split: str = "test"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise FormatError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 1 or self.labels.max() > self.class_count):
            raise FormatError(f"labels outside [1, {self.class_count}]")

    def __len__(self) -> int:
        return len(self.labels)


# ------------------ IDX ------------------

def _parse_idx(data: bytes, expected_magic: int, what: str) -> np.ndarray:
    if not data:
        raise LengthError(f"{what} stream is empty")
    if len(data) < 4:
        raise LengthError(f"{what} stream too short for an IDX header ({len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise FormatError(f"bad magic 0x{magic:08x} for {what}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise LengthError(f"{what} header truncated: need {header} bytes, have {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = 1
    for n in dims:
        size *= n
    if size > MAX_IDX_ITEMS:
        raise FormatError(f"{what} dimensions {dims} overflow")
    payload = len(data) - header
    if payload < size:
        raise LengthError(f"{what} payload truncated: need {size} bytes, have {payload}")
    if payload > size:
        raise FormatError(f"{what} has {payload - size} trailing bytes")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def encode_idx(array: np.ndarray) -> bytes:
    """Unsigned-byte IDX encoding of `array` (rows/cols order preserved)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = (IDX_UBYTE << 8) | array.ndim
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def load_idx(
    image_bytes: bytes,
    label_bytes: bytes,
    *,
    class_count: int = 10,
    zero_based: bool = True,
    split: str = "test",
) -> RawDataset:
    """
    Parse an IDX image tensor (N, rows, cols) and an IDX label vector (N,).
    Rows become the image height and columns the width.
    """
    pixels = _parse_idx(image_bytes, IDX_IMAGES_MAGIC, "images")
    labels = _parse_idx(label_bytes, IDX_LABELS_MAGIC, "labels").astype(np.int64)
    if len(pixels) != len(labels):
        raise FormatError(f"{len(pixels)} images but {len(labels)} labels")
    images = np.ascontiguousarray(pixels.transpose(0, 2, 1)[:, None])
    return RawDataset(images, labels + 1 if zero_based else labels, class_count, split)


def _read_bytes(path: Union[str, Path]) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def read_idx_files(image_path, label_path, **kwargs) -> RawDataset:
    return load_idx(_read_bytes(image_path), _read_bytes(label_path), **kwargs)


def load_cifar10(data: bytes, *, split: str = "test") -> RawDataset:
    """CIFAR-10 binary batch: records of one label byte + 3x32x32 channel-major pixels."""
    if not data:
        raise LengthError("CIFAR-10 stream is empty")
    if len(data) % CIFAR_RECORD:
        raise LengthError(f"CIFAR-10 stream length {len(data)} is not a multiple of {CIFAR_RECORD}")
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64) + 1
    images = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 1, 3, 2)
    return RawDataset(np.ascontiguousarray(images), labels, 10, split)


def read_cifar10_file(path, **kwargs) -> RawDataset:
    return load_cifar10(_read_bytes(path), **kwargs)


def subset(raw: RawDataset, count: Optional[int]) -> RawDataset:
    """The first `count` samples (all of them when count is None)."""
    if count is None or count >= len(raw):
        return raw
    return RawDataset(raw.images[:count], raw.labels[:count], raw.class_count, raw.split)


# ------------------ Normalization ------------------

def fit_stats(raw: RawDataset) -> NormStats:
    scaled = raw.images.astype(np.float64) / 255.0
    means = scaled.mean(axis=(0, 2, 3))
    stds = scaled.std(axis=(0, 2, 3))
    return NormStats(tuple(float(m) for m in means), tuple(float(s) for s in stds))


def normalize(raw: RawDataset, stats: Union[NormStats, str] = "fit") -> List[LabeledImage]:
    if isinstance(stats, str):
        if stats != "fit":
            raise ValueError(f"stats must be NormStats or 'fit', got {stats!r}")
        stats = fit_stats(raw)
    if raw.images.shape[1] != stats.channels:
        raise FormatError(f"{raw.images.shape[1]}-channel images with {stats.channels}-channel statistics")
    m, s = stats._f32()
    data = (raw.images.astype(np.float32) / np.float32(255.0) - m[None, :, None, None]) / s[None, :, None, None]
    bounds = stats.bounds
    return [LabeledImage(Image(d, bounds), int(label)) for d, label in zip(data, raw.labels)]


def denormalize(img: Image, stats: NormStats) -> Tuple[np.ndarray, int]:
    """8-bit pixels (channels, width, height) and the number of clamped coordinates."""
    m = np.asarray(stats.means, dtype=np.float64)[:, None, None]
    s = np.asarray(stats.stds, dtype=np.float64)[:, None, None]
    values = np.rint((img.data.astype(np.float64) * s + m) * 255.0)
    clamped = int(np.count_nonzero((values < 0) | (values > 255)))
    return np.clip(values, 0, 255).astype(np.uint8), clamped


@dataclass(frozen=True)
class ExportResult:
    path: Path
    clamped: int


def export_png(img: Image, stats: NormStats, path) -> ExportResult:
    """
    Write `img` as an 8-bit grayscale (1 channel) or RGB (3 channels) PNG.
    Clamped coordinates are reported in a `<name>.clamped.txt` sidecar.
    """
    if img.channels not in (1, 3):
        raise FormatError(f"cannot export {img.channels}-channel image as PNG")
    if img.channels != stats.channels:
        raise FormatError(f"{img.channels}-channel image with {stats.channels}-channel statistics")
    pixels, clamped = denormalize(img, stats)
    hwc = pixels.transpose(2, 1, 0)  # (height, width, channels)
    path = Path(path)
    try:
        PILImage.fromarray(hwc[:, :, 0] if img.channels == 1 else np.ascontiguousarray(hwc)).save(path, format="PNG")
        if clamped:
            path.with_name(path.name + ".clamped.txt").write_text(
                f"{clamped} coordinate(s) outside the 8-bit range were clamped to [0, 255]\n"
            )
    except OSError as e:
        raise ExportError(f"could not write {path}: {e}") from e
    return ExportResult(path, clamped)


def save_norm_stats(stats: NormStats, path) -> None:
    b = stats.bounds
    lines = [
        "# normalization statistics: (byte/255 - mean) / std per channel",
        f"channels = {stats.channels}",
        "mean = " + ", ".join(repr(v) for v in stats.means),
        "std = " + ", ".join(repr(v) for v in stats.stds),
        f"lb = {b.lb!r}",
        f"ub = {b.ub!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_norm_stats(path) -> NormStats:
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed line {line!r}")
        values[key.strip()] = value.strip()
    try:
        means = tuple(float(v) for v in values["mean"].split(","))
        stds = tuple(float(v) for v in values["std"].split(","))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: missing or invalid mean/std ({e})") from e
    return NormStats(means, stds)


# ------------------ Synthetic data ------------------

def make_blobs(
    n: int,
    shape: Sequence[int],
    *,
    class_count: int = 2,
    separation: float = 1.5,
    noise: float = 0.3,
    seed: int = 0,
) -> List[LabeledImage]:
    """Gaussian blobs around ±separation class centers; linearly separable for small noise."""
    rng = np.random.default_rng(seed)
    shape = tuple(shape)
    centers = rng.choice([-separation, separation], size=(class_count, *shape))
    while len({c.tobytes() for c in centers}) < class_count:
        centers = rng.choice([-separation, separation], size=(class_count, *shape))
    labels = np.arange(n) % class_count
    data = (centers[labels] + rng.normal(0.0, noise, size=(n, *shape))).astype(np.float32)
    limit = float(np.ceil(np.abs(data).max()))
    bounds = Bounds(-limit, limit)
    return [LabeledImage(Image(d, bounds), int(c) + 1) for d, c in zip(data, labels)]
