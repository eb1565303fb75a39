"""
Black-box classifier access.

A Classifier is anything exposing `input_shape`, `class_count` and
`predict(batch) -> (N, C)` probabilities. Attacks never touch a classifier
directly: they go through an OracleSession, which validates every answer and
counts every forward evaluation.

Labels are 1-based throughout ([1..C]).
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import List, Protocol, Sequence, Tuple

import numpy as np

from .errors import InputError, ParameterError, ProtocolError
from .images import Image, LabeledImage
from .utils import chunked

PROB_TOLERANCE = 1e-5
QUERY_CHUNK = 256


class Classifier(Protocol):
    input_shape: Tuple[int, ...]
    class_count: int

    def predict(self, batch: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class ProbVector:
    probs: np.ndarray  # (C,), index j-1 holds o_j

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def class_count(self) -> int:
        return int(self.probs.shape[0])

    def prob(self, label: int) -> float:
        _check_label(label, self.class_count)
        return float(self.probs[label - 1])

    @property
    def top1(self) -> int:
        return top_k(self, 1)[0]


def check_probs(row: np.ndarray, class_count: int) -> ProbVector:
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (class_count,):
        raise ProtocolError(f"oracle returned shape {row.shape}, expected ({class_count},)", probs=row)
    if not np.all(np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
        raise ProtocolError("oracle returned values outside [0, 1]", probs=row)
    total = float(row.sum())
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ProtocolError(f"oracle probabilities sum to {total:.8f}, not 1", probs=row)
    return ProbVector(row)


class OracleSession:
    """Query counter and validator in front of one classifier; one attack at a time."""

    def __init__(self, oracle: Classifier, *, chunk_size: int = QUERY_CHUNK):
        self.oracle = oracle
        self.class_count = int(oracle.class_count)
        self.query_count = 0
        self.chunk_size = max(1, chunk_size)

    def query(self, img: Image) -> ProbVector:
        return self.query_batch([img])[0]

    def query_batch(self, images: Sequence[Image]) -> List[ProbVector]:
        if not images:
            return []
        for img in images:
            self._check_shape(img.shape)
        probs = self.query_arrays(np.stack([img.data for img in images]))
        return [ProbVector(row) for row in probs]

    def query_arrays(self, batch: np.ndarray) -> np.ndarray:
        """
        Query a stacked (N, channels, width, height) batch; counts N queries.
        Returns validated (N, C) probabilities.
        """
        batch = np.asarray(batch)
        if batch.ndim != 4:
            raise InputError(f"expected a batch of images, got array of shape {batch.shape}")
        self._check_shape(batch.shape[1:])
        rows = []
        for chunk in chunked(batch, self.chunk_size):
            out = np.asarray(self.oracle.predict(chunk), dtype=np.float64)
            self.query_count += len(chunk)
            if out.shape != (len(chunk), self.class_count):
                raise ProtocolError(
                    f"oracle returned shape {out.shape} for {len(chunk)} inputs, expected ({len(chunk)}, {self.class_count})",
                    probs=out,
                )
            rows.extend(check_probs(row, self.class_count).probs for row in out)
        return np.stack(rows)

    def _check_shape(self, shape) -> None:
        expected = tuple(self.oracle.input_shape)
        if tuple(shape) != expected:
            raise InputError(f"image shape {tuple(shape)} does not match oracle input {expected}")


class ConstantClassifier:
    """Answers the same probability vector for every input."""

    def __init__(self, probs: Sequence[float], input_shape: Tuple[int, ...]):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.input_shape = tuple(input_shape)
        self.class_count = int(self.probs.shape[0])

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return np.tile(self.probs, (len(batch), 1))


def _check_label(label: int, class_count: int) -> None:
    if not 1 <= label <= class_count:
        raise ParameterError(f"label {label} outside [1, {class_count}]")


def top_k(p: ProbVector, k: int) -> List[int]:
    """The k most likely labels, most likely first; ties go to the lower label."""
    if not 1 <= k <= p.class_count:
        raise ParameterError(f"k={k} outside [1, {p.class_count}]")
    order = np.argsort(-p.probs, kind="stable")
    return [int(i) + 1 for i in order[:k]]


def is_k_misclassified(p: ProbVector, true_label: int, k: int) -> bool:
    _check_label(true_label, p.class_count)
    return true_label not in top_k(p, k)


def is_good(session: OracleSession, li: LabeledImage) -> bool:
    """True iff the oracle ranks the true label first; costs one query."""
    return not is_k_misclassified(session.query(li.image), li.label, 1)
