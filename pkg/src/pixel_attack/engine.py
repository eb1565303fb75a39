"""
Typed wrapper around the tinynet engine.

Bridges images and 1-based labels to tinynet's arrays and 0-based labels:
- EngineClassifier: a tinynet model as an oracle Classifier (the default oracle)
- forward / analytic_gradient / loss_gradient on Image inputs
- toy model builders and train_toy for desk-scale experiments
"""
from __future__ import annotations
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

import tinynet
from tinynet import BatchNorm, Conv2D, Dense, MaxPool2D, ModelSpec, ReLU, Softmax

from .errors import ParameterError, ShapeError
from .images import Image, LabeledImage
from .oracle import ProbVector, check_probs


class EngineClassifier:
    """A read-only tinynet model answering oracle queries."""

    def __init__(self, model: ModelSpec):
        self.model = model
        self.input_shape = model.input_shape
        self.class_count = model.class_count

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return tinynet.forward(self.model, batch)


def _check_input(model: ModelSpec, img: Image) -> None:
    if img.shape != model.input_shape:
        raise ShapeError("image does not fit model input", expected=model.input_shape, got=img.shape)


def forward(model: ModelSpec, img: Image) -> ProbVector:
    _check_input(model, img)
    return check_probs(tinynet.forward(model, img.data), model.class_count)


def analytic_gradient(model: ModelSpec, img: Image, label: int) -> np.ndarray:
    """d(probability of `label`)/d(input), shaped like the image."""
    _check_input(model, img)
    return tinynet.probability_gradient(model, img.data, label - 1)


def loss_gradient(model: ModelSpec, img: Image, label: int) -> np.ndarray:
    """d(cross-entropy against `label`)/d(input), shaped like the image."""
    _check_input(model, img)
    return tinynet.loss_gradient(model, img.data, label - 1)


# ------------------ Toy models ------------------

def linear_spec(input_shape: Tuple[int, int, int], class_count: int, *, seed: int = 0) -> ModelSpec:
    features = int(np.prod(input_shape))
    spec = ModelSpec([Dense.create(features, class_count), Softmax()], input_shape, class_count)
    return tinynet.init_model(spec, seed)


def toy_conv_spec(
    input_shape: Tuple[int, int, int],
    class_count: int,
    *,
    channels: Sequence[int] = (8, 16),
    batch_norm: bool = False,
    seed: int = 0,
) -> ModelSpec:
    """conv-[bn]-relu-pool blocks followed by a dense classifier; batch norm sits before each ReLU."""
    layers: List[tinynet.Layer] = []
    in_ch = input_shape[0]
    for out_ch in channels:
        layers.append(Conv2D.create(in_ch, out_ch, 3, padding="same"))
        if batch_norm:
            layers.append(BatchNorm.create(out_ch))
        layers += [ReLU(), MaxPool2D(2)]
        in_ch = out_ch
    shape: Tuple[int, ...] = tuple(input_shape)
    for layer in layers:
        shape = layer.output_shape(shape)
    layers += [Dense.create(int(np.prod(shape)), class_count), Softmax()]
    return tinynet.init_model(ModelSpec(layers, input_shape, class_count), seed)


# ------------------ Training ------------------

@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0
    momentum: float = 0.9


@dataclass
class TrainResult:
    model: ModelSpec
    train_accuracy: float
    test_accuracy: Optional[float]
    losses: List[float]


def to_arrays(data: Sequence[LabeledImage]) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked image data and 0-based labels."""
    x = np.stack([li.image.data for li in data])
    y = np.array([li.label - 1 for li in data], dtype=np.int64)
    return x, y


def train_toy(
    spec: ModelSpec,
    data: Sequence[LabeledImage],
    hyper: TrainHyper,
    *,
    test: Optional[Sequence[LabeledImage]] = None,
    verbose: bool = False,
) -> TrainResult:
    """
    Train `spec` (already randomly initialized) with cross-entropy SGD.
    Deterministic for a fixed hyper.seed; reports train and test accuracy.
    """
    if not data:
        raise ParameterError("training data is empty")
    if hyper.epochs < 0:
        raise ParameterError(f"epochs={hyper.epochs} must be >= 0")
    x, y = to_arrays(data)
    if x.shape[1:] != spec.input_shape:
        raise ShapeError("training images do not fit model input", expected=spec.input_shape, got=x.shape[1:])

    def report(epoch: int, loss: float) -> None:
        print(f"Epoch {epoch}/{hyper.epochs}: loss={loss:.4f}", file=sys.stderr)

    model, losses = tinynet.train(
        spec, x, y,
        learning_rate=hyper.learning_rate,
        epochs=hyper.epochs,
        batch_size=hyper.batch_size,
        seed=hyper.seed,
        momentum=hyper.momentum,
        on_epoch=report if verbose else None,
    )
    test_acc = None
    if test:
        tx, ty = to_arrays(test)
        test_acc = tinynet.accuracy(model, tx, ty)
    return TrainResult(model, tinynet.accuracy(model, x, y), test_acc, losses)
