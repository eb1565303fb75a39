"""
Minimal from-scratch neural network engine on top of numpy.

Components:
- Layers: Conv2D, Dense, ReLU, MaxPool2D, BatchNorm (fixed statistics), Softmax
- ModelSpec: ordered layer list + input shape + class count, validated end to end
- forward / probability_gradient / loss_gradient: batched inference and
  input gradients through every layer
- train: minibatch SGD with momentum on cross-entropy, seed-deterministic
- save_model / load_model: self-describing little-endian binary format
- fold_batch_norm / describe

Image-like tensors are (N, channels, dim1, dim2); a Dense layer flattens its
input. Weights are stored as float32, arithmetic runs in float64. Labels are
0-based here; callers that speak 1-based labels translate at their boundary.
"""
from __future__ import annotations
import copy, struct
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Shape = Tuple[int, ...]

MAGIC = b"TNET"
FORMAT_VERSION = 1


class EngineError(Exception):
    """Base class for engine failures."""


class EngineShapeError(EngineError, ValueError):
    def __init__(self, message: str, *, expected: object = None, got: object = None):
        self.expected = expected
        self.got = got
        if expected is not None or got is not None:
            message = f"{message} (expected {expected}, got {got})"
        super().__init__(message)


class NumericError(EngineError, ArithmeticError):
    def __init__(self, message: str, *, layer: Optional[int] = None):
        self.layer = layer
        super().__init__(message if layer is None else f"{message} at layer {layer}")


class TrainingError(EngineError):
    """Raised when the training loss stops being finite."""
    def __init__(self, *, epoch: int, batch: int, loss: float, learning_rate: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        self.learning_rate = learning_rate
        super().__init__(
            f"training diverged at epoch {epoch} batch {batch}: loss={loss} "
            f"(learning_rate={learning_rate}); try a smaller learning rate"
        )


class ModelFormatError(EngineError, ValueError):
    """Raised when a serialized model cannot be parsed."""


def _f32(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float32))


def _same_padding(kernel: int) -> Tuple[int, int]:
    total = kernel - 1
    return total // 2, total - total // 2


def _scatter_windows(grad_windows: np.ndarray, out_shape: Shape, stride: int) -> np.ndarray:
    # grad_windows: (N, C, Ho, Wo, k1, k2) -> accumulate back into (N, C, H, W)
    dx = np.zeros(out_shape, dtype=np.float64)
    ho, wo, k1, k2 = grad_windows.shape[2:]
    for i in range(k1):
        for j in range(k2):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += grad_windows[..., i, j]
    return dx


# ------------------ Layers ------------------

class Layer:
    kind: ClassVar[str] = ""
    trainable: ClassVar[Tuple[str, ...]] = ()

    def params(self) -> Dict[str, np.ndarray]:
        return {}

    def settings(self) -> Dict[str, float]:
        return {}

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, object]:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache: object) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        raise NotImplementedError


@dataclass
class Conv2D(Layer):
    kind: ClassVar[str] = "conv"
    trainable: ClassVar[Tuple[str, ...]] = ("weight", "bias")

    weight: np.ndarray  # (out_channels, in_channels, k, k)
    bias: np.ndarray    # (out_channels,)
    stride: int = 1
    padding: str = "valid"

    def __post_init__(self):
        self.weight, self.bias = _f32(self.weight), _f32(self.bias)
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise EngineShapeError("conv weight must be (out, in, k, k)", got=self.weight.shape)
        if self.bias.shape != (self.weight.shape[0],):
            raise EngineShapeError("conv bias length", expected=(self.weight.shape[0],), got=self.bias.shape)
        if self.stride < 1:
            raise EngineShapeError("conv stride must be >= 1", got=self.stride)
        if self.padding not in ("valid", "same"):
            raise EngineShapeError("conv padding must be 'valid' or 'same'", got=self.padding)

    @classmethod
    def create(cls, in_channels: int, out_channels: int, kernel: int, *, stride: int = 1, padding: str = "same") -> "Conv2D":
        return cls(np.zeros((out_channels, in_channels, kernel, kernel)), np.zeros(out_channels), stride, padding)

    @property
    def kernel(self) -> int:
        return int(self.weight.shape[2])

    def _pads(self) -> Tuple[int, int]:
        return _same_padding(self.kernel) if self.padding == "same" else (0, 0)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def settings(self):
        return {"stride": self.stride, "padding": 1 if self.padding == "same" else 0}

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.weight.shape[1]:
            raise EngineShapeError("conv input", expected=(self.weight.shape[1], "*", "*"), got=input_shape)
        lo, hi = self._pads()
        dims = [(n + lo + hi - self.kernel) // self.stride + 1 for n in input_shape[1:]]
        if min(dims) < 1:
            raise EngineShapeError("conv kernel larger than input", got=input_shape)
        return (int(self.weight.shape[0]), *dims)

    def forward(self, x):
        lo, hi = self._pads()
        xp = np.pad(x, ((0, 0), (0, 0), (lo, hi), (lo, hi)))
        win = sliding_window_view(xp, (self.kernel, self.kernel), axis=(2, 3))[:, :, ::self.stride, ::self.stride]
        w = self.weight.astype(np.float64)
        out = np.einsum("nchwij,ocij->nohw", win, w, optimize=True)
        out += self.bias.astype(np.float64)[None, :, None, None]
        return out, (xp.shape, win)

    def backward(self, grad, cache):
        xp_shape, win = cache
        w = self.weight.astype(np.float64)
        grads = {
            "weight": np.einsum("nchwij,nohw->ocij", win, grad, optimize=True),
            "bias": grad.sum(axis=(0, 2, 3)),
        }
        gwin = np.einsum("nohw,ocij->nchwij", grad, w, optimize=True)
        dxp = _scatter_windows(gwin, xp_shape, self.stride)
        lo, hi = self._pads()
        return dxp[:, :, lo:xp_shape[2] - hi, lo:xp_shape[3] - hi], grads


@dataclass
class Dense(Layer):
    kind: ClassVar[str] = "dense"
    trainable: ClassVar[Tuple[str, ...]] = ("weight", "bias")

    weight: np.ndarray  # (in_features, out_features)
    bias: np.ndarray    # (out_features,)

    def __post_init__(self):
        self.weight, self.bias = _f32(self.weight), _f32(self.bias)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise EngineShapeError("dense weight/bias", expected="(in, out)/(out,)", got=(self.weight.shape, self.bias.shape))

    @classmethod
    def create(cls, in_features: int, out_features: int) -> "Dense":
        return cls(np.zeros((in_features, out_features)), np.zeros(out_features))

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def output_shape(self, input_shape):
        if int(np.prod(input_shape)) != self.weight.shape[0]:
            raise EngineShapeError("dense input size", expected=self.weight.shape[0], got=input_shape)
        return (int(self.weight.shape[1]),)

    def forward(self, x):
        flat = x.reshape(x.shape[0], -1)
        return flat @ self.weight.astype(np.float64) + self.bias.astype(np.float64), (x.shape, flat)

    def backward(self, grad, cache):
        shape, flat = cache
        grads = {"weight": flat.T @ grad, "bias": grad.sum(axis=0)}
        return (grad @ self.weight.astype(np.float64).T).reshape(shape), grads


@dataclass
class ReLU(Layer):
    kind: ClassVar[str] = "relu"

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, grad, cache):
        return grad * cache, {}


@dataclass
class MaxPool2D(Layer):
    kind: ClassVar[str] = "maxpool"

    size: int = 2
    stride: int = 0  # 0 means stride == size

    def __post_init__(self):
        if self.stride == 0:
            self.stride = self.size
        if self.size < 1 or self.stride < 1:
            raise EngineShapeError("maxpool size/stride must be >= 1", got=(self.size, self.stride))

    def settings(self):
        return {"size": self.size, "stride": self.stride}

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise EngineShapeError("maxpool expects (channels, h, w)", got=input_shape)
        dims = [(n - self.size) // self.stride + 1 for n in input_shape[1:]]
        if min(dims) < 1:
            raise EngineShapeError("maxpool window larger than input", got=input_shape)
        return (input_shape[0], *dims)

    def forward(self, x):
        s = self.size
        win = sliding_window_view(x, (s, s), axis=(2, 3))[:, :, ::self.stride, ::self.stride]
        flat = win.reshape(*win.shape[:4], s * s)
        idx = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        return out, (x.shape, idx)

    def backward(self, grad, cache):
        shape, idx = cache
        s = self.size
        gflat = np.zeros((*idx.shape, s * s), dtype=np.float64)
        np.put_along_axis(gflat, idx[..., None], grad[..., None], axis=-1)
        return _scatter_windows(gflat.reshape(*idx.shape, s, s), shape, self.stride), {}


@dataclass
class BatchNorm(Layer):
    """Inference-mode batch normalization over axis 1; statistics are never updated."""
    kind: ClassVar[str] = "batchnorm"
    trainable: ClassVar[Tuple[str, ...]] = ("gamma", "beta")

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        self.gamma, self.beta = _f32(self.gamma), _f32(self.beta)
        self.mean, self.var = _f32(self.mean), _f32(self.var)
        n = self.gamma.shape
        if len(n) != 1 or any(a.shape != n for a in (self.beta, self.mean, self.var)):
            raise EngineShapeError("batchnorm parameters must be equal-length vectors")
        if np.any(self.var < 0):
            raise EngineShapeError("batchnorm variance must be non-negative")

    @classmethod
    def create(cls, channels: int, eps: float = 1e-5) -> "BatchNorm":
        return cls(np.ones(channels), np.zeros(channels), np.zeros(channels), np.ones(channels), eps)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta, "mean": self.mean, "var": self.var}

    def settings(self):
        return {"eps": self.eps}

    def output_shape(self, input_shape):
        if input_shape[0] != self.gamma.shape[0]:
            raise EngineShapeError("batchnorm channels", expected=self.gamma.shape[0], got=input_shape)
        return input_shape

    def _view(self, a: np.ndarray, ndim: int) -> np.ndarray:
        return a.astype(np.float64).reshape((1, -1) + (1,) * (ndim - 2))

    def scale(self) -> np.ndarray:
        return self.gamma.astype(np.float64) / np.sqrt(self.var.astype(np.float64) + self.eps)

    def forward(self, x):
        xhat = (x - self._view(self.mean, x.ndim)) / np.sqrt(self._view(self.var, x.ndim) + self.eps)
        return self._view(self.gamma, x.ndim) * xhat + self._view(self.beta, x.ndim), xhat

    def backward(self, grad, cache):
        axes = tuple(a for a in range(grad.ndim) if a != 1)
        grads = {"gamma": (grad * cache).sum(axis=axes), "beta": grad.sum(axis=axes)}
        scale = self.scale().reshape((1, -1) + (1,) * (grad.ndim - 2))
        return grad * scale, grads


@dataclass
class Softmax(Layer):
    kind: ClassVar[str] = "softmax"

    def forward(self, x):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return p, p

    def backward(self, grad, cache):
        p = cache
        return p * (grad - (grad * p).sum(axis=1, keepdims=True)), {}


LAYER_KINDS: Dict[str, type] = {
    cls.kind: cls for cls in (Conv2D, Dense, ReLU, MaxPool2D, BatchNorm, Softmax)
}
_KIND_CODES = {"conv": 1, "dense": 2, "relu": 3, "maxpool": 4, "batchnorm": 5, "softmax": 6}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


# ------------------ Model ------------------

@dataclass
class ModelSpec:
    layers: List[Layer]
    input_shape: Shape
    class_count: int
    shapes: List[Shape] = field(init=False, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(n) for n in self.input_shape)
        self.shapes = self.output_shapes()

    def output_shapes(self) -> List[Shape]:
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise EngineShapeError("the final layer must be softmax")
        if sum(isinstance(layer, Softmax) for layer in self.layers) != 1:
            raise EngineShapeError("softmax must appear exactly once")
        shapes = []
        shape: Shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        if shape != (self.class_count,):
            raise EngineShapeError("model output", expected=(self.class_count,), got=shape)
        return shapes

    def parameter_count(self) -> int:
        return sum(int(a.size) for layer in self.layers for a in layer.params().values())


def _as_batch(model: ModelSpec, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape == model.input_shape:
        return x[None], True
    if x.shape[1:] != model.input_shape:
        raise EngineShapeError("input shape", expected=model.input_shape, got=x.shape)
    return x, False


def _run(model: ModelSpec, x: np.ndarray) -> Tuple[np.ndarray, List[object]]:
    caches = []
    for layer in model.layers[:-1]:
        x, cache = layer.forward(x)
        caches.append(cache)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite logits", layer=len(model.layers) - 2)
    probs, _ = model.layers[-1].forward(x)
    return probs, caches


def _backprop(model: ModelSpec, caches: List[object], grad_logits: np.ndarray) -> Tuple[np.ndarray, List[Dict[str, np.ndarray]]]:
    grad = grad_logits
    param_grads: List[Dict[str, np.ndarray]] = [{} for _ in model.layers]
    for i in range(len(model.layers) - 2, -1, -1):
        grad, param_grads[i] = model.layers[i].backward(grad, caches[i])
    return grad, param_grads


def forward(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one input (C,) or a batch (N, C)."""
    batch, single = _as_batch(model, x)
    probs, _ = _run(model, batch)
    return probs[0] if single else probs


def _one_hot(labels: np.ndarray, n: int, classes: int) -> np.ndarray:
    labels = np.broadcast_to(np.asarray(labels, dtype=np.int64), (n,))
    if np.any(labels < 0) or np.any(labels >= classes):
        raise EngineShapeError("label out of range", expected=f"[0, {classes})", got=labels.tolist())
    out = np.zeros((n, classes))
    out[np.arange(n), labels] = 1.0
    return out


def _input_gradient(model: ModelSpec, x: np.ndarray, labels, logit_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    batch, single = _as_batch(model, x)
    probs, caches = _run(model, batch)
    onehot = _one_hot(labels, batch.shape[0], model.class_count)
    dx, _ = _backprop(model, caches, logit_grad(probs, onehot))
    return dx[0] if single else dx


def probability_gradient(model: ModelSpec, x: np.ndarray, label) -> np.ndarray:
    """d p[label] / d input, via backpropagation."""
    return _input_gradient(model, x, label, lambda p, t: (p * t).sum(axis=1, keepdims=True) * (t - p))


def loss_gradient(model: ModelSpec, x: np.ndarray, target) -> np.ndarray:
    """d (-log p[target]) / d input."""
    return _input_gradient(model, x, target, lambda p, t: p - t)


def predict_labels(model: ModelSpec, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    out = [forward(model, x[i:i + batch_size]).argmax(axis=1) for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def accuracy(model: ModelSpec, x: np.ndarray, y: np.ndarray) -> float:
    if len(x) == 0:
        return 0.0
    return float(np.mean(predict_labels(model, x) == np.asarray(y)))


# ------------------ Init / training ------------------

def init_model(model: ModelSpec, seed: int) -> ModelSpec:
    """Uniform [-s, s] weights with s = 1/sqrt(fan_in); zero biases; identity batch norm."""
    rng = np.random.default_rng(seed)
    out = copy.deepcopy(model)
    for layer in out.layers:
        if isinstance(layer, (Conv2D, Dense)):
            fan_in = int(np.prod(layer.weight.shape[1:])) if isinstance(layer, Conv2D) else layer.weight.shape[0]
            s = 1.0 / np.sqrt(fan_in)
            layer.weight = _f32(rng.uniform(-s, s, size=layer.weight.shape))
            layer.bias = _f32(np.zeros_like(layer.bias))
        elif isinstance(layer, BatchNorm):
            n = layer.gamma.shape[0]
            layer.gamma, layer.beta = _f32(np.ones(n)), _f32(np.zeros(n))
            layer.mean, layer.var = _f32(np.zeros(n)), _f32(np.ones(n))
    return out


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.clip(picked, 1e-12, None))))


def train(
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    *,
    learning_rate: float,
    epochs: int,
    batch_size: int,
    seed: int,
    momentum: float = 0.9,
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> Tuple[ModelSpec, List[float]]:
    """
    Minibatch SGD on cross-entropy. Returns a trained copy and per-epoch mean loss.
    Shuffling uses numpy's default_rng(seed), so runs are reproducible.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0 or len(x) != len(y):
        raise EngineShapeError("training data", expected="non-empty, len(x) == len(y)", got=(len(x), len(y)))
    if x.shape[1:] != model.input_shape:
        raise EngineShapeError("training input shape", expected=model.input_shape, got=x.shape[1:])
    out = copy.deepcopy(model)
    rng = np.random.default_rng(seed)
    velocity = [{name: np.zeros(getattr(layer, name).shape) for name in layer.trainable} for layer in out.layers]
    losses: List[float] = []
    batch_size = max(1, batch_size)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(x))
        epoch_loss, seen = 0.0, 0
        for b, start in enumerate(range(0, len(x), batch_size), start=1):
            idx = order[start:start + batch_size]
            probs, caches = _run(out, x[idx])
            loss = cross_entropy(probs, y[idx])
            if not np.isfinite(loss):
                raise TrainingError(epoch=epoch, batch=b, loss=loss, learning_rate=learning_rate)
            grad_logits = (probs - _one_hot(y[idx], len(idx), out.class_count)) / len(idx)
            _, grads = _backprop(out, caches, grad_logits)
            for layer, vel, g in zip(out.layers, velocity, grads):
                for name in layer.trainable:
                    vel[name] = momentum * vel[name] - learning_rate * g[name]
                    setattr(layer, name, _f32(getattr(layer, name).astype(np.float64) + vel[name]))
            epoch_loss += loss * len(idx)
            seen += len(idx)
        losses.append(epoch_loss / seen)
        if on_epoch is not None:
            on_epoch(epoch, losses[-1])
    return out, losses


def fold_batch_norm(model: ModelSpec) -> ModelSpec:
    """Equivalent model with each batch norm folded into the conv/dense layer before it."""
    layers: List[Layer] = []
    for layer in copy.deepcopy(model.layers):
        prev = layers[-1] if layers else None
        if isinstance(layer, BatchNorm) and isinstance(prev, (Conv2D, Dense)):
            scale = layer.scale()
            shift = layer.beta.astype(np.float64) - layer.mean.astype(np.float64) * scale
            w = prev.weight.astype(np.float64)
            prev.weight = _f32(w * scale[:, None, None, None] if isinstance(prev, Conv2D) else w * scale[None, :])
            prev.bias = _f32(prev.bias.astype(np.float64) * scale + shift)
            continue
        layers.append(layer)
    return ModelSpec(layers, model.input_shape, model.class_count)


# ------------------ Serialization ------------------

def _settings_bytes(layer: Layer) -> bytes:
    if isinstance(layer, Conv2D):
        return struct.pack("<IB", layer.stride, 1 if layer.padding == "same" else 0)
    if isinstance(layer, MaxPool2D):
        return struct.pack("<II", layer.size, layer.stride)
    if isinstance(layer, BatchNorm):
        return struct.pack("<d", layer.eps)
    return b""


def dumps_model(model: ModelSpec) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<HB", FORMAT_VERSION, len(model.input_shape))
    out += struct.pack(f"<{len(model.input_shape)}I", *model.input_shape)
    out += struct.pack("<II", model.class_count, len(model.layers))
    for layer in model.layers:
        out += struct.pack("<B", _KIND_CODES[layer.kind]) + _settings_bytes(layer)
        params = layer.params()
        out += struct.pack("<B", len(params))
        for name, arr in params.items():
            encoded = name.encode("ascii")
            out += struct.pack("<B", len(encoded)) + encoded
            out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
            out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ModelFormatError(f"truncated model file at byte {self.pos}")
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values

    def array(self, shape: Shape) -> np.ndarray:
        n = int(np.prod(shape)) * 4
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"truncated weight blob at byte {self.pos}")
        arr = np.frombuffer(self.data, dtype="<f4", count=n // 4, offset=self.pos).reshape(shape)
        self.pos += n
        return arr.astype(np.float32)


def loads_model(data: bytes) -> ModelSpec:
    if data[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    r = _Reader(data)
    r.pos = 4
    version, ndim = r.take("<HB")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    input_shape = r.take(f"<{ndim}I")
    class_count, n_layers = r.take("<II")
    layers: List[Layer] = []
    for _ in range(n_layers):
        (code,) = r.take("<B")
        kind = _CODE_KINDS.get(code)
        if kind is None:
            raise ModelFormatError(f"unknown layer code {code}")
        settings: Dict[str, object] = {}
        if kind == "conv":
            stride, same = r.take("<IB")
            settings = {"stride": stride, "padding": "same" if same else "valid"}
        elif kind == "maxpool":
            size, stride = r.take("<II")
            settings = {"size": size, "stride": stride}
        elif kind == "batchnorm":
            (settings["eps"],) = r.take("<d")
        (n_params,) = r.take("<B")
        params = {}
        for _ in range(n_params):
            (name_len,) = r.take("<B")
            name = bytes(r.take(f"<{name_len}s")[0]).decode("ascii")
            (arr_ndim,) = r.take("<B")
            params[name] = r.array(r.take(f"<{arr_ndim}I"))
        try:
            layers.append(LAYER_KINDS[kind](**params, **settings))
        except TypeError as e:
            raise ModelFormatError(f"bad parameters for {kind} layer: {e}") from e
    if r.pos != len(data):
        raise ModelFormatError(f"{len(data) - r.pos} trailing bytes after model")
    try:
        return ModelSpec(layers, input_shape, class_count)
    except EngineShapeError as e:
        raise ModelFormatError(f"inconsistent model: {e}") from e


def save_model(model: ModelSpec, path) -> None:
    with open(path, "wb") as f:
        f.write(dumps_model(model))


def load_model(path) -> ModelSpec:
    with open(path, "rb") as f:
        return loads_model(f.read())


def describe(model: ModelSpec) -> str:
    """Human-readable header dump of a model."""
    lines = [
        f"{MAGIC.decode()} v{FORMAT_VERSION} input={model.input_shape} classes={model.class_count} "
        f"params={model.parameter_count()}"
    ]
    for i, (layer, shape) in enumerate(zip(model.layers, model.shapes)):
        parts = [f"{i:>2} {layer.kind:<9} out={shape}"]
        parts += [f"{k}{tuple(v.shape)}" for k, v in layer.params().items()]
        parts += [f"{k}={v}" for k, v in layer.settings().items()]
        lines.append(" ".join(parts))
    return "\n".join(lines)
