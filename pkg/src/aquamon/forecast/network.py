"""From-scratch 1D convolutional forecaster: forward, backprop, Adam.

Shape conventions: a window is (H, C) = time x channels; batches are
(B, H, C). Convolutions run over the time axis with stride 1 and zero
same-padding, so every layer preserves H.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .windows import Normalizer, WindowSpec

WEIGHT_FORMAT_VERSION = 1

#: layer widths of the default architecture (two conv layers + dense head)
DEFAULT_CONV_CHANNELS = (16, 32)
DEFAULT_KERNEL_SIZE = 3


class ShapeError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch


@dataclass
class TrainingParams:
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b")


@dataclass
class CnnModel:
    spec: WindowSpec
    normalizer: Normalizer
    weights: dict[str, np.ndarray]
    conv_channels: tuple[int, int] = DEFAULT_CONV_CHANNELS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    format_version: int = WEIGHT_FORMAT_VERSION
    trained_on: str = ""

    def __post_init__(self):
        for name in PARAM_NAMES:
            if name not in self.weights:
                raise ShapeError(f"missing weight tensor {name}")
            if not np.isfinite(self.weights[name]).all():
                raise ValueError(f"non-finite values in {name}")
        c1, c2 = self.conv_channels
        k, H, h = self.kernel_size, self.spec.history_steps, self.spec.horizon_steps
        expected = {
            "conv1_w": (c1, self.spec.n_channels, k),
            "conv1_b": (c1,),
            "conv2_w": (c2, c1, k),
            "conv2_b": (c2,),
            "dense_w": (h, c2 * H),
            "dense_b": (h,),
        }
        for name, shape in expected.items():
            if self.weights[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {self.weights[name].shape}")

    @property
    def version_tag(self) -> str:
        return f"aqmd-v{self.format_version}"

    def forward(self, window: np.ndarray) -> np.ndarray:
        """Run one normalized (H, C) window; returns h normalized outputs."""
        window = np.asarray(window, dtype=float)
        if window.shape != (self.spec.history_steps, self.spec.n_channels):
            raise ShapeError(
                f"input shape {window.shape} != "
                f"({self.spec.history_steps}, {self.spec.n_channels})")
        if not np.isfinite(window).all():
            raise ShapeError("input contains non-finite values")
        return forward_batch(self, window[None, :, :])[0]

    def predict(self, raw_window: np.ndarray) -> np.ndarray:
        """Forecast in natural units from a raw (H, C) window."""
        normalized = self.normalizer.transform(np.asarray(raw_window, dtype=float))
        out = self.forward(normalized)
        return self.normalizer.inverse_transform_target(out, self.spec.target_channel)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x: (B, T, C_in), w: (C_out, C_in, k) -> (B, T, C_out)."""
    k = w.shape[2]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    sw = sliding_window_view(xp, k, axis=1)  # (B, T, C_in, k)
    return np.einsum("btck,ock->bto", sw, w) + b


def forward_batch(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Batched forward pass on normalized inputs (B, H, C) -> (B, h)."""
    w = model.weights
    a1 = np.maximum(0.0, _conv_forward(x, w["conv1_w"], w["conv1_b"]))
    a2 = np.maximum(0.0, _conv_forward(a1, w["conv2_w"], w["conv2_b"]))
    flat = a2.reshape(a2.shape[0], -1)
    return flat @ w["dense_w"].T + w["dense_b"]


def _conv_backward(dz: np.ndarray, x: np.ndarray, w: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a same-padded conv: dz (B,T,C_out), x (B,T,C_in)."""
    B, T, _ = x.shape
    k = w.shape[2]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    sw = sliding_window_view(xp, k, axis=1)
    dw = np.einsum("bto,btck->ock", dz, sw)
    db = dz.sum(axis=(0, 1))
    dxp = np.zeros_like(xp)
    for kk in range(k):
        dxp[:, kk:kk + T, :] += np.einsum("bto,oc->btc", dz, w[:, :, kk])
    return dw, db, dxp[:, pad:pad + T, :]


def loss_and_grads(model: CnnModel, x: np.ndarray, targets: np.ndarray
                   ) -> tuple[float, dict[str, np.ndarray]]:
    """MSE loss and analytic gradients over a normalized batch."""
    w = model.weights
    z1 = _conv_forward(x, w["conv1_w"], w["conv1_b"])
    a1 = np.maximum(0.0, z1)
    z2 = _conv_forward(a1, w["conv2_w"], w["conv2_b"])
    a2 = np.maximum(0.0, z2)
    flat = a2.reshape(a2.shape[0], -1)
    pred = flat @ w["dense_w"].T + w["dense_b"]

    err = pred - targets
    loss = float(np.mean(err ** 2))

    dpred = 2.0 * err / err.size
    grads: dict[str, np.ndarray] = {}
    grads["dense_w"] = dpred.T @ flat
    grads["dense_b"] = dpred.sum(axis=0)
    dflat = dpred @ w["dense_w"]
    da2 = dflat.reshape(a2.shape)
    dz2 = da2 * (z2 > 0)
    grads["conv2_w"], grads["conv2_b"], da1 = _conv_backward(dz2, a1, w["conv2_w"])
    dz1 = da1 * (z1 > 0)
    grads["conv1_w"], grads["conv1_b"], _ = _conv_backward(dz1, x, w["conv1_w"])
    return loss, grads


def init_weights(spec: WindowSpec, conv_channels: tuple[int, int], kernel_size: int,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, drawn in a fixed order."""
    c1, c2 = conv_channels
    k, H, h, C = kernel_size, spec.history_steps, spec.horizon_steps, spec.n_channels

    def glorot(shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return {
        "conv1_w": glorot((c1, C, k), C * k, c1 * k),
        "conv1_b": np.zeros(c1),
        "conv2_w": glorot((c2, c1, k), c1 * k, c2 * k),
        "conv2_b": np.zeros(c2),
        "dense_w": glorot((h, c2 * H), c2 * H, h),
        "dense_b": np.zeros(h),
    }


def train(windows: list[tuple[np.ndarray, np.ndarray]], spec: WindowSpec,
          hyper: Optional[TrainingParams] = None,
          conv_channels: tuple[int, int] = DEFAULT_CONV_CHANNELS,
          kernel_size: int = DEFAULT_KERNEL_SIZE,
          trained_on: str = "") -> CnnModel:
    """Mini-batch Adam on MSE. Identical seed + data + hyperparameters
    reproduce bit-identical weights.
    """
    if not windows:
        raise ValueError("cannot train on an empty window list")
    hyper = hyper or TrainingParams()
    rng = np.random.default_rng(hyper.seed)

    inputs = np.stack([w[0] for w in windows])
    targets = np.stack([w[1] for w in windows])
    normalizer = Normalizer.fit(inputs)
    x = normalizer.transform(inputs)
    t = normalizer.transform_target(targets, spec.target_channel)

    weights = init_weights(spec, conv_channels, kernel_size, rng)
    model = CnnModel(spec=spec, normalizer=normalizer, weights=weights,
                     conv_channels=conv_channels, kernel_size=kernel_size,
                     trained_on=trained_on)

    m = {name: np.zeros_like(w) for name, w in weights.items()}
    v = {name: np.zeros_like(w) for name, w in weights.items()}
    step = 0
    n = x.shape[0]
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.batch_size):
            batch = order[lo:lo + hyper.batch_size]
            loss, grads = loss_and_grads(model, x[batch], t[batch])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            step += 1
            for name in PARAM_NAMES:
                g = grads[name]
                m[name] = hyper.beta1 * m[name] + (1 - hyper.beta1) * g
                v[name] = hyper.beta2 * v[name] + (1 - hyper.beta2) * g ** 2
                m_hat = m[name] / (1 - hyper.beta1 ** step)
                v_hat = v[name] / (1 - hyper.beta2 ** step)
                weights[name] -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.adam_eps)
    return model


def training_loss(model: CnnModel, windows: list[tuple[np.ndarray, np.ndarray]]) -> float:
    """MSE of the model over a window list, in normalized space."""
    inputs = np.stack([w[0] for w in windows])
    targets = np.stack([w[1] for w in windows])
    x = model.normalizer.transform(inputs)
    t = model.normalizer.transform_target(targets, model.spec.target_channel)
    loss, _ = loss_and_grads(model, x, t)
    return loss
