"""Convolutional recurrent network for frame-level multi-label detection.

Input is a (T, n_mels) feature matrix; output is a (n_classes, T) matrix of
per-frame class probabilities.  The time dimension is never pooled, so every
input frame gets a prediction.

Architecture: a stack of conv blocks (conv -> ReLU -> band-only max pool,
with dropout while training), the surviving bands stacked channel-major
into one feature vector per frame, GRU layers, sigmoid-activated hidden
dense layers, and a sigmoid output layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .layers import (
    GRU,
    Conv2d,
    Dense,
    Dropout,
    MaxPoolFreq,
    ReLU,
    Sigmoid,
    StackFreq,
    bce_grad,
    bce_loss,
)


@dataclass(frozen=True)
class CrnnConfig:
    """Shape and initialization settings for the detector network.

    conv_blocks entries are (n_filters, kernel_h, kernel_w, pool_factor);
    each pool factor must divide the band count it receives.
    """

    n_classes: int
    n_mels: int = 40
    conv_blocks: tuple[tuple[int, int, int, int], ...] = (
        (128, 3, 3, 5),
        (128, 3, 3, 2),
        (128, 3, 3, 2),
    )
    gru_sizes: tuple[int, ...] = (32, 32)
    dense_sizes: tuple[int, ...] = (32,)
    dropout_keep: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ConfigurationError("n_classes must be at least 1")
        if self.n_mels < 1:
            raise ConfigurationError("n_mels must be at least 1")
        if not self.conv_blocks:
            raise ConfigurationError("at least one conv block is required")
        if not self.gru_sizes:
            raise ConfigurationError("at least one GRU layer is required")
        bands = self.n_mels
        for i, (filters, kh, kw, pool) in enumerate(self.conv_blocks):
            if min(filters, kh, kw, pool) < 1:
                raise ConfigurationError(f"conv block {i} has a non-positive dimension")
            if bands % pool:
                raise ConfigurationError(
                    f"conv block {i} pool factor {pool} does not divide {bands} bands"
                )
            bands //= pool
        if not (0.0 < self.dropout_keep <= 1.0):
            raise ConfigurationError("dropout_keep must lie in (0, 1]")

    @property
    def bands_after_conv(self) -> int:
        bands = self.n_mels
        for _f, _kh, _kw, pool in self.conv_blocks:
            bands //= pool
        return bands

    @property
    def stacked_dim(self) -> int:
        return self.conv_blocks[-1][0] * self.bands_after_conv

    def to_json_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_mels": self.n_mels,
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "gru_sizes": list(self.gru_sizes),
            "dense_sizes": list(self.dense_sizes),
            "dropout_keep": self.dropout_keep,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CrnnConfig":
        return cls(
            n_classes=int(data["n_classes"]),
            n_mels=int(data["n_mels"]),
            conv_blocks=tuple(tuple(int(v) for v in b) for b in data["conv_blocks"]),
            gru_sizes=tuple(int(v) for v in data["gru_sizes"]),
            dense_sizes=tuple(int(v) for v in data["dense_sizes"]),
            dropout_keep=float(data["dropout_keep"]),
            seed=int(data["seed"]),
        )


class Crnn:
    """The assembled detector: parameters, forward pass, and full backprop."""

    def __init__(self, config: CrnnConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.conv_layers: list[Conv2d] = []
        self._conv_act: list[ReLU] = []
        self._pools: list[MaxPoolFreq] = []
        self._conv_drop: list[Dropout] = []
        in_ch = 1
        for filters, kh, kw, pool in config.conv_blocks:
            self.conv_layers.append(Conv2d(in_ch, filters, kh, kw, rng))
            self._conv_act.append(ReLU())
            self._pools.append(MaxPoolFreq(pool))
            self._conv_drop.append(Dropout(config.dropout_keep))
            in_ch = filters
        self._stack = StackFreq()

        self.gru_layers: list[GRU] = []
        self._gru_drop: list[Dropout] = []
        dim = config.stacked_dim
        for size in config.gru_sizes:
            self.gru_layers.append(GRU(dim, size, rng))
            self._gru_drop.append(Dropout(config.dropout_keep))
            dim = size

        self.dense_layers: list[Dense] = []
        self._dense_act: list[Sigmoid] = []
        self._dense_drop: list[Dropout] = []
        for size in config.dense_sizes:
            self.dense_layers.append(Dense(dim, size, rng))
            self._dense_act.append(Sigmoid())
            self._dense_drop.append(Dropout(config.dropout_keep))
            dim = size
        self.out_layer = Dense(dim, config.n_classes, rng)
        self._out_act = Sigmoid()

    def forward(self, feature_values: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Map (T, n_mels) features to (n_classes, T) probabilities."""
        feats = np.asarray(feature_values, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.config.n_mels:
            raise DimensionError(
                f"expected (T, {self.config.n_mels}) features, got shape {feats.shape}"
            )
        if feats.shape[0] < 1:
            raise DimensionError("need at least one frame")
        x = feats.T[None, :, :]  # (1, n_mels, T)
        for conv, act, pool, drop in zip(
            self.conv_layers, self._conv_act, self._pools, self._conv_drop
        ):
            x = drop.forward(pool.forward(act.forward(conv.forward(x))), training, rng)
        x = self._stack.forward(x)
        for gru, drop in zip(self.gru_layers, self._gru_drop):
            x = drop.forward(gru.forward(x), training, rng)
        for dense, act, drop in zip(self.dense_layers, self._dense_act, self._dense_drop):
            x = drop.forward(act.forward(dense.forward(x)), training, rng)
        return self._out_act.forward(self.out_layer.forward(x))

    def backward(self, dprobs: np.ndarray) -> None:
        """Backpropagate dLoss/dProbabilities through the whole network."""
        delta = self.out_layer.backward(self._out_act.backward(dprobs))
        for dense, act, drop in zip(
            reversed(self.dense_layers), reversed(self._dense_act), reversed(self._dense_drop)
        ):
            delta = dense.backward(act.backward(drop.backward(delta)))
        for gru, drop in zip(reversed(self.gru_layers), reversed(self._gru_drop)):
            delta = gru.backward(drop.backward(delta))
        delta = self._stack.backward(delta)
        for conv, act, pool, drop in zip(
            reversed(self.conv_layers), reversed(self._conv_act),
            reversed(self._pools), reversed(self._conv_drop)
        ):
            delta = conv.backward(act.backward(pool.backward(drop.backward(delta))))

    def loss_and_grads(self, feature_values: np.ndarray, targets: np.ndarray,
                       training: bool = False, rng: np.random.Generator | None = None):
        """One forward/backward pass; returns (loss, gradient dict)."""
        probs = self.forward(feature_values, training, rng)
        loss = bce_loss(probs, targets)
        self.backward(bce_grad(probs, targets))
        return loss, self.grads()

    def _named_layers(self):
        for i, conv in enumerate(self.conv_layers):
            yield f"conv{i}", conv
        for i, gru in enumerate(self.gru_layers):
            yield f"gru{i}", gru
        for i, dense in enumerate(self.dense_layers):
            yield f"dense{i}", dense
        yield "out", self.out_layer

    def params(self) -> dict[str, np.ndarray]:
        """Live views of every parameter array, keyed 'layer.name'."""
        return {
            f"{prefix}.{name}": arr
            for prefix, layer in self._named_layers()
            for name, arr in layer.params().items()
        }

    def grads(self) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.{name}": arr
            for prefix, layer in self._named_layers()
            for name, arr in layer.grads().items()
        }

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        """Copy values into the network; keys must match params() exactly."""
        own = self.params()
        if set(own) != set(values):
            missing = sorted(set(own) ^ set(values))
            raise DimensionError(f"parameter name mismatch: {missing}")
        for name, arr in own.items():
            incoming = np.asarray(values[name], dtype=np.float64)
            if incoming.shape != arr.shape:
                raise DimensionError(
                    f"parameter {name} has shape {incoming.shape}, expected {arr.shape}"
                )
            arr[...] = incoming
