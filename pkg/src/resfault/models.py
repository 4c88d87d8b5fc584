"""Residual-calculating models: autoencoder and operating-conditions regressor.

The autoencoder reconstructs the full channel vector (descriptors and
sensors together) through a narrow bottleneck; its residual is input minus
reconstruction. The operating-conditions model maps the descriptors to
the sensor readings; its residual is measured minus predicted sensors.
Both are trained on standardized healthy rows only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ShapeMismatch
from .preprocess import Standardizer

AE_KIND = "AE"
OC_KIND = "OC"

AE_HIDDEN = (128, 8, 128)
OC_HIDDEN = (128, 128)


def ae_layer_dims(n_z: int) -> tuple[int, ...]:
    return (n_z, *AE_HIDDEN, n_z)


def oc_layer_dims(n_w: int, n_x: int) -> tuple[int, ...]:
    return (n_w, *OC_HIDDEN, n_x)


@dataclass(frozen=True)
class AeModel:
    """Autoencoder over all channels, bottleneck width 8."""

    net: nn.DenseNet
    standardizer: Standardizer
    n_w: int

    def __post_init__(self):
        dims = self.net.layer_dims
        if dims[0] != dims[-1]:
            raise ShapeMismatch("autoencoder input and output widths must match")
        if dims != ae_layer_dims(dims[0]):
            raise ShapeMismatch(f"expected layer dims {ae_layer_dims(dims[0])}, got {dims}")
        if self.net.activations != nn.default_activations(self.net.n_layers):
            raise ShapeMismatch("hidden layers must be relu with a linear output")
        if self.standardizer.n_channels != dims[0]:
            raise ShapeMismatch("standardizer width must match the channel count")

    @property
    def kind(self) -> str:
        return AE_KIND

    @property
    def n_channels(self) -> int:
        return self.net.layer_dims[0]

    def bottleneck_layer(self) -> int:
        dims = self.net.layer_dims
        return int(np.argmin(dims[1:-1])) + 1

    def embed(self, z_rows: np.ndarray) -> np.ndarray:
        """Bottleneck activations for standardized rows."""
        _, acts = nn.forward_activations(self.net, z_rows)
        return acts[self.bottleneck_layer()]


@dataclass(frozen=True)
class OcModel:
    """Regressor from operating descriptors to sensor readings."""

    net: nn.DenseNet
    standardizer: Standardizer
    n_w: int

    def __post_init__(self):
        dims = self.net.layer_dims
        if dims[0] != self.n_w:
            raise ShapeMismatch("input width must equal the descriptor count")
        if dims != oc_layer_dims(dims[0], dims[-1]):
            raise ShapeMismatch(
                f"expected layer dims {oc_layer_dims(dims[0], dims[-1])}, got {dims}"
            )
        if self.net.activations != nn.default_activations(self.net.n_layers):
            raise ShapeMismatch("hidden layers must be relu with a linear output")
        if self.standardizer.n_channels != self.n_w + dims[-1]:
            raise ShapeMismatch("standardizer must cover descriptor and sensor channels")

    @property
    def kind(self) -> str:
        return OC_KIND

    @property
    def n_x(self) -> int:
        return self.net.layer_dims[-1]


def train_ae(
    healthy_train: np.ndarray,
    healthy_val: np.ndarray,
    cfg: nn.TrainConfig,
    standardizer: Standardizer,
    n_w: int,
) -> tuple[AeModel, nn.TrainResult]:
    """Train the autoencoder on standardized healthy rows (input = target)."""
    z_train = np.asarray(healthy_train, dtype=np.float64)
    z_val = np.asarray(healthy_val, dtype=np.float64)
    net = nn.init_weights(ae_layer_dims(z_train.shape[1]), seed=cfg.seed)
    result = nn.train(net, (z_train, z_train), (z_val, z_val), cfg)
    return AeModel(net=result.net, standardizer=standardizer, n_w=n_w), result


def train_oc(
    healthy_train: tuple[np.ndarray, np.ndarray],
    healthy_val: tuple[np.ndarray, np.ndarray],
    cfg: nn.TrainConfig,
    standardizer: Standardizer,
) -> tuple[OcModel, nn.TrainResult]:
    """Train the descriptor-to-sensor regressor on standardized healthy rows."""
    w_train, x_train = (np.asarray(a, dtype=np.float64) for a in healthy_train)
    w_val, x_val = (np.asarray(a, dtype=np.float64) for a in healthy_val)
    net = nn.init_weights(oc_layer_dims(w_train.shape[1], x_train.shape[1]), seed=cfg.seed)
    result = nn.train(net, (w_train, x_train), (w_val, x_val), cfg)
    model = OcModel(net=result.net, standardizer=standardizer, n_w=w_train.shape[1])
    return model, result


def residual_ae(model: AeModel, z_rows: np.ndarray) -> np.ndarray:
    """Row-wise input minus reconstruction; expects standardized rows."""
    z_rows = np.asarray(z_rows, dtype=np.float64)
    return z_rows - nn.forward(model.net, z_rows)


def residual_oc(model: OcModel, w_rows: np.ndarray, x_rows: np.ndarray) -> np.ndarray:
    """Row-wise measured minus predicted sensors; expects standardized rows."""
    w_rows = np.asarray(w_rows, dtype=np.float64)
    x_rows = np.asarray(x_rows, dtype=np.float64)
    if w_rows.shape[0] != x_rows.shape[0]:
        raise ShapeMismatch("descriptor and sensor row counts differ")
    if x_rows.shape[-1] != model.n_x:
        raise ShapeMismatch(f"expected {model.n_x} sensor channels, got {x_rows.shape[-1]}")
    return x_rows - nn.forward(model.net, w_rows)
