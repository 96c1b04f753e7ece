"""From-scratch neural network layers, the CRNN built from them, and its
checkpoint format.  All math is float64 numpy; every layer implements an
exact backward pass, verified against central finite differences in the
test suite."""

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
    sigmoid,
    softmax,
    softmax_grad,
)
from .crnn import Crnn, CrnnConfig
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "GRU",
    "Conv2d",
    "Dense",
    "Dropout",
    "MaxPoolFreq",
    "ReLU",
    "Sigmoid",
    "StackFreq",
    "bce_grad",
    "bce_loss",
    "sigmoid",
    "softmax",
    "softmax_grad",
    "Crnn",
    "CrnnConfig",
    "load_checkpoint",
    "save_checkpoint",
]
