"""Neural network layers with hand-derived backward passes.

Conventions:
  * everything is float64; sequence tensors are (features, T) with time last,
    convolutional tensors are (channels, bands, T);
  * each layer caches what its backward pass needs during forward();
  * backward(delta) consumes dLoss/dOutput, stores parameter gradients on
    the layer (d_<name>), and returns dLoss/dInput.

Weight matrices are initialized from the uniform Glorot distribution
U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, DimensionError, DomainError

BCE_EPS = 1e-7


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    """Column-wise softmax of a (C, T) array, max-shifted for stability."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=0, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=0, keepdims=True)


def softmax_grad(out: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Backward of column-wise softmax given its output and dLoss/dOutput."""
    return out * (delta - (delta * out).sum(axis=0, keepdims=True))


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean binary cross entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise DimensionError("cannot take the loss of an empty prediction")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-target * np.log(p) - (1.0 - target) * np.log1p(-p)))


def bce_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """dLoss/dPred of bce_loss; zero where the clamp is active."""
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    inside = (pred >= BCE_EPS) & (pred <= 1.0 - BCE_EPS)
    return np.where(inside, (p - target) / (p * (1.0 - p)), 0.0) / pred.size


class Conv2d:
    """2-D cross-correlation over (channels, bands, T) with same-padding.

    Padding is (k-1)//2 before and k//2 after on each spatial axis, so the
    output keeps the input's band and time extent for any kernel size.
    """

    def __init__(self, in_channels: int, out_channels: int, kh: int, kw: int,
                 rng: np.random.Generator):
        if min(in_channels, out_channels, kh, kw) < 1:
            raise ConfigurationError("conv dimensions must be positive")
        fan_in = in_channels * kh * kw
        fan_out = out_channels * kh * kw
        self.kernels = glorot_uniform(rng, (out_channels, in_channels, kh, kw), fan_in, fan_out)
        self.bias = np.zeros(out_channels)
        self.d_kernels = np.zeros_like(self.kernels)
        self.d_bias = np.zeros_like(self.bias)
        self._windows = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        f_out, f_in, kh, kw = self.kernels.shape
        if x.ndim != 3 or x.shape[0] != f_in:
            raise DimensionError(f"expected ({f_in}, H, T) input, got shape {x.shape}")
        pad_h = ((kh - 1) // 2, kh // 2)
        pad_w = ((kw - 1) // 2, kw // 2)
        padded = np.pad(x, ((0, 0), pad_h, pad_w))
        windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
        self._windows = windows  # (f_in, H, T, kh, kw)
        out = np.einsum("chtmn,fcmn->fht", windows, self.kernels, optimize=True)
        return out + self.bias[:, None, None]

    def backward(self, delta: np.ndarray) -> np.ndarray:
        f_out, f_in, kh, kw = self.kernels.shape
        self.d_bias = delta.sum(axis=(1, 2))
        self.d_kernels = np.einsum("chtmn,fht->fcmn", self._windows, delta, optimize=True)
        # dL/dInput is the full correlation of delta with flipped kernels
        flipped = self.kernels[:, :, ::-1, ::-1]
        dpad = np.pad(delta, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        dwin = np.lib.stride_tricks.sliding_window_view(dpad, (kh, kw), axis=(1, 2))
        dx_padded = np.einsum("fhtmn,fcmn->cht", dwin, flipped, optimize=True)
        pl_h, pl_w = (kh - 1) // 2, (kw - 1) // 2
        h, t = delta.shape[1], delta.shape[2]
        return dx_padded[:, pl_h:pl_h + h, pl_w:pl_w + t]

    def params(self) -> dict[str, np.ndarray]:
        return {"kernels": self.kernels, "bias": self.bias}

    def grads(self) -> dict[str, np.ndarray]:
        return {"kernels": self.d_kernels, "bias": self.d_bias}


class ReLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, delta: np.ndarray) -> np.ndarray:
        return delta * self._mask


class MaxPoolFreq:
    """Max pooling along the band axis only; the time axis is untouched.

    The pooling factor must divide the number of bands.  On ties the
    gradient goes to the first maximal position.
    """

    def __init__(self, factor: int):
        if factor < 1:
            raise ConfigurationError("pooling factor must be at least 1")
        self.factor = factor

    def forward(self, x: np.ndarray) -> np.ndarray:
        c, h, t = x.shape
        if h % self.factor:
            raise DimensionError(f"pool factor {self.factor} does not divide {h} bands")
        grouped = x.reshape(c, h // self.factor, self.factor, t)
        self._argmax = grouped.argmax(axis=2)
        self._in_shape = x.shape
        return grouped.max(axis=2)

    def backward(self, delta: np.ndarray) -> np.ndarray:
        c, hp, t = delta.shape
        dx = np.zeros((c, hp, self.factor, t))
        ci, hi, ti = np.ogrid[:c, :hp, :t]
        dx[ci, hi, self._argmax, ti] = delta
        return dx.reshape(self._in_shape)


class StackFreq:
    """Flatten (channels, bands, T) to (channels * bands, T), channel-major:
    row index = channel * n_bands + band."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        c, h, t = x.shape
        return x.reshape(c * h, t)

    def backward(self, delta: np.ndarray) -> np.ndarray:
        return delta.reshape(self._in_shape)


class Dense:
    """Affine map applied independently at every time step: (D, T) -> (O, T)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        if min(in_dim, out_dim) < 1:
            raise ConfigurationError("dense dimensions must be positive")
        self.w = glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim)
        self.b = np.zeros(out_dim)
        self.d_w = np.zeros_like(self.w)
        self.d_b = np.zeros_like(self.b)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[0] != self.w.shape[1]:
            raise DimensionError(f"expected ({self.w.shape[1]}, T) input, got shape {x.shape}")
        self._x = x
        return self.w @ x + self.b[:, None]

    def backward(self, delta: np.ndarray) -> np.ndarray:
        self.d_w = delta @ self._x.T
        self.d_b = delta.sum(axis=1)
        return self.w.T @ delta

    def params(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def grads(self) -> dict[str, np.ndarray]:
        return {"w": self.d_w, "b": self.d_b}


class Sigmoid:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = sigmoid(x)
        return self._out

    def backward(self, delta: np.ndarray) -> np.ndarray:
        return delta * self._out * (1.0 - self._out)


class Dropout:
    """Inverted dropout: keep with probability keep_prob, scale by 1/keep_prob.

    Identity at inference.  forward() must be given an rng when training.
    """

    def __init__(self, keep_prob: float):
        if not (0.0 < keep_prob <= 1.0):
            raise DomainError(f"keep_prob must lie in (0, 1], got {keep_prob}")
        self.keep_prob = keep_prob

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not training or self.keep_prob == 1.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigurationError("training-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) < self.keep_prob) / self.keep_prob
        return x * self._mask

    def backward(self, delta: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return delta
        return delta * self._mask


class GRU:
    """Unidirectional gated recurrent unit layer over a (D, T) sequence.

    Per step, with h the previous hidden state and x the current input:

        r = sigmoid(W_r x + U_r h + b_r)
        z = sigmoid(W_z x + U_z h + b_z)
        cand = tanh(W_h x + U_h (r * h) + b_h)
        h_new = (1 - z) * h + z * cand

    The initial state is zero.  backward() runs truncated-free BPTT over
    the whole sequence.
    """

    def __init__(self, in_dim: int, hidden_dim: int, rng: np.random.Generator):
        if min(in_dim, hidden_dim) < 1:
            raise ConfigurationError("GRU dimensions must be positive")
        d, h = in_dim, hidden_dim
        self.w_r = glorot_uniform(rng, (h, d), d, h)
        self.u_r = glorot_uniform(rng, (h, h), h, h)
        self.b_r = np.zeros(h)
        self.w_z = glorot_uniform(rng, (h, d), d, h)
        self.u_z = glorot_uniform(rng, (h, h), h, h)
        self.b_z = np.zeros(h)
        self.w_h = glorot_uniform(rng, (h, d), d, h)
        self.u_h = glorot_uniform(rng, (h, h), h, h)
        self.b_h = np.zeros(h)
        for name in self._PARAM_NAMES:
            setattr(self, "d_" + name, np.zeros_like(getattr(self, name)))

    _PARAM_NAMES = ("w_r", "u_r", "b_r", "w_z", "u_z", "b_z", "w_h", "u_h", "b_h")

    def forward(self, x: np.ndarray, h0: np.ndarray | None = None) -> np.ndarray:
        h_dim, d = self.w_r.shape
        if x.ndim != 2 or x.shape[0] != d:
            raise DimensionError(f"expected ({d}, T) input, got shape {x.shape}")
        t_len = x.shape[1]
        h = np.zeros(h_dim) if h0 is None else np.asarray(h0, dtype=np.float64)
        # input-to-gate products for the whole sequence in one pass each
        wx_r = self.w_r @ x + self.b_r[:, None]
        wx_z = self.w_z @ x + self.b_z[:, None]
        wx_h = self.w_h @ x + self.b_h[:, None]
        out = np.empty((h_dim, t_len))
        self._x = x
        self._h_prev = np.empty((h_dim, t_len))
        self._r = np.empty((h_dim, t_len))
        self._z = np.empty((h_dim, t_len))
        self._cand = np.empty((h_dim, t_len))
        for t in range(t_len):
            self._h_prev[:, t] = h
            r = sigmoid(wx_r[:, t] + self.u_r @ h)
            z = sigmoid(wx_z[:, t] + self.u_z @ h)
            cand = np.tanh(wx_h[:, t] + self.u_h @ (r * h))
            h = (1.0 - z) * h + z * cand
            self._r[:, t], self._z[:, t], self._cand[:, t] = r, z, cand
            out[:, t] = h
        return out

    def backward(self, delta: np.ndarray) -> np.ndarray:
        x, r, z, cand, h_prev = self._x, self._r, self._z, self._cand, self._h_prev
        t_len = x.shape[1]
        da_r = np.empty_like(r)
        da_z = np.empty_like(z)
        da_h = np.empty_like(cand)
        carry = np.zeros(self.w_r.shape[0])
        for t in range(t_len - 1, -1, -1):
            dh = delta[:, t] + carry
            dz = dh * (cand[:, t] - h_prev[:, t])
            dcand = dh * z[:, t]
            dhp = dh * (1.0 - z[:, t])
            a_h = dcand * (1.0 - cand[:, t] ** 2)
            drh = self.u_h.T @ a_h
            dr = drh * h_prev[:, t]
            dhp = dhp + drh * r[:, t]
            a_r = dr * r[:, t] * (1.0 - r[:, t])
            a_z = dz * z[:, t] * (1.0 - z[:, t])
            dhp = dhp + self.u_r.T @ a_r + self.u_z.T @ a_z
            da_r[:, t], da_z[:, t], da_h[:, t] = a_r, a_z, a_h
            carry = dhp
        self.d_w_r = da_r @ x.T
        self.d_w_z = da_z @ x.T
        self.d_w_h = da_h @ x.T
        self.d_u_r = da_r @ h_prev.T
        self.d_u_z = da_z @ h_prev.T
        self.d_u_h = da_h @ (r * h_prev).T
        self.d_b_r = da_r.sum(axis=1)
        self.d_b_z = da_z.sum(axis=1)
        self.d_b_h = da_h.sum(axis=1)
        return self.w_r.T @ da_r + self.w_z.T @ da_z + self.w_h.T @ da_h

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def grads(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, "d_" + name) for name in self._PARAM_NAMES}
