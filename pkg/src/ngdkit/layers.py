"""Hidden-layer building blocks: specs, parameters, forward and reverse kernels.

Layouts: flat activations are ``(batch, features)``; image activations are
``(batch, height, width, channels)``. Convolutions are stride-1 "valid" with
square kernels; max pooling uses a square window with stride equal to the
window (odd trailing rows/columns are cropped). Batch normalization sits
between the dense affine map and its activation, with momentum 0.9 running
statistics and epsilon 1e-5; batch variance is the biased (1/N) estimator.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class Dense:
    width: int
    activation: str = "tanh"
    batchnorm: bool = False

    kind = "dense"


@dataclass(frozen=True)
class Conv2D:
    channels: int
    kernel: int = 3
    activation: str = "relu"

    kind = "conv2d"


@dataclass(frozen=True)
class MaxPool:
    window: int = 2

    kind = "maxpool"


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"


LayerSpec = Dense | Conv2D | MaxPool | Flatten


@dataclass
class LayerParams:
    """Per-layer arrays: ``trainable`` blocks plus non-trainable ``state``.

    Dict insertion order is the canonical block order used by the optimizers.
    """

    trainable: dict[str, np.ndarray] = field(default_factory=dict)
    state: dict[str, np.ndarray] = field(default_factory=dict)


def _check_activation(name: str, index: int) -> None:
    if name not in ACTIVATIONS:
        raise ShapeError(f"layer {index}: unknown activation {name!r}")


def layer_output_shape(spec: LayerSpec, in_shape: tuple, index: int) -> tuple:
    """Shape (without batch axis) produced by ``spec`` on ``in_shape`` input."""
    if isinstance(spec, Dense):
        _check_activation(spec.activation, index)
        if len(in_shape) != 1:
            raise ShapeError(
                f"layer {index} (dense) requires flat input, got shape {in_shape}"
            )
        if spec.width < 1:
            raise ShapeError(f"layer {index} (dense) width must be >= 1")
        return (spec.width,)
    if isinstance(spec, Conv2D):
        _check_activation(spec.activation, index)
        if len(in_shape) != 3:
            raise ShapeError(
                f"layer {index} (conv2d) requires image input, got shape {in_shape}"
            )
        h, w, _ = in_shape
        if h < spec.kernel or w < spec.kernel:
            raise ShapeError(
                f"layer {index} (conv2d) kernel {spec.kernel} exceeds input {in_shape}"
            )
        return (h - spec.kernel + 1, w - spec.kernel + 1, spec.channels)
    if isinstance(spec, MaxPool):
        if len(in_shape) != 3:
            raise ShapeError(
                f"layer {index} (maxpool) requires image input, got shape {in_shape}"
            )
        h, w, c = in_shape
        if h < spec.window or w < spec.window:
            raise ShapeError(
                f"layer {index} (maxpool) window {spec.window} exceeds input {in_shape}"
            )
        return (h // spec.window, w // spec.window, c)
    if isinstance(spec, Flatten):
        if len(in_shape) < 2:
            raise ShapeError(
                f"layer {index} (flatten) requires image input, got shape {in_shape}"
            )
        return (int(np.prod(in_shape)),)
    raise ShapeError(f"layer {index}: unknown layer spec {spec!r}")


def init_layer(spec: LayerSpec, in_shape: tuple, rng: np.random.Generator) -> LayerParams:
    """Glorot-uniform weights, zero biases, identity batch-norm."""
    p = LayerParams()
    if isinstance(spec, Dense):
        (n_in,) = in_shape
        limit = np.sqrt(6.0 / (n_in + spec.width))
        p.trainable["weight"] = rng.uniform(-limit, limit, size=(n_in, spec.width))
        p.trainable["bias"] = np.zeros(spec.width)
        if spec.batchnorm:
            p.trainable["gamma"] = np.ones(spec.width)
            p.trainable["beta"] = np.zeros(spec.width)
            p.state["running_mean"] = np.zeros(spec.width)
            p.state["running_var"] = np.ones(spec.width)
    elif isinstance(spec, Conv2D):
        _, _, c_in = in_shape
        k = spec.kernel
        fan_in = k * k * c_in
        fan_out = k * k * spec.channels
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        p.trainable["kernel"] = rng.uniform(-limit, limit, size=(k, k, c_in, spec.channels))
        p.trainable["bias"] = np.zeros(spec.channels)
    return p


def _activate(name: str, z: np.ndarray):
    if name == "tanh":
        a = np.tanh(z)
        return a, a
    if name == "relu":
        a = np.maximum(z, 0.0)
        return a, z
    return z, None


def _activate_backward(name: str, da: np.ndarray, cache) -> np.ndarray:
    if name == "tanh":
        return da * (1.0 - cache * cache)
    if name == "relu":
        return da * (cache > 0.0)
    return da


def dense_forward(spec: Dense, p: LayerParams, x: np.ndarray, mode: str):
    z = x @ p.trainable["weight"] + p.trainable["bias"]
    bn_cache = None
    if spec.batchnorm:
        if mode == "train":
            mu = z.mean(axis=0)
            centered = z - mu
            var = (centered * centered).mean(axis=0)  # biased, 1/N
            rs = p.state
            rs["running_mean"] = BN_MOMENTUM * rs["running_mean"] + (1 - BN_MOMENTUM) * mu
            rs["running_var"] = BN_MOMENTUM * rs["running_var"] + (1 - BN_MOMENTUM) * var
        else:
            centered = z - p.state["running_mean"]
            var = p.state["running_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        zhat = centered * inv_std
        bn_cache = (zhat, inv_std)
        z = p.trainable["gamma"] * zhat + p.trainable["beta"]
    a, act_cache = _activate(spec.activation, z)
    return a, (x, bn_cache, act_cache)


def dense_backward(spec: Dense, p: LayerParams, cache, da: np.ndarray):
    x, bn_cache, act_cache = cache
    dz = _activate_backward(spec.activation, da, act_cache)
    grads: dict[str, np.ndarray] = {}
    if spec.batchnorm:
        zhat, inv_std = bn_cache
        n = zhat.shape[0]
        grads_gamma = (dz * zhat).sum(axis=0)
        grads_beta = dz.sum(axis=0)
        dzhat = dz * p.trainable["gamma"]
        # standard batch-norm reverse pass through the batch statistics
        dz = (inv_std / n) * (
            n * dzhat - dzhat.sum(axis=0) - zhat * (dzhat * zhat).sum(axis=0)
        )
    grads["weight"] = x.T @ dz
    grads["bias"] = dz.sum(axis=0)
    if spec.batchnorm:
        grads["gamma"] = grads_gamma
        grads["beta"] = grads_beta
    dx = dz @ p.trainable["weight"].T
    return dx, grads


def conv_forward(spec: Conv2D, p: LayerParams, x: np.ndarray, mode: str):
    kernel = p.trainable["kernel"]
    k = spec.kernel
    oh = x.shape[1] - k + 1
    ow = x.shape[2] - k + 1
    z = np.tile(p.trainable["bias"], (x.shape[0], oh, ow, 1))
    for di in range(k):
        for dj in range(k):
            z += x[:, di : di + oh, dj : dj + ow, :] @ kernel[di, dj]
    a, act_cache = _activate(spec.activation, z)
    return a, (x, act_cache)


def conv_backward(spec: Conv2D, p: LayerParams, cache, da: np.ndarray):
    x, act_cache = cache
    dz = _activate_backward(spec.activation, da, act_cache)
    kernel = p.trainable["kernel"]
    k = spec.kernel
    oh, ow = dz.shape[1], dz.shape[2]
    dkernel = np.zeros_like(kernel)
    dx = np.zeros_like(x)
    for di in range(k):
        for dj in range(k):
            x_slice = x[:, di : di + oh, dj : dj + ow, :]
            dkernel[di, dj] = np.einsum("nijc,nijo->co", x_slice, dz)
            dx[:, di : di + oh, dj : dj + ow, :] += dz @ kernel[di, dj].T
    grads = {"kernel": dkernel, "bias": dz.sum(axis=(0, 1, 2))}
    return dx, grads


def maxpool_forward(spec: MaxPool, p: LayerParams, x: np.ndarray, mode: str):
    w = spec.window
    n, h, wl, c = x.shape
    oh, ow = h // w, wl // w
    xc = x[:, : oh * w, : ow * w, :]
    windows = (
        xc.reshape(n, oh, w, ow, w, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(n, oh, ow, w * w, c)
    )
    # argmax takes the first maximum, so ties route to the earliest
    # (row-major) position in the window, deterministically
    idx = windows.argmax(axis=3)
    out = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, (idx, x.shape)


def maxpool_backward(spec: MaxPool, p: LayerParams, cache, da: np.ndarray):
    idx, in_shape = cache
    w = spec.window
    n, oh, ow, c = da.shape
    dwin = np.zeros((n, oh, ow, w * w, c))
    np.put_along_axis(dwin, idx[:, :, :, None, :], da[:, :, :, None, :], axis=3)
    dxc = (
        dwin.reshape(n, oh, ow, w, w, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(n, oh * w, ow * w, c)
    )
    dx = np.zeros(in_shape)
    dx[:, : oh * w, : ow * w, :] = dxc
    return dx, {}


def flatten_forward(spec: Flatten, p: LayerParams, x: np.ndarray, mode: str):
    return x.reshape(x.shape[0], -1), (x.shape,)


def flatten_backward(spec: Flatten, p: LayerParams, cache, da: np.ndarray):
    (in_shape,) = cache
    return da.reshape(in_shape), {}


_FORWARD = {
    "dense": dense_forward,
    "conv2d": conv_forward,
    "maxpool": maxpool_forward,
    "flatten": flatten_forward,
}

_BACKWARD = {
    "dense": dense_backward,
    "conv2d": conv_backward,
    "maxpool": maxpool_backward,
    "flatten": flatten_backward,
}


def layer_forward(spec: LayerSpec, p: LayerParams, x: np.ndarray, mode: str):
    return _FORWARD[spec.kind](spec, p, x, mode)


def layer_backward(spec: LayerSpec, p: LayerParams, cache, da: np.ndarray):
    return _BACKWARD[spec.kind](spec, p, cache, da)
