"""Classification networks: hidden layers producing a feature basis, a
bias-free linear head, and the negated-exponent softmax cross-entropy stack.

Orientation: features are stored sample-major, so the hidden layers map a
batch ``(n, *input_shape)`` to ``phi`` of shape ``(n, width)`` and the head
computes ``logits = phi @ w.T`` with ``w`` of shape ``(n_classes, n_basis)``.

Sign convention: with ``softmax_sign="paper"`` class probabilities are
``exp(-z_i) / sum_j exp(-z_j)``, so the *smallest* logit wins; with
``"standard"`` the usual ``exp(z_i)`` form is used. The two are equivalent
under ``w -> -w``.
"""

from dataclasses import dataclass

import numpy as np

from . import layers as L
from .errors import ShapeError, UnsupportedNetworkError
from .rng import substream

SOFTMAX_SIGNS = ("paper", "standard")


def sign_factor(softmax_sign: str) -> float:
    """d(softmax argument)/d(logit): -1 under the negated-exponent convention."""
    if softmax_sign not in SOFTMAX_SIGNS:
        raise ValueError(f"softmax_sign must be one of {SOFTMAX_SIGNS}")
    return -1.0 if softmax_sign == "paper" else 1.0


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[L.LayerSpec, ...]
    n_classes: int
    input_shape: tuple[int, ...]
    softmax_sign: str = "paper"
    augment_constant_basis: bool = False

    def __post_init__(self):
        if self.n_classes < 2:
            raise ShapeError(f"n_classes must be >= 2, got {self.n_classes}")
        sign_factor(self.softmax_sign)
        shapes = self.layer_shapes()
        if len(shapes[-1]) != 1:
            raise ShapeError(
                f"hidden layers must end with a flat feature vector, got {shapes[-1]}"
            )

    def layer_shapes(self) -> tuple[tuple, ...]:
        """Activation shape (without batch axis) after each layer."""
        shapes = []
        cur = tuple(self.input_shape)
        for i, spec in enumerate(self.layers):
            cur = L.layer_output_shape(spec, cur, i)
            shapes.append(cur)
        if not shapes:
            raise ShapeError("network needs at least one hidden layer")
        return tuple(shapes)

    @property
    def hidden_width(self) -> int:
        return self.layer_shapes()[-1][0]

    @property
    def n_basis(self) -> int:
        return self.hidden_width + (1 if self.augment_constant_basis else 0)


@dataclass
class NetworkParams:
    w: np.ndarray
    xi: list[L.LayerParams]


@dataclass
class ForwardTrace:
    phi: np.ndarray
    caches: list
    mode: str


def init_params(spec: NetworkSpec, seed: int) -> NetworkParams:
    """Glorot hidden layers, zero linear head.

    The head starts at zero because the first convex solve determines it
    globally anyway; the first-order baseline shares the same start for
    parity.
    """
    xi = []
    shapes = (tuple(spec.input_shape),) + spec.layer_shapes()
    for i, layer in enumerate(spec.layers):
        xi.append(L.init_layer(layer, shapes[i], substream(seed, "init", i)))
    w = np.zeros((spec.n_classes, spec.n_basis))
    return NetworkParams(w=w, xi=xi)


def forward_hidden(spec: NetworkSpec, xi: list[L.LayerParams], x: np.ndarray,
                   mode: str = "train") -> ForwardTrace:
    """Run the hidden layers, returning features and per-layer caches.

    ``mode="train"`` uses batch statistics in batch-norm layers (updating the
    running estimates); ``"infer"`` uses the running estimates and is
    batch-size independent per sample.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(spec.input_shape):
        raise ShapeError(
            f"layer 0: input shape {x.shape[1:]} does not match "
            f"network input {tuple(spec.input_shape)}"
        )
    caches = []
    out = x
    for layer, p in zip(spec.layers, xi):
        out, cache = L.layer_forward(layer, p, out, mode)
        caches.append(cache)
    return ForwardTrace(phi=out, caches=caches, mode=mode)


def head_features(spec: NetworkSpec, phi: np.ndarray) -> np.ndarray:
    """Features consumed by the linear head (appends the constant column
    when the constant-basis augmentation is enabled)."""
    if spec.augment_constant_basis:
        return np.hstack([phi, np.ones((phi.shape[0], 1))])
    return phi


def logits(phi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row i is ``w @ phi_i``; the head carries no bias term."""
    phi = np.asarray(phi, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[1] != phi.shape[1]:
        raise ShapeError(f"w has {w.shape[1]} columns, features have {phi.shape[1]}")
    return phi @ w.T


def softmax(z: np.ndarray, softmax_sign: str = "paper") -> np.ndarray:
    """Stabilized softmax over the last axis under the chosen sign convention.

    Output rows are strictly positive, sum to one, and are invariant under a
    constant shift of the logits.
    """
    c = sign_factor(softmax_sign)
    u = c * np.asarray(z, dtype=np.float64)
    if u.size:
        u = u - u.max(axis=-1, keepdims=True)
    e = np.exp(u)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    """``-log p[label]`` for a probability vector and a one-hot label."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"probability/label shapes differ: {p.shape} vs {y.shape}")
    return float(-np.log(p[np.argmax(y)]))


def loss_sum_from_logits(z: np.ndarray, labels: np.ndarray,
                         softmax_sign: str = "paper") -> float:
    """Summed cross-entropy over a batch, computed stably from logits."""
    c = sign_factor(softmax_sign)
    u = c * np.asarray(z, dtype=np.float64)
    if u.size == 0:
        return 0.0
    m = u.max(axis=1, keepdims=True)
    lse = np.log(np.exp(u - m).sum(axis=1)) + m[:, 0]
    picked = (u * labels).sum(axis=1)
    return float((lse - picked).sum())


def backward_xi(spec: NetworkSpec, xi: list[L.LayerParams], trace: ForwardTrace,
                w: np.ndarray, labels: np.ndarray) -> list[dict[str, np.ndarray]]:
    """Gradient of the summed batch loss with respect to every hidden block.

    The trace must come from a train-mode forward pass on the same batch;
    the head weights ``w`` may differ from those used at forward time (the
    coordinate-descent update evaluates hidden gradients at the fresh head).
    """
    if trace.mode != "train":
        raise ShapeError("backward_xi requires a train-mode trace")
    if len(trace.caches) != len(spec.layers):
        raise ShapeError(
            f"trace has {len(trace.caches)} layers, network has {len(spec.layers)}"
        )
    head = head_features(spec, trace.phi)
    z = logits(head, w)
    p = softmax(z, spec.softmax_sign)
    dz = sign_factor(spec.softmax_sign) * (p - labels)
    dhead = dz @ w
    dphi = dhead[:, : spec.hidden_width] if spec.augment_constant_basis else dhead
    grads: list[dict[str, np.ndarray]] = [None] * len(spec.layers)
    for i in reversed(range(len(spec.layers))):
        dphi, grads[i] = L.layer_backward(spec.layers[i], xi[i], trace.caches[i], dphi)
    return grads


def head_gradient(spec: NetworkSpec, trace: ForwardTrace, w: np.ndarray,
                  labels: np.ndarray) -> np.ndarray:
    """Gradient of the summed batch loss with respect to the head matrix."""
    head = head_features(spec, trace.phi)
    z = logits(head, w)
    p = softmax(z, spec.softmax_sign)
    dz = sign_factor(spec.softmax_sign) * (p - labels)
    return dz.T @ head


def predict_classes(spec: NetworkSpec, params: NetworkParams,
                    x: np.ndarray) -> np.ndarray:
    """Per-sample argmax of the class probabilities; ties go to the lowest
    class index.

    Computed on the (sign-adjusted) logits directly: the exponential is
    strictly increasing, so the winning index is the same as through the
    softmax, and the tie rule applies at the logit level.
    """
    trace = forward_hidden(spec, params.xi, x, mode="infer")
    z = logits(head_features(spec, trace.phi), params.w)
    return np.argmax(sign_factor(spec.softmax_sign) * z, axis=1)


def basis_grid(spec: NetworkSpec, xi: list[L.LayerParams],
               grid: np.ndarray) -> np.ndarray:
    """Hidden-layer features evaluated at 2-D grid points in infer mode."""
    if tuple(spec.input_shape) != (2,):
        raise UnsupportedNetworkError(
            f"basis export needs a 2-D input network, got input {spec.input_shape}"
        )
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise ShapeError(f"grid must be (n, 2), got {grid.shape}")
    return forward_hidden(spec, xi, grid, mode="infer").phi


def trainable_blocks(params: NetworkParams, include_w: bool) -> list[np.ndarray]:
    """Flat list of trainable arrays in canonical (layer, name) order."""
    blocks = [params.w] if include_w else []
    for p in params.xi:
        blocks.extend(p.trainable.values())
    return blocks


def flatten_xi_grads(xi: list[L.LayerParams],
                     grads: list[dict[str, np.ndarray]]) -> list[np.ndarray]:
    """Gradient arrays matching :func:`trainable_blocks` order (without w)."""
    return [g[name] for p, g in zip(xi, grads) for name in p.trainable]
