"""The frozen-basis subproblem: cross-entropy loss, gradient, Hessian, and
matrix-free Hessian-vector products in the head weights alone.

With the features ``phi`` frozen, the summed batch loss is convex in ``w``;
its Hessian in the row-major flattening of ``w`` has blocks

    H[(i,a),(j,b)] = sum_n phi[n,a] phi[n,b] M_n[i,j],
    M_n = diag(p_n) - p_n p_n^T,

independent of the softmax sign convention (the sign enters squared). The
closed forms here are implementation claims validated against finite
differences in the test suite, not trusted transcription.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ShapeError
from .nn import sign_factor, softmax

DENSE_HESSIAN_LIMIT = 4096


@dataclass(frozen=True)
class SubproblemView:
    """Frozen features and one-hot labels for one batch."""

    phi: np.ndarray
    labels: np.ndarray
    softmax_sign: str = "paper"

    def __post_init__(self):
        phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "labels", labels)
        if phi.ndim != 2 or labels.ndim != 2:
            raise ShapeError("phi and labels must be 2-D")
        if phi.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"phi has {phi.shape[0]} rows, labels have {labels.shape[0]}"
            )
        if not np.isfinite(phi).all():
            raise ShapeError("phi contains non-finite entries")
        if labels.size and not (
            np.isin(labels, (0.0, 1.0)).all()
            and np.array_equal(labels.sum(axis=1), np.ones(labels.shape[0]))
        ):
            raise ShapeError("labels must be one-hot rows")
        sign_factor(self.softmax_sign)

    @property
    def n_batch(self) -> int:
        return self.phi.shape[0]

    @property
    def n_basis(self) -> int:
        return self.phi.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def label_indices(self) -> np.ndarray:
        cached = self.__dict__.get("_label_indices")
        if cached is None:
            cached = np.argmax(self.labels, axis=1)
            self.__dict__["_label_indices"] = cached
        return cached


def _check_w(view: SubproblemView, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (view.n_classes, view.n_basis):
        raise ShapeError(
            f"w has shape {w.shape}, expected {(view.n_classes, view.n_basis)}"
        )
    return w


def w_to_flat(w: np.ndarray) -> np.ndarray:
    """Row-major vector view of the head matrix."""
    return np.asarray(w, dtype=np.float64).reshape(-1)


def flat_to_w(v: np.ndarray, n_classes: int, n_basis: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n_classes * n_basis,):
        raise ShapeError(f"flat vector has shape {v.shape}, expected ({n_classes * n_basis},)")
    return v.reshape(n_classes, n_basis)


def s_loss(view: SubproblemView, w: np.ndarray) -> float:
    """Summed (not averaged) cross-entropy of the batch at head ``w``."""
    w = _check_w(view, w)
    if view.n_batch == 0:
        return 0.0
    u = sign_factor(view.softmax_sign) * (view.phi @ w.T)
    m = u.max(axis=1)
    lse = np.log(np.exp(u - m[:, None]).sum(axis=1)) + m
    picked = u[np.arange(view.n_batch), view.label_indices]
    return float((lse - picked).sum())


def _probabilities(view: SubproblemView, w: np.ndarray) -> np.ndarray:
    return softmax(view.phi @ w.T, view.softmax_sign)


def s_gradient(view: SubproblemView, w: np.ndarray) -> np.ndarray:
    """Gradient of :func:`s_loss` in the row-major flattening of ``w``."""
    w = _check_w(view, w)
    p = _probabilities(view, w)
    dz = sign_factor(view.softmax_sign) * (p - view.labels)
    return w_to_flat(dz.T @ view.phi)


def s_hessian(view: SubproblemView, w: np.ndarray,
              dense_limit: int = DENSE_HESSIAN_LIMIT) -> np.ndarray:
    """Exact dense Hessian of :func:`s_loss`, shape (C*K, C*K).

    Symmetric by construction. Raises :class:`CapacityError` above the dense
    size limit; use :func:`s_hvp` there instead.
    """
    w = _check_w(view, w)
    d = view.n_classes * view.n_basis
    if d > dense_limit:
        raise CapacityError(
            f"dense Hessian of size {d} exceeds limit {dense_limit}; "
            "use s_hvp with an iterative solver"
        )
    if view.n_batch == 0:
        return np.zeros((d, d))
    p = _probabilities(view, w)
    m = np.einsum("ni,ij->nij", p, np.eye(view.n_classes)) - np.einsum(
        "ni,nj->nij", p, p
    )
    h = np.einsum("nij,na,nb->iajb", m, view.phi, view.phi)
    h = h.reshape(d, d)
    return 0.5 * (h + h.T)


def hvp_operator(view: SubproblemView, w: np.ndarray):
    """Hessian-vector product operator at a fixed ``w``.

    Class probabilities are computed once and shared across applications, so
    iterative solvers pay O(n_batch * n_basis * n_classes) per product.
    """
    w = _check_w(view, w)
    d = view.n_classes * view.n_basis
    if view.n_batch == 0:
        return lambda v: np.zeros(d)
    p = _probabilities(view, w)
    phi = view.phi
    c, k = view.n_classes, view.n_basis

    def apply(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (d,):
            raise ShapeError(f"v has shape {v.shape}, expected ({d},)")
        a = phi @ v.reshape(c, k).T              # (n, C): per-sample logit move
        pa = p * a
        b = pa - p * pa.sum(axis=1, keepdims=True)   # rows: M_n @ a_n
        return w_to_flat(b.T @ phi)

    return apply


def s_hvp(view: SubproblemView, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Hessian-vector product without materializing the Hessian."""
    v = np.asarray(v, dtype=np.float64)
    d = view.n_classes * view.n_basis
    if v.shape != (d,):
        raise ShapeError(f"v has shape {v.shape}, expected ({d},)")
    return hvp_operator(view, w)(v)
