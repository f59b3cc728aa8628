"""Dense linear-algebra helpers used by the solvers and their tests.

Everything is 64-bit: the Newton subproblem stays small (at most a few
hundred unknowns) and accuracy dominates storage concerns. Results are
deterministic for a fixed process and thread configuration.
"""

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotrs

from .errors import ShapeError, SingularMatrixError

SYMMETRY_RTOL = 1e-10


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def _check_symmetric(h: np.ndarray) -> None:
    scale = np.abs(h).max() if h.size else 0.0
    if np.abs(h - h.T).max(initial=0.0) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ShapeError("matrix is not symmetric within tolerance")


def cholesky_solve(h, g, eps: float) -> np.ndarray:
    """Solve ``(h + eps*I) s = -g`` for the Newton direction ``s``.

    ``h`` must be square symmetric and ``h + eps*I`` positive definite.
    Raises :class:`SingularMatrixError` naming the failing pivot otherwise.
    """
    h = _as_matrix(h, "h")
    g = np.asarray(g, dtype=np.float64)
    if h.shape[0] != h.shape[1]:
        raise ShapeError(f"h must be square, got {h.shape}")
    if g.shape != (h.shape[0],):
        raise ShapeError(f"g has length {g.shape}, expected ({h.shape[0]},)")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    _check_symmetric(h)
    if h.shape[0] == 0:
        return np.zeros(0)
    damped = h + eps * np.eye(h.shape[0])
    c, info = dpotrf(damped, lower=1)
    if info != 0:
        raise SingularMatrixError(
            f"cholesky factorization failed at pivot {info}: "
            f"h + {eps}*I is not positive definite"
        )
    s, info = dpotrs(c, -g, lower=1)
    if info != 0:
        raise SingularMatrixError(f"triangular solve failed with code {info}")
    return s


def sym_eig_min(h) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    h = _as_matrix(h, "h")
    if h.shape[0] != h.shape[1]:
        raise ShapeError(f"h must be square, got {h.shape}")
    _check_symmetric(h)
    if h.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(h)[0])
