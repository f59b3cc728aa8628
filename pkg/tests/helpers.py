"""Shared test utilities: finite-difference oracles and instance builders.

The finite-difference functions are deliberately independent of the library's
analytic paths; they evaluate the target function directly.
"""

import numpy as np

from ngdkit.convex import SubproblemView
from ngdkit.data import one_hot
from ngdkit.rng import substream


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    """Second-order central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    hess = np.zeros((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        for j in range(i, d):
            ej = np.zeros(d)
            ej[j] = h
            val = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h * h)
            hess[i, j] = val
            hess[j, i] = val
    return hess


def max_rel_err(a, b, floor=1e-9):
    """Largest elementwise |a - b| / max(|a|, |b|, floor)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not a.size:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / scale).max())


def assert_blocks_close(analytic, numeric, rtol, atol):
    """Elementwise |a - n| <= rtol * max(|a|,|n|) + atol on every entry."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    gap = np.abs(analytic - numeric)
    bound = rtol * np.maximum(np.abs(analytic), np.abs(numeric)) + atol
    worst = (gap - bound).max() if gap.size else -1.0
    assert worst <= 0.0, (
        f"max violation {worst:.3e}: gap {gap.max():.3e} vs rtol={rtol}, atol={atol}"
    )


def random_view(seed: int, n: int, k: int, c: int, scale: float = 1.0,
                softmax_sign: str = "paper") -> SubproblemView:
    rng = substream(seed, "test-view")
    phi = scale * rng.standard_normal((n, k))
    labels = one_hot(rng.integers(0, c, size=n), c)
    return SubproblemView(phi, labels, softmax_sign)


def random_w(seed: int, c: int, k: int, scale: float = 1.0) -> np.ndarray:
    return scale * substream(seed, "test-w").standard_normal((c, k))
