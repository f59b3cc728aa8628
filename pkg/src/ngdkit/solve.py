"""Inner solvers for the Newton direction and the backtracked Newton outer loop.

The conjugate-gradient solver runs a *fixed* number of iterations: truncation
is the regularizer, so there is no residual-tolerance stopping rule beyond an
exact-solve early exit. The dense path solves the damped system
``(H + eps*I) s = -G`` and doubles as a test oracle for the iterative path.

The backtracking follows the coordinate-descent update order exactly: the
full step ``w + s`` is tested first with step size 1, then the step is
repeatedly halved (rho = 0.5 by default) until the sufficient-decrease
condition ``S(w + lam*s) <= S(w) + alpha*lam*<G, s>`` holds.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .convex import SubproblemView, flat_to_w, s_hessian, s_loss, w_to_flat
from .errors import NumericalError
from .linalg import cholesky_solve
from .nn import sign_factor, softmax

CG_EXACT_RTOL = 1e-14


@dataclass(frozen=True)
class NewtonConfig:
    newton_steps: int
    cg_iterations: int = 3
    armijo_alpha: float = 1e-4
    armijo_rho: float = 0.5
    max_backtracks: int = 50
    solver: str = "cg"
    dense_eps: float = 1e-8

    def __post_init__(self):
        if self.newton_steps < 1:
            raise ValueError(f"newton_steps must be >= 1, got {self.newton_steps}")
        if self.cg_iterations < 1:
            raise ValueError(f"cg_iterations must be >= 1, got {self.cg_iterations}")
        if not 0.0 < self.armijo_rho < 1.0:
            raise ValueError(f"armijo_rho must be in (0, 1), got {self.armijo_rho}")
        if not 0.0 < self.armijo_alpha < 1.0:
            raise ValueError(f"armijo_alpha must be in (0, 1), got {self.armijo_alpha}")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be >= 0")
        if self.solver not in ("cg", "dense"):
            raise ValueError(f"solver must be 'cg' or 'dense', got {self.solver!r}")
        if self.solver == "dense" and self.dense_eps <= 0.0:
            raise ValueError("dense solver requires dense_eps > 0 (H may be singular)")


def cg_fixed(hvp: Callable[[np.ndarray], np.ndarray], g: np.ndarray,
             n_cg: int) -> np.ndarray:
    """Run exactly ``min(n_cg, dim)`` conjugate-gradient iterations on
    ``H s = -g`` from a zero start and return the iterate.

    The only early exit is an exact solve (residual below 1e-14 * ||g||).
    Starting from zero, the returned iterate is always a descent direction
    for a positive semi-definite operator.
    """
    if n_cg < 1:
        raise ValueError(f"n_cg must be >= 1, got {n_cg}")
    g = np.asarray(g, dtype=np.float64)
    s = np.zeros_like(g)
    r = -g
    exact = CG_EXACT_RTOL * np.linalg.norm(g)
    if np.linalg.norm(r) <= exact:
        return s
    p = r.copy()
    rr = float(r @ r)
    for it in range(min(n_cg, g.size)):
        hp = hvp(p)
        if not np.isfinite(hp).all():
            raise NumericalError(f"non-finite Hessian-vector product at cg iteration {it}")
        php = float(p @ hp)
        if php <= 0.0:
            # PSD breakdown guard: direction has no curvature left
            break
        alpha = rr / php
        s += alpha * p
        r -= alpha * hp
        if not np.isfinite(s).all():
            raise NumericalError(f"non-finite iterate at cg iteration {it}")
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= exact:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return s


def direction_dense(h: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    """Damped dense Newton direction ``s = -(H + eps*I)^{-1} g``."""
    if eps <= 0.0:
        raise ValueError("eps must be > 0: the undamped Hessian may be singular")
    return cholesky_solve(h, g, eps)


@dataclass
class NewtonStepDiag:
    loss: float
    lam: float
    grad_norm: float
    backtracks: int
    accepted: bool
    gs: float = 0.0  # <G, s> for the proposed direction


@dataclass
class NewtonDiagnostics:
    entry_loss: float
    steps: list[NewtonStepDiag] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.steps[-1].loss if self.steps else self.entry_loss

    def losses(self) -> list[float]:
        return [self.entry_loss] + [s.loss for s in self.steps]


@dataclass(frozen=True)
class Objective:
    """Seam for the Newton loop: loss, gradient, and a direction solver
    expressed on flat vectors. ``hvp_at(w)`` returns a linear operator fixed
    at ``w`` so iterative solvers can reuse per-point precomputation."""

    loss: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    hvp_at: Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]] | None = None


def minimize_newton(obj: Objective, w0: np.ndarray,
                    cfg: NewtonConfig) -> tuple[np.ndarray, NewtonDiagnostics]:
    """Backtracked Newton on a flat unknown vector.

    Runs exactly ``cfg.newton_steps`` outer iterations. A step whose
    backtracking exhausts ``max_backtracks`` is rejected (the iterate is
    retained for that outer iteration and the event recorded); there is no
    other fallback.
    """
    w = np.array(w0, dtype=np.float64)
    loss_old = obj.loss(w)
    diag = NewtonDiagnostics(entry_loss=loss_old)
    for _ in range(cfg.newton_steps):
        g = obj.gradient(w)
        grad_norm = float(np.linalg.norm(g))
        if cfg.solver == "dense":
            s = direction_dense(obj.hessian(w), g, cfg.dense_eps)
        else:
            s = cg_fixed(obj.hvp_at(w), g, cfg.cg_iterations)
        gs = float(g @ s)
        lam = 1.0
        trial = w + s
        trial_loss = obj.loss(trial)
        backtracks = 0
        accepted = True
        # accept-form comparison so a non-finite trial loss keeps backtracking
        while not trial_loss <= loss_old + cfg.armijo_alpha * lam * gs:
            if backtracks >= cfg.max_backtracks:
                accepted = False
                break
            lam *= cfg.armijo_rho
            trial = w + lam * s
            trial_loss = obj.loss(trial)
            backtracks += 1
        if accepted:
            w = trial
            loss_old = trial_loss
            diag.steps.append(
                NewtonStepDiag(loss_old, lam, grad_norm, backtracks, True, gs)
            )
        else:
            diag.steps.append(
                NewtonStepDiag(loss_old, 0.0, grad_norm, backtracks, False, gs)
            )
    return w, diag


def subproblem_objective(view: SubproblemView) -> Objective:
    c, k = view.n_classes, view.n_basis
    phi, labels = view.phi, view.labels
    sign = sign_factor(view.softmax_sign)
    cache: dict = {"key": None}

    def probabilities(v: np.ndarray) -> np.ndarray:
        # gradient and Hessian products at one iterate share the softmax
        key = v.tobytes()
        if cache["key"] != key:
            cache["key"] = key
            cache["p"] = softmax(phi @ v.reshape(c, k).T, view.softmax_sign)
        return cache["p"]

    def gradient(v: np.ndarray) -> np.ndarray:
        dz = sign * (probabilities(v) - labels)
        return (dz.T @ phi).reshape(-1)

    def hvp_at(v: np.ndarray):
        p = probabilities(v)

        def apply(u: np.ndarray) -> np.ndarray:
            a = phi @ u.reshape(c, k).T
            pa = p * a
            b = pa - p * pa.sum(axis=1, keepdims=True)
            return (b.T @ phi).reshape(-1)

        return apply

    return Objective(
        loss=lambda v: s_loss(view, flat_to_w(v, c, k)),
        gradient=gradient,
        hessian=lambda v: s_hessian(view, flat_to_w(v, c, k)),
        hvp_at=hvp_at,
    )


def newton_armijo(view: SubproblemView, w0: np.ndarray,
                  cfg: NewtonConfig) -> tuple[np.ndarray, NewtonDiagnostics]:
    """Backtracked Newton solve of the frozen-basis subproblem from ``w0``."""
    w_flat, diag = minimize_newton(subproblem_objective(view), w_to_flat(w0), cfg)
    return flat_to_w(w_flat, view.n_classes, view.n_basis), diag
