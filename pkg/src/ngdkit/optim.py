"""Parameter-update drivers: Adam, the joint first-order baseline, and the
hybrid Newton/gradient coordinate-descent batch update.

One call to either batch update is one "iteration" in all reporting. The
coordinate update freezes the features on the batch, solves the convex head
subproblem to (approximate) optimality, then takes exactly one Adam step on
the hidden parameters with gradients evaluated at the fresh head. The head
has no Adam state in the hybrid scheme; it is never first-order updated.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .convex import SubproblemView
from .errors import NumericalError
from .solve import NewtonConfig, NewtonDiagnostics, newton_armijo

ADAM_EPS = 1e-7


@dataclass
class AdamState:
    """First/second moment accumulators for an ordered list of blocks.

    Update rule (bias-corrected moments, Adam as commonly defined):
    ``p -= lr * m_hat / (sqrt(v_hat) + eps)``.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = ADAM_EPS
    t: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_step(state: AdamState, blocks: list[np.ndarray],
              grads: list[np.ndarray]) -> list[np.ndarray]:
    """One in-place Adam update of ``blocks``; returns them for convenience."""
    if state.m is None:
        state.m = [np.zeros_like(b) for b in blocks]
        state.v = [np.zeros_like(b) for b in blocks]
    if len(blocks) != len(state.m) or len(grads) != len(blocks):
        raise ValueError(
            f"block/grad/state counts differ: {len(blocks)}/{len(grads)}/{len(state.m)}"
        )
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for b, g, m, v in zip(blocks, grads, state.m, state.v):
        if b.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match block {b.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        b -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return blocks


@dataclass
class UpdateReport:
    """Per-iteration bookkeeping; losses are summed over the batch.

    ``loss_after`` and ``batch_predictions`` come from one infer-mode pass at
    the updated parameters, so callers can derive post-update batch metrics
    without another forward.
    """

    loss_before: float
    loss_after: float
    grad_norm_xi: float
    grad_norm_w: float | None = None
    newton: NewtonDiagnostics | None = None
    batch_predictions: np.ndarray | None = None


def _grad_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads)))


def _after_metrics(spec, params, inputs, labels):
    trace = nn.forward_hidden(spec, params.xi, inputs, mode="infer")
    z = nn.logits(nn.head_features(spec, trace.phi), params.w)
    loss = nn.loss_sum_from_logits(z, labels, spec.softmax_sign)
    preds = np.argmax(nn.sign_factor(spec.softmax_sign) * z, axis=1)
    return loss, preds


def gd_batch_update(spec: nn.NetworkSpec, params: nn.NetworkParams, batch,
                    adam: AdamState) -> tuple[nn.NetworkParams, UpdateReport]:
    """One joint Adam step on the head and all hidden blocks."""
    inputs, labels = batch.inputs, batch.labels
    if inputs.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    trace = nn.forward_hidden(spec, params.xi, inputs, mode="train")
    z = nn.logits(nn.head_features(spec, trace.phi), params.w)
    loss_before = nn.loss_sum_from_logits(z, labels, spec.softmax_sign)
    if not np.isfinite(loss_before):
        raise NumericalError(f"non-finite batch loss {loss_before}")
    grad_w = nn.head_gradient(spec, trace, params.w, labels)
    xi_grads = nn.backward_xi(spec, params.xi, trace, params.w, labels)
    flat_xi = nn.flatten_xi_grads(params.xi, xi_grads)
    adam_step(adam, nn.trainable_blocks(params, include_w=True), [grad_w] + flat_xi)
    loss_after, preds = _after_metrics(spec, params, inputs, labels)
    report = UpdateReport(
        loss_before=loss_before,
        loss_after=loss_after,
        grad_norm_xi=_grad_norm(flat_xi),
        grad_norm_w=float(np.linalg.norm(grad_w)),
        batch_predictions=preds,
    )
    return params, report


def ngd_batch_update(spec: nn.NetworkSpec, params: nn.NetworkParams, batch,
                     cfg: NewtonConfig,
                     adam_xi: AdamState) -> tuple[nn.NetworkParams, UpdateReport]:
    """One coordinate-descent update: convex head solve, then one hidden step.

    The hidden-layer gradients are evaluated at the *new* head, never the
    stale one. Batch-norm running statistics advance once, during the
    feature-freezing forward pass.
    """
    inputs, labels = batch.inputs, batch.labels
    if inputs.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    trace = nn.forward_hidden(spec, params.xi, inputs, mode="train")
    if not np.isfinite(trace.phi).all():
        raise NumericalError("non-finite features entering the head solve")
    view = SubproblemView(
        nn.head_features(spec, trace.phi), labels, spec.softmax_sign
    )
    w_new, diag = newton_armijo(view, params.w, cfg)
    params.w = w_new
    xi_grads = nn.backward_xi(spec, params.xi, trace, w_new, labels)
    flat_xi = nn.flatten_xi_grads(params.xi, xi_grads)
    adam_step(adam_xi, nn.trainable_blocks(params, include_w=False), flat_xi)
    loss_after, preds = _after_metrics(spec, params, inputs, labels)
    report = UpdateReport(
        loss_before=diag.entry_loss,
        loss_after=loss_after,
        grad_norm_xi=_grad_norm(flat_xi),
        newton=diag,
        batch_predictions=preds,
    )
    return params, report
