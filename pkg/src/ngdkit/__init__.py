"""Training toolkit for classification networks built around a hybrid
Newton/gradient coordinate-descent optimizer: the convex cross-entropy
subproblem in the linear-head weights is solved with backtracked Newton
(dense or truncated conjugate gradient), alternating with Adam steps on the
hidden layers."""

from .config import ArmConfig, DataConfig, ExperimentConfig, config_from_dict, load_config, preset
from .convex import SubproblemView, hvp_operator, s_gradient, s_hessian, s_hvp, s_loss
from .data import Batch, BatchPlan, Dataset, batches, generate_peaks, load_cifar10, load_idx, split
from .layers import Conv2D, Dense, Flatten, MaxPool
from .metrics import RunRecord, accuracy, aggregate
from .nn import (
    ForwardTrace,
    NetworkParams,
    NetworkSpec,
    backward_xi,
    basis_grid,
    cross_entropy,
    forward_hidden,
    init_params,
    logits,
    predict_classes,
    softmax,
)
from .optim import AdamState, UpdateReport, adam_step, gd_batch_update, ngd_batch_update
from .rng import substream
from .runner import run_experiment, train_single
from .solve import NewtonConfig, cg_fixed, direction_dense, newton_armijo

__version__ = "0.1.0"
