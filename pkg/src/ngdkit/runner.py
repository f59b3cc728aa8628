"""Experiment execution: config to datasets, seeded training runs, arm
comparison statistics.

One iteration is one batch update. Per-iteration rows carry batch train
metrics computed at the updated parameters; validation accuracy over the
full validation set is computed once per epoch and placed on the epoch's
final iteration row. Seeds are independent and may run in parallel worker
processes (each worker reloads its data from the config).
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .config import ExperimentConfig, config_from_dict
from .data import BatchPlan, Dataset, batches, generate_peaks, load_cifar10, load_idx, split
from .errors import ConfigError, DataFormatError, NumericalError
from .metrics import IterationRow, RunRecord, accuracy, aggregate
from .optim import AdamState, gd_batch_update, ngd_batch_update
from .solve import NewtonConfig

EVAL_CHUNK = 4096


def build_network_spec(cfg: ExperimentConfig) -> nn.NetworkSpec:
    return nn.NetworkSpec(
        layers=tuple(cfg.architecture),
        n_classes=cfg.n_classes,
        input_shape=tuple(cfg.input_shape),
        softmax_sign=cfg.softmax_sign,
        augment_constant_basis=cfg.augment_constant_basis,
    )


def _find_idx_pair(data_dir: Path, images: str, labels: str):
    for suffix in ("", ".gz"):
        ip = data_dir / (images + suffix)
        lp = data_dir / (labels + suffix)
        if ip.exists() and lp.exists():
            return ip, lp
    raise DataFormatError(f"missing IDX files {images}[.gz] under {data_dir}")


def experiment_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Train and validation sets for a config."""
    ds = cfg.dataset
    if ds.name == "peaks":
        train = generate_peaks(ds.n_train, ds.peaks_train_seed, ds.peaks_thresholds)
        val = generate_peaks(max(ds.n_val, 1), ds.peaks_val_seed, ds.peaks_thresholds,
                             split="val")
        return train, val
    if ds.data_dir is None:
        raise ConfigError(f"dataset {ds.name!r} needs data_dir")
    data_dir = Path(ds.data_dir)
    flatten = ds.flatten
    if ds.name in ("mnist", "fashion_mnist"):
        tr = load_idx(*_find_idx_pair(data_dir, "train-images-idx3-ubyte",
                                      "train-labels-idx1-ubyte"), flatten=flatten)
        te = load_idx(*_find_idx_pair(data_dir, "t10k-images-idx3-ubyte",
                                      "t10k-labels-idx1-ubyte"), flatten=flatten)
        pool = Dataset(np.concatenate([tr.inputs, te.inputs]),
                       np.concatenate([tr.labels, te.labels]), 10)
        sizes = ds.split_sizes or (50000, 10000, 10000)
    elif ds.name == "cifar10":
        files = [data_dir / f"data_batch_{i}.bin" for i in range(1, 6)]
        files.append(data_dir / "test_batch.bin")
        files = [f for f in files if f.exists()]
        if not files:
            raise DataFormatError(f"no CIFAR-10 batch files under {data_dir}")
        pool = load_cifar10(files)
        if flatten:
            pool = Dataset(pool.inputs.reshape(len(pool), -1), pool.labels, 10)
        sizes = ds.split_sizes or (40000, 10000, 10000)
    else:
        raise ConfigError(f"unknown dataset {ds.name!r}")
    train, val, _test = split(pool, tuple(sizes), ds.split_seed)
    return train, val


@dataclass
class RunResult:
    record: RunRecord
    spec: nn.NetworkSpec
    params: nn.NetworkParams


def _predict_chunked(spec, params, inputs) -> np.ndarray:
    preds = [
        nn.predict_classes(spec, params, inputs[i : i + EVAL_CHUNK])
        for i in range(0, inputs.shape[0], EVAL_CHUNK)
    ]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def newton_config_for(arm) -> NewtonConfig:
    return NewtonConfig(
        newton_steps=arm.newton_steps,
        cg_iterations=arm.cg_iterations,
        solver=arm.solver,
        dense_eps=arm.dense_eps,
    )


def train_single(cfg: ExperimentConfig, arm_name: str, seed: int,
                 train: Dataset, val: Dataset) -> RunResult:
    """One seeded training run of one optimizer arm."""
    spec = build_network_spec(cfg)
    params = nn.init_params(spec, seed)
    arm = cfg.arm(arm_name)
    adam = AdamState(lr=arm.learning_rate, beta1=arm.beta1, beta2=arm.beta2)
    newton_cfg = newton_config_for(arm) if arm_name == "ngd" else None
    plan = BatchPlan(batch_size=min(cfg.batch_size, len(train)), seed=seed,
                     epochs=cfg.epochs)
    record = RunRecord(
        run_id=f"{cfg.name}_{arm_name}_seed{seed}",
        seed=seed,
        optimizer=arm_name,
        config_digest=cfg.digest(),
    )
    iteration = 0
    for epoch in range(cfg.epochs):
        for batch in batches(train, plan, epoch):
            iteration += 1
            try:
                if arm_name == "ngd":
                    params, rep = ngd_batch_update(spec, params, batch,
                                                   newton_cfg, adam)
                else:
                    params, rep = gd_batch_update(spec, params, batch, adam)
            except NumericalError as e:
                raise NumericalError(
                    f"{e} (run {record.run_id}, iteration {iteration})"
                ) from e
            n = batch.inputs.shape[0]
            record.rows.append(IterationRow(
                iteration=iteration,
                train_loss=rep.loss_after / n,
                train_acc=accuracy(rep.batch_predictions, batch.labels),
            ))
        if record.rows:
            val_preds = _predict_chunked(spec, params, val.inputs)
            record.rows[-1].val_acc = accuracy(val_preds, val.labels)
    record.validate()
    return RunResult(record=record, spec=spec, params=params)


def _seed_worker(args):
    raw_cfg, arm_name, seed = args
    cfg = config_from_dict(raw_cfg)
    train, val = experiment_datasets(cfg)
    return train_single(cfg, arm_name, seed, train, val)


def run_experiment(cfg: ExperimentConfig, arm_name: str, workers: int = 1,
                   datasets: tuple[Dataset, Dataset] | None = None) -> list[RunResult]:
    """Run every seed of one arm; workers > 1 runs seeds in parallel
    processes (each reloading data from the config)."""
    if workers > 1 and datasets is None and len(cfg.seeds) > 1:
        jobs = [(cfg.to_dict(), arm_name, seed) for seed in cfg.seeds]
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_seed_worker, jobs))
    train, val = datasets if datasets is not None else experiment_datasets(cfg)
    return [train_single(cfg, arm_name, seed, train, val) for seed in cfg.seeds]


def iterations_to_target(stats, target: float):
    """First iteration at which the mean validation curve reaches target."""
    mean, _std = stats.metrics["val_acc"]
    for it, v in zip(stats.iterations, mean):
        if not np.isnan(v) and v >= target:
            return int(it)
    return None


def compare_summary(cfg: ExperimentConfig,
                    results: dict[str, list[RunResult]]) -> list[dict]:
    """Per-arm final accuracy statistics and iterations-to-target rows."""
    rows = []
    for arm_name, arm_results in results.items():
        records = [r.record for r in arm_results]
        if not records[0].rows:  # degenerate zero-epoch run
            rows.append({
                "optimizer": arm_name,
                "final_train_acc_mean": None, "final_train_acc_std": None,
                "final_val_acc_mean": None, "final_val_acc_std": None,
                "iterations_to_target": None,
                "target_val_acc": cfg.target_val_acc,
            })
            continue
        stats = aggregate(records)
        final_train = np.array([r.rows[-1].train_acc for r in records])
        final_val = np.array([
            next(row.val_acc for row in reversed(r.rows) if row.val_acc is not None)
            for r in records
        ])
        n = len(records)
        rows.append({
            "optimizer": arm_name,
            "final_train_acc_mean": float(final_train.mean()),
            "final_train_acc_std": float(final_train.std(ddof=1)) if n > 1 else 0.0,
            "final_val_acc_mean": float(final_val.mean()),
            "final_val_acc_std": float(final_val.std(ddof=1)) if n > 1 else 0.0,
            "iterations_to_target": iterations_to_target(stats, cfg.target_val_acc)
            if cfg.target_val_acc is not None else None,
            "target_val_acc": cfg.target_val_acc,
        })
    return rows


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 8))
