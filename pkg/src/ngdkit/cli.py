"""Command-line surface: ``train``, ``compare``, ``export-peaks-viz``,
``gen-peaks``.

Exit codes: 0 success, 2 configuration/schema error, 3 data error,
4 numerical failure. Commands never mutate input data files; every output
CSV records the config digest driving it.
"""

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PRESET_NAMES, config_from_dict, load_config, preset
from .data import generate_peaks
from .errors import (
    ConfigError,
    DataFormatError,
    NumericalError,
    ShapeError,
    SingularMatrixError,
    UnsupportedNetworkError,
)
from .metrics import aggregate, export_aggregate, export_curves, export_table, format_real, write_csv
from .runner import compare_summary, run_experiment

VIZ_GRID = 256

SUMMARY_HEADER = (
    "optimizer",
    "final_train_acc_mean", "final_train_acc_std",
    "final_val_acc_mean", "final_val_acc_std",
    "iterations_to_target", "target_val_acc",
)


def _write_run_outputs(cfg, arm_name, results, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for res in results:
        seed = res.record.seed
        export_curves(res.record, out_dir / f"curves_{arm_name}_seed{seed}.csv")
        save_checkpoint(out_dir / f"checkpoint_{arm_name}_seed{seed}.ngck",
                        res.spec, res.params)
    stats = aggregate([r.record for r in results])
    export_aggregate(stats, out_dir / f"aggregate_{arm_name}.csv",
                     {"optimizer": arm_name, "config_digest": cfg.digest(),
                      "name": cfg.name})


def cmd_train(cfg, out_dir=None, workers: int = 1) -> None:
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    results = run_experiment(cfg, cfg.optimizer, workers=workers)
    _write_run_outputs(cfg, cfg.optimizer, results, out)


def cmd_compare(cfg, out_dir=None, workers: int = 1) -> None:
    for arm in ("ngd", "gd"):
        if arm not in cfg.arms:
            raise ConfigError(f"compare needs both arms configured, missing {arm!r}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    results = {arm: run_experiment(cfg, arm, workers=workers) for arm in ("ngd", "gd")}
    for arm, arm_results in results.items():
        _write_run_outputs(cfg, arm, arm_results, out)
    rows = []
    for row in compare_summary(cfg, results):
        rows.append((
            row["optimizer"],
            format_real(row["final_train_acc_mean"]),
            format_real(row["final_train_acc_std"]),
            format_real(row["final_val_acc_mean"]),
            format_real(row["final_val_acc_std"]),
            "" if row["iterations_to_target"] is None
            else str(row["iterations_to_target"]),
            format_real(row["target_val_acc"]),
        ))
    write_csv(out / "summary.csv", SUMMARY_HEADER, rows,
              {"config_digest": cfg.digest(), "name": cfg.name})


def viz_grid_points(n: int = VIZ_GRID) -> np.ndarray:
    """Uniform n x n grid on the unit square, x varying fastest."""
    axis = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(axis, axis)
    return np.column_stack([xx.ravel(), yy.ravel()])


def cmd_export_peaks_viz(cfg, checkpoint_path, out_dir=None,
                         grid_n: int = VIZ_GRID) -> None:
    spec, params = load_checkpoint(checkpoint_path)
    if tuple(spec.input_shape) != (2,):
        raise UnsupportedNetworkError(
            f"peaks visualization needs a 2-D input network, "
            f"checkpoint has input {spec.input_shape}"
        )
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = viz_grid_points(grid_n)
    meta = {"config_digest": cfg.digest(), "checkpoint": Path(checkpoint_path).name}

    phi = nn.basis_grid(spec, params.xi, grid)
    probs = nn.softmax(nn.logits(nn.head_features(spec, phi), params.w),
                       spec.softmax_sign)
    preds = np.argmax(probs, axis=1)

    write_csv(out / "predictions.csv", ("x", "y", "class"),
              [(format_real(x), format_real(y), str(int(c)))
               for (x, y), c in zip(grid, preds)], meta)
    export_table(out / "probabilities.csv",
                 ("x", "y") + tuple(f"p{i}" for i in range(spec.n_classes)),
                 np.hstack([grid, probs]), meta)
    export_table(out / "basis.csv",
                 ("x", "y") + tuple(f"phi{i}" for i in range(phi.shape[1])),
                 np.hstack([grid, phi]), meta)


def cmd_gen_peaks(n: int, seed: int, out_path) -> None:
    ds = generate_peaks(n, seed)
    rows = [
        (format_real(x), format_real(y), str(int(c)))
        for (x, y), c in zip(ds.inputs, ds.class_indices())
    ]
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_csv(out_path, ("x", "y", "class"), rows, {"seed": seed, "n": n})


def _load_cfg(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = config_from_dict(preset(args.preset))
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.seeds:
        try:
            seeds = tuple(int(s) for s in args.seeds.split(","))
        except ValueError as e:
            raise ConfigError(f"bad --seeds value {args.seeds!r}") from e
        cfg = dataclasses.replace(cfg, seeds=seeds)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngdkit",
        description="Train classifiers with the hybrid Newton/gradient "
                    "coordinate-descent optimizer or its first-order baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument("--preset", choices=PRESET_NAMES,
                       help="use a named built-in config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seeds", help="comma-separated seed list (overrides config)")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel seed processes")

    add_common(sub.add_parser("train", help="run one optimizer arm over all seeds"))
    add_common(sub.add_parser("compare", help="run both arms and summarize"))

    viz = sub.add_parser("export-peaks-viz",
                         help="export prediction/probability/basis grids")
    add_common(viz)
    viz.add_argument("--checkpoint", required=True, help="trained .ngck file")
    viz.add_argument("--grid", type=int, default=VIZ_GRID)

    gen = sub.add_parser("gen-peaks", help="generate a peaks dataset CSV")
    gen.add_argument("--n", type=int, default=5000)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-peaks":
            cmd_gen_peaks(args.n, args.seed, args.out)
            return 0
        cfg = _load_cfg(args)
        if args.command == "train":
            cmd_train(cfg, args.out, args.workers)
        elif args.command == "compare":
            cmd_compare(cfg, args.out, args.workers)
        elif args.command == "export-peaks-viz":
            cmd_export_peaks_viz(cfg, args.checkpoint, args.out, args.grid)
        return 0
    except (ConfigError, UnsupportedNetworkError, ShapeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataFormatError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except (NumericalError, SingularMatrixError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
