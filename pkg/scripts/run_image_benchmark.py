#!/usr/bin/env python3
"""Run an image-classification benchmark comparison from a named preset.

Dataset files are user-supplied (no downloading):
  - mnist_dense / fashion_dense: IDX files (optionally .gz) in --data-dir
  - cifar_dense / cifar_convnet: data_batch_{1..5}.bin + test_batch.bin

    python scripts/run_image_benchmark.py --preset mnist_dense \
        --data-dir data/mnist --desk

``--desk`` shortens the run to 10 epochs / 3 seeds; the default is the full
100-epoch, 10-seed comparison.
"""

import argparse
import sys

from ngdkit.cli import cmd_compare
from ngdkit.config import config_from_dict, preset
from ngdkit.runner import default_workers


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", required=True,
                    choices=["mnist_dense", "fashion_dense", "cifar_dense",
                             "cifar_convnet"])
    ap.add_argument("--data-dir", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--desk", action="store_true",
                    help="10 epochs over 3 seeds instead of 100 over 10")
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args()

    raw = preset(args.preset)
    raw["dataset"]["data_dir"] = args.data_dir
    if args.desk:
        raw["epochs"] = 10
        raw["seeds"] = [0, 1, 2]
    if args.out:
        raw["out_dir"] = args.out
    cfg = config_from_dict(raw)
    cmd_compare(cfg, workers=args.workers)
    print(f"summary written to {cfg.out_dir}/summary.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
