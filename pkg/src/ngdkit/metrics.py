"""Run bookkeeping: accuracy, multi-seed curve aggregation, and CSV export.

CSV files carry optional ``# key=value`` metadata lines, then a header, then
rows. Reals are written with 17 significant digits so the module's own reader
recovers them bit-exactly; line endings are LF. Validation metrics exist only
on epoch-end rows; the field is empty elsewhere.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CURVE_HEADER = ("iteration", "train_loss", "train_acc", "val_acc")


def format_real(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return ""
    return "%.17g" % x


def accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of predicted class indices matching one-hot labels."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape[0] != labels.shape[0]:
        raise ValueError(
            f"length mismatch: {preds.shape[0]} predictions vs {labels.shape[0]} labels"
        )
    if preds.shape[0] == 0:
        return 0.0
    return float(np.mean(preds == np.argmax(labels, axis=1)))


@dataclass
class IterationRow:
    iteration: int
    train_loss: float
    train_acc: float
    val_acc: float | None = None


@dataclass
class RunRecord:
    run_id: str
    seed: int
    optimizer: str
    config_digest: str
    rows: list[IterationRow] = field(default_factory=list)

    def validate(self) -> None:
        its = [r.iteration for r in self.rows]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ValueError("iterations must be strictly increasing")
        for r in self.rows:
            for acc in (r.train_acc, r.val_acc):
                if acc is not None and not 0.0 <= acc <= 1.0:
                    raise ValueError(f"accuracy {acc} outside [0, 1]")


@dataclass
class CurveStats:
    """Per-iteration mean and sample standard deviation over runs."""

    iterations: np.ndarray
    metrics: dict[str, tuple[np.ndarray, np.ndarray]]
    n_runs: int


def aggregate(runs: list[RunRecord]) -> CurveStats:
    """Aggregate aligned runs; sample std (ddof=1), zero for a single run.

    All runs must share the same iteration grid and the same pattern of
    defined validation points.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    its = [r.iteration for r in runs[0].rows]
    for run in runs[1:]:
        if [r.iteration for r in run.rows] != its:
            raise ValueError("iteration grids are misaligned across runs")
    cols = {
        "train_loss": [[r.train_loss for r in run.rows] for run in runs],
        "train_acc": [[r.train_acc for r in run.rows] for run in runs],
        "val_acc": [
            [np.nan if r.val_acc is None else r.val_acc for r in run.rows]
            for run in runs
        ],
    }
    metrics = {}
    for name, values in cols.items():
        mat = np.asarray(values, dtype=np.float64)
        defined = ~np.isnan(mat)
        if not (defined.all(axis=0) | (~defined).all(axis=0)).all():
            raise ValueError(f"metric {name} defined on misaligned iterations")
        mean = mat.mean(axis=0)
        std = mat.std(axis=0, ddof=1) if len(runs) > 1 else np.zeros(mat.shape[1])
        metrics[name] = (mean, std)
    return CurveStats(np.asarray(its, dtype=np.int64), metrics, len(runs))


def write_csv(path, header, rows, metadata: dict | None = None) -> None:
    """Write metadata comments, a header, and pre-formatted string rows."""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_csv(path):
    """Inverse of :func:`write_csv`: returns (metadata, header, string rows)."""
    text = Path(path).read_bytes().decode("utf-8")
    metadata = {}
    header = None
    rows = []
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    if header is None:
        raise OSError(f"{path}: no header line")
    return metadata, header, rows


def export_curves(record: RunRecord, path) -> None:
    record.validate()
    meta = {
        "run_id": record.run_id,
        "seed": record.seed,
        "optimizer": record.optimizer,
        "config_digest": record.config_digest,
    }
    rows = [
        (
            str(r.iteration),
            format_real(r.train_loss),
            format_real(r.train_acc),
            format_real(r.val_acc),
        )
        for r in record.rows
    ]
    write_csv(path, CURVE_HEADER, rows, meta)


def read_curves(path) -> RunRecord:
    meta, header, rows = read_csv(path)
    if tuple(header) != CURVE_HEADER:
        raise OSError(f"{path}: unexpected header {header}")
    record = RunRecord(
        run_id=meta.get("run_id", ""),
        seed=int(meta.get("seed", -1)),
        optimizer=meta.get("optimizer", ""),
        config_digest=meta.get("config_digest", ""),
    )
    for it, loss, tacc, vacc in rows:
        record.rows.append(
            IterationRow(int(it), float(loss), float(tacc),
                         float(vacc) if vacc else None)
        )
    return record


def export_aggregate(stats: CurveStats, path, metadata: dict | None = None) -> None:
    header = ["iteration"]
    for name in stats.metrics:
        header += [f"{name}_mean", f"{name}_std"]
    rows = []
    for i, it in enumerate(stats.iterations):
        row = [str(int(it))]
        for mean, std in stats.metrics.values():
            row += [format_real(mean[i]), format_real(std[i])]
        rows.append(row)
    meta = {"n_runs": stats.n_runs}
    meta.update(metadata or {})
    write_csv(path, header, rows, meta)


def export_table(path, header, array: np.ndarray, metadata: dict | None = None) -> None:
    """Export a dense real-valued table (grids, probability maps)."""
    array = np.asarray(array, dtype=np.float64)
    rows = [tuple(format_real(x) for x in row) for row in array]
    write_csv(path, header, rows, metadata)
