"""Accuracy-over-epoch charts and tidy plot data from metrics files."""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fedledger"
import matplotlib.pyplot as plt

from .errors import ParseError


def load_mean_accuracy(path: Path) -> dict[int, float]:
    """epoch -> mean accuracy across that epoch's node rows."""
    sums: dict[int, list[float]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "epoch" not in reader.fieldnames:
            raise ParseError("not a metrics file (missing header)", line=1)
        for i, row in enumerate(reader, start=2):
            try:
                sums.setdefault(int(row["epoch"]), []).append(float(row["accuracy"]))
            except (KeyError, TypeError, ValueError):
                raise ParseError("bad metrics row", line=i) from None
    if not sums:
        raise ParseError("metrics file has no rows", line=1)
    return {e: sum(v) / len(v) for e, v in sorted(sums.items())}


def _save_chart(series: dict[str, dict[int, float]], path: Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in series.items():
        epochs = sorted(curve)
        ax.plot(epochs, [curve[e] for e in epochs], marker="o", markersize=3, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_report(metric_files: list[Path], out_dir: Path) -> list[Path]:
    """One SVG per metrics file, a merged comparison SVG, and the plot data
    as tidy CSV (run, epoch, mean_accuracy)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = {}
    for path in metric_files:
        name = Path(path).resolve().parent.name or Path(path).stem
        if name in series:
            name = f"{name}:{Path(path).stem}"
        series[name] = load_mean_accuracy(path)

    written = []
    for name, curve in series.items():
        single = out_dir / f"accuracy_{name}.svg"
        _save_chart({name: curve}, single, f"accuracy over epochs: {name}")
        written.append(single)
    merged = out_dir / "accuracy_comparison.svg"
    _save_chart(series, merged, "accuracy over epochs")
    written.append(merged)

    tidy = out_dir / "accuracy_curves.csv"
    with tidy.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "epoch", "mean_accuracy"])
        for name, curve in series.items():
            for epoch in sorted(curve):
                writer.writerow([name, epoch, f"{curve[epoch]:.6f}"])
    written.append(tidy)
    return written
