"""File formats: matrix CSV input; report.json, replicates.csv, hist.dat, qq.dat output."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..matrix import GaussianMatrix
from ..stats import EmpiricalDistribution, histogram, qq_points
from .harness import ExperimentReport


def read_matrix_csv(path) -> GaussianMatrix:
    """Plain comma-separated square matrix, no header."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line or all(not cell.strip() for cell in line):
                continue
            rows.append([float(cell) for cell in line])
    if not rows:
        raise ValueError(f"{path}: no matrix rows")
    if any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: expected a square matrix, got {len(rows)} rows of lengths "
                         f"{sorted({len(r) for r in rows})}")
    return GaussianMatrix.from_values(np.array(rows))


def write_matrix_csv(path, W) -> None:
    values = W.values if isinstance(W, GaussianMatrix) else np.asarray(W)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_replicates_csv(path, report: ExperimentReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.fields)
        for rec in report.records:
            writer.writerow([_cell(rec.get(f, "")) for f in report.fields])


def _parse_cell(text: str):
    # Integers (64-bit seeds in particular) must not pass through float.
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_replicates_csv(path) -> list[dict[str, int | float]]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _write_two_column(path, header: str, a, b) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for x, y in zip(a, b):
            fh.write(f"{float(x):.17g} {float(y):.17g}\n")


def write_plot_data(out_dir: Path, sample) -> None:
    sample = np.asarray(sample, dtype=np.float64)
    sample = sample[np.isfinite(sample)]
    if sample.size == 0:
        sample = np.zeros(1)
    edges, counts = histogram(sample)
    # Last row closes the final bin with a zero count.
    _write_two_column(out_dir / "hist.dat", "bin_left_edge count",
                      edges, np.r_[counts, 0])
    pairs = qq_points(EmpiricalDistribution.from_sample(sample))
    _write_two_column(out_dir / "qq.dat", "normal_quantile sample_quantile",
                      pairs[:, 0], pairs[:, 1])


def write_outputs(report: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_replicates_csv(out / "replicates.csv", report)
    write_plot_data(out, report.plot_sample if report.plot_sample is not None else [])
    return out
