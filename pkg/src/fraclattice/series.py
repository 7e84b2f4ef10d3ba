"""Sampled increment series and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = ["IncrementSeries", "write_samples_csv", "read_samples_csv"]


@dataclass
class IncrementSeries:
    increments: np.ndarray
    eps: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.increments = np.asarray(self.increments, dtype=float)

    def __len__(self) -> int:
        return self.increments.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.eps * np.arange(1, len(self) + 1, dtype=float)

    @property
    def path(self) -> np.ndarray:
        """Cumulative path B_{t_k} = sum_{j<=k} X_{t_j}."""
        return np.cumsum(self.increments)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "increment", "path"])
        for k, (t, x, b) in enumerate(zip(self.times, self.increments, self.path), start=1):
            w.writerow([k, repr(float(t)), repr(float(x)), repr(float(b))])
        return buf.getvalue()


def write_samples_csv(fh, samples: Iterable[IncrementSeries], header_lines: Iterable[str] = ()) -> int:
    """Write ``sample,k,t,increment,path`` rows; returns the number of data rows."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["sample", "k", "t", "increment", "path"])
    rows = 0
    for s, series in enumerate(samples):
        for k, (t, x, b) in enumerate(zip(series.times, series.increments, series.path), start=1):
            w.writerow([s, k, repr(float(t)), repr(float(x)), repr(float(b))])
            rows += 1
    return rows


def read_samples_csv(fh) -> np.ndarray:
    """Read increments back as an array of shape (count, n_steps)."""
    lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    out: dict[int, list[float]] = {}
    for row in reader:
        out.setdefault(int(row["sample"]), []).append(float(row["increment"]))
    return np.array([out[k] for k in sorted(out)])
