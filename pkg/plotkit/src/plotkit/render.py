"""Render optimizer trace and delta-sweep CSVs to SVG/PNG figures.

Consumes only the public CSV contracts of the experiment harness:

* trace files with header
  ``t,fval,accuracy,grad_norm_sq,gnorm_weighted,nu_min,nu_max,diverged``
  (reals, empty cells for absent metrics, 0/1 flags);
* delta-sweep matrices with header ``delta,<optimizer>,...`` whose cells are
  reals or the literal ``inf`` for diverged runs.

Rendering is deterministic: fixed style, no timestamps or random ids, so
re-running a spec reproduces the output file byte-for-byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotkit"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "FigureSpec",
    "MissingColumnError",
    "plot_delta_sweep",
    "plot_traces",
    "read_matrix_csv",
    "read_trace_csv",
]

# Columns plotted on a log axis unless the spec overrides.
LOG_Y_DEFAULT = {"fval", "grad_norm_sq", "gnorm_weighted"}


class MissingColumnError(ValueError):
    """A referenced column is absent from the CSV header."""

    def __init__(self, column: str, path, header):
        super().__init__(
            f"column {column!r} not present in {path} (header: {', '.join(header)})"
        )
        self.column = column


def read_trace_csv(path) -> dict[str, list]:
    """Trace CSV -> column dict; empty cells become None."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {name: [] for name in header}
        for row in reader:
            if not row:
                continue
            for name, cell in zip(header, row):
                cols[name].append(None if cell == "" else float(cell))
    return cols


def read_matrix_csv(path) -> tuple[list[float], list[str], list[list[float]]]:
    """Sweep CSV -> (deltas, optimizer names, value rows); 'inf' -> math.inf."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "delta":
            raise ValueError(f"{path} is not a delta-sweep matrix (header {header})")
        names = header[1:]
        deltas: list[float] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            deltas.append(float(row[0]))
            rows.append([float(cell) for cell in row[1:]])
    return deltas, names, rows


@dataclass
class FigureSpec:
    """What to draw: input CSVs, the column to plot, labels, output path."""

    inputs: list[str]
    out: str
    y: str = "fval"
    x: str = "t"
    labels: list[str] | None = None
    logy: bool | None = None
    logx: bool = False
    title: str = ""
    ylabel: str = ""

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        raw = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        if "inputs" not in raw or "out" not in raw:
            raise ValueError("spec needs at least 'inputs' and 'out'")
        return cls(**raw)

    def resolved_labels(self) -> list[str]:
        if self.labels is not None:
            if len(self.labels) != len(self.inputs):
                raise ValueError(
                    f"{len(self.labels)} labels for {len(self.inputs)} inputs"
                )
            return list(self.labels)
        return [Path(p).stem for p in self.inputs]

    def wants_logy(self) -> bool:
        if self.logy is not None:
            return self.logy
        return self.y in LOG_Y_DEFAULT


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3, linewidth=0.5)
    return fig, ax


def _save(fig, out) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    if out.suffix.lower() == ".svg":
        # Date metadata would break byte-for-byte reproducibility.
        fig.savefig(out, metadata={"Date": None})
    else:
        fig.savefig(out)
    plt.close(fig)
    return out


def plot_traces(spec: FigureSpec) -> Path:
    """One line per input trace; y over iteration count by default."""
    fig, ax = _new_axes(spec.title)
    for path, label in zip(spec.inputs, spec.resolved_labels()):
        cols = read_trace_csv(path)
        for needed in (spec.x, spec.y):
            if needed not in cols:
                raise MissingColumnError(needed, path, list(cols))
        points = [
            (xv, yv)
            for xv, yv in zip(cols[spec.x], cols[spec.y])
            if xv is not None and yv is not None
        ]
        if spec.wants_logy():
            # log axes cannot show zeros (exactly converged runs); drop them
            points = [(xv, yv) for xv, yv in points if yv > 0]
        ax.plot([p[0] for p in points], [p[1] for p in points], label=label, linewidth=1.4)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.ylabel or spec.y)
    if spec.wants_logy():
        ax.set_yscale("log")
    if spec.logx:
        ax.set_xscale("log")
    ax.legend()
    return _save(fig, spec.out)


def plot_delta_sweep(spec: FigureSpec) -> Path:
    """Final loss vs delta (log x), one series per optimizer.

    ``inf`` cells (diverged runs) are drawn as clipped markers pinned to the
    top of the axis instead of breaking the line.
    """
    if len(spec.inputs) != 1:
        raise ValueError("sweep figures take exactly one matrix CSV input")
    deltas, names, rows = read_matrix_csv(spec.inputs[0])
    finite = [v for row in rows for v in row if math.isfinite(v) and v > 0]
    top = max(finite) * 10.0 if finite else 1.0

    fig, ax = _new_axes(spec.title)
    for j, name in enumerate(names):
        series = [rows[i][j] for i in range(len(deltas))]
        shown = [v if math.isfinite(v) else top for v in series]
        line, = ax.plot(deltas, shown, marker="o", markersize=4, linewidth=1.4, label=name)
        clipped_x = [d for d, v in zip(deltas, series) if not math.isfinite(v)]
        if clipped_x:
            ax.plot(clipped_x, [top] * len(clipped_x), linestyle="none",
                    marker="^", markersize=9, color=line.get_color())
    ax.set_xscale("log")
    if spec.wants_logy():
        positive = [v for row in rows for v in row]
        if any(math.isfinite(v) and v > 0 for v in positive):
            ax.set_yscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel(spec.ylabel or "final loss (clipped markers = diverged)")
    ax.legend()
    return _save(fig, spec.out)
