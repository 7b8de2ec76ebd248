"""Offline rendering of optimizer benchmark CSVs (traces and delta sweeps)."""

from .render import (
    FigureSpec,
    MissingColumnError,
    plot_delta_sweep,
    plot_traces,
    read_matrix_csv,
    read_trace_csv,
)

__all__ = [
    "FigureSpec",
    "MissingColumnError",
    "plot_delta_sweep",
    "plot_traces",
    "read_matrix_csv",
    "read_trace_csv",
]

__version__ = "0.1.0"
