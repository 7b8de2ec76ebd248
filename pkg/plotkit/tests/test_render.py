import json
from pathlib import Path

import pytest

from plotkit.cli import main
from plotkit.render import (
    FigureSpec,
    MissingColumnError,
    plot_delta_sweep,
    plot_traces,
    read_matrix_csv,
    read_trace_csv,
)

DATA = Path(__file__).parent / "data"
OPTIMIZERS = ["kate", "adagrad", "adagradnorm", "sgd_decay", "sgd_constant"]


def test_read_trace_csv_columns():
    cols = read_trace_csv(DATA / "kate.csv")
    assert cols["t"][0] == 0.0
    assert cols["nu_min"][0] is None  # no step taken yet at t = 0
    assert all(v is not None for v in cols["fval"])


def test_read_matrix_csv_inf_cells():
    deltas, names, rows = read_matrix_csv(DATA / "sweep.csv")
    assert names == OPTIMIZERS
    assert deltas[0] == 1e-8
    assert any(v == float("inf") for row in rows for v in row)


def test_invariance_pair_renders_coincident_curves(tmp_path):
    spec = FigureSpec(
        inputs=[str(DATA / "trace_unscaled.csv"), str(DATA / "trace_scaled.csv")],
        labels=["unscaled", "scaled"],
        out=str(tmp_path / "invariance.svg"),
        title="loss on raw vs rescaled features",
    )
    out = plot_traces(spec)
    assert out.exists() and out.stat().st_size > 0
    # the two loss curves agree to rounding, so the data they draw must too
    a = read_trace_csv(DATA / "trace_unscaled.csv")["fval"]
    b = read_trace_csv(DATA / "trace_scaled.csv")["fval"]
    assert max(abs(x - y) / (1 + abs(x)) for x, y in zip(a, b)) < 1e-9


def test_five_optimizer_trace_figure(tmp_path):
    spec = FigureSpec(
        inputs=[str(DATA / f"{name}.csv") for name in OPTIMIZERS],
        labels=OPTIMIZERS,
        out=str(tmp_path / "traces.svg"),
    )
    out = plot_traces(spec)
    assert out.exists() and out.stat().st_size > 0


def test_delta_sweep_with_inf_cells(tmp_path):
    spec = FigureSpec(inputs=[str(DATA / "sweep.csv")], out=str(tmp_path / "sweep.svg"))
    out = plot_delta_sweep(spec)
    assert out.exists() and out.stat().st_size > 0


def test_rendering_is_deterministic(tmp_path):
    def render(path):
        plot_traces(FigureSpec(inputs=[str(DATA / "kate.csv")], out=str(path)))
        return path.read_bytes()

    assert render(tmp_path / "a.svg") == render(tmp_path / "b.svg")

    def render_sweep(path):
        plot_delta_sweep(FigureSpec(inputs=[str(DATA / "sweep.csv")], out=str(path)))
        return path.read_bytes()

    assert render_sweep(tmp_path / "c.svg") == render_sweep(tmp_path / "d.svg")


def test_png_output_deterministic(tmp_path):
    def render(path):
        spec = FigureSpec(inputs=[str(DATA / "kate.csv")], out=str(path))
        return plot_traces(spec).read_bytes()

    first = render(tmp_path / "kate.png")
    assert len(first) > 0
    assert first == render(tmp_path / "kate2.png")


def test_missing_column_error_names_column(tmp_path):
    spec = FigureSpec(inputs=[str(DATA / "kate.csv")], y="loss",
                      out=str(tmp_path / "x.svg"))
    with pytest.raises(MissingColumnError, match="'loss'"):
        plot_traces(spec)


def test_accuracy_column_plots_linear(tmp_path):
    spec = FigureSpec(inputs=[str(DATA / "kate.csv")], y="accuracy",
                      out=str(tmp_path / "acc.svg"))
    assert not spec.wants_logy()
    assert plot_traces(spec).exists()


def test_single_cell_matrix(tmp_path):
    matrix = tmp_path / "tiny.csv"
    matrix.write_text("delta,kate\n1e-4,0.25\n")
    spec = FigureSpec(inputs=[str(matrix)], out=str(tmp_path / "tiny.svg"))
    assert plot_delta_sweep(spec).exists()


def test_label_count_mismatch(tmp_path):
    spec = FigureSpec(inputs=[str(DATA / "kate.csv")], labels=["a", "b"],
                      out=str(tmp_path / "x.svg"))
    with pytest.raises(ValueError, match="labels"):
        plot_traces(spec)


def test_cli_roundtrip(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "inputs": [str(DATA / name) for name in ("trace_unscaled.csv", "trace_scaled.csv")],
        "labels": ["unscaled", "scaled"],
        "out": str(tmp_path / "fig.svg"),
    }))
    assert main(["traces", "--spec", str(spec_path)]) == 0
    assert (tmp_path / "fig.svg").exists()

    sweep_spec = tmp_path / "sweep.json"
    sweep_spec.write_text(json.dumps({
        "inputs": [str(DATA / "sweep.csv")],
        "out": str(tmp_path / "sweep.svg"),
    }))
    assert main(["sweep", "--spec", str(sweep_spec)]) == 0

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"inputs": ["nope.csv"]}))
    assert main(["traces", "--spec", str(bad)]) == 1


def test_spec_rejects_unknown_fields(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "inputs": ["a.csv"], "out": "a.svg", "colour": "red",
    }))
    with pytest.raises(ValueError, match="unknown spec fields"):
        FigureSpec.from_json(spec_path)
