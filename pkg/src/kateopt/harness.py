"""Experiment harness: run configs, sweep/tune/invariance commands, CSV output.

The trace CSV contract (consumed by the plotting tools) is fixed:

    t,fval,accuracy,grad_norm_sq,gnorm_weighted,nu_min,nu_max,diverged

Reals are printed with 17 significant digits, absent metrics as empty
fields, the diverged flag as 0/1. Identical configs and seeds produce
byte-identical files.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Rng
from .data import Dataset, ScalingSpec, fetch_datasets, gen_synthetic, load_dataset
from .optim import (
    OPTIMIZER_NAMES,
    HyperParams,
    RunResult,
    TraceRow,
    grad_init_eta,
    run,
)
from .problems import GlmProblem, LossKind, QuadraticProblem, RosenbrockProblem
from .verify import check_invariance, invariance_tolerance

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "DEFAULT_BETA_GRID",
    "DEFAULT_CHECKPOINTS",
    "DEFAULT_DELTA_GRID",
    "ProblemBundle",
    "RunConfig",
    "build_problem",
    "cmd_fetch",
    "cmd_invariance",
    "cmd_run",
    "cmd_sweep_delta",
    "cmd_tune",
    "mean_rows",
    "read_trace_csv",
    "trace_to_csv",
]

CSV_HEADER = "t,fval,accuracy,grad_norm_sq,gnorm_weighted,nu_min,nu_max,diverged"

DEFAULT_DELTA_GRID = (1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6, 1e8)
DEFAULT_BETA_GRID = (1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0)
DEFAULT_CHECKPOINTS = (10_000, 50_000, 100_000)


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    """One experiment: a problem descriptor plus optimizer settings.

    ``beta`` may be the string ``"paper"`` (beta = f(w0) - f(w*), available
    for synthetic problems with a planted predictor) and ``eta`` the string
    ``"grad_init"`` (eta = 1/(grad f(w0))^2, computed per problem).
    """

    problem: dict = field(default_factory=lambda: {"kind": "synthetic"})
    optimizer: str = "kate"
    beta: float | str = 1.0
    eta: float | list | str = "grad_init"
    delta: float = 0.0
    T: int = 1000
    batch: int | None = 10
    seed: int = 0
    log_every: int = 100
    trials: int = 1
    w0: list | None = None

    FIELDS = (
        "problem", "optimizer", "beta", "eta", "delta", "T", "batch",
        "seed", "log_every", "trials", "w0",
    )

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - set(cls.FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    def replace(self, **updates) -> "RunConfig":
        merged = self.to_dict()
        merged.update(updates)
        return RunConfig.from_dict(merged)

    def validate(self) -> None:
        if not isinstance(self.problem, dict) or "kind" not in self.problem:
            raise ConfigError("problem must be an object with a 'kind' field")
        if self.optimizer not in OPTIMIZER_NAMES:
            raise ConfigError(
                f"unknown optimizer {self.optimizer!r}; "
                f"choose from {', '.join(OPTIMIZER_NAMES)}"
            )
        if isinstance(self.beta, str):
            if self.beta != "paper":
                raise ConfigError(f"beta must be a positive number or 'paper', got {self.beta!r}")
        elif not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if isinstance(self.eta, str):
            if self.eta != "grad_init":
                raise ConfigError(f"eta must be a number, list, or 'grad_init', got {self.eta!r}")
        else:
            eta = np.asarray(self.eta, dtype=np.float64)
            if np.any(eta < 0) or not np.all(np.isfinite(eta)):
                raise ConfigError("eta entries must be nonnegative and finite")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise ConfigError(f"delta must be nonnegative, got {self.delta}")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.batch is not None and self.batch < 1:
            raise ConfigError("batch must be >= 1 (or null for full gradients)")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")


@dataclass
class ProblemBundle:
    """A built problem plus everything needed to resolve 'paper' beta."""

    problem: object
    name: str
    dataset: Dataset | None = None
    scaling: ScalingSpec | None = None
    planted_predictor: np.ndarray | None = None


def build_problem(config: RunConfig, cache_dir=None) -> ProblemBundle:
    desc = dict(config.problem)
    kind = desc.pop("kind")
    if kind == "synthetic":
        n = int(desc.pop("n", 1000))
        d = int(desc.pop("d", 20))
        data_seed = int(desc.pop("seed", config.seed))
        scaled = bool(desc.pop("scaled", True))
        _reject_extras(kind, desc)
        dataset, scaling, w_star = gen_synthetic(Rng(data_seed), n, d)
        if scaled:
            problem = GlmProblem(dataset, LossKind.LOGISTIC, scaling=scaling)
            planted = w_star
        else:
            problem = GlmProblem(dataset, LossKind.LOGISTIC)
            planted = scaling.v_diag * w_star
        return ProblemBundle(
            problem=problem,
            name=f"synthetic(n={n},d={d},seed={data_seed},scaled={scaled})",
            dataset=dataset,
            scaling=scaling,
            planted_predictor=planted,
        )
    if kind == "libsvm":
        name = desc.pop("name", None)
        _reject_extras(kind, desc)
        if not name:
            raise ConfigError("libsvm problem needs a 'name' field")
        if cache_dir is None:
            raise ConfigError("libsvm problems need a dataset cache directory")
        dataset = load_dataset(name, cache_dir)
        return ProblemBundle(
            problem=GlmProblem(dataset, LossKind.LOGISTIC),
            name=name,
            dataset=dataset,
        )
    if kind == "quadratic":
        diag = desc.pop("diag", None)
        a = desc.pop("a", None)
        b = desc.pop("b", None)
        _reject_extras(kind, desc)
        if (diag is None) == (a is None):
            raise ConfigError("quadratic problem needs exactly one of 'diag' or 'a'")
        problem = (
            QuadraticProblem.diagonal(diag, b) if diag is not None else QuadraticProblem(a, b)
        )
        return ProblemBundle(problem=problem, name="quadratic")
    if kind == "rosenbrock":
        d = int(desc.pop("d", 2))
        _reject_extras(kind, desc)
        return ProblemBundle(problem=RosenbrockProblem(d), name=f"rosenbrock(d={d})")
    raise ConfigError(f"unknown problem kind {kind!r}")


def _reject_extras(kind: str, leftover: dict) -> None:
    if leftover:
        raise ConfigError(f"unknown {kind} problem fields: {sorted(leftover)}")


def resolve_hyperparams(config: RunConfig, bundle: ProblemBundle) -> HyperParams:
    w0 = np.zeros(bundle.problem.d) if config.w0 is None else np.asarray(config.w0, float)
    if isinstance(config.beta, str):  # "paper": beta = f(w0) - f(w*)
        if bundle.planted_predictor is None:
            raise ConfigError("beta='paper' needs a synthetic problem with a planted predictor")
        beta = bundle.problem.objective(w0) - bundle.problem.objective(bundle.planted_predictor)
        if beta <= 0:
            raise ConfigError(f"beta = f(w0) - f(w*) = {beta} is not positive")
    else:
        beta = float(config.beta)
    if isinstance(config.eta, str):  # "grad_init"
        eta = grad_init_eta(bundle.problem, w0)
    elif isinstance(config.eta, list):
        eta = np.asarray(config.eta, dtype=np.float64)
    else:
        eta = float(config.eta)
    return HyperParams(beta=beta, eta=eta, delta=float(config.delta))


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.17g}"


def trace_to_csv(rows: list[TraceRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.t),
                    _fmt(r.fval),
                    _fmt(r.accuracy),
                    _fmt(r.grad_norm_sq),
                    _fmt(r.gnorm_weighted),
                    _fmt(r.nu_min),
                    _fmt(r.nu_max),
                    "1" if r.diverged else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def read_trace_csv(text: str) -> dict[str, list]:
    """Parse a trace CSV back into columns (None for empty cells)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header != CSV_HEADER.split(","):
        raise ValueError(f"unexpected trace header {lines[0]!r}")
    cols: dict[str, list] = {name: [] for name in header}
    for ln in lines[1:]:
        cells = ln.split(",")
        for name, cell in zip(header, cells):
            cols[name].append(None if cell == "" else float(cell))
    return cols


def mean_rows(row_lists: list[list[TraceRow]]) -> list[TraceRow]:
    """Row-wise arithmetic mean over trials, aligned on common iteration counts.

    Trials that terminated early contribute only up to their last row; the
    mean covers iteration counts present in every trial. The diverged
    column averages to the fraction of diverged trials (any nonzero mean
    marks the row diverged).
    """
    common = set(row.t for row in row_lists[0])
    for rows in row_lists[1:]:
        common &= set(row.t for row in rows)
    out = []
    for t in sorted(common):
        group = [next(r for r in rows if r.t == t) for rows in row_lists]

        def mean_of(attr):
            values = [getattr(r, attr) for r in group]
            if any(v is None for v in values):
                return None
            return float(np.mean(values))

        frac_diverged = float(np.mean([1.0 if r.diverged else 0.0 for r in group]))
        out.append(
            TraceRow(
                t=t,
                fval=mean_of("fval"),
                accuracy=mean_of("accuracy"),
                grad_norm_sq=mean_of("grad_norm_sq"),
                gnorm_weighted=mean_of("gnorm_weighted"),
                nu_min=mean_of("nu_min"),
                nu_max=mean_of("nu_max"),
                diverged=frac_diverged > 0,
            )
        )
    return out


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _trial_summary(result: RunResult) -> dict:
    last = result.rows[-1]
    return {
        "final_fval": last.fval,
        "min_fval": min(r.fval for r in result.rows),
        "final_accuracy": last.accuracy,
        "diverged": result.diverged,
        "steps_taken": result.steps_taken,
    }


def cmd_run(config: RunConfig, out_dir, cache_dir=None, checkpoints=()) -> dict:
    """Execute ``config.trials`` runs (seeds seed, seed+1, ...), write traces.

    Emits ``trial_<i>.csv`` per trial, ``mean.csv`` (row-wise mean over
    trials), and ``summary.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = build_problem(config, cache_dir)
    hp = resolve_hyperparams(config, bundle)
    started = time.perf_counter()
    row_lists = []
    trial_infos = []
    for i in range(config.trials):
        result = run(
            bundle.problem,
            config.optimizer,
            hp,
            T=config.T,
            batch=config.batch,
            seed=config.seed + i,
            log_every=config.log_every,
            w0=config.w0,
            checkpoints=checkpoints,
        )
        (out / f"trial_{i:02d}.csv").write_text(trace_to_csv(result.rows))
        row_lists.append(result.rows)
        trial_infos.append(_trial_summary(result))
    mean = mean_rows(row_lists)
    (out / "mean.csv").write_text(trace_to_csv(mean))
    summary = {
        "config": config.to_dict(),
        "problem": bundle.name,
        "beta_resolved": hp.beta,
        "trials": trial_infos,
        "mean_final_fval": float(np.mean([t["final_fval"] for t in trial_infos])),
        "any_diverged": any(t["diverged"] for t in trial_infos),
        "wall_time_s": time.perf_counter() - started,
    }
    write_json(out / "summary.json", summary)
    return summary


def _sweep_cell(args) -> dict:
    """One (optimizer, delta) cell; module-level so worker pools can pickle it."""
    config_dict, cache_dir, checkpoints, T = args
    config = RunConfig.from_dict(config_dict)
    bundle = build_problem(config, cache_dir)
    hp = resolve_hyperparams(config, bundle)
    result = run(
        bundle.problem,
        config.optimizer,
        hp,
        T=T,
        batch=config.batch,
        seed=config.seed,
        log_every=config.log_every,
        w0=config.w0,
        checkpoints=checkpoints,
    )
    values = {"final": float("inf") if result.diverged else result.rows[-1].fval}
    for cp in checkpoints:
        row = result.row_at(cp)
        if row is None or row.diverged:
            values[f"t{cp}"] = float("inf")
        else:
            values[f"t{cp}"] = row.fval
    return values


def _matrix_csv(deltas, optimizers, cells, key) -> str:
    lines = ["delta," + ",".join(optimizers)]
    for i, delta in enumerate(deltas):
        row = [f"{delta:.17g}"]
        for j in range(len(optimizers)):
            row.append(_fmt(cells[i][j][key]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_sweep_delta(
    config: RunConfig,
    deltas=DEFAULT_DELTA_GRID,
    optimizers=OPTIMIZER_NAMES,
    out_dir=".",
    cache_dir=None,
    checkpoints=DEFAULT_CHECKPOINTS,
    workers: int = 1,
) -> dict:
    """Final loss for every (delta, optimizer) cell as a matrix CSV.

    Writes ``sweep.csv`` (loss after T steps) plus ``sweep_t<c>.csv`` for
    every checkpoint c <= T. Diverged cells serialize as ``inf``. Cells are
    independent; with ``workers > 1`` they execute in a process pool, with
    output order fixed by the (delta, optimizer) grid either way.
    """
    if not deltas:
        raise ConfigError("delta grid must be nonempty")
    bad = [o for o in optimizers if o not in OPTIMIZER_NAMES]
    if bad:
        raise ConfigError(f"unknown optimizers in sweep: {bad}")
    live_checkpoints = tuple(int(c) for c in checkpoints if c <= config.T)
    jobs = []
    for delta in deltas:
        for opt in optimizers:
            cell_cfg = config.replace(optimizer=opt, delta=delta)
            jobs.append((cell_cfg.to_dict(), cache_dir, live_checkpoints, config.T))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_sweep_cell, jobs))
    else:
        flat = [_sweep_cell(job) for job in jobs]
    cells = [flat[i * len(optimizers):(i + 1) * len(optimizers)] for i in range(len(deltas))]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"sweep.csv": _matrix_csv(deltas, list(optimizers), cells, "final")}
    for cp in live_checkpoints:
        files[f"sweep_t{cp}.csv"] = _matrix_csv(deltas, list(optimizers), cells, f"t{cp}")
    for fname, text in files.items():
        (out / fname).write_text(text)
    return {
        "deltas": list(deltas),
        "optimizers": list(optimizers),
        "checkpoints": list(live_checkpoints),
        "files": sorted(files),
    }


def cmd_tune(
    config: RunConfig,
    beta_grid=DEFAULT_BETA_GRID,
    out_dir=".",
    cache_dir=None,
) -> dict:
    """Grid-search beta, scoring by mean final loss over ``trials`` seeds.

    Diverged trials score +inf. Ties break toward the smaller beta; if every
    grid point diverges, ``best_beta`` is null (still a completed run).
    """
    if not beta_grid:
        raise ConfigError("beta grid must be nonempty")
    bundle = build_problem(config, cache_dir)
    scores = []
    for beta in sorted(beta_grid):
        hp = resolve_hyperparams(config.replace(beta=beta), bundle)
        finals = []
        for i in range(config.trials):
            result = run(
                bundle.problem,
                config.optimizer,
                hp,
                T=config.T,
                batch=config.batch,
                seed=config.seed + i,
                log_every=config.log_every,
                w0=config.w0,
            )
            finals.append(float("inf") if result.diverged else result.rows[-1].fval)
        score = float(np.mean(finals)) if all(np.isfinite(finals)) else float("inf")
        scores.append({"beta": beta, "score": score, "finals": finals})
    best = None
    best_score = float("inf")
    for entry in scores:  # ascending betas: strict < keeps the smallest tie
        if entry["score"] < best_score:
            best = entry["beta"]
            best_score = entry["score"]
    report = {
        "optimizer": config.optimizer,
        "problem": bundle.name,
        "grid": sorted(beta_grid),
        "scores": scores,
        "best_beta": best,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "tune.json", report)
    return report


def cmd_invariance(config: RunConfig, out_dir=".", cache_dir=None) -> dict:
    """Invariance check plus paired trace CSVs for plotting.

    The problem must be synthetic (the scaling matrix comes from the
    generator). With the kate optimizer and an exact eta mode the report
    carries a pass/fail verdict at the horizon-dependent tolerance; other
    optimizers are measured without a verdict.
    """
    if config.problem.get("kind") != "synthetic":
        raise ConfigError("invariance checks need a synthetic problem descriptor")
    if config.delta != 0:
        raise ConfigError("invariance checks require delta = 0")
    bundle = build_problem(config.replace(problem={**config.problem, "scaled": True}), cache_dir)
    hp_beta = resolve_hyperparams(config.replace(eta=0.0), bundle).beta
    report, rows_u, rows_s = check_invariance(
        bundle.dataset,
        bundle.scaling,
        HyperParams(beta=hp_beta, eta=0.0, delta=0.0),
        T=config.T,
        batch=config.batch,
        seed=config.seed,
        eta=config.eta,
        optimizer=config.optimizer,
        collect_traces=True,
    )
    tolerance = invariance_tolerance(config.T)
    passed = None
    if report.exact:
        passed = (
            report.max_rel_f_dev <= tolerance
            and report.max_rel_w_dev <= tolerance
            and report.max_rel_gnorm_dev <= tolerance
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace_unscaled.csv").write_text(trace_to_csv(rows_u))
    (out / "trace_scaled.csv").write_text(trace_to_csv(rows_s))
    payload = report.to_dict()
    payload.update({"tolerance": tolerance, "passed": passed})
    write_json(out / "invariance.json", payload)
    return payload


def cmd_fetch(cache_dir, names=("heart", "australian", "splice")) -> dict:
    paths = fetch_datasets(cache_dir, names=names)
    return {name: str(path) for name, path in paths.items()}
