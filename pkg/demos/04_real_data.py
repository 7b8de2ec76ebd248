"""Benchmark on the classic LIBSVM binary-classification datasets.

Needs the datasets cached locally (`opt fetch` once with network access).
For each optimizer the step-size scale beta is grid-searched, then the best
configuration is rerun and the mean final loss over 5 trials reported.
"""

import sys
from pathlib import Path

from kateopt.data import FetchError, fetch_datasets
from kateopt.harness import DEFAULT_BETA_GRID, RunConfig, cmd_tune

CACHE = Path.home() / ".cache" / "kateopt"

try:
    fetch_datasets(CACHE, names=("heart",), offline=True)
except FetchError as exc:
    sys.exit(f"datasets not cached: {exc}")

for optimizer in ("kate", "adagrad", "adagradnorm", "sgd_decay", "sgd_constant"):
    config = RunConfig.from_dict(dict(
        problem={"kind": "libsvm", "name": "heart"},
        optimizer=optimizer,
        eta="grad_init" if optimizer == "kate" else 0.0,
        delta=1e-8,
        T=5000,
        batch=10,
        seed=0,
        log_every=5000,
        trials=5,
    ))
    report = cmd_tune(config, beta_grid=DEFAULT_BETA_GRID,
                      out_dir=f"/tmp/heart-tune-{optimizer}", cache_dir=CACHE)
    best = report["best_beta"]
    score = min(entry["score"] for entry in report["scores"])
    print(f"{optimizer:>13}: best beta = {best!s:>6}  mean final loss = {score:.4f}")
