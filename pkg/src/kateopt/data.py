"""Datasets: the synthetic planted-scaling generator, LIBSVM parsing, fetching.

Feature matrices are kept dense (the benchmark datasets top out at 1000 x 60)
and are never normalized implicitly: the whole point of the scaled problems
is to study behavior under raw feature scaling.
"""

from __future__ import annotations

import hashlib
import logging
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Rng

__all__ = [
    "Dataset",
    "FetchError",
    "IntegrityError",
    "ParseError",
    "ScalingSpec",
    "DATASET_REGISTRY",
    "fetch_datasets",
    "gen_synthetic",
    "load_dataset",
    "parse_libsvm",
    "serialize_libsvm",
]

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed LIBSVM input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class FetchError(RuntimeError):
    """Dataset could not be downloaded and is not cached."""


class IntegrityError(RuntimeError):
    """Cached dataset does not match its recorded content hash."""


@dataclass(frozen=True)
class Dataset:
    """Dense binary-classification dataset with labels in {-1, +1}."""

    x: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"feature matrix must be (n, d) with n >= 1, got {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError("labels must be a length-n vector")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must all be -1 or +1")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ScalingSpec:
    """Strictly positive diagonal feature scaling."""

    v_diag: np.ndarray
    law: str = ""

    def __post_init__(self):
        v = np.asarray(self.v_diag, dtype=np.float64)
        if v.ndim != 1 or not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise ValueError("scaling diagonal must be 1-D with positive finite entries")
        object.__setattr__(self, "v_diag", v)

    @property
    def d(self) -> int:
        return self.v_diag.shape[0]


def gen_synthetic(rng: Rng, n: int, d: int) -> tuple[Dataset, ScalingSpec, np.ndarray]:
    """Gaussian features with a planted scaled predictor.

    Draw order (fixed for reproducibility): the n*d feature entries
    (row-major, each N(0,1)), then the d scaling exponents (log V_kk uniform
    on (-10, 10)), then the d entries of the hidden predictor w* (N(0,1)).
    Labels are sign(x_i . (V w*)) with zero margin mapped to +1.

    Returns the *unscaled* dataset; build the scaled problem by passing the
    returned :class:`ScalingSpec` to the GLM constructor.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    x = rng.normals(n * d).reshape(n, d)
    v_diag = np.exp(rng.uniforms(-10.0, 10.0, d))
    w_star = rng.normals(d)
    margins = x @ (v_diag * w_star)
    y = np.where(margins >= 0.0, 1.0, -1.0)
    dataset = Dataset(x=x, y=y, name=f"synthetic-n{n}-d{d}")
    scaling = ScalingSpec(v_diag=v_diag, law="exp(uniform(-10, 10))")
    return dataset, scaling, w_star


def _map_labels(raw: np.ndarray) -> np.ndarray:
    values = sorted(set(raw.tolist()))
    if set(values) <= {-1.0, 1.0}:
        return raw
    if set(values) <= {0.0, 1.0}:
        return np.where(raw == 0.0, -1.0, 1.0)
    if len(values) == 2:
        lo, hi = values
        return np.where(raw == lo, -1.0, 1.0)
    raise ValueError(
        f"cannot infer binary labels from label values {values} "
        f"({len(values)} distinct)"
    )


def parse_libsvm(text, d_hint: int | None = None, name: str = "") -> Dataset:
    """Parse LIBSVM/svmlight text into a dense :class:`Dataset`.

    Each nonempty line is ``<label> <idx>:<val> ...`` with 1-based strictly
    increasing indices; ``#`` starts a comment. The width is the largest
    observed index (or ``d_hint`` if larger); unlisted features are zero.
    Labels are mapped onto {-1, +1}: {-1,+1} kept, {0,1} maps 0 to -1, any
    other two-valued set maps the smaller value to -1.

    ``text`` may be a string or any iterable of lines.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    max_idx = 0
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(line_no, f"bad label {tokens[0]!r}") from None
        entries: list[tuple[int, float]] = []
        prev_idx = 0
        for tok in tokens[1:]:
            idx_s, _, val_s = tok.partition(":")
            if not val_s:
                raise ParseError(line_no, f"expected idx:val, got {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(line_no, f"bad feature entry {tok!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index {idx} < 1")
            if idx <= prev_idx:
                raise ParseError(
                    line_no, f"feature indices not strictly increasing at {idx}"
                )
            prev_idx = idx
            entries.append((idx, val))
        max_idx = max(max_idx, prev_idx)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise ParseError(0, "no samples in input")
    d = max(max_idx, d_hint or 0)
    if d < 1:
        raise ParseError(0, "no features in input and no d_hint given")
    x = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            x[i, idx - 1] = val
    y = _map_labels(np.asarray(labels, dtype=np.float64))
    return Dataset(x=x, y=y, name=name)


def serialize_libsvm(dataset: Dataset) -> str:
    """Render a dataset back to LIBSVM text.

    Zero-valued features are omitted (the format's sparse convention), so a
    trailing all-zero column survives a round trip only via ``d_hint``.
    Feature values use 17 significant digits and re-read exactly.
    """
    out = []
    for i in range(dataset.n):
        label = "+1" if dataset.y[i] > 0 else "-1"
        entries = [
            f"{j + 1}:{dataset.x[i, j]:.17g}"
            for j in range(dataset.d)
            if dataset.x[i, j] != 0.0
        ]
        out.append(" ".join([label] + entries))
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class DatasetSource:
    url: str
    n: int
    d: int
    # Content hash recorded on first successful fetch (trust-on-first-use);
    # later loads verify against the recorded value in the cache.
    sha256: str | None = None


_LIBSVM_BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary"

DATASET_REGISTRY: dict[str, DatasetSource] = {
    "heart": DatasetSource(url=f"{_LIBSVM_BASE}/heart", n=270, d=13),
    "australian": DatasetSource(url=f"{_LIBSVM_BASE}/australian", n=690, d=14),
    "splice": DatasetSource(url=f"{_LIBSVM_BASE}/splice", n=1000, d=60),
}


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _default_fetch(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=30) as resp:
        return resp.read()


def _verify_cached(name: str, path: Path, hash_path: Path) -> None:
    data = path.read_bytes()
    if hash_path.exists():
        recorded = hash_path.read_text().strip()
        actual = _sha256(data)
        if actual != recorded:
            raise IntegrityError(
                f"{name}: cached file hash {actual} does not match recorded {recorded}; "
                f"delete {path} and {hash_path} to refetch"
            )
    pinned = DATASET_REGISTRY[name].sha256
    if pinned is not None and _sha256(data) != pinned:
        raise IntegrityError(f"{name}: cached file does not match pinned hash")


def fetch_datasets(
    cache_dir,
    names=("heart", "australian", "splice"),
    offline: bool = False,
    fetch_fn=None,
) -> dict[str, Path]:
    """Ensure the benchmark datasets are cached; return name -> file path.

    Idempotent: warm cache entries are hash-verified and never refetched.
    With ``offline=True`` (or when the download fails) a cold cache raises
    :class:`FetchError` with instructions rather than partially succeeding.
    """
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    fetch = fetch_fn or _default_fetch
    paths: dict[str, Path] = {}
    for name in names:
        if name not in DATASET_REGISTRY:
            raise ValueError(f"unknown dataset {name!r}; known: {sorted(DATASET_REGISTRY)}")
        source = DATASET_REGISTRY[name]
        path = cache / f"{name}.libsvm"
        hash_path = cache / f"{name}.sha256"
        if path.exists():
            _verify_cached(name, path, hash_path)
            paths[name] = path
            continue
        if offline:
            raise FetchError(
                f"{name} is not cached at {path} and offline mode is on; "
                f"run `opt fetch` with network access first"
            )
        try:
            data = fetch(source.url)
        except Exception as exc:
            raise FetchError(
                f"could not download {name} from {source.url} ({exc}); "
                f"place the file at {path} manually or retry with network access"
            ) from exc
        parsed = parse_libsvm(data.decode("utf-8"), name=name)
        if (parsed.n, parsed.d) != (source.n, source.d):
            raise IntegrityError(
                f"{name}: downloaded file has shape ({parsed.n}, {parsed.d}), "
                f"expected ({source.n}, {source.d})"
            )
        path.write_bytes(data)
        hash_path.write_text(_sha256(data) + "\n")
        log.info("fetched %s (%d bytes) -> %s", name, len(data), path)
        paths[name] = path
    return paths


def load_dataset(name: str, cache_dir) -> Dataset:
    """Parse a cached benchmark dataset (no network)."""
    paths = fetch_datasets(cache_dir, names=(name,), offline=True)
    return parse_libsvm(paths[name].read_text(), name=name)
