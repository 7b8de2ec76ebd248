import os
from pathlib import Path

import pytest

# Benchmark datasets live in a local cache; tests that need the real files
# skip when the cache is cold (no network is assumed during test runs).
CACHE_DIR = Path(os.environ.get("KATEOPT_CACHE", str(Path.home() / ".cache" / "kateopt")))


def dataset_cached(name: str) -> bool:
    return (CACHE_DIR / f"{name}.libsvm").exists()


def require_dataset(name: str):
    if not dataset_cached(name):
        pytest.skip(f"{name} not cached at {CACHE_DIR}; run `opt fetch` with network access")


@pytest.fixture
def cache_dir() -> Path:
    return CACHE_DIR
