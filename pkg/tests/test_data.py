import numpy as np
import pytest

from kateopt.core import Rng
from kateopt.data import (
    DATASET_REGISTRY,
    Dataset,
    FetchError,
    IntegrityError,
    ParseError,
    fetch_datasets,
    gen_synthetic,
    parse_libsvm,
    serialize_libsvm,
)
from kateopt.problems import GlmProblem, LossKind


def test_gen_synthetic_benchmark_configuration():
    ds, scaling, w_star = gen_synthetic(Rng(0), 1000, 20)
    assert ds.x.shape == (1000, 20)
    assert ds.y.shape == (1000,)
    assert w_star.shape == (20,)
    assert set(np.unique(ds.y)) <= {-1.0, 1.0}
    v = scaling.v_diag
    assert np.all(v > np.exp(-10)) and np.all(v < np.exp(10))


def test_gen_synthetic_deterministic():
    a = gen_synthetic(Rng(77), 50, 6)
    b = gen_synthetic(Rng(77), 50, 6)
    assert np.array_equal(a[0].x, b[0].x)
    assert np.array_equal(a[0].y, b[0].y)
    assert np.array_equal(a[1].v_diag, b[1].v_diag)
    assert np.array_equal(a[2], b[2])


def test_gen_synthetic_zero_margin_labels_positive():
    # The sign convention puts a zero margin in the +1 class; synthesize the
    # margin = 0 case directly through the label rule on a tiny dataset.
    ds, scaling, w_star = gen_synthetic(Rng(3), 10, 3)
    margins = ds.x @ (scaling.v_diag * w_star)
    assert np.array_equal(ds.y, np.where(margins >= 0, 1.0, -1.0))


def test_planted_scaled_problem_has_perfect_accuracy():
    ds, scaling, w_star = gen_synthetic(Rng(5), 300, 10)
    assert GlmProblem(ds, LossKind.LOGISTIC, scaling=scaling).accuracy(w_star) == 1.0


def test_scaling_composition_objective():
    ds, scaling, _ = gen_synthetic(Rng(6), 100, 5)
    v = scaling.v_diag
    scaled = GlmProblem(ds, LossKind.LOGISTIC, scaling=scaling)
    unscaled = GlmProblem(ds, LossKind.LOGISTIC)
    rng = Rng(7)
    for _ in range(10):
        w = rng.normals(5) / v
        assert abs(scaled.objective(w) - unscaled.objective(v * w)) <= 1e-12


def test_parse_basic_line():
    ds = parse_libsvm("+1 1:0.5 3:-2\n")
    assert ds.n == 1 and ds.d == 3
    assert np.array_equal(ds.x, [[0.5, 0.0, -2.0]])
    assert ds.y.tolist() == [1.0]


def test_parse_zero_one_labels():
    ds = parse_libsvm("0 1:1\n1 1:2\n")
    assert ds.y.tolist() == [-1.0, 1.0]


def test_parse_other_two_valued_labels():
    ds = parse_libsvm("2 1:1\n4 1:2\n")
    assert ds.y.tolist() == [-1.0, 1.0]


def test_parse_comments_blank_lines_and_hint():
    text = "# header comment\n+1 1:1.5  # trailing comment\n\n-1 2:2.5\n"
    ds = parse_libsvm(text, d_hint=5)
    assert ds.n == 2 and ds.d == 5
    assert ds.x[0, 0] == 1.5 and ds.x[1, 1] == 2.5


def test_parse_label_only_lines():
    ds = parse_libsvm("+1\n-1 1:3\n")
    assert ds.n == 2 and ds.d == 1
    assert ds.x[0, 0] == 0.0


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_libsvm("+1 1:1\n+1 1:abc\n")
    with pytest.raises(ParseError, match="not strictly increasing"):
        parse_libsvm("+1 2:1 2:2\n")
    with pytest.raises(ParseError, match="index 0 < 1"):
        parse_libsvm("+1 0:1\n")
    with pytest.raises(ParseError, match="bad label"):
        parse_libsvm("one 1:1\n")
    with pytest.raises(ParseError):
        parse_libsvm("")


def test_parse_rejects_more_than_two_labels():
    with pytest.raises(ValueError, match="3 distinct"):
        parse_libsvm("1 1:1\n2 1:1\n3 1:1\n")


def random_sparse_libsvm(rng: Rng, max_n=12, max_d=9) -> str:
    n = 1 + int(rng.integers(max_n, 1)[0])
    d = 1 + int(rng.integers(max_d, 1)[0])
    lines = []
    for i in range(n):
        label = "+1" if rng.uniform(0, 1) < 0.5 else "-1"
        entries = []
        for j in range(1, d + 1):
            # force column d on the first row so the width is self-describing
            if (i == 0 and j == d) or rng.uniform(0, 1) < 0.4:
                value = rng.standard_normal() or 1.0
                entries.append(f"{j}:{value:.17g}")
        lines.append(" ".join([label] + entries))
    return "\n".join(lines) + "\n"


def test_roundtrip_random_files():
    rng = Rng(2718)
    for _ in range(60):
        text = random_sparse_libsvm(rng)
        first = parse_libsvm(text)
        again = parse_libsvm(serialize_libsvm(first))
        assert first.n == again.n and first.d == again.d
        assert np.array_equal(first.x, again.x)
        assert np.array_equal(first.y, again.y)


def test_roundtrip_explicit_zero_needs_hint():
    # serialize drops explicit zeros; a trailing all-zero column survives
    # only via d_hint
    ds = parse_libsvm("+1 1:1 3:0\n-1 1:2\n")
    assert ds.d == 3
    again = parse_libsvm(serialize_libsvm(ds))
    assert again.d == 1
    hinted = parse_libsvm(serialize_libsvm(ds), d_hint=3)
    assert hinted.d == 3 and np.array_equal(hinted.x, ds.x)


HEART_LIKE = "\n".join(
    f"{'+1' if i % 2 else '-1'} 1:{i / 7:.3f} 2:{(i % 5) - 2}" for i in range(20)
) + "\n"


def test_fetch_downloads_once_and_verifies(tmp_path):
    calls = []

    def fake_fetch(url):
        calls.append(url)
        rng = Rng(99)
        ds, _, _ = gen_synthetic(rng, DATASET_REGISTRY["heart"].n, DATASET_REGISTRY["heart"].d)
        return serialize_libsvm(ds).encode()

    paths = fetch_datasets(tmp_path, names=("heart",), fetch_fn=fake_fetch)
    assert paths["heart"].exists()
    assert (tmp_path / "heart.sha256").exists()
    assert len(calls) == 1

    # Warm cache: second call must not touch the network.
    fetch_datasets(tmp_path, names=("heart",), fetch_fn=fake_fetch)
    assert len(calls) == 1


def test_fetch_offline_cold_cache_errors(tmp_path):
    with pytest.raises(FetchError, match="opt fetch"):
        fetch_datasets(tmp_path, names=("heart",), offline=True)


def test_fetch_network_failure_is_actionable(tmp_path):
    def broken(url):
        raise OSError("no route to host")

    with pytest.raises(FetchError, match="no route to host"):
        fetch_datasets(tmp_path, names=("heart",), fetch_fn=broken)


def test_fetch_detects_tampering(tmp_path):
    def fake_fetch(url):
        ds, _, _ = gen_synthetic(Rng(1), DATASET_REGISTRY["heart"].n, DATASET_REGISTRY["heart"].d)
        return serialize_libsvm(ds).encode()

    paths = fetch_datasets(tmp_path, names=("heart",), fetch_fn=fake_fetch)
    paths["heart"].write_text(HEART_LIKE)
    with pytest.raises(IntegrityError, match="does not match recorded"):
        fetch_datasets(tmp_path, names=("heart",), offline=True)


def test_fetch_rejects_wrong_shape(tmp_path):
    def wrong_shape(url):
        return HEART_LIKE.encode()

    with pytest.raises(IntegrityError, match="expected \\(270, 13\\)"):
        fetch_datasets(tmp_path, names=("heart",), fetch_fn=wrong_shape)


def test_dataset_validation():
    with pytest.raises(ValueError, match="-1 or \\+1"):
        Dataset(x=[[1.0]], y=[2.0])
    with pytest.raises(ValueError, match="length-n"):
        Dataset(x=[[1.0], [2.0]], y=[1.0])
