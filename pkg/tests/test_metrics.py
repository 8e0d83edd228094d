import numpy as np
import pytest

from ega.data import gen_synthetic
from ega.errors import ConfigError
from ega.ivf import SearchResult
from ega.metrics import (
    HIST_BINS,
    MetricsReport,
    anns_recall,
    distance_histograms,
    evaluate_grid,
    label_precision,
    worst_case_lp,
)
from micro_cases import MICRO_CASES, _result


@pytest.mark.parametrize("name,case", MICRO_CASES)
def test_micro_case(name, case):
    got, want = case()
    if isinstance(want, tuple):
        value, key = got
        assert value == pytest.approx(want[0], abs=1e-12)
        assert key == want[1]
    else:
        assert got == pytest.approx(want, abs=1e-12)


def test_label_precision_validation():
    res = _result([[0, 1]])
    with pytest.raises(ConfigError):
        label_precision(res, [0], [0, 0], k=0)
    with pytest.raises(ConfigError):
        label_precision(res, [0], [0, 0], k=3)
    empty = SearchResult(np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2)))
    with pytest.raises(ConfigError):
        label_precision(empty, [], [0], k=1)


def test_anns_recall_validation():
    with pytest.raises(ConfigError, match="mismatch"):
        anns_recall(_result([[0], [1]]), _result([[0]]), k=1)
    with pytest.raises(ConfigError):
        anns_recall(_result([[0]]), _result([[0]]), k=2)


def test_worst_case_requires_entries():
    with pytest.raises(ConfigError):
        worst_case_lp({})
    assert worst_case_lp({"only": 0.25}) == (0.25, "only")


def test_histograms_self_queries_concentrate_at_zero():
    data = gen_synthetic(d=8, n_classes=2, n_per_class=10, sigma=0.2, seed=0)
    pair = distance_histograms(data, data, k=1, seed=0)
    assert pair.bin_edges.shape == (HIST_BINS + 1,)
    # every query finds itself at distance 0: all mass in the first bin
    assert pair.topk_counts[0] == 20
    assert pair.topk_counts[1:].sum() == 0
    assert pair.topk_mean == 0.0
    assert pair.background_counts.sum() == 10 * 20
    assert pair.background_mean > 0
    assert pair.separation > 0


def test_histograms_tight_clusters_separate():
    data = gen_synthetic(d=16, n_classes=4, n_per_class=30, sigma=0.05, seed=1)
    queries = gen_synthetic(d=16, n_classes=4, n_per_class=5, sigma=0.05, seed=1)
    pair = distance_histograms(data, queries, k=3, n_background=500, seed=2)
    assert pair.topk_counts.sum() == 20 * 3
    assert pair.background_counts.sum() == 500
    assert pair.separation > 0.2


def test_histogram_csv_shape(tmp_path):
    data = gen_synthetic(d=8, n_classes=2, n_per_class=6, sigma=0.2, seed=3)
    pair = distance_histograms(data, data, k=2, seed=0)
    path = tmp_path / "h.csv"
    pair.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_lo,bin_hi,topk_count,background_count"
    assert len(lines) == HIST_BINS + 1


def grid_fixture():
    base = gen_synthetic(d=16, n_classes=5, n_per_class=40, sigma=0.1, seed=4)
    queries = gen_synthetic(d=16, n_classes=5, n_per_class=6, sigma=0.1, seed=4)
    return base, queries


def test_evaluate_grid_shape_and_exact_corner():
    base, queries = grid_fixture()
    report = evaluate_grid(
        base.vectors,
        base.labels,
        queries.vectors,
        queries.labels,
        nlist=8,
        nprobes=(1, 4, 8),
        ks=(1, 5),
        seed=0,
    )
    assert set(report.lp) == {(k, p) for k in (1, 5) for p in (1, 4, 8)}
    # probing every list reproduces the exact oracle
    for k in (1, 5):
        assert report.ar[(k, 8)] == 1.0
        assert report.ar[(k, 1)] <= report.ar[(k, 4)] <= report.ar[(k, 8)]
    # same generator seed puts queries inside the same tight clusters
    assert report.lp[(1, 8)] > 0.9


def test_evaluate_grid_k_exceeding_base():
    base, queries = grid_fixture()
    with pytest.raises(ConfigError):
        evaluate_grid(
            base.vectors[:5], base.labels[:5], queries.vectors, queries.labels, ks=(10,)
        )


def test_metrics_report_round_trip(tmp_path):
    base, queries = grid_fixture()
    report = evaluate_grid(
        base.vectors,
        base.labels,
        queries.vectors,
        queries.labels,
        nlist=4,
        nprobes=(1, 4),
        ks=(1, 3),
        metadata={"run": "x"},
    )
    jpath = tmp_path / "m.json"
    report.to_json(jpath)
    back = MetricsReport.from_json(jpath)
    assert back.lp == report.lp
    assert back.ar == report.ar
    assert back.ks == report.ks
    assert back.metadata == {"run": "x"}
    cpath = tmp_path / "m.csv"
    report.to_csv(cpath)
    lines = cpath.read_text().splitlines()
    assert lines[0] == "k,nprobe,lp,ar"
    assert len(lines) == 1 + 2 * 2
