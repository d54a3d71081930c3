import json
import random

import pytest

from contractengine.errors import EmptyGroundTruth, EngineError
from contractengine.evalharness import (
    DEFAULT_K_GRID,
    BenchmarkCase,
    aggregate,
    char_pr_at_k,
    char_volume_stats,
    load_corpus,
    merge_spans,
    perfect_oracle,
    run_benchmark,
    span_pr_at_k,
)
from contractengine.gateway import HashEmbedder, LexicalOverlapReranker
from contractengine.retrieval import RetrievalConfig


def bitmap_char_pr(retrieved, truth, k, universe=10_000):
    """Independent oracle: explicit character bitmaps."""
    got = set()
    for a, b in retrieved[:k]:
        got.update(range(a, b))
    want = set()
    for a, b in truth:
        want.update(range(a, b))
    overlap = len(got & want)
    precision = overlap / len(got) if got else 0.0
    recall = overlap / len(want)
    return precision, recall


def test_merge_spans_sorts_and_merges():
    assert merge_spans([(5, 10), (0, 3), (9, 12), (12, 12)]) == [(0, 3), (5, 12)]


def test_merge_spans_adjacent_coalesce():
    assert merge_spans([(0, 5), (5, 10)]) == [(0, 10)]


def test_char_pr_hand_example_half_overlap():
    # truth [10,20) vs retrieved [15,25): 5 shared chars of 10 each side
    assert char_pr_at_k([(15, 25)], [(10, 20)], 1) == (0.5, 0.5)


def test_char_pr_duplicate_retrieved_chars_count_once():
    p, r = char_pr_at_k([(10, 20), (10, 20)], [(10, 20)], 2)
    assert (p, r) == (1.0, 1.0)


def test_char_pr_empty_truth_raises():
    with pytest.raises(EmptyGroundTruth):
        char_pr_at_k([(0, 5)], [], 1)
    with pytest.raises(EmptyGroundTruth):
        char_pr_at_k([(0, 5)], [(3, 3)], 1)


def test_char_pr_bad_k():
    with pytest.raises(ValueError):
        char_pr_at_k([(0, 5)], [(0, 5)], 0)


def test_char_pr_matches_bitmap_oracle_randomized():
    rng = random.Random(7)
    for _ in range(500):
        truth = [(a, a + rng.randint(1, 40)) for a in rng.sample(range(0, 900), rng.randint(1, 5))]
        retrieved = [
            (a, a + rng.randint(1, 60)) for a in rng.sample(range(0, 900), rng.randint(0, 8))
        ]
        k = rng.choice(DEFAULT_K_GRID)
        got = char_pr_at_k(retrieved, truth, k)
        want = bitmap_char_pr(retrieved, truth, k)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == pytest.approx(want[1], abs=1e-12)


def test_span_pr_hand_example():
    # two truth spans; top-2 retrieved: one hit covering both? no — one
    # retrieved span overlaps [19,40), a second overlaps [50,60); with one
    # miss in between, precision@2 counts hits over retrieved
    truth = [(19, 40), (50, 60)]
    retrieved = [(30, 45), (100, 120)]
    p, r = span_pr_at_k(retrieved, truth, 2)
    assert (p, r) == (0.5, 0.5)


def test_span_pr_one_span_covers_all_truth():
    truth = [(19, 40), (50, 60)]
    p, r = span_pr_at_k([(0, 100)], truth, 2)
    # only one span retrieved: precision over min(k, retrieved)=1
    assert (p, r) == (1.0, 1.0)


def test_span_vs_char_divergence_on_sub_span():
    # a tiny retrieved sliver inside a large truth span: span metrics call it
    # a perfect hit while char recall stays small
    truth = [(0, 1000)]
    retrieved = [(10, 20)]
    ps, rs = span_pr_at_k(retrieved, truth, 1)
    pc, rc = char_pr_at_k(retrieved, truth, 1)
    assert (ps, rs) == (1.0, 1.0)
    assert pc == 1.0
    assert rc == pytest.approx(0.01)


def test_span_pr_empty_retrieved():
    assert span_pr_at_k([], [(0, 10)], 4) == (0.0, 0.0)


def test_perfect_oracle_scores_perfectly():
    case = BenchmarkCase("c1", "q", "d", [(0, 10), (20, 30)])
    spans = perfect_oracle(case)
    for k in (1, 2, 4):
        pc, rc = char_pr_at_k(spans, case.ground_truth, k)
        assert pc == 1.0
        ps, rs = span_pr_at_k(spans, case.ground_truth, k)
        assert ps == 1.0
    assert char_pr_at_k(spans, case.ground_truth, 2)[1] == 1.0


def test_case_merges_overlapping_truth_with_warning(caplog):
    with caplog.at_level("WARNING"):
        case = BenchmarkCase("c1", "q", "d", [(0, 10), (5, 15)])
    assert case.ground_truth == [(0, 15)]
    assert any("merged" in r.message for r in caplog.records)


def test_char_volume_sums_without_dedup():
    # two spans of 100 and 200 chars: volume at k=2 is 300 even if they overlap
    stats = char_volume_stats([[(0, 100), (50, 250)]], k_grid=(1, 2))
    assert stats[1] == 100.0
    assert stats[2] == 300.0


def test_char_volume_mean_over_cases():
    stats = char_volume_stats([[(0, 10)], [(0, 30)]], k_grid=(1,))
    assert stats[1] == 20.0


def test_char_volume_empty_results():
    assert char_volume_stats([], k_grid=(1, 2)) == {1: 0.0, 2: 0.0}


def test_aggregate_perfect_oracle_all_ones():
    cases = [
        BenchmarkCase("a", "q", "d", [(0, 10)]),
        BenchmarkCase("b", "q", "d", [(5, 25), (40, 60)]),
    ]
    per_case = {c.case_id: perfect_oracle(c) for c in cases}
    report = aggregate(per_case, cases, k_grid=(1, 2, 4))
    for k in (1, 2, 4):
        assert report.precision_char[k] == 1.0
        assert report.precision_span[k] == 1.0
    assert report.recall_char[4] == 1.0
    assert report.n_cases == 2


def write_corpus(tmp_path):
    doc = (
        "1. Payment terms\n"
        "1.1 The buyer pays invoices within thirty days of receipt.\n"
        "2. Confidentiality obligations\n"
        "2.1 The receiving party protects confidential information carefully.\n"
        "3. Termination rights\n"
        "3.1 Either party may terminate upon ninety days written notice.\n"
    )
    (tmp_path / "contract.txt").write_text(doc, encoding="utf-8")
    start = doc.index("3.1 Either")
    end = doc.index("notice.") + len("notice.")
    cases = [
        {
            "case_id": "term-1",
            "query": "terminate ninety days written notice",
            "document_id": "contract.txt",
            "spans": [[start, end]],
        }
    ]
    with open(tmp_path / "cases.jsonl", "w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(json.dumps(c) + "\n")
    return doc


def test_load_corpus(tmp_path):
    write_corpus(tmp_path)
    cases, documents = load_corpus(str(tmp_path))
    assert len(cases) == 1
    assert "contract.txt" in documents


def test_load_corpus_missing_cases(tmp_path):
    with pytest.raises(EngineError):
        load_corpus(str(tmp_path))


def test_load_corpus_empty_cases(tmp_path):
    (tmp_path / "cases.jsonl").write_text("", encoding="utf-8")
    with pytest.raises(EngineError):
        load_corpus(str(tmp_path))


def test_run_benchmark_end_to_end(tmp_path):
    write_corpus(tmp_path)
    out_dir = tmp_path / "out"
    report = run_benchmark(
        str(tmp_path),
        HashEmbedder(dim=64),
        LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0),
        k_grid=(1, 2),
        output_dir=str(out_dir),
    )
    assert report.n_cases == 1
    assert report.failures == []
    # the unique planted clause should be found at rank 1
    assert report.recall_span[1] == 1.0
    assert (out_dir / "metrics.csv").exists()
    assert (out_dir / "metrics.json").exists()
    csv_text = (out_dir / "metrics.csv").read_text()
    assert csv_text.splitlines()[0].startswith("k,precision_char")
    data = json.loads((out_dir / "metrics.json").read_text())
    assert data["n_cases"] == 1


def test_metrics_report_csv_six_decimals(tmp_path):
    cases = [BenchmarkCase("a", "q", "d", [(0, 10)])]
    report = aggregate({"a": [(0, 5)]}, cases, k_grid=(1,))
    line = report.to_csv().splitlines()[1]
    assert line == "1,1.000000,0.500000,1.000000,1.000000,5.000000"
