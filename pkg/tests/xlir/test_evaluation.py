import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.append(str(project_root))

from src.xlir.errors import ContractError, InputFormatError
from src.xlir.evaluation import (
    Qrels,
    average_precision,
    comparison_frame,
    evaluate_runs,
    format_frame,
    mean_average_precision,
    parse_qrels,
    precision_at_k,
    report_frame,
    write_report,
)
from src.xlir.ranking import RankedRun, RunEntry


def run_of(query_id, doc_ids):
    return RankedRun(
        query_id, tuple(RunEntry(d, 1.0 / (i + 1), i + 1) for i, d in enumerate(doc_ids))
    )


def qrels_of(rows):
    return Qrels(judgments={(q, d): rel for q, d, rel in rows}, line_count=len(rows))


def brute_force_ap(doc_ids, relevant):
    total = 0.0
    for i in range(1, len(doc_ids) + 1):
        if doc_ids[i - 1] in relevant:
            total += sum(1 for d in doc_ids[:i] if d in relevant) / i
    return total / len(relevant)


def test_average_precision_fixture():
    ap = average_precision(run_of("q1", ["d1", "d2", "d3"]), {"d1", "d3"})
    assert ap == pytest.approx(0.8333, abs=1e-4)


def test_unretrieved_relevant_counts_zero():
    assert average_precision(run_of("q1", ["d1"]), {"d1", "d9"}) == 0.5


def test_average_precision_matches_brute_force():
    rng = np.random.default_rng(11)
    pool = [f"d{i}" for i in range(30)]
    for _ in range(1000):
        doc_ids = [str(d) for d in rng.permutation(pool)[: int(rng.integers(0, 30))]]
        relevant = {str(d) for d in rng.choice(pool, size=int(rng.integers(1, 10)), replace=False)}
        assert average_precision(run_of("q", doc_ids), relevant) == brute_force_ap(doc_ids, relevant)


def test_average_precision_needs_relevant_documents():
    with pytest.raises(ContractError):
        average_precision(run_of("q1", ["d1"]), set())


def test_precision_at_k_short_run():
    run = run_of("q1", ["d1", "d2"])
    assert precision_at_k(run, {"d2"}, 5) == 0.2


def test_map_two_queries():
    runs = {"q1": run_of("q1", ["d1", "d2"]), "q2": run_of("q2", ["d1", "d2"])}
    qrels = qrels_of([("q1", "d1", 1), ("q2", "d9", 1)])
    value, per_query = mean_average_precision(runs, qrels)
    assert value == 0.5
    assert per_query == {"q1": 1.0, "q2": 0.0}


def test_single_query_map():
    runs = {"q1": run_of("q1", ["d1", "d2", "d3"])}
    report = evaluate_runs(runs, qrels_of([("q1", "d1", 1), ("q1", "d3", 2), ("q1", "d2", 0)]))
    assert report.map == pytest.approx(0.8333, abs=1e-4)


def test_judged_query_missing_from_run_scores_zero():
    runs = {"q1": run_of("q1", ["d1"]), "q7": run_of("q7", ["d1"])}
    qrels = qrels_of([("q1", "d1", 1), ("q2", "d1", 1), ("q3", "d1", 0)])
    report = evaluate_runs(runs, qrels)

    assert report.per_query_ap == {"q1": 1.0, "q2": 0.0}
    assert report.map == 0.5
    assert report.missing_from_run == ["q2"]
    assert report.unjudged_in_run == ["q7"]
    assert report.no_relevant == ["q3"]


def test_zero_evaluable_queries():
    runs = {"q1": run_of("q1", ["d1"])}
    with pytest.raises(ContractError, match="zero evaluable queries"):
        evaluate_runs(runs, qrels_of([("q9", "d1", 1)]))


def test_parse_qrels(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1 1\nq1 0 d2 0\n\nq1 0 d1 0\nq2 0 d5 2\n")
    qrels = parse_qrels(path)

    assert qrels.line_count == 4
    assert qrels.duplicates == 1
    assert qrels.judgments[("q1", "d1")] == 0
    assert qrels.query_ids == ["q1", "q2"]
    assert qrels.relevant("q2") == {"d5"}
    assert qrels.relevant("q1") == set()


@pytest.mark.parametrize("line", ["q1 0 d1", "q1 0 d1 yes", "q1 0 d1 -1"])
def test_parse_qrels_bad_line(tmp_path, line):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d0 1\n" + line + "\n")
    with pytest.raises(InputFormatError, match="line 2"):
        parse_qrels(path)


def test_report_frame_and_file(tmp_path):
    runs = {"q1": run_of("q1", ["d1", "d2", "d3"]), "q2": run_of("q2", ["d4"])}
    report = evaluate_runs(runs, qrels_of([("q1", "d1", 1), ("q1", "d3", 1), ("q2", "d4", 1)]))
    frame = report_frame(report)

    assert list(frame.columns) == ["metric", "query_id", "value"]
    overall = frame[frame["query_id"] == "all"].set_index("metric")["value"]
    assert overall["map"] == pytest.approx((0.8333333 + 1.0) / 2)
    assert overall["num_q"] == 2

    lines = write_report(report, tmp_path / "eval.tsv").read_text().splitlines()
    assert lines[0] == "metric\tquery_id\tvalue"
    assert lines[1] == "map\tq1\t0.8333"
    assert "map\tall\t0.9167" in lines


def test_comparison_frame():
    runs_a = {"q1": run_of("q1", ["d1", "d2"])}
    runs_b = {"q1": run_of("q1", ["d2", "d1"])}
    qrels = qrels_of([("q1", "d1", 1)])
    frame = comparison_frame({"a": evaluate_runs(runs_a, qrels), "b": evaluate_runs(runs_b, qrels)})

    assert list(frame["run"]) == ["a", "b"]
    assert list(frame["map"]) == [1.0, 0.5]
    assert list(frame.columns) == ["run", "map", "P_5", "P_10", "num_q"]


def test_moving_a_relevant_document_up_raises_ap():
    rng = np.random.default_rng(5)
    pool = [f"d{i}" for i in range(20)]
    for _ in range(300):
        doc_ids = [str(d) for d in rng.permutation(pool)]
        relevant = {str(d) for d in rng.choice(pool, size=int(rng.integers(1, 8)), replace=False)}
        hits = [i for i, d in enumerate(doc_ids) if d in relevant]
        misses = [i for i, d in enumerate(doc_ids) if d not in relevant]
        pairs = [(i, j) for i in misses for j in hits if i < j]
        if not pairs:
            continue
        i, j = pairs[int(rng.integers(len(pairs)))]
        swapped = list(doc_ids)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert average_precision(run_of("q", swapped), relevant) > average_precision(
            run_of("q", doc_ids), relevant
        )


def test_reordering_below_last_relevant_keeps_ap():
    rng = np.random.default_rng(8)
    pool = [f"d{i}" for i in range(25)]
    for _ in range(200):
        doc_ids = [str(d) for d in rng.permutation(pool)]
        relevant = {str(d) for d in rng.choice(pool, size=int(rng.integers(1, 6)), replace=False)}
        last = max(i for i, d in enumerate(doc_ids) if d in relevant)
        tail = [str(d) for d in rng.permutation(doc_ids[last + 1 :])]
        reordered = doc_ids[: last + 1] + tail
        assert average_precision(run_of("q", reordered), relevant) == average_precision(
            run_of("q", doc_ids), relevant
        )


def test_map_ignores_query_order():
    rng = np.random.default_rng(13)
    pool = [f"d{i}" for i in range(15)]
    query_ids = [f"q{i}" for i in range(12)]
    runs = {q: run_of(q, [str(d) for d in rng.permutation(pool)[:10]]) for q in query_ids}
    rows = [(q, str(d), 1) for q in query_ids for d in rng.choice(pool, size=3, replace=False)]
    report = evaluate_runs(runs, qrels_of(rows))

    for _ in range(10):
        order = [query_ids[i] for i in rng.permutation(len(query_ids))]
        shuffled_runs = {q: runs[q] for q in order}
        shuffled_rows = [rows[i] for i in rng.permutation(len(rows))]
        shuffled = evaluate_runs(shuffled_runs, qrels_of(shuffled_rows))
        assert shuffled.map == report.map
        assert shuffled.per_query_ap == report.per_query_ap


def test_report_counts_are_integers(tmp_path):
    runs = {"q1": run_of("q1", ["d1", "d2"]), "q2": run_of("q2", ["d2"])}
    report = evaluate_runs(runs, qrels_of([("q1", "d1", 1), ("q2", "d2", 1)]))

    lines = write_report(report, tmp_path / "eval.tsv").read_text().splitlines()
    assert lines[-1] == "num_q\tall\t2"

    table = format_frame(comparison_frame({"a": report}))
    assert table.splitlines()[1] == "a\t1.0000\t0.2000\t0.1000\t2"
