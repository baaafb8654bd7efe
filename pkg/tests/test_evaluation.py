"""Rank metrics, run aggregation, the paired t-test, and run file I/O.

The t-test brackets use published Student-t critical values for 9
degrees of freedom (2.262 at two-tailed 5%, 1.833 at 10%, 2.821 at 2%)
rather than recomputing the CDF, so the p-values are checked against an
independent source.
"""

import math

import pytest
from hypothesis import given, strategies as st

from headingrank.corpus import Qrels
from headingrank.evaluation import (
    RunFile,
    RunFormatError,
    average_precision,
    evaluate_run,
    format_metrics,
    paired_t_test,
    r_precision,
    read_run,
    reciprocal_rank,
    run_from_rankings,
    write_run,
)
from headingrank.index import Ranking


def ranking(*pids: str) -> Ranking:
    items = tuple((pid, float(len(pids) - i)) for i, pid in enumerate(pids))
    return Ranking(query_id="q", items=items)


# --- per-query metrics --------------------------------------------------

def test_ap_perfect():
    assert average_precision(ranking("r1", "r2", "x"), {"r1", "r2"}) == 1.0


def test_ap_ranks_one_and_three():
    got = average_precision(ranking("r1", "x", "r2"), {"r1", "r2"})
    assert got == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-12)
    assert got == pytest.approx(0.8333, abs=5e-5)


def test_ap_nothing_retrieved():
    assert average_precision(ranking("x", "y"), {"r1"}) == 0.0
    assert average_precision(Ranking("q", ()), {"r1"}) == 0.0


def test_ap_unretrieved_relevant_count_against():
    # One of two relevant never retrieved: AP halves.
    assert average_precision(ranking("r1"), {"r1", "r2"}) == 0.5


def test_rprec_two_of_three():
    got = r_precision(ranking("r1", "x", "r2", "r3"), {"r1", "r2", "r3"})
    assert got == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_rprec_short_ranking_pads():
    assert r_precision(ranking("r1"), {"r1", "r2"}) == 0.5


def test_rprec_perfect():
    assert r_precision(ranking("r1", "r2"), {"r1", "r2"}) == 1.0


def test_rr_cases():
    assert reciprocal_rank(ranking("r1", "x"), {"r1"}) == 1.0
    assert reciprocal_rank(ranking("x", "y", "z", "r1"), {"r1"}) == 0.25
    assert reciprocal_rank(ranking("x", "y"), {"r1"}) == 0.0


@pytest.mark.parametrize("fn", [average_precision, r_precision, reciprocal_rank])
def test_metrics_reject_empty_relevant(fn):
    with pytest.raises(ValueError):
        fn(ranking("x"), set())


# --- run-level aggregation ----------------------------------------------

def test_evaluate_perfect_run():
    qrels = Qrels(positives={"q1": frozenset({"a"}), "q2": frozenset({"b"})})
    run = run_from_rankings("r", [
        Ranking("q1", (("a", 2.0),)),
        Ranking("q2", (("b", 1.0),)),
    ])
    report = evaluate_run(run, qrels)
    assert report.map == report.r_prec == report.mrr == 1.0
    assert report.evaluated == 2
    assert report.skipped_no_positives == 0


def test_evaluate_mean_of_aps():
    qrels = Qrels(positives={"q1": frozenset({"a"}), "q2": frozenset({"b"})})
    run = run_from_rankings("r", [
        Ranking("q1", (("a", 2.0),)),
        Ranking("q2", (("x", 2.0), ("b", 1.0),)),
    ])
    assert evaluate_run(run, qrels).map == pytest.approx(0.75)


def test_evaluate_skips_zero_positive_queries():
    qrels = Qrels(positives={"q1": frozenset({"a"}), "q2": frozenset()})
    run = run_from_rankings("r", [Ranking("q1", (("a", 1.0),))])
    report = evaluate_run(run, qrels)
    assert report.evaluated == 1
    assert report.skipped_no_positives == 1
    assert "q2" not in report.per_query


def test_evaluate_absent_query_scores_zero():
    qrels = Qrels(positives={"q1": frozenset({"a"}), "q2": frozenset({"b"})})
    run = run_from_rankings("r", [Ranking("q1", (("a", 1.0),))])
    report = evaluate_run(run, qrels)
    assert report.per_query["q2"] == (0.0, 0.0, 0.0)
    assert report.map == pytest.approx(0.5)


def test_single_relevant_ap_equals_rr():
    qrels = Qrels(positives={"q": frozenset({"r"})})
    run = run_from_rankings("r", [Ranking("q", (("x", 3.0), ("r", 2.0), ("y", 1.0)))])
    report = evaluate_run(run, qrels)
    ap, _, rr = report.per_query["q"]
    assert ap == rr == 0.5


# --- paired t-test ------------------------------------------------------

def _paired(diffs):
    ap_b = {f"q{i}": 0.5 for i in range(len(diffs))}
    ap_a = {f"q{i}": 0.5 + d for i, d in enumerate(diffs)}
    return ap_a, ap_b


def _shifted_diffs(center: float) -> list[float]:
    # Symmetric spread with sample sd 0.302765; t = center/(sd/sqrt(10)).
    return [center - 0.45 + 0.1 * i for i in range(10)]


def test_ttest_textbook_significant_worse():
    # mean diff -0.25, t = -2.611: beyond the 2.262 critical value.
    ap_a, ap_b = _paired(_shifted_diffs(-0.25))
    res = paired_t_test(ap_a, ap_b, alpha=0.05)
    assert res.mean_diff == pytest.approx(-0.25)
    assert res.t_statistic == pytest.approx(-2.6111645, abs=1e-6)
    # df=9 table: 2.262 <-> p 0.05, 2.821 <-> p 0.02 (two-tailed).
    assert 0.02 < res.p_value < 0.05
    assert res.significant_worse


def test_ttest_textbook_not_significant():
    # mean diff -0.18, t = -1.880: inside the 2.262 critical value.
    ap_a, ap_b = _paired(_shifted_diffs(-0.18))
    res = paired_t_test(ap_a, ap_b, alpha=0.05)
    assert res.t_statistic == pytest.approx(-1.8800384, abs=1e-6)
    # df=9 table: 1.833 <-> p 0.10, 2.262 <-> p 0.05 (two-tailed).
    assert 0.05 < res.p_value < 0.10
    assert not res.significant_worse


def test_ttest_significant_but_better_is_not_worse():
    ap_a, ap_b = _paired(_shifted_diffs(0.25))
    res = paired_t_test(ap_a, ap_b, alpha=0.05)
    assert res.p_value < 0.05
    assert res.mean_diff > 0
    assert not res.significant_worse


def test_ttest_identical_inputs():
    ap = {f"q{i}": 0.1 * i for i in range(5)}
    res = paired_t_test(ap, dict(ap), alpha=0.05)
    assert res.t_statistic == 0.0
    assert res.p_value == 1.0
    assert not res.significant_worse


def test_ttest_symmetric_cancellation():
    res = paired_t_test({"a": 0.6, "b": 0.4}, {"a": 0.5, "b": 0.5}, alpha=0.05)
    assert res.t_statistic == 0.0
    assert res.p_value == pytest.approx(1.0)


def test_ttest_constant_nonzero_diff_degenerate():
    res = paired_t_test({"a": 0.6, "b": 0.6}, {"a": 0.5, "b": 0.5}, alpha=0.05)
    assert res.t_statistic == math.inf
    assert res.p_value == 0.0
    assert not res.significant_worse


def test_ttest_mismatched_queries_lists_difference():
    with pytest.raises(ValueError) as exc:
        paired_t_test({"a": 1.0, "b": 1.0}, {"a": 1.0, "c": 1.0}, alpha=0.05)
    assert "b" in str(exc.value) and "c" in str(exc.value)


def test_ttest_needs_two_pairs():
    with pytest.raises(ValueError, match="n >= 2"):
        paired_t_test({"a": 1.0}, {"a": 0.5}, alpha=0.05)


# --- run file I/O -------------------------------------------------------

def test_run_roundtrip(tmp_path):
    run = run_from_rankings("myrun", [
        Ranking("q1", (("a", 2.5), ("b", 1.25))),
        Ranking("q2", (("c", 0.125),)),
    ])
    path = tmp_path / "run.txt"
    write_run(run, str(path))
    text = path.read_text()
    assert "q1 Q0 a 1 2.5 myrun\n" in text
    again = read_run(str(path))
    assert again.name == "myrun"
    assert again.rankings["q1"].paragraph_ids() == ["a", "b"]
    assert again.rankings["q1"].items[1][1] == pytest.approx(1.25)


@pytest.mark.parametrize("row,fragment", [
    ("q1 a 1 2.0 r", "expected 6 fields"),
    ("q1 QX a 1 2.0 r", "must be Q0"),
    ("q1 Q0 a one 2.0 r", "rank must be int"),
    ("q1 Q0 a 0 2.0 r", "rank must be >= 1"),
])
def test_read_run_row_errors(tmp_path, row, fragment):
    path = tmp_path / "run.txt"
    path.write_text(row + "\n")
    with pytest.raises(RunFormatError, match=fragment):
        read_run(str(path))


def test_read_run_rejects_rank_gap(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 2.0 r\nq1 Q0 b 3 1.0 r\n")
    with pytest.raises(RunFormatError, match="not contiguous"):
        read_run(str(path))


def test_read_run_rejects_increasing_scores(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 1.0 r\nq1 Q0 b 2 2.0 r\n")
    with pytest.raises(RunFormatError, match="scores increase"):
        read_run(str(path))


def test_read_run_rejects_duplicate_paragraph(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 2.0 r\nq1 Q0 a 2 1.0 r\n")
    with pytest.raises(RunFormatError, match="duplicate paragraph"):
        read_run(str(path))


def test_error_carries_row_number(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 2.0 r\nbad row\n")
    with pytest.raises(RunFormatError) as exc:
        read_run(str(path))
    assert exc.value.row_no == 2


def test_run_from_rankings_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate query"):
        run_from_rankings("r", [Ranking("q", ()), Ranking("q", ())])


def test_format_metrics_per_query_flag():
    qrels = Qrels(positives={"q1": frozenset({"a"})})
    run = run_from_rankings("r", [Ranking("q1", (("a", 1.0),))])
    report = evaluate_run(run, qrels)
    brief = format_metrics(report)
    assert "MAP\t1.000000" in brief and "query\t" not in brief
    full = format_metrics(report, per_query=True)
    assert "query\tq1\t1.000000" in full


# --- metric properties --------------------------------------------------

ids = st.lists(st.integers(0, 19).map(lambda i: f"p{i}"), min_size=1,
               max_size=12, unique=True)


@given(ids, st.sets(st.integers(0, 19).map(lambda i: f"p{i}"), min_size=1, max_size=6))
def test_metrics_bounded(ranked, relevant):
    r = ranking(*ranked)
    for fn in (average_precision, r_precision, reciprocal_rank):
        assert 0.0 <= fn(r, relevant) <= 1.0


@given(ids, st.sets(st.integers(0, 19).map(lambda i: f"p{i}"), min_size=1, max_size=6),
       st.randoms(use_true_random=False))
def test_ap_ignores_tail_permutation(ranked, relevant, rng):
    r = ranking(*ranked)
    base = average_precision(r, relevant)
    hit_positions = [i for i, pid in enumerate(ranked) if pid in relevant]
    cut = (hit_positions[-1] + 1) if hit_positions else 0
    tail = ranked[cut:]
    rng.shuffle(tail)
    assert average_precision(ranking(*ranked[:cut], *tail), relevant) == \
        pytest.approx(base, abs=1e-12)


@given(ids, st.data())
def test_moving_relevant_up_never_hurts(ranked, data):
    relevant = {ranked[-1]}
    base = [average_precision(ranking(*ranked), relevant),
            r_precision(ranking(*ranked), relevant),
            reciprocal_rank(ranking(*ranked), relevant)]
    pos = data.draw(st.integers(0, len(ranked) - 1))
    moved = [p for p in ranked if p != ranked[-1]]
    moved.insert(pos, ranked[-1])
    after = [average_precision(ranking(*moved), relevant),
             r_precision(ranking(*moved), relevant),
             reciprocal_rank(ranking(*moved), relevant)]
    assert all(a >= b - 1e-12 for a, b in zip(after, base))


def test_candidate_ceiling_on_mrr():
    # Only half the queries have any relevant item retrievable: MRR <= 0.5.
    qrels = Qrels(positives={f"q{i}": frozenset({f"r{i}"}) for i in range(4)})
    run = run_from_rankings("r", [
        Ranking("q0", (("r0", 1.0),)),
        Ranking("q1", (("x", 1.0),)),
        Ranking("q2", (("r2", 2.0), ("y", 1.0))),
        Ranking("q3", (("z", 1.0),)),
    ])
    assert evaluate_run(run, qrels).mrr <= 0.5
