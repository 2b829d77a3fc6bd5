"""Scores, significance tests, audit, and report compilation."""

import numpy as np
import pytest

from behavgen.errors import IncompleteReportError, InvalidInputError
from behavgen.metrics import (
    BaselineData,
    FunctionalityResult,
    binomial_test,
    compile_report,
    degenerate_audit,
    g_score,
    iid_metrics,
    pass_rate,
    randomisation_test,
)

# ---------------------------------------------------------------------------
# pass_rate / g_score


def test_pass_rate_examples():
    assert pass_rate([True, True, True, False]) == 0.75
    assert pass_rate([True] * 5) == 1.0


def test_pass_rate_matches_counting_oracle():
    rng = np.random.default_rng(0)
    outcomes = [bool(b) for b in rng.integers(0, 2, size=1000)]
    count = 0
    for o in outcomes:
        if o:
            count += 1
    assert pass_rate(outcomes) == count / 1000


def test_pass_rate_empty_errors():
    with pytest.raises(InvalidInputError):
        pass_rate([])


def test_g_score_examples():
    assert g_score(1.0, 1.0) == 1.0
    assert g_score(0.0, 0.7) == 0.0
    assert g_score(0.0, 0.0) == 0.0
    assert g_score(0.6054, 0.9174) == pytest.approx(0.7294, abs=1e-4)


def test_g_score_sandwiched_between_min_and_the_means():
    # harmonic <= geometric <= arithmetic, and min <= harmonic <= max,
    # with equality exactly when the two inputs agree
    rng = np.random.default_rng(1)
    for _ in range(300):
        s, i = rng.random(), rng.random()
        g = g_score(s, i)
        assert min(s, i) - 1e-12 <= g <= max(s, i) + 1e-12
        assert g <= np.sqrt(s * i) + 1e-12
        assert g <= (s + i) / 2 + 1e-12
        if abs(s - i) > 1e-9:
            assert g > min(s, i)
        assert g_score(s, s) == pytest.approx(s, abs=1e-12)


def test_g_score_range_check():
    with pytest.raises(InvalidInputError):
        g_score(1.2, 0.5)
    with pytest.raises(InvalidInputError):
        g_score(0.5, -0.1)


# ---------------------------------------------------------------------------
# iid metrics


def test_iid_metrics_perfect():
    preds = [[0.1, 0.9], [0.8, 0.2]]
    out = iid_metrics(preds, [1, 0])
    assert out == {"accuracy": 1.0, "f1_positive": 1.0}


def test_iid_metrics_all_negative_predictor():
    preds = [[0.9, 0.1]] * 4
    out = iid_metrics(preds, [0, 1, 0, 1])
    assert out["accuracy"] == 0.5
    assert out["f1_positive"] == 0.0


def test_iid_metrics_against_confusion_matrix_oracle():
    rng = np.random.default_rng(2)
    preds = [np.array(v) / v.sum() for v in rng.random((200, 2)) + 1e-3]
    labels = rng.integers(0, 2, size=200)
    out = iid_metrics(preds, labels)
    hard = np.array([int(p[1] > p[0]) for p in preds])
    tp = int(((hard == 1) & (labels == 1)).sum())
    fp = int(((hard == 1) & (labels == 0)).sum())
    fn = int(((hard == 0) & (labels == 1)).sum())
    tn = int(((hard == 0) & (labels == 0)).sum())
    assert out["accuracy"] == pytest.approx((tp + tn) / 200)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    assert out["f1_positive"] == pytest.approx(2 * precision * recall / (precision + recall))


def test_iid_metrics_length_mismatch():
    with pytest.raises(InvalidInputError):
        iid_metrics([[0.5, 0.5]], [0, 1])


# ---------------------------------------------------------------------------
# randomisation test


def test_randomisation_identical_scores_give_p_one():
    scores = [0.0, 1.0, 1.0, 0.0, 1.0]
    assert randomisation_test(scores, scores, 500, np.random.default_rng(0)) == 1.0


def test_randomisation_clear_separation_is_significant():
    a = [1.0] * 20
    b = [0.0] * 20
    p = randomisation_test(a, b, 10000, np.random.default_rng(1))
    # exact enumeration: only the two all-same-sign assignments reach the
    # observed statistic, so p should be near 2 * 2^-20 plus smoothing
    assert p < 0.01


def test_randomisation_symmetric_in_arguments():
    rng_a = np.random.default_rng(3)
    rng_b = np.random.default_rng(3)
    a = list(np.random.default_rng(4).random(30))
    b = list(np.random.default_rng(5).random(30))
    assert randomisation_test(a, b, 1000, rng_a) == randomisation_test(b, a, 1000, rng_b)


def test_randomisation_validates_inputs():
    with pytest.raises(InvalidInputError):
        randomisation_test([1.0], [1.0, 0.0], 1000)
    with pytest.raises(InvalidInputError):
        randomisation_test([1.0], [0.0], 50)


def test_randomisation_null_is_super_uniform():
    rng = np.random.default_rng(6)
    false_positives = 0
    trials = 500
    for _ in range(trials):
        scores = rng.random((2, 40))
        p = randomisation_test(scores[0], scores[1], 200, rng)
        if p < 0.05:
            false_positives += 1
    assert false_positives / trials <= 0.07


# ---------------------------------------------------------------------------
# binomial test


def test_binomial_no_discordant_cases():
    assert binomial_test(0, 0, 50) == 1.0


def test_binomial_all_favor_one_model():
    assert binomial_test(10, 0, 40) == pytest.approx(2 * 2 ** -10, abs=1e-12)
    assert binomial_test(0, 10, 40) == pytest.approx(2 * 2 ** -10, abs=1e-12)


def test_binomial_even_split():
    assert binomial_test(5, 5, 20) == 1.0


def test_binomial_matches_exhaustive_enumeration():
    # oracle: enumerate all 2^m equally likely sign patterns
    from itertools import product
    from math import comb

    for wins_a, wins_b in ((3, 1), (6, 2), (2, 7)):
        m = wins_a + wins_b
        observed = comb(m, wins_a)
        count = 0
        for pattern in product((0, 1), repeat=m):
            k = sum(pattern)
            if comb(m, k) <= observed:
                count += 1
        assert binomial_test(wins_a, wins_b, m + 5) == pytest.approx(count / 2 ** m, abs=1e-12)


def test_binomial_validates_inputs():
    with pytest.raises(InvalidInputError):
        binomial_test(1, 1, 0)
    with pytest.raises(InvalidInputError):
        binomial_test(8, 8, 10)


# ---------------------------------------------------------------------------
# degenerate audit


def test_audit_flags_reported_collapse():
    # 95.18% predicted negative vs 47.25% ground truth: divergence 0.4793
    n = 10000
    preds = [[0.9, 0.1]] * 9518 + [[0.1, 0.9]] * 482
    labels = [0] * 4725 + [1] * 5275
    report = degenerate_audit(preds, labels)
    assert report.flagged
    assert report.divergence[0] == pytest.approx(0.4793, abs=1e-4)


def test_audit_matching_distributions_not_flagged():
    preds = [[0.9, 0.1]] * 5 + [[0.1, 0.9]] * 5
    labels = [0] * 5 + [1] * 5
    report = degenerate_audit(preds, labels)
    assert not report.flagged
    assert np.allclose(report.divergence, 0.0)


def test_audit_constant_predictor_on_balanced_labels():
    preds = [[0.8, 0.2]] * 10
    labels = [0, 1] * 5
    report = degenerate_audit(preds, labels)
    assert report.flagged
    assert np.allclose(report.divergence, 0.5)


# ---------------------------------------------------------------------------
# compile_report


def result(name, outcomes, start_id=0):
    ids = tuple(range(start_id, start_id + len(outcomes)))
    return FunctionalityResult(name, ids, tuple(outcomes))


def test_compile_report_single_functionality():
    results = {"standard": [result("only", [True] * 8 + [False] * 2)]}
    iid = {"standard": [{"accuracy": 1.0, "f1_positive": 1.0}]}
    report = compile_report(results, iid, ["only"])
    assert report.aggregates["standard"] == pytest.approx(0.8)
    assert report.g_scores["standard"] == pytest.approx(8 / 9, abs=1e-9)


def test_compile_report_aggregates_recomputable_from_matrix():
    rng = np.random.default_rng(7)
    names = [f"f{i}" for i in range(5)]
    scenario_results = {}
    iid = {}
    for scenario in ("standard", "seen", "functionality"):
        scenario_results[scenario] = [
            result(n, list(rng.random(12) < 0.7), start_id=100 * i)
            for i, n in enumerate(names)
        ]
        iid[scenario] = [{"accuracy": float(rng.random()), "f1_positive": 0.5}]
    report = compile_report(scenario_results, iid, names)
    csv_text = report.matrix_csv()
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    assert rows[0] == ["scenario", "average"] + names
    for row in rows[1:]:
        values = [float(v) for v in row[2:]]
        assert float(row[1]) == pytest.approx(np.mean(values), abs=1e-6)
    for scenario in scenario_results:
        g = report.g_scores[scenario]
        assert g == pytest.approx(
            g_score(report.aggregates[scenario], report.iid[scenario]["accuracy"]), abs=1e-12)


def test_compile_report_axis_iid_scores_average_over_runs():
    names = ["f0"]
    results = {"functionality": [result("f0", [True, False])]}
    iid = {"functionality": [{"accuracy": 0.8, "f1_positive": 0.8},
                             {"accuracy": 0.6, "f1_positive": 0.7}]}
    report = compile_report(results, iid, names)
    assert report.iid["functionality"]["accuracy"] == pytest.approx(0.7)


def test_compile_report_names_missing_functionality():
    results = {"standard": [result("f0", [True])]}
    iid = {"standard": [{"accuracy": 1.0, "f1_positive": 1.0}]}
    with pytest.raises(IncompleteReportError) as err:
        compile_report(results, iid, ["f0", "f1"])
    assert "f1" in str(err.value)


def test_compile_report_rejects_duplicate_coverage():
    results = {"standard": [result("f0", [True]), result("f0", [False], start_id=50)]}
    iid = {"standard": [{"accuracy": 1.0, "f1_positive": 1.0}]}
    with pytest.raises(IncompleteReportError):
        compile_report(results, iid, ["f0"])


def test_compile_report_significance_entries():
    rng = np.random.default_rng(8)
    names = ["f0", "f1"]
    cell = {"seen": [result("f0", [True] * 10), result("f1", [True] * 10, start_id=10)]}
    iid = {"seen": [{"accuracy": 0.9, "f1_positive": 0.9}]}
    baseline = BaselineData(
        suite_outcomes={i: False for i in range(20)},
        iid_correct=np.array([True] * 50 + [False] * 50),
    )
    cell_iid_correct = {"seen": np.array([True] * 90 + [False] * 10)}
    report = compile_report(cell, iid, names, baseline=baseline,
                            iid_correct=cell_iid_correct, resamples=2000,
                            rng=rng)
    by_name = {e["comparison"]: e for e in report.significance}
    suite_entry = by_name["suite_seen_vs_baseline"]
    assert suite_entry["test"] == "randomisation"
    assert suite_entry["p_value"] < 0.05
    assert suite_entry["direction"] == "better"
    iid_entry = by_name["iid_seen_vs_baseline"]
    assert iid_entry["test"] == "binomial"
    assert iid_entry["direction"] == "better"


def test_aggregate_is_permutation_invariant():
    rng = np.random.default_rng(9)
    names = [f"f{i}" for i in range(4)]
    res = [result(n, list(rng.random(6) < 0.5), start_id=10 * i) for i, n in enumerate(names)]
    iid = {"standard": [{"accuracy": 0.5, "f1_positive": 0.5}]}
    a = compile_report({"standard": res}, iid, names)
    b = compile_report({"standard": res[::-1]}, iid, names)
    assert a.aggregates == b.aggregates
