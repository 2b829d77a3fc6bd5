"""Scores, significance tests, the degenerate-prediction audit, and report
assembly.

Five aggregate suite scores are tracked, one per evaluation scenario
(standard, seen, and the three held-out axes); each pairs with an i.i.d.
score through a harmonic mean to give the overall generalisation score.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .errors import IncompleteReportError, InvalidInputError

SCENARIO_ORDER = ("standard", "seen", "functionality", "class", "test_type")
SCENARIO_LABELS = {
    "standard": "standard",
    "seen": "seen",
    "functionality": "func",
    "class": "class",
    "test_type": "type",
}


def pass_rate(outcomes: Sequence[bool]) -> float:
    """Fraction of passed test cases."""
    if len(outcomes) == 0:
        raise InvalidInputError("pass_rate of an empty outcome list is undefined")
    return float(sum(bool(o) for o in outcomes)) / len(outcomes)


def g_score(s_suite: float, s_iid: float) -> float:
    """Harmonic mean of a suite pass rate and an i.i.d. score."""
    if not (0.0 <= s_suite <= 1.0 and 0.0 <= s_iid <= 1.0):
        raise InvalidInputError("g_score inputs must lie in [0, 1]")
    if s_suite + s_iid == 0.0:
        return 0.0
    return 2.0 * s_suite * s_iid / (s_suite + s_iid)


def iid_metrics(preds: Sequence, labels: Sequence[int]) -> dict:
    """Accuracy under argmax plus the F1 score of class index 1."""
    if len(preds) != len(labels):
        raise InvalidInputError("predictions and labels differ in length")
    if len(preds) == 0:
        raise InvalidInputError("iid_metrics needs at least one example")
    predicted = np.array([int(np.argmax(np.asarray(p, dtype=float))) for p in preds])
    truth = np.asarray(labels, dtype=int)
    accuracy = float((predicted == truth).mean())
    tp = int(((predicted == 1) & (truth == 1)).sum())
    fp = int(((predicted == 1) & (truth != 1)).sum())
    fn = int(((predicted != 1) & (truth == 1)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return {"accuracy": accuracy, "f1_positive": f1}


def randomisation_test(outcomes_a: Sequence[float], outcomes_b: Sequence[float],
                       resamples: int = 10000,
                       rng: np.random.Generator | None = None) -> float:
    """Two-sided approximate randomisation test on paired per-case scores.

    Each resample swaps every pair with probability one half; the p-value is
    add-one smoothed so it can never be exactly zero.
    """
    a = np.asarray(outcomes_a, dtype=float)
    b = np.asarray(outcomes_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise InvalidInputError("paired score lists must be equal-length and non-empty")
    if resamples < 100:
        raise InvalidInputError("use at least 100 resamples")
    rng = rng or np.random.default_rng(0)
    diff = a - b
    observed = abs(float(diff.mean()))
    signs = np.where(rng.random((resamples, diff.size)) < 0.5, -1.0, 1.0)
    stats = np.abs((signs * diff).mean(axis=1))
    exceed = int((stats >= observed).sum())
    return (exceed + 1) / (resamples + 1)


def binomial_test(correct_a: int, correct_b: int, n: int) -> float:
    """Exact two-tailed sign test on discordant predictions.

    ``correct_a`` and ``correct_b`` count the cases where exactly one of the
    two models is correct (won by a and by b respectively), out of ``n``
    jointly evaluated cases.  The p-value sums all binomial(m, 1/2) point
    masses no larger than the observed one.
    """
    if n <= 0:
        raise InvalidInputError("binomial_test needs n >= 1")
    if correct_a < 0 or correct_b < 0 or correct_a > n or correct_b > n or correct_a + correct_b > n:
        raise InvalidInputError("discordant counts must be non-negative and fit in n")
    m = correct_a + correct_b
    if m == 0:
        return 1.0
    observed = comb(m, correct_a)
    numerator = sum(comb(m, k) for k in range(m + 1) if comb(m, k) <= observed)
    return numerator / 2 ** m


@dataclass
class AuditReport:
    predicted_freq: np.ndarray
    truth_freq: np.ndarray
    divergence: np.ndarray
    threshold: float
    flagged: bool
    flagged_classes: list


def degenerate_audit(preds: Sequence, labels: Sequence[int],
                     threshold: float = 0.2) -> AuditReport:
    """Compare predicted class frequencies against ground-truth frequencies
    and flag any class whose divergence exceeds the threshold."""
    if len(preds) == 0 or len(preds) != len(labels):
        raise InvalidInputError("audit needs matching non-empty predictions and labels")
    first = np.asarray(preds[0], dtype=float)
    num_classes = first.size
    predicted = np.array([int(np.argmax(np.asarray(p, dtype=float))) for p in preds])
    truth = np.asarray(labels, dtype=int)
    pred_freq = np.array([(predicted == c).mean() for c in range(num_classes)])
    truth_freq = np.array([(truth == c).mean() for c in range(num_classes)])
    divergence = np.abs(pred_freq - truth_freq)
    flagged_classes = [int(c) for c in np.nonzero(divergence > threshold)[0]]
    return AuditReport(pred_freq, truth_freq, divergence, threshold,
                       bool(flagged_classes), flagged_classes)


# ---------------------------------------------------------------------------
# report assembly


@dataclass(frozen=True)
class FunctionalityResult:
    """Per-case outcomes of one functionality under one scenario."""

    name: str
    case_ids: tuple
    outcomes: tuple

    @property
    def pass_rate(self) -> float:
        return pass_rate(self.outcomes)


@dataclass
class ScoreReport:
    per_functionality: dict            # scenario -> {functionality -> pass rate}
    aggregates: dict                   # scenario -> mean pass rate
    iid: dict                          # scenario -> {"accuracy", "f1_positive"}
    g_scores: dict                     # scenario -> harmonic mean
    significance: list = field(default_factory=list)
    functionality_order: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "per_functionality": self.per_functionality,
            "aggregates": self.aggregates,
            "iid": self.iid,
            "g_scores": self.g_scores,
            "significance": self.significance,
            "functionality_order": list(self.functionality_order),
        }

    def matrix_csv(self) -> str:
        """Scenario rows by functionality columns, average column first."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scenario", "average"] + list(self.functionality_order))
        for scenario in SCENARIO_ORDER:
            if scenario not in self.per_functionality:
                continue
            rates = self.per_functionality[scenario]
            row = [SCENARIO_LABELS[scenario], f"{self.aggregates[scenario]:.6f}"]
            row += [f"{rates[name]:.6f}" for name in self.functionality_order]
            writer.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        lines = []
        header = f"{'scenario':<10} {'suite':>8} {'iid-acc':>8} {'iid-f1':>8} {'G':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for scenario in SCENARIO_ORDER:
            if scenario not in self.aggregates:
                continue
            label = SCENARIO_LABELS[scenario]
            iid = self.iid.get(scenario, {})
            lines.append(
                f"{label:<10} {self.aggregates[scenario]:>8.4f} "
                f"{iid.get('accuracy', float('nan')):>8.4f} "
                f"{iid.get('f1_positive', float('nan')):>8.4f} "
                f"{self.g_scores[scenario]:>8.4f}"
            )
        for entry in self.significance:
            lines.append(
                f"significance {entry['comparison']}: {entry['test']} "
                f"p={entry['p_value']:.4f} ({entry['direction']})"
            )
        return "\n".join(lines) + "\n"


@dataclass
class BaselineData:
    """Raw baseline material for significance testing: per-case suite
    outcomes (by case id) and per-example i.i.d. correctness."""

    suite_outcomes: dict
    iid_correct: np.ndarray


def _paired_outcomes(results: Sequence[FunctionalityResult], baseline: BaselineData):
    a, b = [], []
    for res in results:
        for cid, outcome in zip(res.case_ids, res.outcomes):
            if cid in baseline.suite_outcomes:
                a.append(float(outcome))
                b.append(float(baseline.suite_outcomes[cid]))
    return np.array(a), np.array(b)


def compile_report(scenario_results: Mapping[str, Sequence[FunctionalityResult]],
                   iid_results: Mapping[str, Sequence[Mapping[str, float]]],
                   functionality_names: Sequence[str],
                   baseline: BaselineData | None = None,
                   iid_correct: Mapping[str, np.ndarray] | None = None,
                   resamples: int = 2000,
                   rng: np.random.Generator | None = None,
                   significance_level: float = 0.05) -> ScoreReport:
    """Assemble the score report from per-scenario functionality results.

    ``iid_results`` holds one metrics dict per training run of the scenario;
    axis scenarios average them.  When a baseline is given, each scenario's
    suite outcomes are compared with an approximate randomisation test and
    the seen run's i.i.d. correctness with an exact sign test.
    """
    expected = set(functionality_names)
    per_functionality: dict = {}
    aggregates: dict = {}
    iid_agg: dict = {}
    g_scores: dict = {}
    significance: list = []
    rng = rng or np.random.default_rng(0)

    for scenario, results in scenario_results.items():
        names = [r.name for r in results]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise IncompleteReportError(
                f"scenario {scenario!r} scores functionalities more than once: {dupes}")
        missing = expected - set(names)
        if missing:
            raise IncompleteReportError(
                f"scenario {scenario!r} lacks pass rates for: {sorted(missing)}")
        extra = set(names) - expected
        if extra:
            raise IncompleteReportError(
                f"scenario {scenario!r} scores unknown functionalities: {sorted(extra)}")
        rates = {r.name: r.pass_rate for r in results}
        per_functionality[scenario] = rates
        aggregates[scenario] = float(np.mean([rates[n] for n in functionality_names]))
        runs = iid_results.get(scenario, [])
        if not runs:
            raise IncompleteReportError(f"scenario {scenario!r} has no i.i.d. metrics")
        iid_agg[scenario] = {
            "accuracy": float(np.mean([r["accuracy"] for r in runs])),
            "f1_positive": float(np.mean([r["f1_positive"] for r in runs])),
        }
        g_scores[scenario] = g_score(aggregates[scenario], iid_agg[scenario]["accuracy"])

        if baseline is not None:
            a, b = _paired_outcomes(results, baseline)
            if a.size:
                p = randomisation_test(a, b, resamples=resamples, rng=rng)
                direction = "indistinguishable"
                if p < significance_level:
                    direction = "better" if a.mean() > b.mean() else "worse"
                significance.append({
                    "comparison": f"suite_{SCENARIO_LABELS[scenario]}_vs_baseline",
                    "test": "randomisation",
                    "p_value": float(p),
                    "direction": direction,
                })

    if baseline is not None and iid_correct:
        for scenario, correct in iid_correct.items():
            correct = np.asarray(correct, dtype=bool)
            base = baseline.iid_correct.astype(bool)
            if correct.size != base.size:
                continue
            wins_a = int((correct & ~base).sum())
            wins_b = int((~correct & base).sum())
            p = binomial_test(wins_a, wins_b, correct.size)
            direction = "indistinguishable"
            if p < significance_level:
                direction = "better" if wins_a > wins_b else "worse"
            significance.append({
                "comparison": f"iid_{SCENARIO_LABELS[scenario]}_vs_baseline",
                "test": "binomial",
                "p_value": float(p),
                "direction": direction,
            })

    return ScoreReport(
        per_functionality=per_functionality,
        aggregates=aggregates,
        iid=iid_agg,
        g_scores=g_scores,
        significance=significance,
        functionality_order=tuple(functionality_names),
    )
