"""Accuracy, exact one-tailed significance tests, and comparison reports.

The headline test asks: if a strategy really had the baseline's accuracy
p0, how likely is a correct-count at least as large as the one observed?
That upper tail of Binomial(m, p0) is computed exactly in log space, so it
stays accurate for evaluation sizes into the millions.  An exact one-tailed
McNemar test on the paired disagreements is available as an alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TESTS = ("binomial", "mcnemar")


def accuracy(gold, predicted) -> float:
    """Fraction of positions where the prediction matches gold."""
    gold = np.asarray(gold)
    predicted = np.asarray(predicted)
    if gold.shape != predicted.shape:
        raise ValueError("gold and predicted differ in length")
    if gold.size == 0:
        raise ValueError("cannot compute accuracy of an empty prediction set")
    return float(np.count_nonzero(gold == predicted) / gold.size)


def binomial_test_one_tailed(successes: int, trials: int, baseline_rate: float) -> float:
    """Exact upper tail P[X >= successes] for X ~ Binomial(trials, baseline_rate).

    Terms are accumulated as exp of log-binomial terms, shifted by the
    largest exponent and compensated-summed, so the tail neither under- nor
    overflows for trials up to about 10^6.
    """
    k, m = int(successes), int(trials)
    if m < 1:
        raise ValueError("trials must be positive")
    if not (0 <= k <= m):
        raise ValueError(f"successes must lie in [0, {m}], got {k}")
    p0 = float(baseline_rate)
    if not (0.0 < p0 < 1.0):
        raise ValueError(f"baseline rate must lie strictly between 0 and 1, got {p0!r}")
    if k == 0:
        return 1.0
    log_fact = np.zeros(m + 1)
    log_fact[1:] = np.cumsum(np.log(np.arange(1, m + 1, dtype=np.float64)))
    j = np.arange(k, m + 1)
    log_terms = (
        log_fact[m]
        - log_fact[j]
        - log_fact[m - j]
        + j * math.log(p0)
        + (m - j) * math.log1p(-p0)
    )
    shift = float(log_terms.max())
    total = math.fsum(np.exp(log_terms - shift).tolist())
    if total <= 0.0:
        return 0.0
    log_p = shift + math.log(total)
    return min(math.exp(log_p), 1.0) if log_p < 0.0 else 1.0


def _binomial_tail_allowing_degenerate(k: int, m: int, p0: float) -> float:
    """Tail probability extended to p0 in {0, 1} by its limiting value."""
    if p0 <= 0.0:
        return 1.0 if k == 0 else 0.0
    if p0 >= 1.0:
        return 1.0
    return binomial_test_one_tailed(k, m, p0)


def mcnemar_test_one_tailed(gold, baseline_predicted, predicted) -> float:
    """Exact one-tailed McNemar test on the paired disagreements.

    Under the null the two prediction sets are equally accurate, so the
    examples where exactly one of them is correct split Binomial(n, 1/2);
    the p-value is the upper tail at the count won by ``predicted``.  With
    no disagreements the p-value is 1.
    """
    gold = np.asarray(gold)
    base_ok = np.asarray(baseline_predicted) == gold
    pred_ok = np.asarray(predicted) == gold
    if base_ok.shape != gold.shape or pred_ok.shape != gold.shape:
        raise ValueError("prediction vectors must match gold in length")
    wins = int(np.count_nonzero(pred_ok & ~base_ok))
    losses = int(np.count_nonzero(base_ok & ~pred_ok))
    n = wins + losses
    if n == 0:
        return 1.0
    return binomial_test_one_tailed(wins, n, 0.5)


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    accuracy: float
    loss: int
    p_value: float


@dataclass(frozen=True)
class ComparisonReport:
    """One row per strategy, each tested against the named baseline."""

    rows: tuple
    baseline: str
    m: int
    test: str
    metric: str = "accuracy"


def compare(results, gold, baseline_name: str, test: str = "binomial") -> ComparisonReport:
    """Score each (name, predictions) pair and test it against the baseline.

    With the binomial test, each strategy's correct-count is tested against
    the baseline's accuracy as the null rate (degenerate baseline accuracies
    of 0 or 1 use the tail's limiting value).  With the McNemar test, each
    strategy is paired example-by-example against the baseline's predictions.
    """
    if test not in TESTS:
        raise ValueError(f"unknown test {test!r}; choose one of {TESTS}")
    gold = np.asarray(gold)
    if gold.size == 0:
        raise ValueError("cannot compare on an empty gold vector")
    names = [name for name, _ in results]
    if len(set(names)) != len(names):
        raise ValueError("strategy names must be unique")
    if baseline_name not in names:
        raise ValueError(f"unknown baseline {baseline_name!r}; strategies: {names}")
    preds = {}
    for name, p in results:
        p = np.asarray(p)
        if p.shape != gold.shape:
            raise ValueError(f"predictions for {name!r} do not match gold in length")
        preds[name] = p
    m = int(gold.size)
    p0 = accuracy(gold, preds[baseline_name])
    rows = []
    for name in names:
        correct = int(np.count_nonzero(preds[name] == gold))
        if test == "binomial":
            p_value = _binomial_tail_allowing_degenerate(correct, m, p0)
        else:
            p_value = mcnemar_test_one_tailed(gold, preds[baseline_name], preds[name])
        rows.append(
            ReportRow(strategy=name, accuracy=correct / m, loss=m - correct, p_value=p_value)
        )
    return ComparisonReport(rows=tuple(rows), baseline=baseline_name, m=m, test=test)


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "baseline": report.baseline,
        "m": report.m,
        "metric": report.metric,
        "test": report.test,
        "rows": [
            {
                "strategy": r.strategy,
                "accuracy": r.accuracy,
                "loss": r.loss,
                "p_value": r.p_value,
            }
            for r in report.rows
        ],
    }


def format_table(report: ComparisonReport) -> str:
    """Aligned plain-text table: one strategy per row, metrics as columns."""
    header = ("strategy", "accuracy", "loss", f"p vs {report.baseline}")
    body = [
        (r.strategy + (" *" if r.strategy == report.baseline else ""),
         f"{r.accuracy:.4f}", str(r.loss), f"{r.p_value:.4g}")
        for r in report.rows
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(4)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    lines.append(f"(m = {report.m}, metric = {report.metric}, test = {report.test}, * = baseline)")
    return "\n".join(lines)
