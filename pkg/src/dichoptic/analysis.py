"""Scoring and statistics over session logs.

Accuracies, false-negative/false-positive decomposition, per-position
detection matrices, questionnaire aggregation, and the significance tests
used to compare conditions: paired and Welch t-tests and a one-way
repeated-measures ANOVA. p-values come from the t and F distributions via
the regularized incomplete beta function; sample (n-1) standard deviations
throughout. Training trials are excluded from all summaries.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .scenes import SET_KINDS
from .session import SessionLog, ResponseRecord, TLX_SUBSCALES


@dataclass(frozen=True)
class TestResult:
    """Outcome of one significance test.

    ``df`` is a single (possibly fractional) value for t-tests and a
    (numerator, denominator) pair for F-tests. ``note`` flags degenerate
    inputs handled by convention.
    """

    kind: str
    statistic: float
    df: float | tuple[float, float]
    p_value: float
    note: str | None = None


def _sample_var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1))


def _t_p_value(t: float, df: float) -> float:
    """Two-tailed p for a t statistic via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def _f_p_value(f: float, df1: float, df2: float) -> float:
    """Upper-tail p for an F statistic via the regularized incomplete beta."""
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return float(betainc(df2 / 2.0, df1 / 2.0, x))


def t_test_paired(a, b) -> TestResult:
    """Paired-samples t-test (two-tailed)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = float(d.mean())
    var = _sample_var(d)
    df = float(n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TestResult("t_paired", 0.0, df, 1.0)
        t = math.inf if mean > 0 else -math.inf
        return TestResult("t_paired", t, df, 0.0, note="zero variance, nonzero difference")
    t = mean / math.sqrt(var / n)
    return TestResult("t_paired", t, df, _t_p_value(t, df))


def t_test_welch(a, b) -> TestResult:
    """Independent-samples t-test without equal-variance assumption.

    Degrees of freedom follow Welch-Satterthwaite and are fractional in
    general.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        raise ValueError("need at least two observations per group")
    v1, v2 = _sample_var(a), _sample_var(b)
    mean_diff = float(a.mean() - b.mean())
    se2 = v1 / n1 + v2 / n2
    if se2 == 0.0:
        df = float(n1 + n2 - 2)
        if mean_diff == 0.0:
            return TestResult("t_welch", 0.0, df, 1.0)
        t = math.inf if mean_diff > 0 else -math.inf
        return TestResult("t_welch", t, df, 0.0, note="zero variance, nonzero difference")
    df = se2 * se2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    t = mean_diff / math.sqrt(se2)
    return TestResult("t_welch", t, float(df), _t_p_value(t, float(df)))


def rm_anova_oneway(data) -> TestResult:
    """One-way repeated-measures ANOVA over a participants x conditions matrix.

    F = MS_condition / MS_error with df = (k - 1, (k - 1)(n - 1)); no
    sphericity correction is applied (reported df stay uncorrected).
    """
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ValueError("need a complete matrix with >= 2 participants and >= 2 conditions")
    n, k = m.shape
    grand = m.mean()
    cond_means = m.mean(axis=0)
    subj_means = m.mean(axis=1)
    ss_cond = n * float(((cond_means - grand) ** 2).sum())
    ss_subj = k * float(((subj_means - grand) ** 2).sum())
    ss_total = float(((m - grand) ** 2).sum())
    ss_error = ss_total - ss_cond - ss_subj
    df1 = float(k - 1)
    df2 = float((k - 1) * (n - 1))
    if ss_cond == 0.0:
        return TestResult("rm_anova", 0.0, (df1, df2), 1.0)
    if ss_error <= 0.0:
        return TestResult(
            "rm_anova", math.inf, (df1, df2), 0.0, note="zero error variance"
        )
    f = (ss_cond / df1) / (ss_error / df2)
    return TestResult("rm_anova", f, (df1, df2), _f_p_value(f, df1, df2))


# ---------------------------------------------------------------------------
# log scoring

@dataclass
class SetSummary:
    set_kind: str
    n_trials: int
    n_correct: int
    accuracy: float
    false_negatives: int
    false_positives: int
    fn_share_of_errors: float | None  # None when there are no errors
    per_participant: dict[str, float] = field(default_factory=dict)
    mean_accuracy: float = 0.0
    sd_accuracy: float = 0.0


@dataclass
class SummaryReport:
    per_set: dict[str, SetSummary]
    overall: SetSummary


def _scored(log: SessionLog):
    return [r for r in log.responses if not r.training]


def _make_summary(set_kind: str, rows: list[tuple[str, ResponseRecord]]) -> SetSummary:
    n = len(rows)
    correct = sum(1 for _, r in rows if r.correct)
    fn = sum(1 for _, r in rows if r.target_present and not r.answer)
    fp = sum(1 for _, r in rows if not r.target_present and r.answer)
    errors = fn + fp
    by_participant = defaultdict(list)
    for pid, r in rows:
        by_participant[pid].append(r.correct)
    per_participant = {pid: sum(v) / len(v) for pid, v in sorted(by_participant.items())}
    values = list(per_participant.values())
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return SetSummary(
        set_kind=set_kind,
        n_trials=n,
        n_correct=correct,
        accuracy=correct / n,
        false_negatives=fn,
        false_positives=fp,
        fn_share_of_errors=(fn / errors) if errors else None,
        per_participant=per_participant,
        mean_accuracy=mean,
        sd_accuracy=sd,
    )


def summarize(logs: list[SessionLog]) -> SummaryReport:
    """Per-set and overall accuracy summaries across sessions."""
    if not logs:
        raise ValueError("no session logs given")
    rows = []
    for log in logs:
        for r in _scored(log):
            rows.append((log.participant_id, r))
    if not rows:
        raise ValueError("session logs contain no scored responses")
    per_set = {}
    for kind in SET_KINDS:
        kind_rows = [(pid, r) for pid, r in rows if r.set_kind == kind]
        if kind_rows:
            per_set[kind] = _make_summary(kind, kind_rows)
    overall = _make_summary("overall", rows)
    return SummaryReport(per_set=per_set, overall=overall)


def accuracy_matrix(logs: list[SessionLog], kinds=SET_KINDS):
    """Participants x set-kind accuracy matrix (for the repeated-measures test)."""
    per = defaultdict(dict)
    for log in logs:
        by_kind = defaultdict(list)
        for r in _scored(log):
            by_kind[r.set_kind].append(r.correct)
        for kind, vals in by_kind.items():
            per[log.participant_id][kind] = sum(vals) / len(vals)
    participants = sorted(per)
    rows = []
    for pid in participants:
        if any(kind not in per[pid] for kind in kinds):
            raise ValueError(f"participant {pid} lacks data for some set kinds")
        rows.append([per[pid][kind] for kind in kinds])
    return participants, np.asarray(rows)


@dataclass
class PositionMatrix:
    """Per-grid-cell detection success over target trials (NaN = no data)."""

    rates: np.ndarray  # (rows, cols) float with NaN for never-targeted cells
    counts: np.ndarray  # (rows, cols) int
    depth_plane: int | None = None


def position_matrix(
    logs: list[SessionLog],
    grid_shape: tuple[int, int] = (5, 6),
    depth_plane: int | None = None,
) -> PositionMatrix:
    """Detection success per target position, optionally for one depth plane."""
    rows, cols = grid_shape
    hits = np.zeros(grid_shape, dtype=np.int64)
    counts = np.zeros(grid_shape, dtype=np.int64)
    for log in logs:
        for r in _scored(log):
            if not r.target_present or r.target_row is None:
                continue
            if depth_plane is not None and r.target_plane != depth_plane:
                continue
            counts[r.target_row, r.target_col] += 1
            if r.answer:
                hits[r.target_row, r.target_col] += 1
    with np.errstate(invalid="ignore"):
        rates = np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
    return PositionMatrix(rates=rates, counts=counts, depth_plane=depth_plane)


def position_matrices_by_plane(logs, grid_shape=(5, 6), n_planes: int = 3):
    return {p: position_matrix(logs, grid_shape, depth_plane=p) for p in range(n_planes)}


# ---------------------------------------------------------------------------
# questionnaires

def tlx_aggregate(logs: list[SessionLog]) -> dict[str, dict[str, tuple[float, float]]]:
    """Mean and sample SD per workload subscale and custom item, per block label."""
    by_block = defaultdict(lambda: defaultdict(list))
    for log in logs:
        for q in log.questionnaires:
            if q.kind == "nasa_tlx":
                for name, value in q.tlx.items():
                    by_block[q.block_label][name].append(value)
            else:
                by_block[q.block_label]["clearness"].append(q.clearness)
                by_block[q.block_label]["decision_making"].append(q.decision_making)
    out = {}
    for label, items in sorted(by_block.items()):
        out[label] = {}
        for name, values in sorted(items.items()):
            arr = np.asarray(values, dtype=np.float64)
            sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            out[label][name] = (float(arr.mean()), sd)
    return out


def tlx_paired_tests(logs: list[SessionLog], labels=("after_exp1", "after_exp2")):
    """Paired t-tests per subscale between two questionnaire blocks."""
    a_label, b_label = labels
    per_subscale = {}
    for name in TLX_SUBSCALES:
        a, b = [], []
        for log in logs:
            scores = {q.block_label: q.tlx for q in log.questionnaires if q.kind == "nasa_tlx"}
            if a_label in scores and b_label in scores:
                a.append(scores[a_label][name])
                b.append(scores[b_label][name])
        if len(a) >= 2:
            per_subscale[name] = t_test_paired(a, b)
    return per_subscale


# ---------------------------------------------------------------------------
# tabular output

def summary_to_csv(report: SummaryReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["set_kind", "n_trials", "accuracy", "mean_accuracy", "sd_accuracy",
         "false_negatives", "false_positives", "fn_share_of_errors"]
    )
    for kind, s in list(report.per_set.items()) + [("overall", report.overall)]:
        writer.writerow(
            [s.set_kind, s.n_trials, f"{s.accuracy:.6f}", f"{s.mean_accuracy:.6f}",
             f"{s.sd_accuracy:.6f}", s.false_negatives, s.false_positives,
             "" if s.fn_share_of_errors is None else f"{s.fn_share_of_errors:.6f}"]
        )
    return buf.getvalue()


def matrix_to_csv(matrix: PositionMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    rows, cols = matrix.rates.shape
    writer.writerow(["row", "col", "rate", "count"])
    for r in range(rows):
        for c in range(cols):
            rate = matrix.rates[r, c]
            writer.writerow([r, c, "" if np.isnan(rate) else f"{rate:.6f}", int(matrix.counts[r, c])])
    return buf.getvalue()


def tlx_to_csv(aggregate: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["block", "item", "mean", "sd"])
    for label, items in aggregate.items():
        for name, (mean, sd) in items.items():
            writer.writerow([label, name, f"{mean:.6f}", f"{sd:.6f}"])
    return buf.getvalue()


def tests_to_csv(results: dict[str, TestResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["name", "kind", "statistic", "df", "p_value", "note"])
    for name, r in results.items():
        df = f"{r.df[0]:g};{r.df[1]:g}" if isinstance(r.df, tuple) else f"{r.df:g}"
        writer.writerow([name, r.kind, f"{r.statistic:.6g}", df, f"{r.p_value:.6g}", r.note or ""])
    return buf.getvalue()
