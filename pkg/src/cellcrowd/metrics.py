"""Confusion matrices and the annotation-quality metrics suite.

Matrices are oriented rows = ground truth, columns = prediction. Consensus
matrices additionally carry per-true-class N/A counts for items whose ballot
produced no quorum. Two N/A policies exist:

* ``exclude``        — N/A items are dropped (routed to specialist review).
* ``count_as_error`` — N/A items enlarge the per-class denominators, which is
  how the published consensus accuracies (91.73 / 70.72 / 64.00) are formed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from cellcrowd.consensus import (
    ConsensusResult,
    GroundTruthRecord,
    Vote,
    estimate_consensus_accuracy,
    group_ballots,
    aggregate,
    pattern_label,
)
from cellcrowd.errors import DomainError, IncompleteBallot, UnknownItem
from cellcrowd.labels import CLASS_ORDER, MERGED_ORDER, CellClass

NaPolicy = Literal["exclude", "count_as_error"]

THREE_CLASS = tuple(c.value for c in CLASS_ORDER)
TWO_CLASS = tuple(c.value for c in MERGED_ORDER)

#: Metrics published for the "Individual" (per-vote, pooled) rows of the
#: study this pipeline replicates. Kept for the reconciliation section of the
#: report: the F/CBA/MCC entries are not reproducible from the published
#: per-vote counts by any pooled computation, and the report says so.
PUBLISHED_INDIVIDUAL_3C = {"sds": 0.8759, "f_measure": 0.7802, "cba": 0.7193, "mcc": 0.6748}
PUBLISHED_INDIVIDUAL_2C = {"sds": 0.8759, "f_measure": 0.8721, "cba": 0.8831, "mcc": 0.7194}


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count table plus optional per-true-class N/A counts."""

    labels: tuple[str, ...]
    counts: np.ndarray
    na_counts: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.labels)
        if counts.shape != (n, n):
            raise DomainError(f"counts shape {counts.shape} != ({n}, {n})")
        if (counts < 0).any():
            raise DomainError("negative counts")
        na = self.na_counts
        na = np.zeros(n, dtype=np.int64) if na is None else np.asarray(na, dtype=np.int64)
        if na.shape != (n,):
            raise DomainError(f"na_counts shape {na.shape} != ({n},)")
        if (na < 0).any():
            raise DomainError("negative N/A counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "na_counts", na)

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def grand_total(self) -> int:
        return int(self.counts.sum())

    def correct_total(self) -> int:
        return int(np.trace(self.counts))

    def na_total(self) -> int:
        return int(self.na_counts.sum())

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def to_csv(self) -> str:
        """Comma-separated table, truth rows x prediction columns, N/A last."""
        buf = io.StringIO()
        buf.write("truth\\prediction," + ",".join(self.labels) + ",na\n")
        for i, name in enumerate(self.labels):
            row = ",".join(str(int(c)) for c in self.counts[i])
            buf.write(f"{name},{row},{int(self.na_counts[i])}\n")
        return buf.getvalue()


def matrix_from_rows(
    rows: Sequence[Sequence[int]],
    labels: Sequence[str] = THREE_CLASS,
    na_counts: Sequence[int] | None = None,
) -> ConfusionMatrix:
    return ConfusionMatrix(tuple(labels), np.asarray(rows), None if na_counts is None else np.asarray(na_counts))


def _truth_index(truth: Iterable[GroundTruthRecord]) -> dict[str, CellClass]:
    return {r.item_id: r.true_label for r in truth}


def build_vote_matrix(
    votes: Iterable[Vote], truth: Iterable[GroundTruthRecord]
) -> ConfusionMatrix:
    """Per-vote confusion counts: every single worker answer is one tally."""
    lookup = _truth_index(truth)
    counts = np.zeros((3, 3), dtype=np.int64)
    order = {c: i for i, c in enumerate(CLASS_ORDER)}
    for v in votes:
        true = lookup.get(v.item_id)
        if true is None:
            raise UnknownItem(f"vote references unknown item {v.item_id!r}")
        counts[order[true], order[v.label]] += 1
    return ConfusionMatrix(THREE_CLASS, counts)


def build_consensus_matrix(
    results: Iterable[ConsensusResult], truth: Iterable[GroundTruthRecord]
) -> ConfusionMatrix:
    """Per-item confusion counts; no-quorum items land in the N/A tallies."""
    lookup = _truth_index(truth)
    counts = np.zeros((3, 3), dtype=np.int64)
    na = np.zeros(3, dtype=np.int64)
    order = {c: i for i, c in enumerate(CLASS_ORDER)}
    for r in results:
        true = lookup.get(r.item_id)
        if true is None:
            raise UnknownItem(f"consensus references unknown item {r.item_id!r}")
        if r.label is None:
            na[order[true]] += 1
        else:
            counts[order[true], order[r.label]] += 1
    return ConfusionMatrix(THREE_CLASS, counts, na)


def merge_matrix(m: ConfusionMatrix) -> ConfusionMatrix:
    """Fold the two deformation classes into one; N/A counts carry over."""
    if m.n_classes != 3:
        raise DomainError(f"merge_matrix expects a 3-class matrix, got {m.n_classes}")
    c = m.counts
    merged = np.array(
        [
            [c[0, 0], c[0, 1] + c[0, 2]],
            [c[1, 0] + c[2, 0], c[1, 1] + c[1, 2] + c[2, 1] + c[2, 2]],
        ],
        dtype=np.int64,
    )
    na = np.array([m.na_counts[0], m.na_counts[1] + m.na_counts[2]], dtype=np.int64)
    return ConfusionMatrix(TWO_CLASS, merged, na)


def per_class_accuracy(
    m: ConfusionMatrix, na_policy: NaPolicy = "exclude"
) -> dict[str, float | None]:
    """Diagonal over per-class totals; empty classes report None."""
    rows = m.row_totals()
    out: dict[str, float | None] = {}
    for i, name in enumerate(m.labels):
        denom = int(rows[i])
        if na_policy == "count_as_error":
            denom += int(m.na_counts[i])
        out[name] = (int(m.counts[i, i]) / denom) if denom else None
    return out


def overall_accuracy(m: ConfusionMatrix, na_policy: NaPolicy = "exclude") -> float | None:
    denom = m.grand_total()
    if na_policy == "count_as_error":
        denom += m.na_total()
    return (m.correct_total() / denom) if denom else None


def na_rate(m: ConfusionMatrix) -> float:
    total = m.grand_total() + m.na_total()
    return (m.na_total() / total) if total else 0.0


def sds_score(m: ConfusionMatrix, na_policy: NaPolicy = "exclude") -> float | None:
    """Diagnosis-support score.

    Correct labels and confusions between the two deformation classes count
    as useful; any confusion involving the circular class counts against.
    The protected class is the one labeled "circular" (first class otherwise).
    N/A items, when counted as error, enlarge only the denominator.
    """
    c = m.counts
    n = m.n_classes
    p = m.labels.index("circular") if "circular" in m.labels else 0
    tp = m.correct_total()
    benign = sum(
        int(c[i, j])
        for i in range(n)
        for j in range(n)
        if i != j and i != p and j != p
    )
    protected_errors = int(c[p, :].sum() + c[:, p].sum() - 2 * c[p, p])
    numerator = tp + benign
    denominator = numerator + protected_errors
    if na_policy == "count_as_error":
        denominator += m.na_total()
    return (numerator / denominator) if denominator else None


def f_measure(
    m: ConfusionMatrix,
    averaging: Literal["macro", "weighted"] = "macro",
    na_policy: NaPolicy = "exclude",
) -> float | None:
    """Mean per-class F1. Classes with zero support are left out of the macro
    average; under count_as_error the N/A items deflate recall."""
    rows = m.row_totals()
    cols = m.col_totals()
    supports: list[int] = []
    scores: list[float] = []
    for i in range(m.n_classes):
        support = int(rows[i])
        if na_policy == "count_as_error":
            support += int(m.na_counts[i])
        if support == 0:
            continue
        tp = int(m.counts[i, i])
        precision = tp / int(cols[i]) if cols[i] else 0.0
        recall = tp / support
        f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
        supports.append(support)
        scores.append(f1)
    if not scores:
        return None
    if averaging == "macro":
        return float(sum(scores) / len(scores))
    total = sum(supports)
    return float(sum(s * w for s, w in zip(scores, supports)) / total)


def cba(m: ConfusionMatrix, na_policy: NaPolicy = "exclude") -> float | None:
    """Class balance accuracy: mean over classes of diagonal over the larger
    of the class's truth total and prediction total. Classes absent from both
    axes are excluded from the mean."""
    rows = m.row_totals()
    cols = m.col_totals()
    terms: list[float] = []
    for i in range(m.n_classes):
        row = int(rows[i])
        if na_policy == "count_as_error":
            row += int(m.na_counts[i])
        col = int(cols[i])
        denom = max(row, col)
        if denom == 0:
            continue
        terms.append(int(m.counts[i, i]) / denom)
    return float(sum(terms) / len(terms)) if terms else None


def mcc(m: ConfusionMatrix, na_policy: NaPolicy = "exclude") -> float:
    """Multi-class Matthews correlation (Gorodkin's R_K).

    Returns 0 when either radicand is 0 (a constant margin carries no
    correlation signal). Under count_as_error, N/A tallies join as an extra
    prediction category with no matching truth row.
    """
    counts = m.counts.astype(np.float64)
    if na_policy == "count_as_error" and m.na_total() > 0:
        n = m.n_classes
        square = np.zeros((n + 1, n + 1), dtype=np.float64)
        square[:n, :n] = counts
        square[:n, n] = m.na_counts
        counts = square
    t = counts.sum(axis=1)
    p = counts.sum(axis=0)
    s = counts.sum()
    c = np.trace(counts)
    num = c * s - float(np.dot(p, t))
    r1 = s * s - float(np.dot(p, p))
    r2 = s * s - float(np.dot(t, t))
    if r1 <= 0.0 or r2 <= 0.0:
        return 0.0
    return float(num / math.sqrt(r1 * r2))


@dataclass(frozen=True)
class MetricsReport:
    """All quality metrics for one confusion matrix under one N/A policy."""

    per_class_accuracy: dict[str, float | None]
    overall_accuracy: float | None
    f_macro: float | None
    f_weighted: float | None
    sds: float | None
    cba: float | None
    mcc: float
    na_rate: float


def metrics_bundle(m: ConfusionMatrix, na_policy: NaPolicy = "exclude") -> MetricsReport:
    return MetricsReport(
        per_class_accuracy=per_class_accuracy(m, na_policy),
        overall_accuracy=overall_accuracy(m, na_policy),
        f_macro=f_measure(m, "macro", na_policy),
        f_weighted=f_measure(m, "weighted", na_policy),
        sds=sds_score(m, na_policy),
        cba=cba(m, na_policy),
        mcc=mcc(m, na_policy),
        na_rate=na_rate(m),
    )


@dataclass
class MatrixStack:
    """Every matrix the report needs, built once from votes plus truth."""

    vote: ConfusionMatrix
    consensus: ConfusionMatrix
    by_level: dict[int, ConfusionMatrix]
    pattern_histogram: dict[str, int]
    results: list[ConsensusResult]
    incomplete_items: list[str] = field(default_factory=list)
    k: int = 5


def build_matrix_stack(
    votes: list[Vote], truth: list[GroundTruthRecord], k: int = 5
) -> MatrixStack:
    """Group votes into ballots, aggregate, and tabulate every view.

    Items with fewer than k votes are skipped (reported in
    ``incomplete_items``) rather than failing the whole stack.
    """
    ballots = group_ballots(votes, k=k)
    results: list[ConsensusResult] = []
    incomplete: list[str] = []
    complete_votes: list[Vote] = []
    histogram: dict[str, int] = {}
    for item_id, ballot in ballots.items():
        if not ballot.complete:
            incomplete.append(item_id)
            continue
        result = aggregate(ballot)
        results.append(result)
        complete_votes.extend(ballot.votes)
        key = pattern_label(result.pattern)
        histogram[key] = histogram.get(key, 0) + 1
    vote_matrix = build_vote_matrix(complete_votes, truth)
    consensus_matrix = build_consensus_matrix(results, truth)
    by_level = {
        level: build_consensus_matrix(
            [r for r in results if r.agreement_level == level], truth
        )
        for level in (5, 4, 3)
    }
    return MatrixStack(
        vote=vote_matrix,
        consensus=consensus_matrix,
        by_level=by_level,
        pattern_histogram=histogram,
        results=results,
        incomplete_items=incomplete,
        k=k,
    )


@dataclass(frozen=True)
class ReconciliationNote:
    """Computed-vs-published comparison for one metric of the Individual row."""

    alphabet: str
    metric: str
    published: float
    computed: float | None

    @property
    def matches(self) -> bool:
        return self.computed is not None and abs(self.computed - self.published) <= 5e-4


@dataclass
class StudyReport:
    """Full analog of the study's result tables for one vote corpus."""

    na_policy: NaPolicy
    stack: MatrixStack
    vote_accuracy: dict[str, float | None]
    consensus_accuracy: dict[str, float | None]
    estimates: dict[str, dict[str, float | None]]
    rows_3c: dict[str, MetricsReport]
    rows_2c: dict[str, MetricsReport]
    reconciliation: list[ReconciliationNote]

    ROW_ORDER = ("individual", "aggregated", "consensus", "5 agree", "4 agree", "3 agree")


def full_report(stack: MatrixStack, na_policy: NaPolicy = "exclude") -> StudyReport:
    """Compute every metric row for the 3-class and merged 2-class views.

    Individual = pooled per-vote counts; aggregated = consensus with N/A
    counted as error; consensus and the agreement-level splits follow the
    requested policy. Component failures surface as absent (None) cells.
    """
    vote_acc = per_class_accuracy(stack.vote)
    consensus_acc = per_class_accuracy(stack.consensus, "count_as_error")

    estimates: dict[str, dict[str, float | None]] = {}
    for name in stack.vote.labels:
        alpha = vote_acc[name]
        estimates[name] = {
            "alpha": alpha,
            "estimated": estimate_consensus_accuracy(alpha) if alpha is not None else None,
            "observed": consensus_acc[name],
        }

    def rows_for(three_class: bool) -> dict[str, MetricsReport]:
        def view(m: ConfusionMatrix) -> ConfusionMatrix:
            return m if three_class else merge_matrix(m)

        return {
            "individual": metrics_bundle(view(stack.vote), "exclude"),
            "aggregated": metrics_bundle(view(stack.consensus), "count_as_error"),
            "consensus": metrics_bundle(view(stack.consensus), na_policy),
            "5 agree": metrics_bundle(view(stack.by_level[5]), na_policy),
            "4 agree": metrics_bundle(view(stack.by_level[4]), na_policy),
            "3 agree": metrics_bundle(view(stack.by_level[3]), na_policy),
        }

    rows_3c = rows_for(True)
    rows_2c = rows_for(False)

    reconciliation = []
    for alphabet, rows, published in (
        ("3-class", rows_3c, PUBLISHED_INDIVIDUAL_3C),
        ("2-class", rows_2c, PUBLISHED_INDIVIDUAL_2C),
    ):
        individual = rows["individual"]
        computed = {
            "sds": individual.sds,
            "f_measure": individual.f_macro,
            "cba": individual.cba,
            "mcc": individual.mcc,
        }
        for metric, value in published.items():
            reconciliation.append(
                ReconciliationNote(alphabet, metric, value, computed[metric])
            )

    return StudyReport(
        na_policy=na_policy,
        stack=stack,
        vote_accuracy=vote_acc,
        consensus_accuracy=consensus_acc,
        estimates=estimates,
        rows_3c=rows_3c,
        rows_2c=rows_2c,
        reconciliation=reconciliation,
    )


def report_as_dict(report: StudyReport) -> dict:
    """JSON-friendly rendering of a study report (4-decimal rounding)."""

    def num(x: float | None) -> float | None:
        return None if x is None else round(float(x), 4)

    def bundle(r: MetricsReport) -> dict:
        return {
            "per_class_accuracy": {k: num(v) for k, v in r.per_class_accuracy.items()},
            "overall_accuracy": num(r.overall_accuracy),
            "f_macro": num(r.f_macro),
            "f_weighted": num(r.f_weighted),
            "sds": num(r.sds),
            "cba": num(r.cba),
            "mcc": num(r.mcc),
            "na_rate": num(r.na_rate),
        }

    stack = report.stack
    hist = stack.pattern_histogram
    return {
        "na_policy": report.na_policy,
        "vote_matrix": stack.vote.counts.tolist(),
        "consensus_matrix": stack.consensus.counts.tolist(),
        "consensus_na": stack.consensus.na_counts.tolist(),
        "vote_accuracy": {k: num(v) for k, v in report.vote_accuracy.items()},
        "consensus_accuracy": {k: num(v) for k, v in report.consensus_accuracy.items()},
        "pattern_histogram": {
            "5": hist.get("5", 0),
            "4-1": hist.get("4-1", 0),
            "3-*": hist.get("3-2", 0) + hist.get("3-1-1", 0),
            "2-2-1": hist.get("2-2-1", 0),
        },
        "estimates": {
            name: {k: num(v) for k, v in row.items()}
            for name, row in report.estimates.items()
        },
        "metrics_3c": {name: bundle(r) for name, r in report.rows_3c.items()},
        "metrics_2c": {name: bundle(r) for name, r in report.rows_2c.items()},
        "reconciliation": [
            {
                "alphabet": n.alphabet,
                "metric": n.metric,
                "published": n.published,
                "computed": num(n.computed),
                "matches": n.matches,
            }
            for n in report.reconciliation
        ],
        "incomplete_items": len(stack.incomplete_items),
    }


def _fmt(x: float | None) -> str:
    return "    NA" if x is None else f"{x:.4f}"


def render_report(report: StudyReport) -> str:
    """Fixed-layout text rendering, 4-decimal rounding, stable row order."""
    stack = report.stack
    out = io.StringIO()

    out.write("== Per-vote confusion (truth rows x prediction columns) ==\n")
    out.write(stack.vote.to_csv())
    out.write("per-class accuracy: ")
    out.write(
        "  ".join(f"{k}={_fmt(v)}" for k, v in report.vote_accuracy.items()) + "\n\n"
    )

    out.write("== Consensus results ==\n")
    out.write(stack.consensus.to_csv())
    rows = stack.consensus.row_totals()
    for i, name in enumerate(stack.consensus.labels):
        correct = int(stack.consensus.counts[i, i])
        total = int(rows[i]) + int(stack.consensus.na_counts[i])
        acc = report.consensus_accuracy[name]
        out.write(f"{name}: correct={correct} total={total} accuracy={_fmt(acc)}\n")
    out.write("\n")

    out.write("== Agreement pattern histogram ==\n")
    hist = stack.pattern_histogram
    n3 = hist.get("3-2", 0) + hist.get("3-1-1", 0)
    out.write(
        f"5={hist.get('5', 0)}  4-1={hist.get('4-1', 0)}  3-*={n3}  2-2-1={hist.get('2-2-1', 0)}\n\n"
    )

    out.write("== Independence estimate vs observed consensus accuracy ==\n")
    for name, row in report.estimates.items():
        out.write(
            f"{name}: alpha={_fmt(row['alpha'])} estimated={_fmt(row['estimated'])} "
            f"observed={_fmt(row['observed'])}\n"
        )
    out.write("\n")

    for title, rows_by_name in (
        ("3 classes", report.rows_3c),
        ("2 classes (deformations merged)", report.rows_2c),
    ):
        out.write(f"== Metrics, {title} ==\n")
        out.write(f"{'row':<12} {'sds':>7} {'f-macro':>8} {'f-wtd':>7} {'cba':>7} {'mcc':>7} {'na':>7}\n")
        for name in StudyReport.ROW_ORDER:
            r = rows_by_name[name]
            out.write(
                f"{name:<12} {_fmt(r.sds):>7} {_fmt(r.f_macro):>8} {_fmt(r.f_weighted):>7} "
                f"{_fmt(r.cba):>7} {_fmt(r.mcc):>7} {r.na_rate:>7.4f}\n"
            )
        out.write("\n")

    out.write("== Published-value reconciliation (Individual row) ==\n")
    out.write(
        "published Individual-row metrics refer to the erythrocyte study corpus;\n"
        "DIFFERS marks values not reproducible from pooled counts\n"
    )
    for note in report.reconciliation:
        status = "match  " if note.matches else "DIFFERS"
        out.write(
            f"{status} {note.alphabet} {note.metric}: published={note.published:.4f} "
            f"pooled={_fmt(note.computed)}\n"
        )
    if stack.incomplete_items:
        out.write(f"\nincomplete ballots skipped: {len(stack.incomplete_items)}\n")
    return out.getvalue()
