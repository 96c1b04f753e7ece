"""Segment-based and event-based scoring of detector output.

Segment scoring compares activity rolls cell by cell and prices joint
errors per segment: a false positive paired with a false negative inside
the same segment counts as one substitution rather than two errors.
Event scoring matches whole events greedily under an onset (and optionally
offset) collar.  ROC/AUC treats each class-segment cell as one score.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import EventList, EventRoll, Vocabulary, events_to_roll, load_event_list
from .errors import ComparisonError, DimensionError, DomainError, UndefinedMetricError


@dataclass
class SegmentCounts:
    """Pooled intermediate counts; S/D/I stay zero under event semantics."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    n_ref: int = 0

    def __add__(self, other: "SegmentCounts") -> "SegmentCounts":
        return SegmentCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.n_ref + other.n_ref,
        )


def segment_counts(ref: EventRoll, sys: EventRoll) -> SegmentCounts:
    """Cell-wise counts plus per-segment substitution pairing.

    In each segment k, S(k) = min(FP(k), FN(k)) misses pair off as
    substitutions; the remainders are deletions D(k) = FN(k) - S(k) and
    insertions I(k) = FP(k) - S(k).  N is the number of active reference
    cells.
    """
    if ref.activity.shape != sys.activity.shape:
        raise DimensionError(
            f"roll shapes differ: {ref.activity.shape} vs {sys.activity.shape}"
        )
    if ref.segment_len_s != sys.segment_len_s:
        raise DimensionError("rolls use different segment lengths")
    if ref.vocabulary != sys.vocabulary:
        raise DimensionError("rolls use different vocabularies")
    r = ref.activity.astype(bool)
    s = sys.activity.astype(bool)
    tp_cells = r & s
    fp_cells = s & ~r
    fn_cells = r & ~s
    fp_per_seg = fp_cells.sum(axis=0)
    fn_per_seg = fn_cells.sum(axis=0)
    subs = np.minimum(fp_per_seg, fn_per_seg)
    return SegmentCounts(
        tp=int(tp_cells.sum()),
        fp=int(fp_cells.sum()),
        fn=int(fn_cells.sum()),
        tn=int((~r & ~s).sum()),
        substitutions=int(subs.sum()),
        deletions=int((fn_per_seg - subs).sum()),
        insertions=int((fp_per_seg - subs).sum()),
        n_ref=int(r.sum()),
    )


def precision_recall_f(counts: SegmentCounts) -> tuple[float, float, float]:
    """P, R, and F1 from pooled counts; all three are 0 when TP is 0."""
    if counts.tp == 0:
        return 0.0, 0.0, 0.0
    precision = counts.tp / (counts.tp + counts.fp)
    recall = counts.tp / (counts.tp + counts.fn)
    f_score = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f_score


def error_rate(counts: SegmentCounts) -> float:
    """(S + D + I) / N; undefined when there are no reference positives."""
    if counts.n_ref == 0:
        raise UndefinedMetricError("error rate is undefined without reference activity")
    return (counts.substitutions + counts.deletions + counts.insertions) / counts.n_ref


def event_based_counts(
    ref: EventList,
    sys: EventList,
    collar_s: float = 0.2,
    use_offset: bool = False,
) -> SegmentCounts:
    """Greedy event matching under a time collar.

    A system event qualifies for a reference event when labels agree, the
    onsets differ by at most collar_s, and (when use_offset is set) the
    offsets also differ by at most collar_s.  References are visited in
    onset order and each takes the earliest-onset unmatched qualifying
    system event.  Event semantics: deletions and insertions mirror the
    unmatched counts, substitutions stay zero.
    """
    if collar_s < 0:
        raise DomainError("collar_s must be non-negative")
    sys_events = list(sys)
    matched = [False] * len(sys_events)
    tp = 0
    for r in ref:
        for j, s in enumerate(sys_events):
            if matched[j] or s.label != r.label:
                continue
            if abs(s.onset_s - r.onset_s) > collar_s:
                continue
            if use_offset and abs(s.offset_s - r.offset_s) > collar_s:
                continue
            matched[j] = True
            tp += 1
            break
    fp = len(sys_events) - tp
    fn = len(ref) - tp
    return SegmentCounts(
        tp=tp, fp=fp, fn=fn, tn=0,
        substitutions=0, deletions=fn, insertions=fp,
        n_ref=len(ref),
    )


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve by the rank/probability definition.

    Equals the probability that a uniformly drawn positive scores above a
    uniformly drawn negative, counting ties as one half.  Needs at least
    one positive and one negative.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise DimensionError("scores and labels must have the same length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC needs both classes (got {n_pos} positives, {n_neg} negatives)"
        )
    # average ranks (1-based) with ties sharing their group's mean rank
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[labels].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class MetricsReport:
    """Pooled counts and derived metrics for one evaluation run."""

    mode: str
    params: dict
    counts: SegmentCounts
    precision: float
    recall: float
    f_score: float
    error_rate: float

    FIELD_ORDER = (
        "mode", "params", "tp", "fp", "fn", "tn",
        "substitutions", "deletions", "insertions", "n_ref",
        "precision", "recall", "f_score", "error_rate",
    )

    def row(self) -> dict:
        return {
            "mode": self.mode,
            "params": ";".join(f"{k}={v}" for k, v in sorted(self.params.items())),
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "tn": self.counts.tn,
            "substitutions": self.counts.substitutions,
            "deletions": self.counts.deletions,
            "insertions": self.counts.insertions,
            "n_ref": self.counts.n_ref,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "error_rate": self.error_rate,
        }

    def to_tsv(self) -> str:
        row = self.row()
        head = "\t".join(self.FIELD_ORDER)
        body = "\t".join(
            f"{row[k]:.6f}" if isinstance(row[k], float) else str(row[k])
            for k in self.FIELD_ORDER
        )
        return f"{head}\n{body}\n"

    def to_text(self) -> str:
        row = self.row()
        lines = [f"evaluation mode: {row['mode']}", f"settings: {row['params'] or '-'}"]
        lines.append(
            "counts: TP={tp} FP={fp} FN={fn} TN={tn} S={substitutions} "
            "D={deletions} I={insertions} N={n_ref}".format(**row)
        )
        lines.append(
            f"precision={self.precision:.4f} recall={self.recall:.4f} "
            f"f_score={self.f_score:.4f} error_rate={self.error_rate:.4f}"
        )
        return "\n".join(lines) + "\n"


def _report_from_counts(mode: str, params: dict, counts: SegmentCounts) -> MetricsReport:
    precision, recall, f_score = precision_recall_f(counts)
    return MetricsReport(
        mode=mode,
        params=params,
        counts=counts,
        precision=precision,
        recall=recall,
        f_score=f_score,
        error_rate=error_rate(counts),
    )


def evaluate_segments(
    ref: EventList, sys: EventList, duration_s: float, segment_len_s: float,
    vocab,
) -> SegmentCounts:
    """Quantize both event lists onto one grid and count cell outcomes."""
    ref_roll = events_to_roll(ref, duration_s, segment_len_s, vocab)
    sys_roll = events_to_roll(sys, duration_s, segment_len_s, vocab)
    return segment_counts(ref_roll, sys_roll)


def _paired_stems(ref_dir: Path, est_dir: Path) -> list[str]:
    ref_stems = {p.stem for p in ref_dir.glob("*.tsv")}
    est_stems = {p.stem for p in est_dir.glob("*.tsv")}
    missing_est = sorted(ref_stems - est_stems)
    missing_ref = sorted(est_stems - ref_stems)
    if missing_est or missing_ref:
        raise ComparisonError(
            f"unpaired annotation files: missing estimates for {missing_est}, "
            f"missing references for {missing_ref}"
        )
    return sorted(ref_stems)


def evaluate_directory(
    ref_dir: str | Path,
    est_dir: str | Path,
    mode: str = "segment",
    segment_len_s: float = 1.0,
    collar_s: float = 0.2,
    use_offset: bool = False,
) -> MetricsReport:
    """Score matching *.tsv pairs from two directories, pooling counts.

    Pairing is by file stem; any unpaired stem on either side is an error.
    In segment mode the grid for each pair covers the later of the two
    files' last offsets, and the vocabulary is the union of each pair's
    labels.
    """
    if mode not in ("segment", "event"):
        raise DomainError(f"mode must be 'segment' or 'event', got {mode!r}")
    ref_dir, est_dir = Path(ref_dir), Path(est_dir)
    stems = _paired_stems(ref_dir, est_dir)
    total = SegmentCounts()
    for stem in stems:
        ref = load_event_list(ref_dir / f"{stem}.tsv")
        sys = load_event_list(est_dir / f"{stem}.tsv")
        if mode == "segment":
            duration = max(ref.max_offset(), sys.max_offset())
            vocab = Vocabulary(tuple(sorted(ref.labels() | sys.labels())))
            total = total + evaluate_segments(ref, sys, duration, segment_len_s, vocab)
        else:
            total = total + event_based_counts(ref, sys, collar_s, use_offset)

    params = (
        {"segment_len_s": segment_len_s}
        if mode == "segment"
        else {"collar_s": collar_s, "use_offset": use_offset}
    )
    return _report_from_counts(mode, params, total)
