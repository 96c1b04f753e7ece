"""Turning frame probabilities into discrete events and clip-level tags.

The event pipeline runs in a fixed order: threshold the probabilities into
a frame-resolution roll, convert active runs to events, close short gaps
between same-class events, then drop events that are still too short.
"""

from __future__ import annotations

import numpy as np

from .annotations import EventInstance, EventList, EventRoll, Vocabulary, WeakLabelSet, roll_to_events
from .augment import SoftTargetMatrix
from .errors import ConfigurationError, DomainError


def binarize(
    probs: SoftTargetMatrix,
    threshold: float,
    segment_len_s: float,
    vocab: Vocabulary,
) -> EventRoll:
    """Threshold class probabilities into a frame-resolution activity roll.

    A frame is active when its probability is >= threshold.
    """
    if not (0.0 < threshold < 1.0):
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")
    if probs.values.shape[0] != len(vocab):
        raise DomainError(
            f"probability matrix has {probs.values.shape[0]} rows "
            f"but vocabulary has {len(vocab)} classes"
        )
    return EventRoll((probs.values >= threshold).astype(np.uint8), segment_len_s, vocab)


def fill_gaps(events: EventList, max_gap_s: float) -> EventList:
    """Merge consecutive same-class events separated by at most max_gap_s.

    Merging is run to a fixpoint: a chain of short gaps collapses into a
    single event.
    """
    if max_gap_s < 0:
        raise DomainError("max_gap_s must be non-negative")
    merged: list[EventInstance] = []
    by_label: dict[str, list[EventInstance]] = {}
    for e in events:
        by_label.setdefault(e.label, []).append(e)
    for label in by_label:
        run = None
        for e in by_label[label]:  # already onset-sorted via EventList
            if run is not None and e.onset_s - run.offset_s <= max_gap_s:
                if e.offset_s > run.offset_s:
                    run = EventInstance(run.onset_s, e.offset_s, label)
            else:
                if run is not None:
                    merged.append(run)
                run = e
        if run is not None:
            merged.append(run)
    return EventList(tuple(merged))


def enforce_min_duration(events: EventList, min_duration_s: float) -> EventList:
    """Drop events strictly shorter than min_duration_s."""
    if min_duration_s < 0:
        raise DomainError("min_duration_s must be non-negative")
    return EventList(tuple(
        e for e in events if e.offset_s - e.onset_s >= min_duration_s
    ))


def probs_to_events(
    probs: SoftTargetMatrix,
    hop_len_s: float,
    vocab: Vocabulary,
    threshold: float = 0.5,
    min_duration_s: float = 0.1,
    max_gap_s: float = 0.1,
) -> EventList:
    """Full pipeline: binarize -> events -> fill gaps -> enforce min duration."""
    if hop_len_s <= 0:
        raise ConfigurationError("hop_len_s must be positive")
    roll = binarize(probs, threshold, hop_len_s, vocab)
    events = roll_to_events(roll)
    events = fill_gaps(events, max_gap_s)
    return enforce_min_duration(events, min_duration_s)


def tags_from_probs(
    probs: SoftTargetMatrix,
    vocab: Vocabulary,
    threshold: float = 0.5,
    aggregator: str = "max",
) -> WeakLabelSet:
    """Clip-level tags: aggregate each class over time, then threshold."""
    if aggregator not in ("max", "mean"):
        raise ConfigurationError(f"unknown aggregator {aggregator!r}")
    if probs.values.shape[0] != len(vocab):
        raise DomainError("probability rows do not match the vocabulary")
    if probs.values.shape[1] == 0:
        return WeakLabelSet(frozenset())
    pooled = probs.values.max(axis=1) if aggregator == "max" else probs.values.mean(axis=1)
    return WeakLabelSet(frozenset(
        label for c, label in enumerate(vocab) if pooled[c] >= threshold
    ))
