"""Labels for sound events: strong (timed) annotations, weak clip-level tags,
and binary activity rolls on a regular segment grid.

The on-disk annotation format is tab-separated text, one event per line:
``onset<TAB>offset<TAB>label`` with times in seconds printed at millisecond
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DomainError, ParseError, VocabularyError


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of class labels; order defines the class axis everywhere."""

    classes: tuple[str, ...]

    def __post_init__(self):
        if not all(isinstance(c, str) and c for c in self.classes):
            raise VocabularyError("labels must be non-empty strings")
        if len(set(self.classes)) != len(self.classes):
            raise VocabularyError("duplicate labels in vocabulary")

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "Vocabulary":
        return cls(tuple(labels))

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise VocabularyError(f"label {label!r} not in vocabulary") from None

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, label: str) -> bool:
        return label in self.classes

    def __iter__(self) -> Iterator[str]:
        return iter(self.classes)


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Read one label per non-empty line, preserving file order."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return Vocabulary(tuple(ln.strip() for ln in lines if ln.strip()))


def save_vocabulary(path: str | Path, vocab: Vocabulary) -> None:
    Path(path).write_text("".join(f"{c}\n" for c in vocab), encoding="utf-8")


@dataclass(frozen=True)
class EventInstance:
    """One sound event: half-open time span [onset_s, offset_s) with a label."""

    onset_s: float
    offset_s: float
    label: str

    def __post_init__(self):
        if not self.label:
            raise DomainError("event label must be non-empty")
        if not (0.0 <= self.onset_s < self.offset_s):
            raise DomainError(
                f"event must satisfy 0 <= onset < offset, got [{self.onset_s}, {self.offset_s})"
            )


@dataclass(frozen=True)
class EventList:
    """Events for one clip, kept sorted by (onset, label)."""

    events: tuple[EventInstance, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.events, key=lambda e: (e.onset_s, e.label)))
        object.__setattr__(self, "events", ordered)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[EventInstance]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def labels(self) -> set[str]:
        return {e.label for e in self.events}

    def max_offset(self) -> float:
        return max((e.offset_s for e in self.events), default=0.0)


@dataclass(frozen=True)
class WeakLabelSet:
    """Clip-level tags: which classes occur anywhere in the clip."""

    labels: frozenset[str]

    def __post_init__(self):
        if not all(isinstance(c, str) and c for c in self.labels):
            raise DomainError("tags must be non-empty strings")

    def validate_against(self, vocab: Vocabulary) -> None:
        unknown = sorted(self.labels - set(vocab.classes))
        if unknown:
            raise VocabularyError(f"tags not in vocabulary: {unknown}")


def parse_event_list(text: str) -> EventList:
    """Parse tab-separated annotation text into an EventList.

    Each non-empty line must be ``onset<TAB>offset<TAB>label``.  Errors
    carry the 1-based line number of the offending line.
    """
    events = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", line_no)
        onset_str, offset_str, label = fields
        try:
            onset = float(onset_str)
            offset = float(offset_str)
        except ValueError:
            raise ParseError(f"non-numeric time in {onset_str!r}/{offset_str!r}", line_no) from None
        if not (math.isfinite(onset) and math.isfinite(offset)):
            raise ParseError("times must be finite", line_no)
        try:
            events.append(EventInstance(onset, offset, label))
        except DomainError as exc:
            raise ParseError(str(exc), line_no) from None
    return EventList(tuple(events))


def serialize_event_list(event_list: EventList) -> str:
    """Render events as annotation text, times at millisecond resolution."""
    return "".join(
        f"{e.onset_s:.3f}\t{e.offset_s:.3f}\t{e.label}\n" for e in event_list
    )


def load_event_list(path: str | Path) -> EventList:
    return parse_event_list(Path(path).read_text(encoding="utf-8"))


def save_event_list(path: str | Path, event_list: EventList) -> None:
    Path(path).write_text(serialize_event_list(event_list), encoding="utf-8")


@dataclass(frozen=True)
class EventRoll:
    """Binary class-by-segment activity matrix on a uniform time grid.

    activity[c, k] is 1 iff class c overlaps segment [k*L, (k+1)*L) for
    segment length L = segment_len_s.
    """

    activity: np.ndarray
    segment_len_s: float
    vocabulary: Vocabulary

    def __post_init__(self):
        act = np.asarray(self.activity, dtype=np.uint8)
        if act.ndim != 2:
            raise DomainError(f"activity must be 2-D, got shape {act.shape}")
        if act.shape[0] != len(self.vocabulary):
            raise DomainError(
                f"activity has {act.shape[0]} rows but vocabulary has {len(self.vocabulary)} classes"
            )
        if not np.isin(act, (0, 1)).all():
            raise DomainError("activity entries must be 0 or 1")
        if not (self.segment_len_s > 0):
            raise DomainError("segment_len_s must be positive")
        object.__setattr__(self, "activity", act)

    @property
    def n_segments(self) -> int:
        return self.activity.shape[1]


def n_segments_for(duration_s: float, segment_len_s: float) -> int:
    """ceil(duration / L), tolerant of float fuzz just below a grid point."""
    return int(math.ceil(duration_s / segment_len_s - 1e-9))


def events_to_roll(
    events: EventList,
    duration_s: float,
    segment_len_s: float,
    vocab: Vocabulary,
) -> EventRoll:
    """Quantize events onto a segment grid: any positive overlap marks a segment.

    A segment k spans [k*L, (k+1)*L); an event touching a boundary exactly
    contributes nothing to the segment it merely touches.
    """
    if duration_s < 0:
        raise DomainError("duration_s must be non-negative")
    if segment_len_s <= 0:
        raise DomainError("segment_len_s must be positive")
    for e in events:
        if e.offset_s > duration_s + 1e-9:
            raise DomainError(
                f"event offset {e.offset_s} exceeds clip duration {duration_s}"
            )
    n_seg = n_segments_for(duration_s, segment_len_s)
    activity = np.zeros((len(vocab), n_seg), dtype=np.uint8)
    if n_seg:
        starts = np.arange(n_seg) * segment_len_s
        ends = np.arange(1, n_seg + 1) * segment_len_s
        for e in events:
            c = vocab.index(e.label)
            activity[c, (starts < e.offset_s) & (ends > e.onset_s)] = 1
    return EventRoll(activity, segment_len_s, vocab)


def roll_to_events(roll: EventRoll) -> EventList:
    """Turn each maximal run of active segments into one event per class."""
    events = []
    L = roll.segment_len_s
    for c, label in enumerate(roll.vocabulary):
        row = roll.activity[c]
        # transitions of a zero-padded row: +1 marks run starts, -1 run ends
        edges = np.diff(np.concatenate(([0], row.astype(np.int8), [0])))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        for k0, k1 in zip(starts, ends):
            events.append(EventInstance(float(k0 * L), float(k1 * L), label))
    return EventList(tuple(events))


def weak_from_strong(events: EventList) -> WeakLabelSet:
    """Collapse timed events to the set of labels that occur at all."""
    return WeakLabelSet(frozenset(e.label for e in events))
