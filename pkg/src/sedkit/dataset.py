"""On-disk dataset layout shared by the command line tools.

A dataset directory holds::

    audio/<scene_id>.wav     mono PCM-16 audio
    meta/<scene_id>.tsv      strong annotations for that scene
    vocabulary.txt           one class label per line
    manifest.tsv             <scene_id><TAB><split> per line

Split assignment is a pure function of (seed, scene_id), so regenerating
or extending a dataset never reshuffles existing scenes.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .annotations import (
    EventList,
    Vocabulary,
    load_event_list,
    load_vocabulary,
    save_vocabulary,
    serialize_event_list,
)
from .audio_io import AudioClip, read_wav, write_wav
from .errors import ConfigurationError, FormatError

SPLITS = ("train", "val", "test")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def assign_split(scene_id: str, seed: int, fractions: dict[str, float]) -> str:
    """Deterministic split from a seeded hash of the scene id.

    `fractions` maps split names to probabilities summing to 1; the hash
    value selects a split by cumulative fraction.
    """
    total = sum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions sum to {total}, expected 1")
    digest = hashlib.sha256(f"{seed}:{scene_id}".encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    cumulative = 0.0
    names = list(fractions)
    for name in names:
        cumulative += fractions[name]
        if u < cumulative:
            return name
    return names[-1]


@dataclass(frozen=True)
class SceneRecord:
    """One dataset row, audio loaded lazily via its path."""

    scene_id: str
    split: str
    audio_path: Path
    events: EventList

    def load_audio(self) -> AudioClip:
        return read_wav(self.audio_path)


def write_scene(root: str | Path, scene_id: str, clip: AudioClip, events: EventList) -> None:
    """Write one scene's audio and annotations into the layout."""
    root = Path(root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "meta").mkdir(parents=True, exist_ok=True)
    tmp_wav = root / "audio" / f".{scene_id}.tmp"
    write_wav(tmp_wav, clip)
    os.replace(tmp_wav, root / "audio" / f"{scene_id}.wav")
    atomic_write_text(root / "meta" / f"{scene_id}.tsv", serialize_event_list(events))


def write_manifest(root: str | Path, rows: list[tuple[str, str]]) -> None:
    atomic_write_text(
        Path(root) / "manifest.tsv",
        "".join(f"{scene_id}\t{split}\n" for scene_id, split in rows),
    )


def write_vocabulary(root: str | Path, vocab: Vocabulary) -> None:
    save_vocabulary(Path(root) / "vocabulary.txt", vocab)


def load_dataset(root: str | Path) -> tuple[dict[str, list[SceneRecord]], Vocabulary]:
    """Read a dataset directory into per-split records plus its vocabulary."""
    root = Path(root)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise FormatError(f"missing manifest: {manifest}")
    vocab_path = root / "vocabulary.txt"
    if not vocab_path.is_file():
        raise FormatError(f"missing vocabulary: {vocab_path}")
    vocab = load_vocabulary(vocab_path)

    by_split: dict[str, list[SceneRecord]] = {name: [] for name in SPLITS}
    for line_no, raw in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) != 2:
            raise FormatError(f"manifest line {line_no}: expected 2 fields, got {len(fields)}")
        scene_id, split = fields
        if split not in SPLITS:
            raise FormatError(f"manifest line {line_no}: unknown split {split!r}")
        audio_path = root / "audio" / f"{scene_id}.wav"
        meta_path = root / "meta" / f"{scene_id}.tsv"
        if not audio_path.is_file():
            raise FormatError(f"missing audio for scene {scene_id!r}: {audio_path}")
        if not meta_path.is_file():
            raise FormatError(f"missing annotations for scene {scene_id!r}: {meta_path}")
        events = load_event_list(meta_path)
        unknown = sorted(events.labels() - set(vocab.classes))
        if unknown:
            raise FormatError(f"scene {scene_id!r} uses labels not in vocabulary: {unknown}")
        by_split[split].append(SceneRecord(scene_id, split, audio_path, events))
    return by_split, vocab
