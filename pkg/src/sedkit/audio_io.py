"""Reading and writing PCM-16 WAV files as float sample buffers.

Samples live in memory as float64 in [-1, 1]; on disk they are little-endian
16-bit signed PCM.  Only mono and stereo files are accepted, and stereo is
downmixed to mono by averaging the two channels per sample.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, UnsupportedError

_PCM_SCALE = 32768.0  # one LSB of int16 relative to full scale


@dataclass
class AudioClip:
    """A mono audio buffer plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DomainError(f"samples must be 1-D, got shape {self.samples.shape}")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        self.sample_rate = int(self.sample_rate)
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise DomainError("samples contain non-finite values")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated WAV file while reading {what}")
    return buf


def read_wav(path: str | Path) -> AudioClip:
    """Read a PCM-16 WAV file into an AudioClip.

    Stereo files are downmixed by per-sample channel average.  Raises
    FormatError for malformed RIFF structure (including big-endian RIFX
    files) and UnsupportedError for non-PCM encodings, bit depths other
    than 16, or more than two channels.
    """
    with open(path, "rb") as fh:
        riff = _read_exact(fh, 4, "RIFF id")
        if riff == b"RIFX":
            raise FormatError("big-endian RIFX WAV files are not valid input")
        if riff != b"RIFF":
            raise FormatError(f"not a RIFF file (got {riff!r})")
        _read_exact(fh, 4, "RIFF size")
        if _read_exact(fh, 4, "WAVE id") != b"WAVE":
            raise FormatError("RIFF file is not a WAVE file")

        fmt = None
        data = None
        while True:
            head = fh.read(8)
            if len(head) == 0:
                break
            if len(head) != 8:
                raise FormatError("truncated chunk header")
            chunk_id, size = struct.unpack("<4sI", head)
            if chunk_id == b"fmt ":
                if size < 16:
                    raise FormatError("fmt chunk too small")
                fmt = struct.unpack("<HHIIHH", _read_exact(fh, 16, "fmt chunk")[:16])
                fh.seek(size - 16 + (size & 1), 1)
            elif chunk_id == b"data":
                data = _read_exact(fh, size, "data chunk")
                if size & 1:
                    fh.seek(1, 1)
            else:
                fh.seek(size + (size & 1), 1)

        if fmt is None:
            raise FormatError("missing fmt chunk")
        if data is None:
            raise FormatError("missing data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise UnsupportedError(f"only PCM encoding is supported (format tag {audio_format})")
    if bits != 16:
        raise UnsupportedError(f"only 16-bit PCM is supported (got {bits}-bit)")
    if n_channels not in (1, 2):
        raise UnsupportedError(f"only mono or stereo is supported (got {n_channels} channels)")
    if sample_rate <= 0:
        raise FormatError("sample rate must be positive")
    if len(data) % (2 * n_channels):
        raise FormatError("data chunk size is not a whole number of frames")

    raw = np.frombuffer(data, dtype="<i2").astype(np.float64) / _PCM_SCALE
    if n_channels == 2:
        raw = raw.reshape(-1, 2).mean(axis=1)
    return AudioClip(raw, sample_rate)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write an AudioClip as mono PCM-16 WAV.

    Samples are clamped to [-1, 1] and quantized to the nearest int16 level;
    the quantization grid is chosen so a write/read round trip moves no
    sample by more than one LSB (1/32768).
    """
    x = np.clip(clip.samples, -1.0, 1.0)
    q = np.clip(np.rint(x * _PCM_SCALE), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
