"""Log mel-band energy features and their binary container format.

The mel scale used everywhere is mel(f) = 1000 * log2(1 + f / 1000), which
places 1000 Hz at 1000 mel and 3000 Hz at 2000 mel.  Spectra are computed
with a periodic Hann window and no padding, so only complete analysis
windows produce frames.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .errors import ConfigurationError, DimensionError, DomainError, FormatError

SEDF_MAGIC = b"SEDF"
SEDF_VERSION = 1


def hz_to_mel(f):
    """Map frequency in Hz to mel; exact at the 1000 Hz / 1000 mel anchor."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise DomainError("frequency must be non-negative")
    out = 1000.0 * np.log2(1.0 + f / 1000.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    """Inverse of hz_to_mel."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise DomainError("mel value must be non-negative")
    out = 1000.0 * (np.exp2(m / 1000.0) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FeatureConfig:
    """Analysis settings for log mel energy extraction."""

    window_len_s: float = 0.040
    hop_len_s: float = 0.020
    n_mels: int = 40
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None means Nyquist at extraction time
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.window_len_s <= 0 or self.hop_len_s <= 0:
            raise ConfigurationError("window and hop lengths must be positive")
        if self.hop_len_s > self.window_len_s:
            raise ConfigurationError("hop length must not exceed window length")
        if self.n_mels < 1:
            raise ConfigurationError("n_mels must be at least 1")
        if self.fmin_hz < 0:
            raise ConfigurationError("fmin_hz must be non-negative")
        if self.fmax_hz is not None and self.fmax_hz <= self.fmin_hz:
            raise ConfigurationError("fmax_hz must exceed fmin_hz")
        if self.log_floor <= 0:
            raise ConfigurationError("log_floor must be positive")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_len_s * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_len_s * sample_rate))

    def resolved_fmax(self, sample_rate: int) -> float:
        fmax = sample_rate / 2.0 if self.fmax_hz is None else self.fmax_hz
        if fmax > sample_rate / 2.0 + 1e-9:
            raise ConfigurationError(f"fmax_hz {fmax} exceeds Nyquist {sample_rate / 2.0}")
        return fmax


@dataclass(frozen=True)
class FeatureMatrix:
    """Frames-by-bands feature values plus the timing needed to place them."""

    values: np.ndarray  # (T, B) float64
    hop_len_s: float
    window_len_s: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimensionError(f"feature values must be 2-D, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]


def frame_count(n_samples: int, window: int, hop: int) -> int:
    """Number of complete analysis windows: floor((N - W) / H) + 1, or 0."""
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def power_spectrogram(clip: AudioClip, window_len_s: float, hop_len_s: float) -> np.ndarray:
    """One-sided power spectrogram, shape (T, W//2 + 1).

    Frames are cut without padding (partial windows are dropped), each
    multiplied by a periodic Hann window, and |DFT|^2 taken per frame.
    Raises DimensionError when the clip is shorter than one window.
    """
    sr = clip.sample_rate
    window = int(round(window_len_s * sr))
    hop = int(round(hop_len_s * sr))
    if window < 1 or hop < 1:
        raise ConfigurationError("window and hop must each cover at least one sample")
    if hop > window:
        raise ConfigurationError("hop must not exceed window")
    n = clip.samples.size
    if n < window:
        raise DimensionError(
            f"clip of {n} samples is shorter than one {window}-sample analysis window"
        )
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, window)[::hop]
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)
    spectrum = np.fft.rfft(frames * hann, axis=1)
    return np.abs(spectrum) ** 2


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters sampled at DFT bin frequencies (B, K)."""

    weights: np.ndarray
    band_centers_hz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(
            self, "band_centers_hz", np.asarray(self.band_centers_hz, dtype=np.float64)
        )


def build_mel_filterbank(config: FeatureConfig, n_fft: int, sample_rate: int) -> MelFilterbank:
    """Construct n_mels triangular filters with peaks 1.0 on a uniform mel grid.

    Edge frequencies are n_mels + 2 points uniformly spaced in mel between
    fmin and fmax, mapped back to Hz; filter b rises from edge b to edge
    b+1 and falls to edge b+2.  A filter whose support contains no DFT bin
    makes the configuration invalid.
    """
    if n_fft < 2:
        raise ConfigurationError("n_fft must be at least 2")
    fmax = config.resolved_fmax(sample_rate)
    edges_mel = np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(fmax), config.n_mels + 2)
    edges_hz = mel_to_hz(edges_mel)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)

    lo = edges_hz[:-2, None]
    mid = edges_hz[1:-1, None]
    hi = edges_hz[2:, None]
    rising = (bin_freqs[None, :] - lo) / np.maximum(mid - lo, 1e-30)
    falling = (hi - bin_freqs[None, :]) / np.maximum(hi - mid, 1e-30)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    empty = np.flatnonzero(~(weights > 0).any(axis=1))
    if empty.size:
        raise ConfigurationError(
            f"{empty.size} mel filter(s) cover no DFT bin (first: band {int(empty[0])}); "
            "reduce n_mels or use a longer window"
        )
    return MelFilterbank(weights, edges_hz[1:-1].copy())


def log_mel(clip: AudioClip, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Log mel-band energies for a clip: ln(max(filterbank @ power, floor))."""
    window = config.window_samples(clip.sample_rate)
    power = power_spectrogram(clip, config.window_len_s, config.hop_len_s)
    fb = build_mel_filterbank(config, window, clip.sample_rate)
    mel_energy = power @ fb.weights.T
    values = np.log(np.maximum(mel_energy, config.log_floor))
    return FeatureMatrix(values, config.hop_len_s, config.window_len_s)


def write_sedf(path: str | Path, features: FeatureMatrix) -> None:
    """Serialize a feature matrix to the SEDF binary container.

    Layout: magic "SEDF", u32 version, u32 T, u32 B, f64 hop seconds,
    f64 window seconds, then T*B float32 values row-major (frame-major),
    all little-endian.
    """
    t, b = features.values.shape
    header = struct.pack("<4sIIIdd", SEDF_MAGIC, SEDF_VERSION, t, b,
                         features.hop_len_s, features.window_len_s)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(features.values.astype("<f4").tobytes())


def read_sedf(path: str | Path) -> FeatureMatrix:
    """Read a SEDF container back into a FeatureMatrix (float32 precision)."""
    blob = Path(path).read_bytes()
    header_size = struct.calcsize("<4sIIIdd")
    if len(blob) < header_size:
        raise FormatError("SEDF file shorter than its header")
    magic, version, t, b, hop, window = struct.unpack("<4sIIIdd", blob[:header_size])
    if magic != SEDF_MAGIC:
        raise FormatError(f"bad SEDF magic {magic!r}")
    if version != SEDF_VERSION:
        raise FormatError(f"unsupported SEDF version {version}")
    expected = header_size + 4 * t * b
    if len(blob) != expected:
        raise FormatError(f"SEDF payload size mismatch: expected {expected} bytes, got {len(blob)}")
    values = np.frombuffer(blob[header_size:], dtype="<f4").reshape(t, b).astype(np.float64)
    return FeatureMatrix(values, hop, window)
