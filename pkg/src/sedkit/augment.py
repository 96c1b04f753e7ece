"""Label-consistent data augmentation for audio clips and feature matrices.

Every transform here keeps annotations truthful: time stretching rescales
event times by the same factor as the audio, mixing unions the activity of
both sources, and added noise leaves labels untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotations import EventInstance, EventList, EventRoll
from .audio_io import AudioClip
from .errors import DegenerateSignalError, DimensionError, DomainError
from .features import FeatureMatrix


@dataclass(frozen=True)
class SoftTargetMatrix:
    """Class-by-frame target values in [0, 1]; rows follow a vocabulary order."""

    values: np.ndarray  # (C, T) float64

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimensionError(f"targets must be 2-D, got shape {vals.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise DomainError("target values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)


def time_stretch(clip: AudioClip, events: EventList, factor: float):
    """Stretch a clip and its annotations by `factor`.

    The audio is resampled by linear interpolation so the output has
    round(N * factor) samples; every annotation endpoint is multiplied by
    exactly the same factor.  factor = 1 is the identity, sample for sample.
    """
    if not (factor > 0) or not math.isfinite(factor):
        raise DomainError(f"stretch factor must be positive and finite, got {factor}")
    n = clip.samples.size
    m = int(round(n * factor))
    if n == 0 or m == 0:
        stretched = AudioClip(np.zeros(0), clip.sample_rate)
    else:
        positions = np.arange(m) / factor
        stretched = AudioClip(
            np.interp(positions, np.arange(n), clip.samples), clip.sample_rate
        )
    scaled = EventList(tuple(
        EventInstance(e.onset_s * factor, e.offset_s * factor, e.label) for e in events
    ))
    return stretched, scaled


def block_mix(clip_a: AudioClip, roll_a: EventRoll, clip_b: AudioClip, roll_b: EventRoll):
    """Average two equally long clips and union their activity rolls."""
    if clip_a.sample_rate != clip_b.sample_rate:
        raise DimensionError("block_mix requires equal sample rates")
    if clip_a.samples.size != clip_b.samples.size:
        raise DimensionError("block_mix requires equally long clips")
    if roll_a.activity.shape != roll_b.activity.shape:
        raise DimensionError("block_mix requires equally shaped rolls")
    if roll_a.segment_len_s != roll_b.segment_len_s:
        raise DimensionError("block_mix requires equal segment lengths")
    if roll_a.vocabulary != roll_b.vocabulary:
        raise DimensionError("block_mix requires a shared vocabulary")
    mixed = AudioClip(0.5 * (clip_a.samples + clip_b.samples), clip_a.sample_rate)
    union = np.logical_or(roll_a.activity, roll_b.activity).astype(np.uint8)
    return mixed, EventRoll(union, roll_a.segment_len_s, roll_a.vocabulary)


def mixup(
    feat_a: FeatureMatrix,
    targets_a: SoftTargetMatrix,
    feat_b: FeatureMatrix,
    targets_b: SoftTargetMatrix,
    lam: float,
):
    """Convex combination of two feature/target pairs with weight `lam` on A."""
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"mixup weight must lie in [0, 1], got {lam}")
    if feat_a.values.shape != feat_b.values.shape:
        raise DimensionError("mixup requires equally shaped feature matrices")
    if targets_a.values.shape != targets_b.values.shape:
        raise DimensionError("mixup requires equally shaped target matrices")
    if (feat_a.hop_len_s, feat_a.window_len_s) != (feat_b.hop_len_s, feat_b.window_len_s):
        raise DimensionError("mixup requires matching feature timing")
    mixed_x = FeatureMatrix(
        lam * feat_a.values + (1.0 - lam) * feat_b.values,
        feat_a.hop_len_s,
        feat_a.window_len_s,
    )
    mixed_y = SoftTargetMatrix(lam * targets_a.values + (1.0 - lam) * targets_b.values)
    return mixed_x, mixed_y


def draw_mixup_lambda(rng: np.random.Generator, alpha: float = 0.2) -> float:
    """Sample a mixup weight from Beta(alpha, alpha)."""
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    return float(rng.beta(alpha, alpha))


def add_noise_at_snr(clip: AudioClip, noise: AudioClip, snr_db: float) -> AudioClip:
    """Add `noise` to `clip`, gain-scaled so clip power over noise power hits snr_db.

    Powers are mean squares over the clip extent; the noise buffer must be
    at least as long as the clip and is truncated to it.  snr_db = +inf is
    the explicit no-noise flag and returns the clip unchanged.
    """
    if snr_db == math.inf:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    if math.isnan(snr_db):
        raise DomainError("snr_db must not be NaN")
    if clip.sample_rate != noise.sample_rate:
        raise DimensionError("clip and noise must share a sample rate")
    n = clip.samples.size
    if noise.samples.size < n:
        raise DimensionError(
            f"noise ({noise.samples.size} samples) shorter than clip ({n} samples)"
        )
    if n == 0:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    noise_part = noise.samples[:n]
    p_clip = float(np.mean(clip.samples**2))
    p_noise = float(np.mean(noise_part**2))
    if p_clip == 0.0:
        raise DegenerateSignalError("clip has zero power; SNR is undefined")
    if p_noise == 0.0:
        raise DegenerateSignalError("noise has zero power; SNR is undefined")
    gain = math.sqrt(p_clip / (p_noise * 10.0 ** (snr_db / 10.0)))
    return AudioClip(clip.samples + gain * noise_part, clip.sample_rate)
