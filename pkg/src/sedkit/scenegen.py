"""Synthetic acoustic scene generation with exact, sample-accurate labels.

A scene is a background bed (white noise or a WAV snippet) plus a set of
template renderings placed at known onsets, each gain-scaled to a requested
signal-to-noise ratio against the background measured over the event's own
extent.  Because placement is known, the returned annotations are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import EventInstance, EventList
from .audio_io import AudioClip, read_wav
from .errors import ConfigurationError, DegenerateSignalError, SamplingError

TEMPLATE_KINDS = ("tone_burst", "chirp", "noise_burst", "click_train", "wav_snippet")
_MAX_ONSET_RETRIES = 1000


@dataclass(frozen=True)
class EventTemplate:
    """Recipe for one renderable event sound."""

    kind: str
    label: str
    duration_s: float
    frequency_hz: float | None = None
    bandwidth_hz: float | None = None
    attack_s: float = 0.01
    release_s: float = 0.01
    click_rate_hz: float = 10.0
    path: str | None = None  # source file for wav_snippet

    def __post_init__(self):
        if self.kind not in TEMPLATE_KINDS:
            raise ConfigurationError(f"unknown template kind {self.kind!r}")
        if not self.label:
            raise ConfigurationError("template label must be non-empty")
        if not (self.duration_s > 0):
            raise ConfigurationError(f"template duration must be positive, got {self.duration_s}")
        if self.attack_s < 0 or self.release_s < 0:
            raise ConfigurationError("attack and release must be non-negative")
        if self.kind in ("tone_burst", "chirp") and self.frequency_hz is None:
            raise ConfigurationError(f"{self.kind} requires frequency_hz")
        if self.kind == "chirp" and self.bandwidth_hz is None:
            raise ConfigurationError("chirp requires bandwidth_hz")
        if self.kind == "wav_snippet" and not self.path:
            raise ConfigurationError("wav_snippet requires a source path")
        if self.kind == "click_train" and self.click_rate_hz <= 0:
            raise ConfigurationError("click_rate_hz must be positive")


def _envelope(n: int, attack_s: float, release_s: float, sample_rate: int) -> np.ndarray:
    env = np.ones(n)
    n_att = min(n, int(round(attack_s * sample_rate)))
    n_rel = min(n, int(round(release_s * sample_rate)))
    if n_att > 0:
        env[:n_att] *= np.arange(1, n_att + 1) / n_att
    if n_rel > 0:
        env[n - n_rel:] *= np.arange(n_rel, 0, -1) / n_rel
    return env


def render_template(
    template: EventTemplate, sample_rate: int, rng: np.random.Generator
) -> AudioClip:
    """Render a template to audio; deterministic for a given rng state.

    The output has round(duration * sample_rate) samples with unit peak
    before the attack/release envelope is applied.
    """
    n = int(round(template.duration_s * sample_rate))
    if n < 1:
        raise ConfigurationError("template too short for one sample at this rate")
    nyquist = sample_rate / 2.0
    t = np.arange(n) / sample_rate

    if template.kind == "tone_burst":
        f = template.frequency_hz
        if f >= nyquist:
            raise ConfigurationError(f"tone frequency {f} Hz at or above Nyquist {nyquist} Hz")
        x = np.sin(2.0 * np.pi * f * t)
    elif template.kind == "chirp":
        f0 = template.frequency_hz
        f1 = f0 + template.bandwidth_hz
        if max(f0, f1) >= nyquist or min(f0, f1) < 0:
            raise ConfigurationError(
                f"chirp sweep {f0}..{f1} Hz leaves the band [0, {nyquist}) Hz"
            )
        # linear sweep: instantaneous frequency f0 + (f1-f0) * t / duration
        x = np.sin(2.0 * np.pi * (f0 * t + (f1 - f0) / (2.0 * template.duration_s) * t**2))
    elif template.kind == "noise_burst":
        x = rng.standard_normal(n)
        if template.frequency_hz is not None and template.bandwidth_hz is not None:
            f_lo, f_hi = template.frequency_hz, template.frequency_hz + template.bandwidth_hz
            if not (0 <= f_lo < f_hi <= nyquist):
                raise ConfigurationError(f"noise band {f_lo}..{f_hi} Hz leaves [0, {nyquist}] Hz")
            spectrum = np.fft.rfft(x)
            freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
            spectrum[(freqs < f_lo) | (freqs > f_hi)] = 0.0
            x = np.fft.irfft(spectrum, n)
        peak = np.abs(x).max()
        if peak == 0.0:
            raise DegenerateSignalError("noise burst rendered to silence")
        x = x / peak
    elif template.kind == "click_train":
        period = max(1, int(round(sample_rate / template.click_rate_hz)))
        x = np.zeros(n)
        x[::period] = 1.0
    else:  # wav_snippet
        source = read_wav(template.path)
        if source.sample_rate != sample_rate:
            raise ConfigurationError(
                f"snippet rate {source.sample_rate} != scene rate {sample_rate}"
            )
        if source.samples.size < n:
            raise ConfigurationError(
                f"snippet {template.path} has {source.samples.size} samples, need {n}"
            )
        x = source.samples[:n].copy()

    return AudioClip(x * _envelope(n, template.attack_s, template.release_s, sample_rate),
                     sample_rate)


@dataclass(frozen=True)
class BackgroundSpec:
    """Scene background: steady white noise or a WAV bed, at a target RMS level."""

    kind: str = "white_noise"
    level: float = 0.05
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("white_noise", "wav_snippet"):
            raise ConfigurationError(f"unknown background kind {self.kind!r}")
        if not (self.level > 0):
            raise ConfigurationError("background level must be positive")
        if self.kind == "wav_snippet" and not self.path:
            raise ConfigurationError("wav_snippet background requires a path")


@dataclass(frozen=True)
class Placement:
    """One template instance inside a scene."""

    template_id: str
    onset_s: float
    snr_db: float


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to synthesize one scene deterministically."""

    duration_s: float
    sample_rate: int
    background: BackgroundSpec
    placements: tuple[Placement, ...]
    seed: int

    def __post_init__(self):
        if not (self.duration_s > 0):
            raise ConfigurationError("scene duration must be positive")
        if self.sample_rate <= 0:
            raise ConfigurationError("sample rate must be positive")
        for p in self.placements:
            if p.onset_s < 0:
                raise ConfigurationError(f"placement onset {p.onset_s} is negative")


def _render_background(spec: SceneSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    bg = spec.background
    if bg.kind == "white_noise":
        x = rng.standard_normal(n)
    else:
        source = read_wav(bg.path)
        if source.sample_rate != spec.sample_rate:
            raise ConfigurationError(
                f"background rate {source.sample_rate} != scene rate {spec.sample_rate}"
            )
        if source.samples.size < n:
            raise ConfigurationError("background WAV shorter than the scene")
        x = source.samples[:n].copy()
    rms = math.sqrt(float(np.mean(x**2))) if n else 0.0
    if rms == 0.0:
        raise DegenerateSignalError("background rendered to silence")
    return x * (bg.level / rms)


def synthesize_scene(
    spec: SceneSpec, catalog: dict[str, EventTemplate]
) -> tuple[AudioClip, EventList]:
    """Render a scene and its exact annotations.

    Each placement's onset is snapped to the sample grid; its annotation is
    (snapped onset, snapped onset + rendered length / rate, label), so the
    labels are exact to within half a sample period of the request.  Event
    gains satisfy 10*log10(P_event / P_background) = snr_db with both powers
    measured over the event extent, before final peak normalization (the
    whole mix is scaled down only if its peak exceeds 0.99).
    """
    n_total = int(round(spec.duration_s * spec.sample_rate))
    streams = np.random.SeedSequence(spec.seed).spawn(len(spec.placements) + 1)
    background = _render_background(spec, np.random.default_rng(streams[0]), n_total)
    mix = background.copy()

    events = []
    for i, placement in enumerate(spec.placements):
        template = catalog.get(placement.template_id)
        if template is None:
            raise ConfigurationError(f"placement references unknown template {placement.template_id!r}")
        if placement.onset_s + template.duration_s > spec.duration_s + 1e-9:
            raise ConfigurationError(
                f"placement of {placement.template_id!r} at {placement.onset_s}s "
                f"runs past the scene end"
            )
        rendered = render_template(template, spec.sample_rate, np.random.default_rng(streams[i + 1]))
        start = int(round(placement.onset_s * spec.sample_rate))
        # a fitting placement may still overflow by one sample after rounding
        start = min(start, n_total - rendered.samples.size)
        if start < 0:
            raise ConfigurationError(
                f"template {placement.template_id!r} is longer than the scene"
            )
        stop = start + rendered.samples.size
        p_bg = float(np.mean(background[start:stop] ** 2))
        p_event = float(np.mean(rendered.samples**2))
        if p_event == 0.0:
            raise DegenerateSignalError(f"template {placement.template_id!r} rendered to silence")
        gain = math.sqrt(p_bg * 10.0 ** (placement.snr_db / 10.0) / p_event)
        mix[start:stop] += gain * rendered.samples
        events.append(EventInstance(
            start / spec.sample_rate, stop / spec.sample_rate, template.label
        ))

    peak = float(np.abs(mix).max()) if n_total else 0.0
    if peak > 0.99:
        mix *= 0.99 / peak
    return AudioClip(mix, spec.sample_rate), EventList(tuple(events))


@dataclass(frozen=True)
class SceneSamplerParams:
    """Ranges for random scene composition."""

    duration_s: float = 4.0
    sample_rate: int = 16000
    n_events_range: tuple[int, int] = (2, 4)
    snr_range_db: tuple[float, float] = (6.0, 20.0)
    max_polyphony: int = 2
    background: BackgroundSpec = field(default_factory=BackgroundSpec)

    def __post_init__(self):
        lo, hi = self.n_events_range
        if not (0 <= lo <= hi):
            raise ConfigurationError("n_events_range must satisfy 0 <= lo <= hi")
        if self.snr_range_db[0] > self.snr_range_db[1]:
            raise ConfigurationError("snr_range_db must be ordered")
        if self.max_polyphony < 1:
            raise ConfigurationError("max_polyphony must be at least 1")


def max_overlap(intervals: list[tuple[float, float]]) -> int:
    """Largest number of intervals covering any single time point."""
    edges = sorted((t, delta) for a, b in intervals for t, delta in ((a, 1), (b, -1)))
    best = count = 0
    for _t, delta in edges:
        count += delta
        best = max(best, count)
    return best


def sample_scene_spec(
    rng: np.random.Generator,
    catalog: dict[str, EventTemplate],
    params: SceneSamplerParams = SceneSamplerParams(),
) -> SceneSpec:
    """Draw a random SceneSpec honoring the polyphony cap.

    Template choice, onset, and SNR are uniform draws; onsets land on the
    millisecond grid so serialized annotations are exact.  Each placement's
    onset is re-drawn up to 1000 times to respect max_polyphony before a
    SamplingError is raised.
    """
    template_ids = sorted(catalog)
    if not template_ids:
        raise ConfigurationError("catalog is empty")
    lo, hi = params.n_events_range
    n_events = int(rng.integers(lo, hi + 1))
    placements = []
    spans: list[tuple[float, float]] = []
    for _ in range(n_events):
        template_id = template_ids[int(rng.integers(len(template_ids)))]
        duration = catalog[template_id].duration_s
        headroom = params.duration_s - duration
        if headroom < 0:
            raise ConfigurationError(
                f"template {template_id!r} ({duration}s) is longer than the scene"
            )
        snr = float(rng.uniform(*params.snr_range_db))
        for attempt in range(_MAX_ONSET_RETRIES):
            # floor to the millisecond grid so the onset never exceeds the headroom
            onset = math.floor(float(rng.uniform(0.0, headroom)) * 1000.0) / 1000.0
            candidate = spans + [(onset, onset + duration)]
            if max_overlap(candidate) <= params.max_polyphony:
                spans = candidate
                placements.append(Placement(template_id, onset, snr))
                break
        else:
            raise SamplingError(
                f"could not place event {len(placements)} within "
                f"{_MAX_ONSET_RETRIES} retries at max_polyphony={params.max_polyphony}"
            )
    return SceneSpec(
        duration_s=params.duration_s,
        sample_rate=params.sample_rate,
        background=params.background,
        placements=tuple(placements),
        seed=int(rng.integers(0, 2**31)),
    )
