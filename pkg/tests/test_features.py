"""Feature extraction: mel scale anchors, framing arithmetic, filterbank
shape, log compression, and the binary feature container."""

import numpy as np
import pytest

from sedkit.audio_io import AudioClip
from sedkit.errors import ConfigurationError, DimensionError, DomainError, FormatError
from sedkit.features import (
    FeatureConfig,
    FeatureMatrix,
    build_mel_filterbank,
    frame_count,
    hz_to_mel,
    log_mel,
    mel_to_hz,
    power_spectrogram,
    read_sedf,
    write_sedf,
)


def test_mel_anchor_points_exact():
    assert hz_to_mel(1000.0) == 1000.0
    assert hz_to_mel(3000.0) == 2000.0
    assert hz_to_mel(0.0) == 0.0


def test_mel_monotone_and_inverse():
    freqs = np.linspace(0.0, 24000.0, 4001)
    mels = hz_to_mel(freqs)
    assert np.all(np.diff(mels) > 0)
    back = mel_to_hz(mels)
    err = np.abs(back - freqs) / np.maximum(np.abs(freqs), 1.0)
    assert err.max() < 1e-9


def test_mel_rejects_negative():
    with pytest.raises(DomainError):
        hz_to_mel(-1.0)
    with pytest.raises(DomainError):
        mel_to_hz(-5.0)


def test_frame_count_formula():
    # floor((N - W) / H) + 1 with no padding
    assert frame_count(16000, 640, 320) == 49
    assert frame_count(640, 640, 320) == 1
    assert frame_count(639, 640, 320) == 0
    assert frame_count(960, 640, 320) == 2
    assert frame_count(959, 640, 320) == 1


def test_spectrogram_shape_and_dc():
    clip = AudioClip(np.ones(16000) * 0.25, 16000)
    spec = power_spectrogram(clip, 0.040, 0.020)
    assert spec.shape == (49, 321)
    # constant signal: all per-frame energy concentrates at the DC bin
    assert np.all(spec.argmax(axis=1) == 0)


def test_spectrogram_peak_tracks_sine_bin():
    sr, w = 16000, 640
    for k in (5, 32, 200):
        f = k * sr / w  # exactly on a DFT bin
        t = np.arange(sr) / sr
        clip = AudioClip(0.5 * np.sin(2 * np.pi * f * t), sr)
        spec = power_spectrogram(clip, 0.040, 0.020)
        assert np.all(spec.argmax(axis=1) == k)


def test_spectrogram_too_short_clip():
    with pytest.raises(DimensionError):
        power_spectrogram(AudioClip(np.zeros(500), 16000), 0.040, 0.020)


def test_filterbank_shape_peaks_and_coverage():
    config = FeatureConfig()
    fb = build_mel_filterbank(config, 640, 16000)
    assert fb.weights.shape == (40, 321)
    assert np.all(fb.weights >= 0.0)
    assert np.all(fb.weights <= 1.0 + 1e-12)
    # every filter has support, and peak weights reach close to 1
    assert np.all((fb.weights > 0).any(axis=1))
    # every interior bin is covered by at least one filter
    bin_freqs = np.arange(321) * (16000 / 640)
    interior = (bin_freqs > 0.0) & (bin_freqs < 8000.0)
    covered = (fb.weights > 0).any(axis=0)
    assert np.all(covered[interior])
    # band centers are uniformly spaced in mel
    centers_mel = hz_to_mel(fb.band_centers_hz)
    np.testing.assert_allclose(np.diff(centers_mel), np.diff(centers_mel)[0], rtol=1e-9)


def test_filterbank_triangle_peak_at_center():
    # wide bins: evaluate a filter exactly at its center frequency
    config = FeatureConfig(n_mels=8)
    fb = build_mel_filterbank(config, 640, 16000)
    bin_freqs = np.arange(321) * (16000 / 640)
    for b in range(8):
        # nearest bin to the center should carry a weight close to 1
        k = np.argmin(np.abs(bin_freqs - fb.band_centers_hz[b]))
        assert fb.weights[b, k] > 0.8


def test_filterbank_empty_support_is_config_error():
    with pytest.raises(ConfigurationError):
        build_mel_filterbank(FeatureConfig(n_mels=300), 64, 16000)


def test_log_mel_shape_default():
    clip = AudioClip(np.random.default_rng(0).uniform(-0.5, 0.5, 16000), 16000)
    feats = log_mel(clip)
    assert feats.values.shape == (49, 40)
    assert feats.hop_len_s == 0.020
    assert feats.window_len_s == 0.040
    assert np.all(np.isfinite(feats.values))


def test_log_mel_floor_on_silence():
    clip = AudioClip(np.zeros(16000), 16000)
    feats = log_mel(clip)
    np.testing.assert_allclose(feats.values, np.log(1e-10))


def test_log_mel_gain_shifts_by_log_of_power():
    rng = np.random.default_rng(5)
    x = rng.uniform(-0.4, 0.4, 16000)
    a = log_mel(AudioClip(x, 16000))
    b = log_mel(AudioClip(2.0 * x, 16000))
    # power scales by 4 -> log values shift by ln(4) wherever above the floor
    above = a.values > np.log(1e-10) + 1e-6
    np.testing.assert_allclose(b.values[above] - a.values[above], np.log(4.0), rtol=1e-10)


def test_log_mel_no_partial_frames():
    rng = np.random.default_rng(6)
    x = rng.uniform(-0.4, 0.4, 16000)
    base = log_mel(AudioClip(x, 16000))
    # appending less than one hop of samples (hop-aligned tail) adds no frame
    for extra in (1, 100, 319):
        ext = log_mel(AudioClip(np.concatenate([x, rng.uniform(-0.4, 0.4, extra)]), 16000))
        assert ext.values.shape == base.values.shape
        np.testing.assert_array_equal(ext.values, base.values)
    # appending a full hop adds exactly one frame and leaves old frames alone
    ext = log_mel(AudioClip(np.concatenate([x, rng.uniform(-0.4, 0.4, 320)]), 16000))
    assert ext.values.shape == (50, 40)
    np.testing.assert_array_equal(ext.values[:49], base.values)


def test_feature_config_validation():
    with pytest.raises(ConfigurationError):
        FeatureConfig(hop_len_s=0.05, window_len_s=0.04)
    with pytest.raises(ConfigurationError):
        FeatureConfig(n_mels=0)
    with pytest.raises(ConfigurationError):
        FeatureConfig(fmin_hz=500.0, fmax_hz=100.0)


def test_sedf_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(9)
    feats = FeatureMatrix(rng.normal(size=(33, 12)), 0.02, 0.04)
    p1 = tmp_path / "a.sedf"
    p2 = tmp_path / "b.sedf"
    write_sedf(p1, feats)
    back = read_sedf(p1)
    assert back.values.shape == (33, 12)
    assert back.hop_len_s == 0.02
    assert back.window_len_s == 0.04
    np.testing.assert_array_equal(back.values, feats.values.astype(np.float32))
    write_sedf(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


def test_sedf_rejects_corruption(tmp_path):
    feats = FeatureMatrix(np.zeros((4, 3)), 0.02, 0.04)
    path = tmp_path / "x.sedf"
    write_sedf(path, feats)
    blob = path.read_bytes()
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        read_sedf(path)
    path.write_bytes(blob[:-4])
    with pytest.raises(FormatError):
        read_sedf(path)
