"""Acceptance gate: one test per published guarantee, one printed verdict each.

Every test prints a single `[criterion NN] PASS/FAIL` line with the measured
numbers and its runtime against the stated budget, so the whole contract can
be audited from the test log even under output capture.
"""

import time

import numpy as np
import pytest

from sedkit.annotations import (
    EventInstance,
    EventList,
    EventRoll,
    Vocabulary,
    parse_event_list,
    save_event_list,
    serialize_event_list,
)
from sedkit.audio_io import AudioClip, read_wav, write_wav
from sedkit.augment import SoftTargetMatrix, add_noise_at_snr, block_mix, time_stretch
from sedkit.errors import UndefinedMetricError
from sedkit.evaluation import (
    SegmentCounts,
    error_rate,
    evaluate_segments,
    event_based_counts,
    precision_recall_f,
    roc_auc,
    segment_counts,
)
from sedkit.features import (
    FeatureConfig,
    FeatureMatrix,
    hz_to_mel,
    log_mel,
    mel_to_hz,
    read_sedf,
    write_sedf,
)
from sedkit.nnet import (
    GRU,
    Conv2d,
    Crnn,
    CrnnConfig,
    Dense,
    MaxPoolFreq,
    ReLU,
    Sigmoid,
    bce_grad,
    bce_loss,
    load_checkpoint,
    save_checkpoint,
    softmax,
    softmax_grad,
)
from sedkit.postprocess import probs_to_events
from sedkit.scenegen import (
    BackgroundSpec,
    EventTemplate,
    SceneSamplerParams,
    sample_scene_spec,
    synthesize_scene,
)
from sedkit.trainer import (
    EvalItem,
    TrainConfig,
    TrainItem,
    normalize,
    targets_for,
    train,
)

FD_STEP = 1e-5
GRAD_TOL = 1e-4

# Shared desk-scale corpus: three well-separated parametric classes.
CATALOG = {
    "low_tone": EventTemplate("tone_burst", "low", 0.7, frequency_hz=300.0),
    "sweep": EventTemplate("chirp", "sweep", 0.6, frequency_hz=2500.0, bandwidth_hz=3000.0),
    "noise": EventTemplate("noise_burst", "noise", 0.5),
}
SCENE_PARAMS = SceneSamplerParams(
    duration_s=4.0, sample_rate=16000, n_events_range=(2, 4),
    snr_range_db=(6.0, 20.0), max_polyphony=2,
    background=BackgroundSpec(level=0.05),
)
SCENE_VOCAB = Vocabulary(("low", "noise", "sweep"))
FEATURES = FeatureConfig()

# Reduced network and schedules for the learning criteria.
E2E_MODEL = CrnnConfig(
    n_classes=3, n_mels=40,
    conv_blocks=((16, 3, 3, 5), (16, 3, 3, 2), (16, 3, 3, 2)),
    gru_sizes=(16,), dense_sizes=(16,), dropout_keep=0.9, seed=7,
)
E2E_TRAIN = TrainConfig(max_epochs=30, batch_size=4, initial_lr=0.3, lr_decay=0.97,
                        crop_len_frames=128, early_stop_patience=10, seed=7)
# crop 199 covers the whole 4 s scene; memorization needs no decay or patience
OVERFIT_TRAIN = TrainConfig(max_epochs=200, batch_size=2, initial_lr=1.0, lr_decay=1.0,
                            crop_len_frames=199, early_stop_patience=200, seed=3)


def _criterion(capsys, num: int, budget_s: float, body) -> None:
    t0 = time.monotonic()
    try:
        detail = body()
    except Exception as exc:
        with capsys.disabled():
            print(f"[criterion {num:02d}] FAIL: {exc}")
        raise
    elapsed = time.monotonic() - t0
    verdict = "PASS" if elapsed < budget_s else "FAIL"
    with capsys.disabled():
        print(f"[criterion {num:02d}] {verdict}: {detail} [{elapsed:.1f}s / {budget_s:.0f}s]")
    assert elapsed < budget_s, f"criterion {num} exceeded its {budget_s:.0f}s budget"


# ---------------------------------------------------------------- gradients

def _max_rel_err(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
    return float(np.max(np.abs(a - n) / denom))


def _numeric_grad(scalar_fn, arr) -> np.ndarray:
    g = np.zeros_like(arr, dtype=np.float64)
    for i in range(arr.size):
        orig = arr.flat[i]
        arr.flat[i] = orig + FD_STEP
        hi = scalar_fn()
        arr.flat[i] = orig - FD_STEP
        lo = scalar_fn()
        arr.flat[i] = orig
        g.flat[i] = (hi - lo) / (2.0 * FD_STEP)
    return g


def _probe_check(layer, x, rng) -> float:
    """Worst central-difference error over the layer's input and parameters."""
    probe = rng.normal(size=layer.forward(x).shape)

    def objective():
        return float(np.sum(layer.forward(x) * probe))

    layer.forward(x)
    analytic = {"input": np.array(layer.backward(probe))}
    arrays = {"input": x}
    if hasattr(layer, "grads"):
        analytic.update({k: v.copy() for k, v in layer.grads().items()})
        arrays.update(layer.params())
    return max(_max_rel_err(analytic[k], _numeric_grad(objective, arrays[k])) for k in arrays)


# ------------------------------------------------------------ scene helpers

def _corpus(n_scenes: int, seed: int):
    scenes = []
    for i in range(n_scenes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        spec = sample_scene_spec(rng, CATALOG, SCENE_PARAMS)
        clip, events = synthesize_scene(spec, CATALOG)
        scenes.append((log_mel(clip, FEATURES), events))
    return scenes


def _to_items(scenes):
    train_items = [TrainItem(f, targets_for(e, f, 4.0, SCENE_VOCAB)) for f, e in scenes]
    eval_items = [EvalItem(f, e, 4.0) for f, e in scenes]
    return train_items, eval_items


def _score_scenes(model, scenes, mean, std):
    """Segment-based micro scores on a 1 s grid through the full decision path."""
    pooled = SegmentCounts()
    for feats, ref in scenes:
        probs = model.forward(normalize(feats.values, mean, std))
        est = probs_to_events(SoftTargetMatrix(probs), FEATURES.hop_len_s, SCENE_VOCAB)
        pooled = pooled + evaluate_segments(ref, est, 4.0, 1.0, SCENE_VOCAB)
    _, _, f1 = precision_recall_f(pooled)
    return f1, error_rate(pooled)


def _baseline_scores(scenes):
    always = EventList(tuple(EventInstance(0.0, 4.0, label) for label in SCENE_VOCAB))
    pooled = SegmentCounts()
    for _, ref in scenes:
        pooled = pooled + evaluate_segments(ref, always, 4.0, 1.0, SCENE_VOCAB)
    _, _, f1 = precision_recall_f(pooled)
    return f1, error_rate(pooled)


# ----------------------------------------------------------------- criteria

def test_criterion_01_mel_scale_exactness(capsys):
    def body():
        assert hz_to_mel(1000.0) == 1000.0
        assert abs(hz_to_mel(3000.0) - 2000.0) <= 1e-9
        rng = np.random.default_rng(1)
        hz = rng.uniform(0.0, 8000.0, size=1000)
        back = mel_to_hz(hz_to_mel(hz))
        worst = float(np.max(np.abs(back - hz) / np.maximum(np.abs(hz), 1.0)))
        mel = rng.uniform(0.0, hz_to_mel(8000.0), size=1000)
        back_mel = hz_to_mel(mel_to_hz(mel))
        worst = max(worst, float(np.max(np.abs(back_mel - mel) / np.maximum(np.abs(mel), 1.0))))
        assert worst <= 1e-9
        return f"anchors 1000->1000 and 3000->2000 exact, round-trip rel err {worst:.1e}"

    _criterion(capsys, 1, 1.0, body)


def test_criterion_02_gradient_suite(capsys):
    def body():
        worst: dict[str, float] = {}

        def note(kind, err):
            worst[kind] = max(worst.get(kind, 0.0), err)

        for seed in range(5):
            rng = np.random.default_rng(seed)
            note("conv", _probe_check(Conv2d(2, 3, 3, 3, rng), rng.normal(size=(2, 6, 7)), rng))

            x = rng.normal(size=(3, 8))
            x += np.sign(x) * 1e-3  # keep clear of the rectifier kink
            note("relu", _probe_check(ReLU(), x, rng))

            note("pool", _probe_check(MaxPoolFreq(2), rng.normal(size=(2, 4, 6)), rng))
            note("gru_step", _probe_check(GRU(4, 3, rng), rng.normal(size=(4, 1)), rng))
            note("dense", _probe_check(Dense(5, 4, rng), rng.normal(size=(5, 7)), rng))
            note("sigmoid", _probe_check(Sigmoid(), rng.normal(size=(3, 6)), rng))

            x = rng.normal(size=(4, 5))
            probe = rng.normal(size=(4, 5))
            analytic = softmax_grad(softmax(x), probe)
            numeric = _numeric_grad(lambda: float(np.sum(softmax(x) * probe)), x)
            note("softmax", _max_rel_err(analytic, numeric))

            pred = rng.uniform(0.05, 0.95, size=(3, 7))
            target = rng.integers(0, 2, size=(3, 7)).astype(np.float64)
            numeric = _numeric_grad(lambda: bce_loss(pred, target), pred)
            note("bce", _max_rel_err(bce_grad(pred, target), numeric))

            model = Crnn(CrnnConfig(
                n_classes=2, n_mels=8, conv_blocks=((2, 3, 3, 2), (2, 3, 3, 2)),
                gru_sizes=(3,), dense_sizes=(3,), dropout_keep=1.0, seed=seed,
            ))
            feats = rng.normal(size=(6, 8))
            targets = rng.integers(0, 2, size=(2, 6)).astype(np.float64)
            _, grads = model.loss_and_grads(feats, targets)
            grads = {k: v.copy() for k, v in grads.items()}
            err = 0.0
            for name, arr in model.params().items():
                numeric = _numeric_grad(lambda: bce_loss(model.forward(feats), targets), arr)
                err = max(err, _max_rel_err(grads[name], numeric))
            note("crnn", err)

        peak_kind = max(worst, key=worst.get)
        peak = worst[peak_kind]
        assert peak < GRAD_TOL, f"worst relative error {peak:.2e} in {peak_kind}"
        return f"8 layer kinds + composed net over 5 seeds, worst rel err {peak:.1e} ({peak_kind})"

    _criterion(capsys, 2, 60.0, body)


def test_criterion_03_shape_chain(capsys):
    def body():
        model = Crnn(CrnnConfig(n_classes=6))
        chain = [model.config.n_mels]
        for _, _, _, pool in model.config.conv_blocks:
            chain.append(chain[-1] // pool)
        assert chain == [40, 8, 4, 2]
        assert model.config.stacked_dim == 256
        for t in (1, 49, 200):
            out = model.forward(np.random.default_rng(t).normal(size=(t, 40)))
            assert out.shape == (6, t)
            assert np.all((out > 0.0) & (out < 1.0))
        return "default net: bands 40->8->4->2, stacked 256, (6, T) outputs for T in {1, 49, 200}"

    _criterion(capsys, 3, 10.0, body)


def _brute_counts(ref_activity, sys_activity):
    """Cell-by-cell recount with per-segment error pairing, all python loops."""
    n_classes, n_segments = ref_activity.shape
    tp = fp = fn = tn = subs = dels = ins = n_ref = 0
    for s in range(n_segments):
        seg_tp = seg_fp = seg_fn = 0
        for c in range(n_classes):
            r = bool(ref_activity[c, s])
            y = bool(sys_activity[c, s])
            if r and y:
                seg_tp += 1
            elif y:
                seg_fp += 1
            elif r:
                seg_fn += 1
            else:
                tn += 1
            n_ref += int(r)
        tp += seg_tp
        fp += seg_fp
        fn += seg_fn
        paired = min(seg_fp, seg_fn)
        subs += paired
        ins += seg_fp - paired
        dels += seg_fn - paired
    return tp, fp, fn, tn, subs, dels, ins, n_ref


def test_criterion_04_metric_oracle(capsys):
    def body():
        labels = ("a", "b", "c")
        for trial in range(1000):
            rng = np.random.default_rng(trial)
            n_classes = int(rng.integers(1, 4))
            n_segments = int(rng.integers(1, 9))
            vocab = Vocabulary(labels[:n_classes])
            density = rng.uniform(0.2, 0.8)
            ref = (rng.random((n_classes, n_segments)) < density).astype(np.int8)
            sys = (rng.random((n_classes, n_segments)) < density).astype(np.int8)
            counts = segment_counts(EventRoll(ref, 1.0, vocab), EventRoll(sys, 1.0, vocab))
            got = (counts.tp, counts.fp, counts.fn, counts.tn, counts.substitutions,
                   counts.deletions, counts.insertions, counts.n_ref)
            want = _brute_counts(ref, sys)
            assert got == want, f"trial {trial}: {got} != brute {want}"

            btp, bfp, bfn, _, bs, bd, bi, bn = want
            if btp == 0:
                expect_prf = (0.0, 0.0, 0.0)
            else:
                p = btp / (btp + bfp)
                r = btp / (btp + bfn)
                expect_prf = (p, r, 2.0 * p * r / (p + r))
            assert precision_recall_f(counts) == expect_prf
            if bn == 0:
                with pytest.raises(UndefinedMetricError):
                    error_rate(counts)
            else:
                assert error_rate(counts) == (bs + bd + bi) / bn

        vocab = Vocabulary(("a", "b"))
        ref = EventRoll(np.array([[1, 1, 1], [0, 0, 0]]), 1.0, vocab)
        sys = EventRoll(np.array([[1, 1, 0], [1, 0, 0]]), 1.0, vocab)
        counts = segment_counts(ref, sys)
        assert (counts.substitutions, counts.deletions, counts.insertions) == (0, 1, 1)
        assert counts.n_ref == 3 and error_rate(counts) == 2.0 / 3.0

        ref = EventRoll(np.array([[1], [0]]), 1.0, vocab)
        sys = EventRoll(np.array([[0], [1]]), 1.0, vocab)
        counts = segment_counts(ref, sys)
        assert (counts.substitutions, counts.deletions, counts.insertions) == (1, 0, 0)
        assert error_rate(counts) == 1.0
        return "1000 random roll pairs match the cell-loop recount exactly; hand ERs 2/3 and 1.0"

    _criterion(capsys, 4, 10.0, body)


def test_criterion_05_event_collar_fixtures(capsys):
    def body():
        ref = EventList((EventInstance(1.0, 2.0, "a"),))
        fixtures = (
            ((1.15, 2.10, "a"), (1, 0, 0), (1, 0, 0)),  # onset and offset both inside
            ((1.10, 2.50, "a"), (1, 0, 0), (0, 1, 1)),  # onset inside, offset out
            ((1.25, 2.05, "a"), (0, 1, 1), (0, 1, 1)),  # onset outside the collar
            ((1.05, 2.05, "b"), (0, 1, 1), (0, 1, 1)),  # right times, wrong label
        )
        for (on, off, lab), want_onset_only, want_both in fixtures:
            sys = EventList((EventInstance(on, off, lab),))
            c = event_based_counts(ref, sys, collar_s=0.2, use_offset=False)
            assert (c.tp, c.fp, c.fn) == want_onset_only, f"fixture {(on, off, lab)}"
            c = event_based_counts(ref, sys, collar_s=0.2, use_offset=True)
            assert (c.tp, c.fp, c.fn) == want_both, f"fixture {(on, off, lab)} with offsets"

        ref = EventList((EventInstance(1.0, 2.0, "a"), EventInstance(4.0, 5.0, "b")))
        sys = EventList((EventInstance(1.10, 2.50, "a"), EventInstance(4.05, 5.05, "b"),
                         EventInstance(7.0, 7.5, "a")))  # unmatched extra
        c = event_based_counts(ref, sys, collar_s=0.2, use_offset=False)
        assert (c.tp, c.fp, c.fn, c.deletions, c.insertions) == (2, 1, 0, 0, 1)
        assert error_rate(c) == 0.5
        c = event_based_counts(ref, sys, collar_s=0.2, use_offset=True)
        assert (c.tp, c.fp, c.fn, c.deletions, c.insertions) == (1, 2, 1, 1, 2)
        assert error_rate(c) == 1.5
        return "collar 0.2 s fixtures give the hand-derived counts for both offset settings"

    _criterion(capsys, 5, 1.0, body)


def _trapezoid_auc(scores, labels) -> float:
    """ROC curve swept over every threshold, integrated with the trapezoid rule."""
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    tpr = [0.0]
    fpr = [0.0]
    for threshold in np.unique(scores)[::-1]:
        predicted = scores >= threshold
        tpr.append(float((predicted & labels).sum()) / n_pos)
        fpr.append(float((predicted & ~labels).sum()) / n_neg)
    return float(np.trapezoid(tpr, fpr))


def test_criterion_06_auc_equivalence(capsys):
    def body():
        gap = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(4, 40))
            scores = rng.permutation(np.linspace(0.01, 0.99, n))  # distinct by construction
            labels = rng.integers(0, 2, size=n).astype(bool)
            labels[0], labels[1] = True, False  # guarantee both classes
            gap = max(gap, abs(roc_auc(scores, labels) - _trapezoid_auc(scores, labels)))
        assert gap <= 1e-12, f"rank vs trapezoid gap {gap:.2e}"
        assert roc_auc(np.array([0.9, 0.8, 0.4, 0.3]), np.array([1, 0, 1, 0])) == 0.75
        return f"rank vs trapezoid gap {gap:.1e} over 100 tie-free sets; fixture 0.75 exact"

    _criterion(capsys, 6, 5.0, body)


def test_criterion_07_augmentation_invariants(capsys):
    def body():
        vocab = Vocabulary(("a", "b", "c"))
        seg_len = 0.5
        n_segments = 6
        sr = 8000
        n_samples = int(n_segments * seg_len * sr)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            clips = [AudioClip(0.1 * rng.normal(size=n_samples), sr) for _ in range(3)]
            rolls = [EventRoll(rng.integers(0, 2, size=(3, n_segments)), seg_len, vocab)
                     for _ in range(3)]
            (a, ra), (b, rb), (c, rc) = zip(clips, rolls)
            mix_ab = block_mix(a, ra, b, rb)
            mix_ba = block_mix(b, rb, a, ra)
            assert np.array_equal(mix_ab[1].activity, mix_ba[1].activity)
            left = block_mix(mix_ab[0], mix_ab[1], c, rc)
            mix_bc = block_mix(b, rb, c, rc)
            right = block_mix(a, ra, mix_bc[0], mix_bc[1])
            assert np.array_equal(left[1].activity, right[1].activity)
            assert np.array_equal(block_mix(a, ra, a, ra)[1].activity, ra.activity)

        worst_db = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(1000, 16000))
            clean = AudioClip(rng.uniform(0.1, 1.0) * rng.normal(size=n), sr)
            noise = AudioClip(rng.uniform(0.1, 1.0) * rng.normal(size=n + int(rng.integers(0, 4000))), sr)
            snr_db = float(rng.uniform(-10.0, 30.0))
            out = add_noise_at_snr(clean, noise, snr_db)
            added = out.samples - clean.samples
            achieved = 10.0 * np.log10(np.mean(clean.samples**2) / np.mean(added**2))
            worst_db = max(worst_db, abs(achieved - snr_db))
        assert worst_db <= 0.01, f"worst SNR deviation {worst_db:.4f} dB"

        for seed in range(30):
            rng = np.random.default_rng(seed)
            factor = float(rng.uniform(0.3, 2.8))
            onsets = np.sort(rng.uniform(0.0, 3.0, size=4))
            events = EventList(tuple(
                EventInstance(on, on + float(rng.uniform(0.05, 0.8)), "a") for on in onsets
            ))
            clip = AudioClip(rng.normal(size=8000), sr)
            _, stretched = time_stretch(clip, events, factor)
            for before, after in zip(events, stretched):
                assert after.onset_s == before.onset_s * factor
                assert after.offset_s == before.offset_s * factor
        return (f"label-union identities hold; worst SNR deviation {worst_db:.4f} dB; "
                "stretch maps endpoints exactly")

    _criterion(capsys, 7, 30.0, body)


def test_criterion_08_synthesis_exactness(capsys, tmp_path):
    def body():
        sr = SCENE_PARAMS.sample_rate
        worst_dev = 0.0
        for run in range(2):
            run_dir = tmp_path / f"run{run}"
            run_dir.mkdir()
            for i in range(50):
                rng = np.random.default_rng(np.random.SeedSequence([90125, i]))
                spec = sample_scene_spec(rng, CATALOG, SCENE_PARAMS)
                clip, events = synthesize_scene(spec, CATALOG)
                if run == 0:
                    assert len(events) == len(spec.placements)
                    placed = sorted(spec.placements, key=lambda p: (p.onset_s, p.template_id))
                    got = sorted(events, key=lambda e: (e.onset_s, e.label))
                    for p, e in zip(placed, got):
                        template = CATALOG[p.template_id]
                        assert e.label == template.label
                        worst_dev = max(
                            worst_dev,
                            abs(e.onset_s - p.onset_s),
                            abs(e.offset_s - (p.onset_s + template.duration_s)),
                        )
                write_wav(run_dir / f"scene{i:02d}.wav", clip)
                save_event_list(run_dir / f"scene{i:02d}.tsv", events)
        assert worst_dev <= 1.0 / sr, f"annotation deviates {worst_dev:.2e} s from placement"
        for name in sorted(p.name for p in (tmp_path / "run0").iterdir()):
            assert (tmp_path / "run0" / name).read_bytes() == (tmp_path / "run1" / name).read_bytes(), name
        return (f"50 scenes: annotations within {worst_dev * sr:.2f} sample periods of "
                "placements, regeneration byte-identical")

    _criterion(capsys, 8, 60.0, body)


def test_criterion_09_desk_scale_learning(capsys):
    def body():
        scenes = _corpus(100, seed=20260822)
        train_scenes, val_scenes, test_scenes = scenes[:60], scenes[60:80], scenes[80:]
        train_items, _ = _to_items(train_scenes)
        _, val_items = _to_items(val_scenes)
        model = Crnn(E2E_MODEL)
        result = train(model, train_items, val_items, SCENE_VOCAB, E2E_TRAIN)
        f1, er = _score_scenes(model, test_scenes, result.feature_mean, result.feature_std)
        base_f1, base_er = _baseline_scores(test_scenes)
        assert f1 >= 0.75, f"test F1 {f1:.3f} below 0.75"
        assert er <= 0.5, f"test ER {er:.3f} above 0.5"
        assert f1 > base_f1 and er < base_er, (
            f"does not beat always-active baseline (F1 {base_f1:.3f}, ER {base_er:.3f})"
        )
        return (f"60/20/20 scenes: test F1 {f1:.3f} (>=0.75), ER {er:.3f} (<=0.5), "
                f"baseline F1 {base_f1:.3f} / ER {base_er:.3f} beaten")

    _criterion(capsys, 9, 900.0, body)


def test_criterion_10_overfit_two_scenes(capsys):
    def body():
        scenes = _corpus(2, seed=424242)
        train_items, eval_items = _to_items(scenes)
        model = Crnn(E2E_MODEL)  # identical network to the desk-scale run
        result = train(model, train_items, eval_items, SCENE_VOCAB, OVERFIT_TRAIN)
        assert len(result.history) <= 200
        f1, er = _score_scenes(model, scenes, result.feature_mean, result.feature_std)
        assert f1 >= 0.95, f"training-set F1 {f1:.3f} below 0.95"
        return (f"2 scenes memorized: training-set F1 {f1:.3f} (>=0.95), ER {er:.3f}, "
                f"best epoch {result.best_epoch} of {len(result.history)}")

    _criterion(capsys, 10, 300.0, body)


def test_criterion_11_format_round_trips(capsys, tmp_path):
    def body():
        worst_wav = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            sr = int(rng.choice((8000, 16000, 22050, 44100)))
            clip = AudioClip(rng.uniform(-1.0, 1.0, size=int(rng.integers(1, 4001))), sr)
            path = tmp_path / f"case{seed}.wav"
            write_wav(path, clip)
            rt = read_wav(path)
            assert rt.sample_rate == sr and rt.samples.size == clip.samples.size
            worst_wav = max(worst_wav, float(np.max(np.abs(rt.samples - clip.samples))))
        assert worst_wav <= 1.0 / 32768.0

        for seed in range(10):
            rng = np.random.default_rng(seed)
            hop = float(rng.uniform(0.005, 0.05))
            values = rng.normal(size=(int(rng.integers(1, 50)), int(rng.integers(1, 64))))
            values = values.astype(np.float32).astype(np.float64)  # the format's value grid
            fm = FeatureMatrix(values, hop_len_s=hop,
                               window_len_s=hop * float(rng.uniform(1.0, 4.0)))
            p1, p2 = tmp_path / f"f{seed}a.sedf", tmp_path / f"f{seed}b.sedf"
            write_sedf(p1, fm)
            rt = read_sedf(p1)
            assert np.array_equal(rt.values, fm.values)
            assert rt.hop_len_s == fm.hop_len_s and rt.window_len_s == fm.window_len_s
            write_sedf(p2, rt)
            assert p1.read_bytes() == p2.read_bytes()

        for seed in range(10):
            rng = np.random.default_rng(seed)
            meta = {"arch": "crnn", "classes": int(rng.integers(1, 9)),
                    "labels": ["x", "y"], "lr": float(rng.uniform(0.01, 1.0))}
            params = {
                f"layer{j}.w": rng.normal(
                    size=tuple(rng.integers(1, 6, size=int(rng.integers(1, 4))))
                ).astype(np.float32).astype(np.float64)
                for j in range(int(rng.integers(1, 4)))
            }
            p1, p2 = tmp_path / f"m{seed}a.sedm", tmp_path / f"m{seed}b.sedm"
            save_checkpoint(p1, meta, params)
            rt_meta, rt_params = load_checkpoint(p1)
            assert rt_meta == meta
            assert set(rt_params) == set(params)
            for k in params:
                assert np.array_equal(rt_params[k], params[k])
            save_checkpoint(p2, rt_meta, rt_params)
            assert p1.read_bytes() == p2.read_bytes()

        labels = ("alarm", "dog", "speech")
        for seed in range(50):
            rng = np.random.default_rng(seed)
            onsets = np.sort(rng.integers(0, 10_000, size=int(rng.integers(1, 12)))) / 1000.0
            events = EventList(tuple(
                EventInstance(on, on + int(rng.integers(1, 5000)) / 1000.0,
                              labels[int(rng.integers(0, 3))])
                for on in onsets
            ))
            text = serialize_event_list(events)
            assert serialize_event_list(parse_event_list(text)) == text
        return (f"WAV worst error {worst_wav * 32768:.2f}/32768; feature and checkpoint "
                "files byte-stable; annotation text a parse/serialize fixpoint")

    _criterion(capsys, 11, 30.0, body)
