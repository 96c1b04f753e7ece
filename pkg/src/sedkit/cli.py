"""Command line front end.

Subcommands cover the full workflow: synthesize labeled data, extract
features, train a detector, run it on new audio, score the output, and
augment a dataset on disk.  Config files are JSON (see docs/config-schemas.md).

Exit codes:
  0  success
  1  usage or configuration problem (bad flags, bad settings)
  2  input/output problem (unreadable or malformed files, unpaired data)
  3  numeric failure (training diverged, degenerate signals, undefined metrics)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .annotations import EventList, Vocabulary, load_vocabulary, serialize_event_list
from .audio_io import AudioClip, read_wav
from .augment import SoftTargetMatrix, add_noise_at_snr, time_stretch
from .errors import (
    ComparisonError,
    ConfigurationError,
    DegenerateSignalError,
    DimensionError,
    DomainError,
    FormatError,
    ParseError,
    SamplingError,
    SearchError,
    SedkitError,
    TrainingError,
    UndefinedMetricError,
    UnsupportedError,
    VocabularyError,
)
from .evaluation import evaluate_directory
from .features import FeatureConfig, FeatureMatrix, log_mel, write_sedf
from .nnet import Crnn, CrnnConfig, load_checkpoint, save_checkpoint
from .postprocess import probs_to_events
from .scenegen import (
    BackgroundSpec,
    EventTemplate,
    SceneSamplerParams,
    sample_scene_spec,
    synthesize_scene,
)
from .trainer import (
    EvalItem,
    TrainConfig,
    TrainItem,
    normalize,
    targets_for,
    train,
    write_history_tsv,
)

USAGE_EXIT = 1
IO_EXIT = 2
NUMERIC_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON in {path}: {exc}") from exc


def _feature_config(data: dict | None) -> FeatureConfig:
    if not data:
        return FeatureConfig()
    allowed = {"window_len_s", "hop_len_s", "n_mels", "fmin_hz", "fmax_hz", "log_floor"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown feature config keys: {unknown}")
    return FeatureConfig(**data)


# ---------------------------------------------------------------- synth

def _templates_from_config(data: dict) -> dict[str, EventTemplate]:
    templates = {}
    for template_id, fields in data.items():
        templates[template_id] = EventTemplate(**fields)
    return templates


def cmd_synth(args) -> int:
    config = _load_json(args.config)
    try:
        catalog = _templates_from_config(config["templates"])
        background = BackgroundSpec(**config.get("background", {}))
        params = SceneSamplerParams(
            duration_s=float(config.get("duration_s", 4.0)),
            sample_rate=int(config.get("sample_rate", 16000)),
            n_events_range=tuple(config.get("n_events_range", (2, 4))),
            snr_range_db=tuple(config.get("snr_range_db", (6.0, 20.0))),
            max_polyphony=int(config.get("max_polyphony", 2)),
            background=background,
        )
        fractions = dict(config.get("split_fractions", {"train": 0.6, "val": 0.2, "test": 0.2}))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad synthesis config: {exc}") from exc
    total = sum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions sum to {total}, expected 1")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab = Vocabulary(tuple(sorted({t.label for t in catalog.values()})))
    rows = []
    for i in range(args.num_scenes):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, i]))
        spec = sample_scene_spec(rng, catalog, params)
        clip, events = synthesize_scene(spec, catalog)
        scene_id = f"scene_{i:05d}"
        split = ds.assign_split(scene_id, args.seed, fractions)
        ds.write_scene(out, scene_id, clip, events)
        rows.append((scene_id, split))
    ds.write_vocabulary(out, vocab)
    ds.write_manifest(out, rows)
    print(f"wrote {len(rows)} scene(s) to {out}")
    return 0


# ------------------------------------------------------------- features

def cmd_features(args) -> int:
    config = _feature_config(_load_json(args.config) if args.config else None)
    in_path = Path(args.input)
    out_path = Path(args.output)
    if in_path.is_dir():
        wavs = sorted(in_path.glob("*.wav"))
        out_path.mkdir(parents=True, exist_ok=True)
        failures = []
        for wav in wavs:
            try:
                feats = log_mel(read_wav(wav), config)
            except (FormatError, UnsupportedError, DimensionError) as exc:
                failures.append((wav.name, str(exc)))
                continue
            write_sedf(out_path / f"{wav.stem}.sedf", feats)
        print(f"extracted features for {len(wavs) - len(failures)}/{len(wavs)} file(s)")
        if failures:
            for name, reason in failures:
                print(f"failed: {name}: {reason}", file=sys.stderr)
            return IO_EXIT
        return 0
    feats = log_mel(read_wav(in_path), config)
    if out_path.parent != Path("."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    write_sedf(out_path, feats)
    print(f"wrote {feats.n_frames}x{feats.n_bands} features to {out_path}")
    return 0


# ---------------------------------------------------------------- train

def _model_config(data: dict, n_classes: int, n_mels: int, seed: int) -> CrnnConfig:
    fields = dict(data or {})
    fields.pop("n_classes", None)
    fields.pop("n_mels", None)
    fields.pop("seed", None)
    if "conv_blocks" in fields:
        fields["conv_blocks"] = tuple(tuple(int(v) for v in b) for b in fields["conv_blocks"])
    if "gru_sizes" in fields:
        fields["gru_sizes"] = tuple(int(v) for v in fields["gru_sizes"])
    if "dense_sizes" in fields:
        fields["dense_sizes"] = tuple(int(v) for v in fields["dense_sizes"])
    try:
        return CrnnConfig(n_classes=n_classes, n_mels=n_mels, seed=seed, **fields)
    except TypeError as exc:
        raise ConfigurationError(f"bad model config: {exc}") from exc


def _items_from_records(records, feat_config, vocab):
    train_items, eval_items = [], []
    for record in records:
        clip = record.load_audio()
        feats = log_mel(clip, feat_config)
        train_items.append(TrainItem(feats, targets_for(record.events, feats,
                                                        clip.duration_s, vocab)))
        eval_items.append(EvalItem(feats, record.events, clip.duration_s))
    return train_items, eval_items


def cmd_train(args) -> int:
    config = _load_json(args.config) if args.config else {}
    feat_config = _feature_config(config.get("features"))
    by_split, vocab = ds.load_dataset(args.data)
    if not by_split["train"]:
        raise ConfigurationError("dataset has no training scenes")

    train_items, _ = _items_from_records(by_split["train"], feat_config, vocab)
    _, val_items = _items_from_records(by_split["val"], feat_config, vocab)

    model_cfg = _model_config(config.get("model", {}), len(vocab), feat_config.n_mels, args.seed)
    try:
        train_cfg = TrainConfig(seed=args.seed, **(config.get("train") or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad train config: {exc}") from exc

    model = Crnn(model_cfg)
    result = train(model, train_items, val_items, vocab, train_cfg, verbose=True)

    model_path = Path(args.model_out)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "model": model_cfg.to_json_dict(),
        "vocabulary": list(vocab),
        "features": {
            "window_len_s": feat_config.window_len_s,
            "hop_len_s": feat_config.hop_len_s,
            "n_mels": feat_config.n_mels,
            "fmin_hz": feat_config.fmin_hz,
            "fmax_hz": feat_config.fmax_hz,
            "log_floor": feat_config.log_floor,
        },
        "normalization": {
            "mean": result.feature_mean.tolist(),
            "std": result.feature_std.tolist(),
        },
        "best_epoch": result.best_epoch,
        "best_val_f1": result.best_val_f1,
    }
    save_checkpoint(model_path, meta, result.params)
    history_path = model_path.with_suffix(".history.tsv")
    write_history_tsv(history_path, result.history)
    from .figures import save_training_curves  # matplotlib import deferred to use

    save_training_curves(result.history, model_path.with_suffix(".history.png"))
    print(
        f"saved model to {model_path} (best epoch {result.best_epoch}, "
        f"val F1 {result.best_val_f1:.4f}); history in {history_path}"
    )
    return 0


# -------------------------------------------------------------- predict

def _rebuild_model(meta: dict, params) -> tuple[Crnn, Vocabulary, FeatureConfig, np.ndarray, np.ndarray]:
    try:
        model_cfg = CrnnConfig.from_json_dict(meta["model"])
        vocab = Vocabulary(tuple(meta["vocabulary"]))
        feat_cfg = _feature_config(meta["features"])
        mean = np.asarray(meta["normalization"]["mean"], dtype=np.float64)
        std = np.asarray(meta["normalization"]["std"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"checkpoint metadata incomplete: {exc}") from exc
    model = Crnn(model_cfg)
    model.set_params(params)
    return model, vocab, feat_cfg, mean, std


def cmd_predict(args) -> int:
    meta, params = load_checkpoint(args.model)
    model, vocab, feat_cfg, mean, std = _rebuild_model(meta, params)
    if args.vocab:
        requested = load_vocabulary(args.vocab)
        if tuple(requested) != tuple(vocab):
            raise ConfigurationError(
                "model vocabulary does not match the requested vocabulary"
            )

    in_path = Path(args.input)
    wavs = sorted(in_path.glob("*.wav")) if in_path.is_dir() else [in_path]
    if not wavs:
        print("no input files found", file=sys.stderr)
        return IO_EXIT
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for wav in wavs:
        feats = log_mel(read_wav(wav), feat_cfg)
        probs = model.forward(normalize(feats.values, mean, std))
        events = probs_to_events(
            SoftTargetMatrix(probs), feat_cfg.hop_len_s, vocab,
            threshold=args.threshold, min_duration_s=args.min_duration,
            max_gap_s=args.max_gap,
        )
        ds.atomic_write_text(out_dir / f"{wav.stem}.tsv", serialize_event_list(events))
        if args.emit_probs:
            # one row per frame, one column per class, in vocabulary order
            write_sedf(out_dir / f"{wav.stem}.probs.sedf",
                       FeatureMatrix(probs.T, feat_cfg.hop_len_s, feat_cfg.window_len_s))
    print(f"wrote predictions for {len(wavs)} file(s) to {out_dir}")
    return 0


# ------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    report = evaluate_directory(
        args.ref, args.est, mode=args.mode,
        segment_len_s=args.segment_length,
        collar_s=args.collar, use_offset=args.offset_condition,
    )
    sys.stdout.write(report.to_text())
    if args.report:
        report_path = Path(args.report)
        if report_path.parent != Path("."):
            report_path.parent.mkdir(parents=True, exist_ok=True)
        ds.atomic_write_text(report_path, report.to_tsv())
        from .figures import save_report_figure

        save_report_figure(report, report_path.with_suffix(".png"))
        print(f"report written to {report_path}")
    return 0


# -------------------------------------------------------------- augment

def _op_number(value: str, op: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"bad numeric argument in op {op!r}") from None


def _parse_op(text: str) -> tuple[str, float | None]:
    name, _, value = text.partition(":")
    if name == "stretch":
        if not value:
            raise ConfigurationError("stretch needs a factor, e.g. stretch:1.2")
        return "stretch", _op_number(value, text)
    if name == "noise":
        if not value:
            raise ConfigurationError("noise needs an SNR in dB, e.g. noise:10")
        return "noise", _op_number(value, text)
    if name == "blockmix":
        if value:
            raise ConfigurationError("blockmix takes no argument")
        return "blockmix", None
    raise ConfigurationError(f"unknown augmentation op {text!r}")


def cmd_augment(args) -> int:
    op, value = _parse_op(args.ops)
    by_split, vocab = ds.load_dataset(args.input)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for split_no, split in enumerate(ds.SPLITS):
        records = by_split[split]
        if op == "blockmix" and records:
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, split_no]))
            partners = rng.permutation(len(records))
        for idx, record in enumerate(records):
            clip = record.load_audio()
            if op == "stretch":
                new_clip, new_events = time_stretch(clip, record.events, value)
                suffix = "stretch"
            elif op == "noise":
                noise_rng = np.random.default_rng(
                    np.random.SeedSequence([args.seed, split_no, idx])
                )
                noise = AudioClip(noise_rng.standard_normal(clip.samples.size),
                                  clip.sample_rate)
                new_clip = add_noise_at_snr(clip, noise, value)
                new_events = record.events
                suffix = "noise"
            else:  # blockmix
                partner = records[int(partners[idx])]
                other = partner.load_audio()
                if other.samples.size != clip.samples.size:
                    raise DimensionError(
                        f"blockmix needs equally long scenes; {record.scene_id} and "
                        f"{partner.scene_id} differ"
                    )
                new_clip = AudioClip(0.5 * (clip.samples + other.samples), clip.sample_rate)
                merged = dict.fromkeys(tuple(record.events) + tuple(partner.events))
                new_events = EventList(tuple(merged))
                suffix = "mix"
            new_id = f"{record.scene_id}__{suffix}"
            ds.write_scene(out, new_id, new_clip, new_events)
            rows.append((new_id, split))
    ds.write_vocabulary(out, vocab)
    ds.write_manifest(out, rows)
    print(f"wrote {len(rows)} augmented scene(s) to {out}")
    return 0


# ----------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sedkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a labeled scene dataset")
    p.add_argument("--config", required=True, help="JSON synthesis config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract log mel features to SEDF")
    p.add_argument("--input", required=True, help="WAV file or directory of WAVs")
    p.add_argument("--output", required=True, help="SEDF file or directory")
    p.add_argument("--config", help="JSON feature config")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a detector on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--config", help="JSON with optional model/features/train sections")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run a trained model on audio")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="WAV file or directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-duration", type=float, default=0.1)
    p.add_argument("--max-gap", type=float, default=0.1)
    p.add_argument("--emit-probs", action="store_true",
                   help="also write per-frame class probabilities as SEDF")
    p.add_argument("--vocab", help="vocabulary file the output must match")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against references")
    p.add_argument("--ref", required=True, help="directory of reference TSVs")
    p.add_argument("--est", required=True, help="directory of estimated TSVs")
    p.add_argument("--mode", choices=("segment", "event"), default="segment")
    p.add_argument("--segment-length", type=float, default=1.0)
    p.add_argument("--collar", type=float, default=0.2)
    p.add_argument("--offset-condition", action="store_true",
                   help="require offsets to fall within the collar too")
    p.add_argument("--report", help="write TSV report (and PNG figure) here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("augment", help="write an augmented copy of a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ops", required=True,
                   help="one of stretch:<factor>, blockmix, noise:<snr_db>")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (FormatError, ParseError, UnsupportedError, ComparisonError,
            VocabularyError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT
    except (TrainingError, SearchError, SamplingError, DegenerateSignalError,
            UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except SedkitError as exc:  # anything else from this package
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
