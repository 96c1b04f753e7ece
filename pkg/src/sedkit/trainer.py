"""Plain stochastic gradient descent training with early stopping, plus
random hyperparameter search.

Each epoch takes one random fixed-length crop per training item, groups the
crops into batches, and applies one SGD step per batch on the gradient
averaged over the batch.  After every epoch the model is scored on the
validation items by segment F1 on a one second grid at threshold 0.5, and
the parameters from the best epoch are what training returns.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .annotations import (
    EventInstance,
    EventList,
    EventRoll,
    Vocabulary,
    events_to_roll,
    roll_to_events,
)
from .errors import ConfigurationError, SearchError, TrainingError
from .evaluation import SegmentCounts, precision_recall_f, segment_counts
from .features import FeatureMatrix
from .nnet import Crnn, CrnnConfig, bce_loss

VAL_SEGMENT_LEN_S = 1.0
VAL_THRESHOLD = 0.5


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for one training run."""

    max_epochs: int = 30
    batch_size: int = 32
    initial_lr: float = 0.1
    lr_decay: float = 1.0  # per-epoch multiplicative decay
    crop_len_frames: int = 128
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if not (self.initial_lr > 0):
            raise ConfigurationError("initial_lr must be positive")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ConfigurationError("lr_decay must lie in (0, 1]")
        if self.crop_len_frames < 1:
            raise ConfigurationError("crop_len_frames must be at least 1")
        if self.early_stop_patience < 0:
            raise ConfigurationError("early_stop_patience must be non-negative")


@dataclass(frozen=True)
class TrainItem:
    """One training clip: features plus frame-resolution binary targets (C, T)."""

    features: FeatureMatrix
    targets: np.ndarray


@dataclass(frozen=True)
class EvalItem:
    """One validation clip: features plus its reference events and duration."""

    features: FeatureMatrix
    events: EventList
    duration_s: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float
    val_f1: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[EpochStats]
    best_epoch: int
    best_val_f1: float
    feature_mean: np.ndarray  # per-band standardization learned from training data
    feature_std: np.ndarray


def targets_for(events: EventList, features: FeatureMatrix, duration_s: float,
                vocab: Vocabulary) -> np.ndarray:
    """Frame-resolution targets: the event roll at the hop grid, cut to T frames."""
    roll = events_to_roll(events, duration_s, features.hop_len_s, vocab)
    t = features.n_frames
    activity = roll.activity[:, :t]
    if activity.shape[1] < t:  # clip shorter than the frame span; pad as silence
        activity = np.pad(activity, ((0, 0), (0, t - activity.shape[1])))
    return activity.astype(np.float64)


def compute_feature_norm(items: list[TrainItem]) -> tuple[np.ndarray, np.ndarray]:
    """Per-band mean and standard deviation over all training frames."""
    stacked = np.concatenate([item.features.values for item in items], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    return mean, np.maximum(std, 1e-6)


def normalize(values: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (values - mean) / std


def make_batches(
    items: list[TrainItem],
    crop_len_frames: int,
    batch_size: int,
    rng: np.random.Generator,
) -> tuple[list[list[tuple[np.ndarray, np.ndarray]]], int]:
    """Shuffle items, crop each to a random window, and group into batches.

    Items with fewer frames than the crop length are skipped; the second
    return value is how many were skipped.
    """
    order = rng.permutation(len(items))
    crops = []
    skipped = 0
    for idx in order:
        item = items[idx]
        t = item.features.n_frames
        if t < crop_len_frames:
            skipped += 1
            continue
        t0 = int(rng.integers(0, t - crop_len_frames + 1))
        crops.append((
            item.features.values[t0:t0 + crop_len_frames],
            item.targets[:, t0:t0 + crop_len_frames],
        ))
    batches = [crops[i:i + batch_size] for i in range(0, len(crops), batch_size)]
    return batches, skipped


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
    """In-place p -= lr * g for every parameter; rejects non-finite gradients."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name}")
        params[name] -= lr * g


def _validation_scores(
    model: Crnn, val_items: list[EvalItem], vocab: Vocabulary,
    mean: np.ndarray, std: np.ndarray,
) -> tuple[float, float]:
    """Mean validation loss and pooled segment F1 on the 1 s grid."""
    losses = []
    pooled = SegmentCounts()
    for item in val_items:
        probs = model.forward(normalize(item.features.values, mean, std))
        targets = targets_for(item.events, item.features, item.duration_s, vocab)
        losses.append(bce_loss(probs, targets))
        binarized = (probs >= VAL_THRESHOLD).astype(np.uint8)
        sys_events = roll_to_events(
            EventRoll(binarized, item.features.hop_len_s, vocab)
        )
        ref_roll = events_to_roll(item.events, item.duration_s, VAL_SEGMENT_LEN_S, vocab)
        sys_roll = events_to_roll(
            _clip_events(sys_events, item.duration_s), item.duration_s,
            VAL_SEGMENT_LEN_S, vocab
        )
        pooled = pooled + segment_counts(ref_roll, sys_roll)
    _p, _r, f1 = precision_recall_f(pooled)
    return float(np.mean(losses)) if losses else math.nan, f1


def _clip_events(events: EventList, duration_s: float) -> EventList:
    """Trim event tails that run past the clip (frame grids can overshoot)."""
    kept = []
    for e in events:
        if e.onset_s >= duration_s:
            continue
        kept.append(EventInstance(e.onset_s, min(e.offset_s, duration_s), e.label))
    return EventList(tuple(kept))


def train(
    model: Crnn,
    train_items: list[TrainItem],
    val_items: list[EvalItem],
    vocab: Vocabulary,
    config: TrainConfig,
    verbose: bool = False,
) -> TrainResult:
    """Optimize the model in place and return the best-epoch parameters.

    The learning rate for epoch e (0-based) is initial_lr * lr_decay**e.
    Training stops early once early_stop_patience epochs pass without the
    validation F1 improving; the returned parameters are from the best
    epoch, not the last one.  Divergence (non-finite loss or gradient)
    aborts with the history so far attached to the error.
    """
    if not train_items:
        raise ConfigurationError("no training items")
    rng = np.random.default_rng(config.seed)
    mean, std = compute_feature_norm(train_items)
    normed_train = [
        TrainItem(
            FeatureMatrix(normalize(it.features.values, mean, std),
                          it.features.hop_len_s, it.features.window_len_s),
            it.targets,
        )
        for it in train_items
    ]

    history: list[EpochStats] = []
    best_f1 = -math.inf
    best_epoch = -1
    best_params = {k: v.copy() for k, v in model.params().items()}
    since_improvement = 0

    for epoch in range(config.max_epochs):
        lr = config.initial_lr * config.lr_decay**epoch
        batches, _skipped = make_batches(
            normed_train, config.crop_len_frames, config.batch_size, rng
        )
        if not batches:
            raise ConfigurationError(
                f"every training item is shorter than crop_len_frames={config.crop_len_frames}"
            )
        epoch_losses = []
        for batch in batches:
            grad_sum: dict[str, np.ndarray] | None = None
            for x, y in batch:
                loss, grads = model.loss_and_grads(x, y, training=True, rng=rng)
                if not math.isfinite(loss):
                    raise TrainingError(f"training loss diverged at epoch {epoch}", history)
                epoch_losses.append(loss)
                if grad_sum is None:
                    grad_sum = {k: g.copy() for k, g in grads.items()}
                else:
                    for k, g in grads.items():
                        grad_sum[k] += g
            scale = 1.0 / len(batch)
            try:
                sgd_step(model.params(), {k: g * scale for k, g in grad_sum.items()}, lr)
            except TrainingError as err:
                raise TrainingError(str(err), history) from None

        val_loss, val_f1 = _validation_scores(model, val_items, vocab, mean, std)
        stats = EpochStats(epoch, lr, float(np.mean(epoch_losses)), val_loss, val_f1)
        history.append(stats)
        if verbose:
            print(
                f"epoch {epoch:3d}  lr {lr:.5f}  train_loss {stats.train_loss:.5f}  "
                f"val_loss {val_loss:.5f}  val_f1 {val_f1:.4f}"
            )

        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params().items()}
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement > config.early_stop_patience:
                break

    model.set_params(best_params)
    return TrainResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        best_val_f1=best_f1 if best_epoch >= 0 else 0.0,
        feature_mean=mean,
        feature_std=std,
    )


def write_history_tsv(path: str | Path, history: list[EpochStats]) -> None:
    lines = ["epoch\tlearning_rate\ttrain_loss\tval_loss\tval_f1"]
    for h in history:
        lines.append(
            f"{h.epoch}\t{h.learning_rate:.8f}\t{h.train_loss:.8f}\t"
            f"{h.val_loss:.8f}\t{h.val_f1:.6f}"
        )
    Path(path).write_text("".join(f"{ln}\n" for ln in lines), encoding="utf-8")


def _draw_value(rng: np.random.Generator, spec):
    """One draw from a search-space entry: (lo, hi) range or explicit choices."""
    if isinstance(spec, (list, tuple)) and len(spec) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in spec
    ):
        lo, hi = spec
        if isinstance(lo, int) and isinstance(hi, int):
            return int(rng.integers(lo, hi + 1))
        return float(rng.uniform(lo, hi))
    if isinstance(spec, (list, tuple)) and spec:
        return spec[int(rng.integers(len(spec)))]
    raise ConfigurationError(f"cannot interpret search-space entry {spec!r}")


@dataclass
class TrialRecord:
    trial: int
    settings: dict
    status: str  # "ok" or "diverged"
    val_f1: float
    val_loss: float
    best_epoch: int


def random_search(
    space: dict,
    n_trials: int,
    seed: int,
    model_config: CrnnConfig,
    train_config: TrainConfig,
    train_items: list[TrainItem],
    val_items: list[EvalItem],
    vocab: Vocabulary,
    verbose: bool = False,
) -> tuple[CrnnConfig, TrainConfig, list[TrialRecord]]:
    """Uniform random hyperparameter search.

    Space keys name fields of TrainConfig or CrnnConfig; each trial draws
    every key once (in sorted key order, from a generator seeded by `seed`)
    and trains from scratch with a per-trial model seed.  The best trial
    maximizes validation F1, breaking ties by lower validation loss and
    then by earlier trial index.  If every trial diverges, the per-trial
    records ride along on the raised SearchError.
    """
    if n_trials < 1:
        raise ConfigurationError("n_trials must be at least 1")
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    model_fields = {f.name for f in dataclasses.fields(CrnnConfig)}
    for key in space:
        if key not in train_fields and key not in model_fields:
            raise ConfigurationError(f"search-space key {key!r} matches no setting")

    rng = np.random.default_rng(seed)
    records: list[TrialRecord] = []
    best: tuple | None = None  # (-f1, loss, trial) for min-comparison
    best_configs: tuple[CrnnConfig, TrainConfig] | None = None

    for trial in range(n_trials):
        drawn = {key: _draw_value(rng, space[key]) for key in sorted(space)}
        t_over = {k: v for k, v in drawn.items() if k in train_fields}
        m_over = {k: v for k, v in drawn.items() if k in model_fields}
        trial_model_cfg = replace(model_config, seed=model_config.seed + trial, **m_over)
        trial_train_cfg = replace(train_config, seed=train_config.seed + trial, **t_over)
        model = Crnn(trial_model_cfg)
        try:
            result = train(model, train_items, val_items, vocab, trial_train_cfg)
        except TrainingError:
            records.append(TrialRecord(trial, drawn, "diverged", math.nan, math.nan, -1))
            continue
        stats = result.history[result.best_epoch]
        records.append(TrialRecord(
            trial, drawn, "ok", result.best_val_f1, stats.val_loss, result.best_epoch
        ))
        if verbose:
            print(f"trial {trial}: f1={result.best_val_f1:.4f} settings={drawn}")
        key = (-result.best_val_f1, stats.val_loss, trial)
        if best is None or key < best:
            best = key
            best_configs = (trial_model_cfg, trial_train_cfg)

    if best_configs is None:
        raise SearchError("every search trial diverged", records)
    return best_configs[0], best_configs[1], records
