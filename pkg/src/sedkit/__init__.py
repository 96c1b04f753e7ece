"""Polyphonic sound event detection toolkit.

Everything needed to go from nothing to a scored detector without leaving
the package: synthetic scene generation with exact labels, log mel-band
features, a from-scratch convolutional recurrent network with verified
backpropagation, SGD training with early stopping and random
hyperparameter search, post-processing into discrete events, and
segment/event-based evaluation.
"""

from .audio_io import AudioClip, read_wav, write_wav
from .annotations import (
    EventInstance,
    EventList,
    EventRoll,
    Vocabulary,
    WeakLabelSet,
    events_to_roll,
    parse_event_list,
    roll_to_events,
    serialize_event_list,
    weak_from_strong,
)
from .augment import SoftTargetMatrix, add_noise_at_snr, block_mix, mixup, time_stretch
from .errors import SedkitError
from .features import (
    FeatureConfig,
    FeatureMatrix,
    MelFilterbank,
    build_mel_filterbank,
    hz_to_mel,
    log_mel,
    mel_to_hz,
    power_spectrogram,
    read_sedf,
    write_sedf,
)
from .nnet import Crnn, CrnnConfig, load_checkpoint, save_checkpoint
from .postprocess import binarize, enforce_min_duration, fill_gaps, probs_to_events, tags_from_probs
from .evaluation import (
    MetricsReport,
    SegmentCounts,
    error_rate,
    evaluate_directory,
    event_based_counts,
    precision_recall_f,
    roc_auc,
    segment_counts,
)
from .scenegen import (
    BackgroundSpec,
    EventTemplate,
    Placement,
    SceneSamplerParams,
    SceneSpec,
    render_template,
    sample_scene_spec,
    synthesize_scene,
)
from .trainer import TrainConfig, TrainItem, EvalItem, random_search, train

__version__ = "0.1.0"
