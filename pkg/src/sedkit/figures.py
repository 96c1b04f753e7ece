"""Figure rendering for training and evaluation reports.

Every report-writing command drops a PNG next to its delimited output so a
run can be eyeballed without loading the numbers anywhere.  The Agg backend
is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import MetricsReport  # noqa: E402
from .trainer import EpochStats  # noqa: E402


def save_training_curves(history: list[EpochStats], path: str | Path) -> None:
    """Loss curves and validation F1 over epochs, one PNG."""
    epochs = [h.epoch for h in history]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    ax_loss.plot(epochs, [h.train_loss for h in history], label="train loss")
    ax_loss.plot(epochs, [h.val_loss for h in history], label="val loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("binary cross entropy")
    ax_loss.legend(frameon=False)
    ax_f1.plot(epochs, [h.val_f1 for h in history], color="tab:green")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("validation segment F1")
    ax_f1.set_ylim(0.0, 1.0)
    for ax in (ax_loss, ax_f1):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_report_figure(report: MetricsReport, path: str | Path) -> None:
    """Bar charts of the pooled counts and the derived metrics."""
    fig, (ax_counts, ax_metrics) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    c = report.counts
    count_names = ["TP", "FP", "FN", "S", "D", "I"]
    count_vals = [c.tp, c.fp, c.fn, c.substitutions, c.deletions, c.insertions]
    ax_counts.bar(count_names, count_vals, color="tab:blue")
    ax_counts.set_ylabel("count")
    ax_counts.set_title(f"{report.mode}-based counts (N={c.n_ref})")

    metric_names = ["precision", "recall", "F1"]
    metric_vals = [report.precision, report.recall, report.f_score]
    ax_metrics.bar(metric_names, metric_vals, color="tab:green")
    ax_metrics.axhline(1.0, color="gray", lw=0.8, ls=":")
    ax_metrics.set_ylim(0.0, 1.05)
    ax_metrics.set_title(f"error rate = {report.error_rate:.3f}")
    for ax in (ax_counts, ax_metrics):
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
