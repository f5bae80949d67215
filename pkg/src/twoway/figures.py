"""Report figures rendered next to the delimited outputs.

Uses the non-interactive backend and writes deterministic PNGs; the
resolved run configuration travels in the PNG text metadata.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _metadata(config):
    if config is None:
        return None
    return {"Description": json.dumps(config, sort_keys=True)}


def save_accuracy_figure(reports, path, config=None):
    """Bar chart of mean balanced accuracy per predictor, folds as dots."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    names = [r.predictor for r in reports]
    means = [
        r.mean_balanced_accuracy if r.mean_balanced_accuracy is not None else 0.0
        for r in reports
    ]
    xs = range(len(reports))
    ax.bar(xs, means, color="#4878a8", zorder=2)
    for x, report in zip(xs, reports):
        folds = [
            o.balanced_accuracy
            for o in report.folds
            if o.balanced_accuracy is not None
        ]
        ax.plot([x] * len(folds), folds, "k.", markersize=4, zorder=3)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1, zorder=1)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names)
    ax.set_ylabel("balanced accuracy")
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_metadata(config))
    plt.close(fig)


def save_embeddedness_figure(bins, path, config=None):
    """Outcome shares and acceptance rate by embeddedness bin."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    xs = [row["embeddedness"] for row in bins]
    width = 0.4
    ax.bar(
        [x - width / 2 for x in xs],
        [row["pct_of_positives"] for row in bins],
        width=width,
        label="% of positives",
        color="#4878a8",
    )
    ax.bar(
        [x + width / 2 for x in xs],
        [row["pct_of_negatives"] for row in bins],
        width=width,
        label="% of negatives",
        color="#d1605e",
    )
    ax.set_xlabel("embeddedness")
    ax.set_ylabel("share of outcome class (%)")
    rate_ax = ax.twinx()
    rate_ax.plot(
        xs,
        [row["positive_rate"] for row in bins],
        "o-",
        color="#333333",
        markersize=4,
        label="positive rate",
    )
    rate_ax.set_ylabel("positive rate")
    rate_ax.set_ylim(0.0, 1.0)
    handles, labels = ax.get_legend_handles_labels()
    rhandles, rlabels = rate_ax.get_legend_handles_labels()
    ax.legend(handles + rhandles, labels + rlabels, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_metadata(config))
    plt.close(fig)
