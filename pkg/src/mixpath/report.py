"""Figure rendering for report directories.

Commands that stream line-delimited JSON can also write the same records
to a report directory together with matplotlib figures summarizing them.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def write_jsonl(records: Iterable[dict], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def save_training_figures(batch_records: Sequence[dict], outdir: Union[str, Path]) -> list[Path]:
    """Loss curve and distinct-latent usage per epoch."""
    outdir = Path(outdir)
    by_epoch: dict[int, list[dict]] = {}
    for rec in batch_records:
        by_epoch.setdefault(rec["epoch"], []).append(rec)
    epochs = sorted(by_epoch)
    mean_loss = [sum(r["loss"] for r in by_epoch[e]) / len(by_epoch[e]) for e in epochs]
    mean_latents = [
        sum(r["distinct_latents_used"] for r in by_epoch[e]) / len(by_epoch[e]) for e in epochs
    ]

    paths = []
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, mean_loss, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cross-entropy per token")
    ax.set_title("Training loss")
    fig.tight_layout()
    p = outdir / "loss_curve.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, mean_latents, lw=1.5, color="tab:orange")
    ax.set_xlabel("epoch")
    ax.set_ylabel("distinct latents per batch")
    ax.set_title("Latent usage")
    fig.tight_layout()
    p = outdir / "latent_usage.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths


def save_diversity_figure(per_head: Sequence[dict], outdir: Union[str, Path]) -> Path:
    """Histogram of per-head div_ngram and div_bleu."""
    outdir = Path(outdir)
    ngram_vals = [r["div_ngram"] for r in per_head if r.get("div_ngram") is not None]
    bleu_vals = [r["div_bleu"] for r in per_head if r.get("div_bleu") is not None]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, vals, label in zip(axes, (ngram_vals, bleu_vals), ("div_ngram", "div_bleu")):
        if vals:
            ax.hist(vals, bins=20, range=(0.0, 1.0), color="tab:blue", alpha=0.8)
        ax.set_xlabel(label)
        ax.set_xlim(0.0, 1.0)
    axes[0].set_ylabel("heads")
    fig.suptitle("Per-head generation diversity")
    fig.tight_layout()
    p = outdir / "diversity.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p


def save_qa_figure(decisions: Sequence[dict], outdir: Union[str, Path]) -> Path:
    """Histogram of the margin between the chosen and runner-up scores."""
    outdir = Path(outdir)
    margins = []
    for rec in decisions:
        scores = sorted(rec["scores"], reverse=True)
        if len(scores) >= 2:
            margins.append(scores[0] - scores[1])
    fig, ax = plt.subplots(figsize=(6, 4))
    if margins:
        ax.hist(margins, bins=30, color="tab:green", alpha=0.8)
    ax.set_xlabel("score margin (chosen - runner-up)")
    ax.set_ylabel("examples")
    ax.set_title("Answer decision margins")
    fig.tight_layout()
    p = outdir / "qa_margins.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p
