"""Report figures rendered to files next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_history_plot(history, path) -> None:
    """Per-batch training loss over updates, one line per restart."""
    fig, ax = plt.subplots(figsize=(7, 4))
    restarts = sorted({row["restart"] for row in history}) if history else []
    for restart in restarts:
        losses = [row["loss"] for row in history if row["restart"] == restart]
        label = f"restart {restart}" if len(restarts) > 1 else None
        ax.plot(np.arange(len(losses)), losses, lw=1.2, label=label)
    ax.set_xlabel("update")
    ax.set_ylabel("batch loss (mean NLL)")
    if len(restarts) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_em_history_plot(loglik_history, path) -> None:
    """Total log-likelihood per EM iteration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(loglik_history)), loglik_history, marker="o", ms=3, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("total log-likelihood")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_da_histogram(scores, path) -> None:
    """Distribution of per-sequence DA with its mean marked."""
    scores = np.asarray(scores, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(scores, bins=min(30, max(5, scores.size // 2)), color="tab:blue",
            alpha=0.8, edgecolor="black", lw=0.4)
    ax.axvline(scores.mean(), color="tab:red", lw=1.5,
               label=f"mean = {scores.mean():.4f}")
    ax.set_xlabel("description accuracy")
    ax.set_ylabel("sequences")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fold_accuracy_plot(accuracies, path) -> None:
    """Per-fold classification accuracy bars with the mean as a line."""
    accuracies = np.asarray(accuracies, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(accuracies.size), accuracies, color="tab:blue", alpha=0.8)
    ax.axhline(accuracies.mean(), color="tab:red", lw=1.5,
               label=f"mean = {accuracies.mean():.4f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
