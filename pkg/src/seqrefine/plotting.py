"""Figures written next to the CLI's JSON/CSV outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_losses(history: list[dict], path) -> str:
    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [h["loss"] for h in history], label="total")
    ax.plot(epochs, [h["l_gru"] for h in history], label="recurrent branch")
    ax.plot(epochs, [h["l_mean"] for h in history], label="mean branch")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    ax2 = ax.twinx()
    ax2.plot(epochs, [h["mean_w"] for h in history], color="grey", linestyle=":", label="mean gate")
    ax2.set_ylabel("mean gate", color="grey")
    ax2.set_ylim(0, 1)
    return _save(fig, path)


def plot_refinement(report: dict, path) -> str:
    rows = report["per_interval"]
    ts = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.28
    ax.bar([t - width for t in ts], [r["initial"] for r in rows], width, label="initial")
    ax.bar(ts, [r["noisy"] for r in rows], width, label="removed as noise")
    ax.bar([t + width for t in ts], [r["augmented"] for r in rows], width, label="augmented")
    ax.set_xlabel("interval")
    ax.set_ylabel("interactions")
    ax.set_xticks(ts)
    ax.legend()
    return _save(fig, path)


def plot_sweep(axis: str, rows: list[dict], path) -> str:
    xs = [r[axis] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(xs, [r["HR@10"] for r in rows], marker="o", label="HR@10")
    ax.plot(xs, [r["NDCG@10"] for r in rows], marker="s", label="NDCG@10")
    ax.set_xlabel(axis)
    ax.set_ylabel("metric")
    ax.legend()
    return _save(fig, path)
