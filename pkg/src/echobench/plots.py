"""Figure rendering for reports: reward curves and reservoir structure.

Plots are a convenience layer over the CSV outputs (the CSVs remain the
machine-readable contract). Rendering uses the Agg backend so it works
headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

MODEL_COLORS = {
    "linear": "tab:gray",
    "rnn": "tab:green",
    "gru": "tab:orange",
    "lstm": "tab:red",
    "esn_dense": "tab:blue",
    "esn_local": "tab:purple",
}

MODEL_LABELS = {
    "linear": "MLP",
    "rnn": "RNN",
    "gru": "GRU",
    "lstm": "LSTM",
    "esn_dense": "ESN",
    "esn_local": "ESN local",
}


def render_reward_figure(curves: dict[str, dict], task: str, path) -> None:
    """Mean lines with min-to-max bands, one color per model."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for model, data in curves.items():
        color = MODEL_COLORS.get(model, None)
        x = np.arange(1, len(data["mean"]) + 1)
        ax.fill_between(x, data["min"], data["max"], alpha=0.2, color=color, lw=0)
        ax.plot(x, data["mean"], label=MODEL_LABELS.get(model, model), color=color)
    ax.set_xlabel("episode")
    ax.set_ylabel("reward per step")
    ax.set_title(task.replace("_", " "))
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_weight_figure(weights, kind: str, path, impulse_steps: int = 50,
                         impulse_seed: int = 7) -> None:
    """Recurrent matrix, input matrix, and a zero-input activity raster."""
    from . import reservoir

    activity = reservoir.impulse_response(weights, impulse_steps, impulse_seed)
    fig, axes = plt.subplots(1, 3, figsize=(13, 4.2))
    im0 = axes[0].imshow(weights.recurrent, cmap="RdBu_r", vmin=-1, vmax=1,
                         aspect="auto", interpolation="nearest")
    axes[0].set_title("recurrent weights")
    fig.colorbar(im0, ax=axes[0], shrink=0.8)
    in_lim = max(1.0, float(np.abs(weights.input).max()))
    im1 = axes[1].imshow(weights.input, cmap="RdBu_r", vmin=-in_lim, vmax=in_lim,
                         aspect="auto", interpolation="nearest")
    axes[1].set_title("input weights")
    fig.colorbar(im1, ax=axes[1], shrink=0.8)
    im2 = axes[2].imshow(activity, cmap="RdBu_r", vmin=-1, vmax=1,
                         aspect="auto", interpolation="nearest")
    axes[2].set_title("activity after one input then silence")
    axes[2].set_xlabel("step")
    fig.colorbar(im2, ax=axes[2], shrink=0.8)
    fig.suptitle(kind)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
