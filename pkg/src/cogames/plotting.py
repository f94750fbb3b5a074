"""Figure rendering for CLI reports.  Always writes files; never opens a window."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (5.0, 4.0)
DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_landscape(land, path, title=None):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    c = land.coords
    if len(c) == 1:
        extent = (0, 1, 0, 1)
    else:
        extent = (c[0], c[-1], c[0], c[-1])
    im = ax.imshow(land.worst.T, origin="lower", extent=extent, cmap="viridis", aspect="equal")
    fig.colorbar(im, ax=ax, label="exploitability")
    ax.set_xlabel("player 1, P(action 0)")
    ax.set_ylabel("player 2, P(action 0)")
    ax.set_title(title or f"{land.metric} exploitability")
    return _save(fig, path)


def plot_trajectory(traj, path, player_names=None):
    """Running-average probabilities per player plus the iterate-difference curve."""
    from .solvers import iterate_diffs

    n = len(traj.averages[0])
    fig, axes = plt.subplots(1, n + 1, figsize=(3.2 * (n + 1), 3.0))
    t = np.arange(len(traj.averages))
    for i in range(n):
        probs = np.array([a[i] for a in traj.averages])
        for k in range(probs.shape[1]):
            axes[i].plot(t, probs[:, k], lw=1, label=str(k))
        axes[i].set_title(player_names[i] if player_names else f"player {i}")
        axes[i].set_xlabel("round")
        axes[i].set_ylim(-0.02, 1.02)
    if probs.shape[1] <= 6:
        axes[0].legend(fontsize=7, title="action", title_fontsize=7)
    d = iterate_diffs(traj)
    axes[n].semilogy(np.arange(1, len(d) + 1), np.maximum(d, 1e-16), lw=1, color="k")
    axes[n].set_title("iterate diff")
    axes[n].set_xlabel("round")
    return _save(fig, path)


def plot_sweep(p_values, rows, path, action_names=None):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    rows = np.asarray(rows)
    for k in range(rows.shape[1]):
        ax.plot(p_values, rows[:, k], marker="o", ms=3, lw=1,
                label=action_names[k] if action_names else str(k))
    ax.set_xlabel("replacement probability p")
    ax.set_ylabel("probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_series(x, series: dict, path, xlabel="round", ylabel=""):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, y in series.items():
        ax.plot(x, y, lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bars(labels, values, path, ylabel=""):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(range(len(values)), values, color="0.4")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
