"""Figure rendering for the CSV artifacts.

Every writer takes data already destined for a CSV and draws the matching
picture next to it.  The Agg backend keeps this usable on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "png_path_for",
    "save_bloch_figure",
    "save_control_curve_figure",
    "save_episode_figure",
    "save_training_curve_figure",
]


def png_path_for(csv_path: str) -> str:
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + ".png"


def save_bloch_figure(path: str, times, bloch, title: str = "Reduced qubit Bloch components") -> None:
    times = np.asarray(times)
    bloch = np.asarray(bloch)
    fig, ax = plt.subplots(figsize=(7, 4))
    for idx, label in enumerate(("x", "y", "z")):
        ax.plot(times, bloch[:, idx], label=rf"$\langle\sigma_{label}\rangle$")
    ax.set_xlabel("t")
    ax.set_ylabel("Bloch component")
    ax.set_ylim(-1.05, 1.05)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_curve_figure(path: str, curve) -> None:
    curve = np.asarray(curve)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(curve)), curve)
    ax.set_xlabel("epoch")
    ax.set_ylabel("log geometric-mean probability")
    ax.set_title("Likelihood ascent")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_control_curve_figure(path: str, returns, window: int = 50) -> None:
    returns = np.asarray(returns, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(returns)), returns, alpha=0.35, label="episode return")
    if len(returns) >= window:
        kernel = np.ones(window) / window
        smooth = np.convolve(returns, kernel, mode="valid")
        ax.plot(np.arange(window - 1, len(returns)), smooth, label=f"{window}-episode mean")
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.set_title("Actor-critic training")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_episode_figure(path: str, rows) -> None:
    """Per-step picture of one evaluation episode: field, fidelity, reward terms."""
    rows = list(rows)
    steps = [r[0] for r in rows]
    bx = [r[1] for r in rows]
    fvals = [r[2] for r in rows]
    dvals = [r[3] for r in rows]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 5.5), sharex=True)
    ax0.step(steps, bx, where="post")
    ax0.set_ylabel(r"$B_x$")
    ax0.set_title("Greedy control episode")
    ax1.plot(steps, fvals, label="fidelity to target")
    ax1.plot(steps, dvals, label="separability")
    ax1.set_xlabel("step")
    ax1.set_ylabel("value")
    ax1.set_ylim(0.0, 1.05)
    ax1.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
