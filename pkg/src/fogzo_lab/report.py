"""Figure rendering for experiment outputs.

Each plotting helper takes the in-memory CSV rows produced by a runner
and writes a PNG next to the delimited output.  Rendering is optional
(--plot on the CLI); the CSV remains the contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def figure_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def plot_training(rows: list[dict], out_path) -> Path:
    step_rows = [r for r in rows if r.get("grad_norm") is not None]
    steps = [r["step"] for r in step_rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(steps, [r["train_loss"] for r in step_rows], lw=0.8)
    ax1.set_ylabel("train loss")
    ax2.plot(steps, [r["grad_norm"] for r in step_rows], lw=0.8, color="tab:orange")
    ax2.set_ylabel("gradient norm")
    ax2.set_xlabel("step")
    ax2.set_yscale("log")
    fig.tight_layout()
    path = figure_path(out_path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_toy1d(rows: list[dict], out_path) -> Path:
    step_rows = [r for r in rows if r.get("zo_grad_sample") is not None]
    steps = [r["step"] for r in step_rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(steps, [r["theta"] for r in step_rows], label="theta")
    ax.axhline(0.5, color="gray", ls="--", lw=0.8, label="boundary 0.5")
    ax.set_xlabel("step")
    ax.set_ylabel("theta")
    ax.legend()
    fig.tight_layout()
    path = figure_path(out_path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_kernels(rows: list[dict], out_path) -> Path:
    kinds = sorted({r["kind"] for r in rows})
    fig, axes = plt.subplots(1, len(kinds), figsize=(4 * len(kinds), 3.2), squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        sub = [r for r in rows if r["kind"] == kind]
        xs = [r["x"] for r in sub]
        ax.plot(xs, [r["surrogate_value"] for r in sub], label="surrogate")
        ax.errorbar(xs, [r["mc_estimate"] for r in sub],
                    yerr=[5 * r["stderr"] for r in sub],
                    fmt=".", ms=2, lw=0.5, label="MC smoothed")
        ax.set_title(kind)
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = figure_path(out_path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_quadratic(rows: list[dict], out_path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for g_mode, marker in (("parallel", "o"), ("orthogonal", "x")):
        sub = [r for r in rows if r["g_mode"] == g_mode]
        ax.scatter([r["predicted"] for r in sub],
                   [r["empirical_mean_G"] for r in sub],
                   marker=marker, s=14, label=g_mode)
    lims = ax.get_xlim()
    ax.plot(lims, lims, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("predicted E[G]")
    ax.set_ylabel("empirical mean G")
    ax.legend()
    fig.tight_layout()
    path = figure_path(out_path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(rows: list[dict], out_path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r["value"] for r in rows], [r["final_loss"] for r in rows], "o-")
    ax.set_xlabel("swept value")
    ax.set_ylabel("final train loss")
    fig.tight_layout()
    path = figure_path(out_path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
