"""Matplotlib renderers for the sweep CSVs.

Each renderer takes the row dicts a sweep produced and writes a figure file
next to the delimited output.  The CSV stays the canonical artifact; the
figures are a convenience view of the same numbers.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_efficiency(rows: list[dict], path: str) -> str:
    """Efficiency versus erasure probability, one curve pair per group size."""
    fig, ax = plt.subplots(figsize=(7, 4))
    groups = sorted({r["n"] for r in rows})
    colors = plt.cm.viridis([i / max(len(groups) - 1, 1) for i in range(len(groups))])
    for color, n in zip(colors, groups):
        pts = sorted((r for r in rows if r["n"] == n), key=lambda r: r["delta"])
        deltas = [r["delta"] for r in pts]
        ax.plot(deltas, [r["formula"] for r in pts], "-", color=color, label=f"n={n}")
        ax.plot(deltas, [r["alt_formula"] for r in pts], "--", color=color, alpha=0.7)
        measured = [(r["delta"], r["measured_mean"]) for r in pts
                    if r.get("measured_mean") is not None]
        if measured:
            ax.plot([m[0] for m in measured], [m[1] for m in measured], "o",
                    color=color, markersize=3)
    ax.set_xlabel("erasure probability")
    ax.set_ylabel("efficiency (secret bits / transmitted bits)")
    ax.set_title("group agreement (solid) vs pairwise relay (dashed)")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_placements(summaries: list[dict], path: str) -> str:
    """Reliability and efficiency statistics as a function of group size."""
    fig, (ax_r, ax_e) = plt.subplots(1, 2, figsize=(9, 3.5))
    ns = [s["n"] for s in summaries]
    for ax, prefix, title in ((ax_r, "r", "reliability"), (ax_e, "e", "payload efficiency")):
        for stat, style in (("min", "o-"), ("mean", "s--"), ("q50", "^:"), ("q05", "v-.")):
            vals = [s[f"{prefix}_{stat}"] if s[f"{prefix}_{stat}"] is not None
                    else float("nan") for s in summaries]
            ax.plot(ns, vals, style, label=stat, markersize=4)
        ax.set_xlabel("terminals")
        ax.set_title(title)
        ax.grid(alpha=0.3)
    ax_r.set_ylim(-0.05, 1.05)
    ax_r.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_concentration(rows: list[dict], path: str) -> str:
    """Spread of the per-round secret ratio shrinking with round size."""
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = [r["n_source"] for r in rows]
    ax.errorbar(sizes, [r["mean_secret_ratio"] for r in rows],
                yerr=[r["std_secret_ratio"] for r in rows], fmt="o-", capsize=3,
                label="secret packets / N")
    ax.errorbar(sizes, [r["mean_mixed_ratio"] for r in rows],
                yerr=[r["std_mixed_ratio"] for r in rows], fmt="s--", capsize=3,
                label="mixed packets / N")
    ax.set_xscale("log")
    ax.set_xlabel("source packets per round")
    ax.set_ylabel("ratio")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
