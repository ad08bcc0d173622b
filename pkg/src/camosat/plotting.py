"""Figures for bench reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .cnf import ROLES  # noqa: E402

ROLE_LABELS = {
    "function": "gate functions",
    "connection": "connections",
    "levelization": "levelization",
    "fault": "fault injection",
    "io": "primary I/O",
}

ROLE_COLORS = {
    "function": "#4c72b0",
    "connection": "#dd8452",
    "levelization": "#55a868",
    "fault": "#c44e52",
    "io": "#8172b3",
}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=9)


def plot_role_breakdown(counts: dict, path, title: str = "CNF variables by role") -> None:
    roles = [r for r in ROLES if counts.get(r)]
    values = [counts[r] for r in roles]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.pie(
        values,
        labels=[ROLE_LABELS[r] for r in roles],
        colors=[ROLE_COLORS[r] for r in roles],
        autopct="%1.1f%%",
        startangle=90,
        counterclock=False,
        textprops={"fontsize": 9},
    )
    ax.set_title(title, fontsize=11)
    ax.axis("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ablation(cells: list[dict], path, timeout: float | None = None) -> None:
    """One bar per (circuit, condition); timed-out cells are hatched at the budget."""
    circuits = list(dict.fromkeys(c["circuit"] for c in cells))
    conditions = list(dict.fromkeys(c["condition"] for c in cells))
    fig, axes = plt.subplots(1, len(circuits), figsize=(4.5 * len(circuits), 3.6), squeeze=False)
    for ax, circuit in zip(axes[0], circuits):
        rows = {c["condition"]: c for c in cells if c["circuit"] == circuit}
        xs = range(len(conditions))
        for x, cond in zip(xs, conditions):
            cell = rows.get(cond)
            if cell is None:
                continue
            done = cell["status"] == "Recovered"
            height = cell["wall_time"] if done else (timeout or cell["wall_time"])
            bar = ax.bar(x, height, color="#4c72b0" if done else "#cccccc", hatch=None if done else "//")
            label = f"{cell['iterations']} it" if done else "timeout"
            if done and cell.get("unique") is not None:
                label += "\nunique" if cell["unique"] else "\nnot unique"
            ax.annotate(label, (bar[0].get_x() + bar[0].get_width() / 2, height), ha="center", va="bottom", fontsize=8)
        ax.set_xticks(list(xs))
        ax.set_xticklabels([c.replace(" ", "\n") for c in conditions], fontsize=8)
        ax.set_yscale("log")
        ax.set_ylabel("wall time (s)", fontsize=9)
        ax.set_title(circuit, fontsize=10)
        _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
