"""Figure rendering for episode logs and metrics tables.

Reads the JSON-lines episode format back in (everything needed for the
plots is in the log, so rendering works offline) and writes PNG files
next to the delimited output.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import patches


def load_episode(path):
    """Parse one JSONL episode into (header, steps, final_world)."""
    header = None
    steps = []
    final = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "header" in row:
                header = row["header"]
            elif "final_world" in row:
                final = row["final_world"]
            else:
                steps.append(row)
    if header is None or final is None:
        raise ValueError(f"{path} is not a complete episode log")
    return header, steps, final


def _draw_world(ax, scenario):
    for ob in scenario.get("obstacles", []):
        if ob["type"] == "circle":
            ax.add_patch(
                patches.Circle(ob["center"], ob["radius"], facecolor="0.75", edgecolor="0.4")
            )
        else:
            ax.add_patch(
                patches.Rectangle(
                    (ob["xmin"], ob["ymin"]),
                    ob["xmax"] - ob["xmin"],
                    ob["ymax"] - ob["ymin"],
                    facecolor="0.75",
                    edgecolor="0.4",
                )
            )
    start = scenario["robot_start"]
    goal = scenario["robot_goal"]
    ax.plot(*start, marker="o", color="tab:green", markersize=8, zorder=5)
    ax.plot(*goal, marker="*", color="tab:red", markersize=14, zorder=5)


def render_episode(path, out_path):
    """One figure per episode: world, crowd, executed path, model snapshots."""
    header, steps, final = load_episode(path)
    scenario = header["scenario"]
    fig, ax = plt.subplots(figsize=(9, 5))
    _draw_world(ax, scenario)

    robot = np.array([s["world"]["robot"] for s in steps] + [final["robot"]])
    crowd_count = len(steps[0]["world"]["crowd"]) if steps else 0
    for i in range(crowd_count):
        ped = np.array([s["world"]["crowd"][i] for s in steps] + [final["crowd"][i]])
        ax.plot(ped[:, 0], ped[:, 1], color="tab:orange", alpha=0.6, linewidth=1.2)
        ax.plot(ped[-1, 0], ped[-1, 1], "s", color="tab:orange", markersize=5)

    stride = max(len(steps) // 8, 1)
    for s in steps[::stride]:
        mean = np.array(s["operator_mean"]["points"])
        ax.plot(mean[:, 0], mean[:, 1], color="tab:purple", alpha=0.25, linewidth=1.0)
        chosen = np.array(s["report"]["control"]["trajectory"]["points"])
        ax.plot(chosen[:, 0], chosen[:, 1], color="tab:blue", alpha=0.25, linewidth=1.0)

    ax.plot(robot[:, 0], robot[:, 1], color="tab:blue", linewidth=2.2, label="executed")
    ax.plot([], [], color="tab:purple", alpha=0.6, label="operator model mean")
    ax.plot([], [], color="tab:orange", alpha=0.8, label="crowd")
    ax.set_title(f"{scenario['name']} / {header['method']} (seed {scenario['seed']})")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_comparison(rows, out_path):
    """Per-method bars of safety margin and agreeability from metrics rows."""
    keys = sorted({(r["scenario"], r["method"]) for r in rows})
    labels = [f"{s}\n{m}" for s, m in keys]
    clearance = []
    agree = []
    for s, m in keys:
        sel = [r for r in rows if r["scenario"] == s and r["method"] == m]
        clearance.append(np.mean([float(r["min_clearance"]) for r in sel]))
        agree.append(np.mean([float(r["agreeability_score"]) for r in sel]))
    x = np.arange(len(keys))
    fig, axes = plt.subplots(1, 2, figsize=(max(7, 2 + 1.2 * len(keys)), 4))
    axes[0].bar(x, clearance, color="tab:blue")
    axes[0].set_xticks(x, labels, fontsize=8)
    axes[0].axhline(0.4, color="tab:red", linewidth=1, linestyle="--")
    axes[0].set_title("mean min clearance [m]")
    axes[1].bar(x, agree, color="tab:purple")
    axes[1].set_xticks(x, labels, fontsize=8)
    axes[1].set_title("mean agreeability score")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def read_metrics_csv(path):
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def render_run_directory(run_dir, out_dir=None):
    """Render every episode log plus the comparison chart of a run directory."""
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in sorted(os.listdir(run_dir)):
        if name.endswith(".jsonl"):
            out = os.path.join(out_dir, name[:-6] + ".png")
            written.append(render_episode(os.path.join(run_dir, name), out))
    metrics_path = os.path.join(run_dir, "metrics.csv")
    if os.path.exists(metrics_path):
        rows = read_metrics_csv(metrics_path)
        if rows:
            written.append(
                render_comparison(rows, os.path.join(out_dir, "comparison.png"))
            )
    return written
