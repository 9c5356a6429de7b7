"""Figure rendering for run reports.

Renders one PNG per exported CSV next to the delimited output: block-time
histograms split by category, daily rate lines, QBER scatter with trailing
average, hour-of-day box plots, and a zoomed switch-activity timeline.
Aggregation itself lives in qkdnetsim.metrics; this module only draws.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import Aggregates

FIGURE_FILES = ("blocktimes.png", "rates_daily.png", "qber.png", "hourly_box.png", "switch_trace.png")

_DPI = 120


def _link_axes(n: int, title: str):
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.6 * max(n, 1)), squeeze=False, sharex=False)
    fig.suptitle(title)
    return fig, [ax for (ax,) in axes]


def _save(fig, outdir: str, name: str, paths: list[str]) -> None:
    path = os.path.join(outdir, name)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths.append(path)


def _blocktimes_figure(agg: Aggregates, outdir: str, paths: list[str]) -> None:
    links = list(agg.histograms)
    fig, axes = _link_axes(max(len(links), 1), "Block completion time by category")
    for ax, link_id in zip(axes, links):
        hist = agg.histograms[link_id]
        centers = [(hist.bin_edges[i] + hist.bin_edges[i + 1]) / 2 for i in range(len(hist.counts_first))]
        width = hist.bin_edges[1] - hist.bin_edges[0] if len(hist.bin_edges) > 1 else 1.0
        ax.bar(centers, hist.counts_other, width=width, alpha=0.6, label="subsequent", color="tab:blue")
        ax.bar(centers, hist.counts_first, width=width, alpha=0.6, label="first after switch", color="tab:orange")
        ax.set_ylabel(link_id, fontsize=8)
        ax.legend(fontsize=7)
    axes[-1].set_xlabel("block time [s]")
    _save(fig, outdir, "blocktimes.png", paths)


def _rates_figure(agg: Aggregates, outdir: str, paths: list[str]) -> None:
    by_link: dict[str, list] = defaultdict(list)
    for r in agg.daily_rates:
        by_link[r.link_id].append(r)
    fig, ax = plt.subplots(figsize=(8, 4))
    fig.suptitle("Daily mean rates")
    for link_id, rows in by_link.items():
        days = [r.day for r in rows]
        ax.plot(days, [r.rkr_proxy for r in rows], label=f"{link_id} rkr_proxy")
        ax.plot(days, [r.skr for r in rows], linestyle="--", label=f"{link_id} skr")
    ax.set_xlabel("day")
    ax.set_ylabel("bytes/s")
    ax.legend(fontsize=7)
    _save(fig, outdir, "rates_daily.png", paths)


def _qber_figure(agg: Aggregates, outdir: str, paths: list[str]) -> None:
    by_link: dict[str, list] = defaultdict(list)
    for p in agg.qber_series:
        by_link[p.link_id].append(p)
    links = list(by_link)
    fig, axes = _link_axes(max(len(links), 1), "QBER per basis with trailing 3-day average")
    for ax, link_id in zip(axes, links):
        pts = by_link[link_id]
        days = [p.time_s / 86400.0 for p in pts]
        ax.scatter(days, [p.qber_x for p in pts], s=1, alpha=0.3, color="tab:blue", label="X")
        ax.scatter(days, [p.qber_z for p in pts], s=1, alpha=0.3, color="tab:red", label="Z")
        ax.plot(days, [p.qber_x_avg for p in pts], color="tab:blue", lw=1)
        ax.plot(days, [p.qber_z_avg for p in pts], color="tab:red", lw=1)
        ax.set_ylabel(link_id, fontsize=8)
        ax.legend(fontsize=7, markerscale=4)
    axes[-1].set_xlabel("time [days]")
    _save(fig, outdir, "qber.png", paths)


def _hourly_figure(agg: Aggregates, outdir: str, paths: list[str]) -> None:
    links = list(agg.hourly)
    fig, axes = plt.subplots(
        max(len(links), 1), 2, figsize=(10, 2.6 * max(len(links), 1)), squeeze=False
    )
    fig.suptitle("Hour-of-day rate distribution (median, quartile box)")
    for row, link_id in zip(axes, links):
        for ax, metric in zip(row, ("rkr_proxy", "skr")):
            stats = agg.hourly[link_id].get(metric, [])
            boxes = [
                {
                    "med": h.median,
                    "q1": h.q25,
                    "q3": h.q75,
                    "whislo": h.q25,
                    "whishi": h.q75,
                    "label": str(h.hour_of_day),
                }
                for h in stats
            ]
            if boxes:
                ax.bxp(boxes, showfliers=False)
                ax.set_xticks(range(1, len(boxes) + 1, 4))
                ax.set_xticklabels([b["label"] for b in boxes][::4], fontsize=6)
            ax.set_ylabel(f"{link_id}\n{metric}", fontsize=7)
    _save(fig, outdir, "hourly_box.png", paths)


def _switch_figure(agg: Aggregates, outdir: str, paths: list[str]) -> None:
    # Two-hour window from mid-run, like an operational zoom-in.
    t_mid = agg.duration / 2.0
    t0 = max(0.0, min(t_mid, agg.duration - 7200.0))
    t1 = min(agg.duration, t0 + 7200.0)
    by_node: dict[str, list] = defaultdict(list)
    for s in agg.switch_trace:
        by_node[s.node_id].append(s)
    nodes = [n for n, evs in by_node.items() if len(evs) > 1]
    fig, axes = _link_axes(max(len(nodes), 1), f"Active link per switching node, t = {t0:.0f}..{t1:.0f} s")
    for ax, node in zip(axes, nodes):
        events = by_node[node]
        links = sorted({s.to_link for s in events})
        level = {link_id: i for i, link_id in enumerate(links)}
        xs, ys = [], []
        for i, s in enumerate(events):
            end = events[i + 1].time if i + 1 < len(events) else agg.duration
            if end < t0 or s.time > t1:
                continue
            xs += [max(s.time, t0), min(end, t1), None]
            ys += [level[s.to_link], level[s.to_link], None]
        ax.plot([x if x is not None else float("nan") for x in xs], [y if y is not None else float("nan") for y in ys])
        ax.set_yticks(range(len(links)))
        ax.set_yticklabels(links, fontsize=7)
        ax.set_ylabel(node, fontsize=8)
        ax.set_xlim(t0, t1)
    axes[-1].set_xlabel("time [s]")
    _save(fig, outdir, "switch_trace.png", paths)


def render_figures(agg: Aggregates, outdir: str) -> list[str]:
    """Render every report figure into outdir; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    paths: list[str] = []
    _blocktimes_figure(agg, outdir, paths)
    _rates_figure(agg, outdir, paths)
    _qber_figure(agg, outdir, paths)
    _hourly_figure(agg, outdir, paths)
    _switch_figure(agg, outdir, paths)
    return paths
