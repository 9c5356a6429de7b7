"""Telemetry aggregation over a completed run.

Produces the analyses the operational study rests on: per-link block-time
histograms split by first-after-switch, daily rate means, QBER series with a
trailing 3-day average, hour-of-day box statistics with 3-sigma outlier
removal, and the switch-activity trace. Everything here is a pure function
of the RunResult, so equal runs export byte-identical CSV files.

Conventions (documented, stable):
* quantiles use linear interpolation (the type-7 convention, numpy default);
* the 3-sigma filter uses the sample standard deviation (ddof=1) per
  (link, hour) batch and iterates to a fixpoint, which makes it idempotent;
* per-block rate samples are sifted/duration ("rkr_proxy": there is no photon
  layer, so the raw rate is reported as sifted throughput while active) and
  secret/duration; blocks are attributed to the day and hour of their end;
* hour of day is simulated time modulo 86400 s from t=0, no timezones.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linkmodel import US
from .simcore import RunResult

SECONDS_PER_DAY = 86_400.0
DEFAULT_BIN_SECONDS = 2.0
DEFAULT_QBER_WINDOW_DAYS = 3.0

CSV_FILES = ("blocktimes.csv", "rates_daily.csv", "qber.csv", "hourly_box.csv", "switch_trace.csv")


@dataclass(frozen=True)
class HourlyStats:
    hour_of_day: int
    median: float
    q25: float
    q75: float
    count: int
    outliers_removed: int


@dataclass(frozen=True)
class BlockTimeHistogram:
    """Shared bin edges per link; counts split by block category."""

    link_id: str
    bin_edges: tuple[float, ...]
    counts_first: tuple[int, ...]
    counts_other: tuple[int, ...]

    def mode_seconds(self, category: str, smooth_bins: int = 15, fit_halfwidth: int = 20) -> Optional[float]:
        """Location of the count maximum for one category.

        Boxcar-smooths the counts, then refines the peak with a quadratic fit
        around the argmax (sub-bin resolution); both windows are in bins. The
        smoothing suppresses argmax jitter on flat-topped peaks without moving
        a symmetric peak.
        """
        counts = self.counts_first if category == "first" else self.counts_other
        if not counts or sum(counts) == 0:
            return None
        arr = np.asarray(counts, dtype=float)
        if smooth_bins > 1:
            kernel = np.ones(smooth_bins) / smooth_bins
            arr = np.convolve(arr, kernel, mode="same")
        centers = np.asarray(
            [(self.bin_edges[i] + self.bin_edges[i + 1]) / 2.0 for i in range(len(counts))]
        )
        i = int(np.argmax(arr))
        lo, hi = max(0, i - fit_halfwidth), min(len(arr), i + fit_halfwidth + 1)
        xs, ys = centers[lo:hi], arr[lo:hi]
        if len(xs) < 3:
            return float(centers[i])
        design = np.vstack([xs**2, xs, np.ones_like(xs)]).T
        coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
        if coef[0] >= 0:
            return float(centers[i])
        return float(np.clip(-coef[1] / (2.0 * coef[0]), xs[0], xs[-1]))


@dataclass(frozen=True)
class DailyRate:
    link_id: str
    day: int
    rkr_proxy: float  # sifted bytes/s during active production
    skr: float  # secret bytes/s over wall time


@dataclass(frozen=True)
class QberPoint:
    link_id: str
    time_s: float
    qber_x: float
    qber_z: float
    qber_x_avg: float  # trailing 3-day window mean, current point included
    qber_z_avg: float


@dataclass(frozen=True)
class LinkSummary:
    link_id: str
    blocks: int
    mean_skr: float
    mean_qber: float


@dataclass
class Aggregates:
    duration: float
    histograms: dict[str, BlockTimeHistogram] = field(default_factory=dict)
    daily_rates: list[DailyRate] = field(default_factory=list)
    qber_series: list[QberPoint] = field(default_factory=list)
    hourly: dict[str, dict[str, list[HourlyStats]]] = field(default_factory=dict)  # link -> metric -> rows
    switch_trace: list = field(default_factory=list)  # SwitchEvent rows, engine order
    summaries: list[LinkSummary] = field(default_factory=list)


def filter_outliers_3sigma(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Drop points more than 3 sample standard deviations from the batch mean.

    Iterates until no point is outside the recomputed bound, so applying the
    filter to its own output changes nothing. Removed counts are reported,
    never silently discarded.
    """
    kept = np.asarray(values, dtype=float)
    removed = 0
    while kept.size >= 2:
        mean = kept.mean()
        std = kept.std(ddof=1)
        if std == 0:
            break
        mask = np.abs(kept - mean) <= 3.0 * std
        if mask.all():
            break
        removed += int((~mask).sum())
        kept = kept[mask]
    return kept, removed


def _histogram(link_id: str, durations: np.ndarray, first_flags: np.ndarray, bin_seconds: float) -> BlockTimeHistogram:
    k0 = int(np.floor(durations.min() / bin_seconds))
    k1 = int(np.ceil(durations.max() / bin_seconds))
    if k1 <= k0:
        k1 = k0 + 1
    edges = np.array([k * bin_seconds for k in range(k0, k1 + 1)])
    counts_first, _ = np.histogram(durations[first_flags], bins=edges)
    counts_other, _ = np.histogram(durations[~first_flags], bins=edges)
    return BlockTimeHistogram(
        link_id=link_id,
        bin_edges=tuple(float(e) for e in edges),
        counts_first=tuple(int(c) for c in counts_first),
        counts_other=tuple(int(c) for c in counts_other),
    )


def _trailing_mean(times: np.ndarray, values: np.ndarray, window_s: float) -> np.ndarray:
    """Mean over the trailing window (t - window, t], one output per point."""
    out = np.empty_like(values)
    lo = 0
    acc = 0.0
    for i in range(len(values)):
        acc += values[i]
        while times[lo] <= times[i] - window_s:
            acc -= values[lo]
            lo += 1
        out[i] = acc / (i - lo + 1)
    return out


def aggregate(
    result: RunResult,
    *,
    bin_seconds: float = DEFAULT_BIN_SECONDS,
    qber_window_days: float = DEFAULT_QBER_WINDOW_DAYS,
) -> Aggregates:
    """Compute every figure-analogue table from one run."""
    agg = Aggregates(duration=result.duration)
    link_ids = list(result.final_buffers.keys())
    if not link_ids:
        link_ids = sorted({b.link_id for b in result.blocks})
    blocks_by_link: dict[str, list] = {link_id: [] for link_id in link_ids}
    for b in result.blocks:
        blocks_by_link.setdefault(b.link_id, []).append(b)

    for link_id in link_ids:
        blocks = blocks_by_link.get(link_id, [])
        if not blocks:
            continue
        durations = np.array([b.duration for b in blocks])
        first = np.array([b.first_after_switch for b in blocks], dtype=bool)
        end_s = np.array([b.end_us / US for b in blocks])
        sifted = np.array([b.sifted_bytes for b in blocks], dtype=float)
        secret = np.array([b.secret_bytes for b in blocks], dtype=float)

        agg.histograms[link_id] = _histogram(link_id, durations, first, bin_seconds)

        days = (end_s // SECONDS_PER_DAY).astype(int)
        for day in sorted(set(days.tolist())):
            sel = days == day
            active = durations[sel].sum()
            day_span = min(SECONDS_PER_DAY, result.duration - day * SECONDS_PER_DAY)
            agg.daily_rates.append(
                DailyRate(
                    link_id=link_id,
                    day=int(day),
                    rkr_proxy=float(sifted[sel].sum() / active) if active > 0 else 0.0,
                    skr=float(secret[sel].sum() / day_span) if day_span > 0 else 0.0,
                )
            )

        qx = np.array([b.qber_x for b in blocks])
        qz = np.array([b.qber_z for b in blocks])
        window_s = qber_window_days * SECONDS_PER_DAY
        avg_x = _trailing_mean(end_s, qx, window_s)
        avg_z = _trailing_mean(end_s, qz, window_s)
        for i in range(len(blocks)):
            agg.qber_series.append(
                QberPoint(link_id, float(end_s[i]), float(qx[i]), float(qz[i]), float(avg_x[i]), float(avg_z[i]))
            )

        hours = ((end_s % SECONDS_PER_DAY) // 3600.0).astype(int)
        per_metric: dict[str, list[HourlyStats]] = {}
        for metric, samples in (("rkr_proxy", sifted / durations), ("skr", secret / durations)):
            rows: list[HourlyStats] = []
            for hour in range(24):
                batch = samples[hours == hour]
                if batch.size == 0:
                    continue
                kept, removed = filter_outliers_3sigma(batch)
                rows.append(
                    HourlyStats(
                        hour_of_day=hour,
                        median=float(np.quantile(kept, 0.5)),
                        q25=float(np.quantile(kept, 0.25)),
                        q75=float(np.quantile(kept, 0.75)),
                        count=int(kept.size),
                        outliers_removed=removed,
                    )
                )
            per_metric[metric] = rows
        agg.hourly[link_id] = per_metric

        agg.summaries.append(
            LinkSummary(
                link_id=link_id,
                blocks=len(blocks),
                mean_skr=float(secret.sum() / result.duration) if result.duration > 0 else 0.0,
                mean_qber=float(((qx + qz) / 2.0).mean()),
            )
        )

    agg.switch_trace = list(result.switches)
    return agg


# -- delimited output ---------------------------------------------------------

def _write_csv(stream, header: list[str], rows) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)


def _blocktime_rows(agg: Aggregates):
    for link_id, hist in agg.histograms.items():
        for category, counts in (("first", hist.counts_first), ("subsequent", hist.counts_other)):
            for i, count in enumerate(counts):
                yield [link_id, category, repr(hist.bin_edges[i]), repr(hist.bin_edges[i + 1]), count]


def _daily_rows(agg: Aggregates):
    for r in agg.daily_rates:
        yield [r.link_id, r.day, repr(r.rkr_proxy), repr(r.skr)]


def _qber_rows(agg: Aggregates):
    for p in agg.qber_series:
        yield [p.link_id, repr(p.time_s), repr(p.qber_x), repr(p.qber_z), repr(p.qber_x_avg), repr(p.qber_z_avg)]


def _hourly_rows(agg: Aggregates):
    for link_id, metrics in agg.hourly.items():
        for metric, rows in metrics.items():
            for h in rows:
                yield [link_id, metric, h.hour_of_day, repr(h.median), repr(h.q25), repr(h.q75), h.count, h.outliers_removed]


def _switch_rows(agg: Aggregates):
    for s in agg.switch_trace:
        yield [repr(s.time), s.node_id, s.from_link or "", s.to_link, s.cause.value, s.blocks_on_from_link]


_SCHEMAS = {
    "blocktimes.csv": (["link_id", "category", "bin_left_s", "bin_right_s", "count"], _blocktime_rows),
    "rates_daily.csv": (["link_id", "day", "rkr_proxy_Bps", "skr_Bps"], _daily_rows),
    "qber.csv": (["link_id", "time_s", "qber_x", "qber_z", "qber_x_avg3d", "qber_z_avg3d"], _qber_rows),
    "hourly_box.csv": (
        ["link_id", "metric", "hour", "median", "q25", "q75", "count", "outliers_removed"],
        _hourly_rows,
    ),
    "switch_trace.csv": (
        ["time_s", "node_id", "from_link", "to_link", "cause", "blocks_on_from_link"],
        _switch_rows,
    ),
}


def export_csv(agg: Aggregates, outdir: str) -> list[str]:
    """Write the five figure-analogue CSV files; returns the paths written.

    Numbers are formatted with repr (dot decimal separator, full precision),
    so re-parsing reproduces the aggregate values exactly.
    """
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, (header, rows) in _SCHEMAS.items():
        path = os.path.join(outdir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, header, rows(agg))
        paths.append(path)
    return paths


def export_csv_bytes(agg: Aggregates) -> dict[str, bytes]:
    """In-memory CSV rendering, keyed by file name (used for purity checks)."""
    out = {}
    for name, (header, rows) in _SCHEMAS.items():
        buf = io.StringIO()
        _write_csv(buf, header, rows(agg))
        out[name] = buf.getvalue().encode()
    return out


def export_json(agg: Aggregates, outdir: str) -> list[str]:
    """JSON mirror of every CSV: a list of row objects per file."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, (header, rows) in _SCHEMAS.items():
        path = os.path.join(outdir, name.replace(".csv", ".json"))
        payload = [dict(zip(header, row)) for row in rows(agg)]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
        paths.append(path)
    return paths


def summary_lines(agg: Aggregates) -> list[str]:
    """One machine-parseable line per link for the CLI's standard output."""
    return [
        f"link={s.link_id} blocks={s.blocks} mean_skr={s.mean_skr:.3f} mean_qber={s.mean_qber:.6f}"
        for s in agg.summaries
    ]


def export_key_events(result: RunResult, outdir: str, include_material: bool = False) -> str:
    """Opt-in key-event log: one row per rekey attempt.

    Columns: time_s, consumer_id, link_id, source, key_id, and key_hex when
    the run recorded a material dump (for cross-implementation comparison).
    Not part of the default five-file report.
    """
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "key_events.csv")
    header = ["time_s", "consumer_id", "link_id", "source", "key_id"]
    if include_material:
        header.append("key_hex")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in result.rekeys:
            row = [repr(r.time), r.consumer_id, r.link_id, r.source, r.key_id or ""]
            if include_material:
                row.append(result.key_dump.get(r.key_id or "", ""))
            writer.writerow(row)
    return path
