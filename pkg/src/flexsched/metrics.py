"""Per-application metrics and their (optionally time-weighted) summaries.

Turnaround is stored as queuing + effective runtime so the accounting
identity holds exactly in floating point.  Slowdown is effective runtime
over nominal runtime, hence always >= 1: a request granted everything from
start to finish has slowdown exactly 1.

Quantiles: unweighted summaries use numpy's linear interpolation between
order statistics (Hyndman & Fan type 7).  Weighted summaries (used for the
time-weighted allocation and queue-size distributions) interpolate the
inverse empirical CDF between the midpoint positions
(cum_weight - weight/2) / total_weight of the sorted samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ValidationError
from .engine import SimResult

CLASS_LABELS = {"batch_elastic": "B-E", "batch_rigid": "B-R", "interactive": "Int"}

_QUANTILES = (("p5", 5), ("p25", 25), ("p50", 50), ("p75", 75), ("p95", 95))
SUMMARY_STATS = ("count", "mean", "min", "p5", "p25", "p50", "p75", "p95", "max")


@dataclass(frozen=True, slots=True)
class AppMetrics:
    """Derived timing metrics of one completed request."""

    id: int
    app_class: str
    label: str
    submit: float
    start: float
    finish: float
    queuing: float
    effective: float
    turnaround: float
    slowdown: float


@dataclass(frozen=True, slots=True)
class Summary:
    count: int
    mean: float
    min: float
    p5: float
    p25: float
    p50: float
    p75: float
    p95: float
    max: float

    def as_dict(self) -> dict[str, float]:
        return {s: getattr(self, s) for s in SUMMARY_STATS}


def app_metrics(result: SimResult) -> list[AppMetrics]:
    """One record per completed request, ordered by id."""
    out = []
    for r in result.records:
        if r.finish is None or r.start is None:
            raise ValidationError(f"request {r.id} is incomplete")
        queuing = r.start - r.submit
        effective = r.finish - r.start
        slowdown = effective / r.nominal_runtime
        if slowdown < 1.0 - 1e-9:
            raise ValidationError(
                f"request {r.id}: slowdown {slowdown} below 1 (corrupt result)"
            )
        out.append(
            AppMetrics(
                id=r.id,
                app_class=r.app_class,
                label=CLASS_LABELS[r.app_class],
                submit=r.submit,
                start=r.start,
                finish=r.finish,
                queuing=queuing,
                effective=effective,
                turnaround=queuing + effective,
                slowdown=slowdown,
            )
        )
    return out


def group_by_label(metrics: list[AppMetrics]) -> dict[str, list[AppMetrics]]:
    groups: dict[str, list[AppMetrics]] = {}
    for m in metrics:
        groups.setdefault(m.label, []).append(m)
    return groups


def _weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    cum = np.cumsum(w)
    positions = (cum - 0.5 * w) / cum[-1]
    return float(np.interp(q, positions, v))


def summarize(values, weights=None) -> Summary:
    """Distribution summary; ``weights`` makes it time-weighted."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("cannot summarize an empty sample")
    if weights is None:
        qs = {name: float(np.percentile(v, p)) for name, p in _QUANTILES}
        mean = float(np.mean(v))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise ValidationError("weights must match values")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValidationError("weights must be non-negative with a positive total")
        qs = {name: _weighted_quantile(v, w, p / 100.0) for name, p in _QUANTILES}
        mean = float(np.sum(v * w) / np.sum(w))
    return Summary(
        count=int(v.size),
        mean=mean,
        min=float(np.min(v)),
        max=float(np.max(v)),
        **qs,
    )


def _segment_weights(result: SimResult, lo: float) -> tuple[np.ndarray, np.ndarray]:
    """(segment start index array, segment duration array) over [lo, makespan]."""
    times = np.asarray(result.series.times, dtype=float)
    durations = np.diff(np.append(times, result.makespan))
    keep = durations > 0
    # clip the window to start at lo
    starts = times[keep]
    durs = durations[keep].copy()
    idx = np.nonzero(keep)[0]
    for k, (s, d) in enumerate(zip(starts, durs)):
        if s + d <= lo:
            durs[k] = 0.0
        elif s < lo:
            durs[k] = s + d - lo
    keep2 = durs > 0
    return idx[keep2], durs[keep2]


def allocation_stats(result: SimResult) -> dict[str, Summary]:
    """Time-weighted allocated-fraction summaries over [first event, makespan]."""
    if not result.series.times:
        raise ValidationError("result has no time series")
    idx, durs = _segment_weights(result, min(result.first_event, result.makespan))
    if idx.size == 0:
        zero = summarize([0.0])
        return {"cpu": zero, "ram": zero}
    cpu = np.asarray(result.series.cpu_frac, dtype=float)[idx]
    ram = np.asarray(result.series.ram_frac, dtype=float)[idx]
    return {"cpu": summarize(cpu, durs), "ram": summarize(ram, durs)}


def queue_stats(result: SimResult) -> dict[str, Summary]:
    """Time-weighted pending/running queue-length summaries."""
    if not result.series.times:
        raise ValidationError("result has no time series")
    idx, durs = _segment_weights(result, result.series.times[0])
    if idx.size == 0:
        zero = summarize([0.0])
        return {"pending": zero, "running": zero}
    pending = np.asarray(result.series.pending, dtype=float)[idx]
    running = np.asarray(result.series.running, dtype=float)[idx]
    return {"pending": summarize(pending, durs), "running": summarize(running, durs)}


def compare(a: Summary, b: Summary) -> dict[str, float]:
    """b-over-a ratio per statistic (inf where a is zero and b is not)."""
    out = {}
    for stat in SUMMARY_STATS:
        if stat == "count":
            continue
        va, vb = getattr(a, stat), getattr(b, stat)
        if va == 0:
            out[stat] = float("inf") if vb != 0 else 1.0
        else:
            out[stat] = vb / va
    return out
