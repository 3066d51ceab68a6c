"""Aggregate metrics over simulation / relay event logs.

Medians are the lower median of the sorted list (index ``(n - 1) // 2``);
percentiles use the same convention. Latency is ``t_deliver - t_send`` per
delivered media message, end to end from wearer capture to friend delivery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ArcallError

MEDIA_TYPES = ("FrameChunk", "AudioChunk")
LATENCY_BUDGET_MS = 100


class MalformedLog(ArcallError):
    code = "malformed_log"


@dataclass
class MetricsReport:
    dropin_durations_s: list[float] = field(default_factory=list)
    median_dropin_s: Optional[float] = None
    median_contents_per_dropin: Optional[int] = None
    total_contents: int = 0
    total_extensions: int = 0
    p50_latency_ms: Optional[int] = None
    peak_temp_c: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "dropin_durations_s": self.dropin_durations_s,
            "median_dropin_s": self.median_dropin_s,
            "median_contents_per_dropin": self.median_contents_per_dropin,
            "total_contents": self.total_contents,
            "total_extensions": self.total_extensions,
            "p50_latency_ms": self.p50_latency_ms,
            "peak_temp_c": self.peak_temp_c,
        }


@dataclass
class LatencyBreakdown:
    sample_count: int = 0
    p50_ms: Optional[int] = None
    p95_ms: Optional[int] = None
    hop_p50_ms: list[int] = field(default_factory=list)
    within_budget: bool = False

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "hop_p50_ms": self.hop_p50_ms,
            "within_budget": self.within_budget,
        }


def lower_median(values: Sequence):
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2] if ordered else None


def lower_percentile(values: Sequence, pct: int):
    ordered = sorted(values)
    if not ordered:
        return None
    return ordered[pct * (len(ordered) - 1) // 100]


def _check_records(records) -> list[dict]:
    out = []
    for i, record in enumerate(records):
        if not isinstance(record, dict) or not isinstance(record.get("event"), str):
            raise MalformedLog(f"record #{i} is not an event object")
        out.append(record)
    return out


def _require(record: dict, key: str):
    try:
        return record[key]
    except KeyError:
        raise MalformedLog(f"{record.get('event')} record is missing {key!r}") from None


def media_latencies(records) -> list[int]:
    """End-to-end latencies of media delivered to a client (not the server
    receipt leg of the relay)."""
    out = []
    for record in records:
        if (
            record.get("event") == "deliver"
            and record.get("type") in MEDIA_TYPES
            and record.get("to") != "server"
        ):
            out.append(int(_require(record, "t_deliver")) - int(_require(record, "t_send")))
    return out


def compute_metrics(records) -> MetricsReport:
    records = _check_records(records)
    starts: dict[str, int] = {}
    durations: dict[str, float] = {}
    contents: dict[str, int] = {}
    extensions = 0
    total_contents = 0
    peak_mc: Optional[int] = None

    for record in records:
        event = record["event"]
        if event == "dropin_start":
            dropin_id = _require(record, "dropin_id")
            starts[dropin_id] = int(_require(record, "t"))
            contents.setdefault(dropin_id, 0)
        elif event == "dropin_end":
            dropin_id = _require(record, "dropin_id")
            if dropin_id in starts:
                ended = record.get("at")
                if ended is None:
                    ended = _require(record, "t")
                durations[dropin_id] = (int(ended) - starts[dropin_id]) / 1000.0
        elif event == "project":
            total_contents += 1
            dropin_id = record.get("dropin_id")
            if dropin_id is not None:
                contents[dropin_id] = contents.get(dropin_id, 0) + 1
        elif event == "extend":
            extensions += 1
        elif event == "thermal":
            temp = int(_require(record, "temp_mc"))
            peak_mc = temp if peak_mc is None else max(peak_mc, temp)

    duration_list = [durations[d] for d in sorted(durations)]
    content_counts = [contents[d] for d in sorted(contents)]
    latencies = media_latencies(records)
    return MetricsReport(
        dropin_durations_s=duration_list,
        median_dropin_s=lower_median(duration_list),
        median_contents_per_dropin=lower_median(content_counts),
        total_contents=total_contents,
        total_extensions=extensions,
        p50_latency_ms=lower_median(latencies),
        peak_temp_c=None if peak_mc is None else peak_mc / 1000.0,
    )


def latency_breakdown(records) -> LatencyBreakdown:
    records = _check_records(records)
    latencies = media_latencies(records)
    hops: list[list[int]] = []
    for record in records:
        if (
            record.get("event") == "deliver"
            and record.get("type") in MEDIA_TYPES
            and record.get("to") != "server"
            and len(record.get("hops", ())) == 3
        ):
            hops.append([int(h) for h in record["hops"]])
    p50 = lower_median(latencies)
    return LatencyBreakdown(
        sample_count=len(latencies),
        p50_ms=p50,
        p95_ms=lower_percentile(latencies, 95),
        hop_p50_ms=[lower_median(col) for col in zip(*hops)] if hops else [],
        within_budget=p50 is not None and p50 <= LATENCY_BUDGET_MS,
    )
