#!/usr/bin/env python3
"""Builds tests/data/study_fixture.jsonl, an event log whose aggregates match
the study-scale reference numbers the metrics suite pins down:

    lower-median drop-in duration   114 s  (1.9 minutes)
    lower-median contents/drop-in   11
    total extensions                48
    total contents sent             >= 200 (this log: 202)

The log is written record by record from the schema documented in the
README, on purpose NOT via the simulator, so it stays an independent check
of metric computation. Aggregates are asserted before writing. The
per-drop-in distribution is this script's own invention; only the
aggregates above are fixed.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "study_fixture.jsonl"

# (base_s, extensions) per drop-in; duration = base + 30 * extensions
DROPINS = [
    (45, 0), (60, 0), (30, 1), (45, 1), (60, 1), (30, 2), (45, 2), (50, 2), (54, 2),
    (60, 2), (45, 3), (60, 3), (45, 4), (60, 4), (60, 6), (60, 7), (60, 8),
]
CONTENTS_PER_DROPIN = [2, 4, 6, 8, 9, 10, 11, 11, 11, 12, 13, 14, 15, 16, 18, 20, 22]
SESSIONS = [3, 3, 3, 2, 2, 2, 2]          # drop-ins per session, 7 study pairs
CATALOG = [
    "bird", "dragon", "holiday_ornaments", "holiday_gifts", "snow", "star_of_david",
    "whale", "mistletoe_sprig", "unicorn", "reindeer", "santa_sleigh",
]
HOP_MS, PROC_MS = 35, 5


def build_records():
    records = []
    durations = []
    extensions_total = 0
    contents_total = 0
    dropin_index = 0

    for s_idx, dropin_count in enumerate(SESSIONS):
        session_id = f"s{s_idx + 1}"
        t0 = s_idx * 4_000_000
        records.append({"event": "session_start", "t": t0, "session_id": session_id,
                        "wearer": "wearer", "friend": "friend",
                        "expires_at": t0 + 3_600_000})
        for j in range(dropin_count):
            base_s, exts = DROPINS[dropin_index]
            n_contents = CONTENTS_PER_DROPIN[dropin_index]
            dropin_id = f"d{dropin_index + 1}"
            dropin_index += 1
            duration_ms = (base_s + 30 * exts) * 1000
            start = t0 + 30_000 + j * 500_000
            end = start + duration_ms
            durations.append(duration_ms // 1000)
            records.append({"event": "dropin_start", "t": start, "dropin_id": dropin_id,
                            "session_id": session_id, "ends_at": end})
            for k in range(exts):
                records.append({"event": "extend", "t": start + 1_000 * (k + 1),
                                "dropin_id": dropin_id, "ends_at": end})
                extensions_total += 1
            for m in range(n_contents):
                records.append({"event": "project", "t": start + 2_000 + m * 1_000,
                                "dropin_id": dropin_id, "session_id": session_id,
                                "content_id": CATALOG[(contents_total + m) % len(CATALOG)]})
            contents_total += n_contents
            for k in range(10):
                t_send = start + 3_000 * k
                records.append({
                    "event": "deliver", "type": "FrameChunk", "from": "server", "to": "friend",
                    "t_send": t_send, "t_deliver": t_send + 2 * HOP_MS + PROC_MS,
                    "hops": [HOP_MS, PROC_MS, HOP_MS], "dropin_id": dropin_id,
                })
            records.append({"event": "dropin_end", "t": end, "at": end,
                            "dropin_id": dropin_id, "cause": "expired"})
        session_end = t0 + 3_600_000
        for k, temp_c in enumerate((25.0, 32.0, 39.0, 46.0, 40.0, 33.0)):
            records.append({"event": "thermal", "t": t0 + 60_000 * (k + 1),
                            "temp_mc": int(temp_c * 1000), "streaming": k < 4})
        records.append({"event": "session_end", "t": session_end, "session_id": session_id,
                        "cause": "expired"})

    durations.sort()
    assert durations[(len(durations) - 1) // 2] == 114, durations
    assert sorted(CONTENTS_PER_DROPIN)[(len(CONTENTS_PER_DROPIN) - 1) // 2] == 11
    assert extensions_total == 48, extensions_total
    assert contents_total == 202 and contents_total >= 200
    records.sort(key=lambda r: (r["t"] if "t" in r else r["t_deliver"]))
    return records


def main():
    records = build_records()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    print(f"wrote {len(records)} records to {OUT}")


if __name__ == "__main__":
    main()
