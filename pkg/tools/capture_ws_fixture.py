#!/usr/bin/env python3
"""Captures the per-console WebSocket traffic for the console replay test.

Drives the real relay (core + control channel) on a fixed virtual clock and
records exactly what each console's socket would receive: binary envelopes
as base64, control replies as text. The console replay test feeds these to
the reducer and snapshots the resulting state.
"""

import base64
import json
import tempfile
from pathlib import Path

from arcall import protocol as p
from arcall.server import RelayServer
from arcall.store import FriendshipDb, StoreDir

OUT_DIR = Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures"


def main():
    tmp = tempfile.mkdtemp(prefix="arcall-fixture-")
    store = StoreDir(tmp)
    db = FriendshipDb()
    db.add("alice", "bob")
    store.save_friendships(db)

    clock = {"t": 0}
    server = RelayServer(store, clock=lambda: clock["t"])
    core = server.core

    logs = {"wearer": [], "friend": []}

    def sink(role):
        return lambda msg: logs[role].append({"b64": base64.b64encode(p.encode(msg)).decode()})

    def control(user, role, request):
        reply = server.handle_control(user, role, request)
        logs[role].append({"text": json.dumps(reply)})
        return reply

    wearer = core.attach("alice", "wearer", sink("wearer"), 0)
    friend = core.attach("bob", "friend", sink("friend"), 0)

    control("alice", "wearer", {"op": "get_catalog"})
    control("bob", "friend", {"op": "get_catalog"})

    clock["t"] = 1000
    start = control("alice", "wearer", {"op": "start", "config": {
        "friend": "bob", "arcall_duration_s": 600, "dropin_duration_s": 60,
        "blur_level": 2, "presence_indicator": True,
    }})
    session_id = start["session_id"]

    clock["t"] = 2000
    core.handle_message(friend, p.DropInRequest(session_id=session_id), 2000)

    clock["t"] = 3000
    pixels = bytes((3 * x + 5 * y) % 256 for y in range(6) for x in range(8))
    core.handle_message(wearer, p.FrameChunk(
        dropin_id="d1", captured_at=3000, width=8, height=6, blur_applied=0, payload=pixels,
    ), 3000)

    core.handle_message(friend, p.AudioChunk(dropin_id="d1", seq=0, sender="friend",
                                             payload=bytes(48)), 3500)
    core.handle_message(friend, p.Project(dropin_id="d1", content_id="dragon"), 4000)
    core.handle_message(friend, p.Reposition(dropin_id="d1", anchor_x=0.95, anchor_y=0.5), 4500)
    core.handle_message(friend, p.MuteToggle(dropin_id="d1", muted=True), 5000)
    core.handle_message(wearer, p.ExtendTap(dropin_id="d1"), 6000)
    core.tick(7000)

    # a crafted wrong-role message only ever yields a rendered server error
    core.handle_message(wearer, p.Project(dropin_id="d1", content_id="snow"), 8000)

    core.handle_message(friend, p.DropInEnd(dropin_id="d1", cause="leaving"), 9000)
    core.handle_message(wearer, p.SessionEnd(session_id=session_id, cause="done"), 10_000)
    core.handle_message(friend, p.DropInRequest(session_id=session_id), 11_000)  # -> deny

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for role, messages in logs.items():
        path = OUT_DIR / f"{role}_log.json"
        path.write_text(json.dumps({"role": role, "messages": messages}, indent=2) + "\n")
        print(f"wrote {len(messages)} messages to {path}")


if __name__ == "__main__":
    main()
