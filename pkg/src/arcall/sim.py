"""Deterministic discrete-event simulation of a relay plus two scripted bots.

Everything runs on a virtual millisecond clock. Identical (scenario, seeds,
configs) produce byte-identical event logs: the event queue is ordered by
(time, sequence number), the only randomness is the seeded xorshift RNG
below, and no wall-clock or hash ordering leaks in.

RNG, for cross-language reproduction: xorshift64* with state updates
``x ^= x >> 12; x ^= x << 25 (mod 2^64); x ^= x >> 27`` returning
``(x * 0x2545F4914F6CDD1D) mod 2^64``; a zero seed is replaced by
0x9E3779B97F4A7C15. Per-hop delay draws ``base + (next() mod (2j + 1)) - j``
for jitter j, in event-processing order.

Network model: client -> server costs one hop; server -> client costs
processing + one hop, so end-to-end media spans two hops plus processing
(defaults 35 ms/hop, +/-10 ms jitter, 5 ms processing: analytic median
75 ms). Thermal model: one boolean step per virtual second; the glasses
heat while any drop-in overlaps that second and cool toward ambient
otherwise, in exact millidegree integers.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from . import protocol
from .errors import ArcallError
from .relay import FRIEND, WEARER, Connection, RelayCore
from .session import SessionState
from .store import FriendshipDb

DEFAULT_SEED = 0xA11CE5EED
TICK_INTERVAL_MS = 1000


class ScenarioInvalid(ArcallError):
    code = "scenario_invalid"


class _XorShift64Star:
    MULT = 0x2545F4914F6CDD1D
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self._state = (seed & self.MASK) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & self.MASK
        x ^= x >> 27
        self._state = x
        return (x * self.MULT) & self.MASK


@dataclass(frozen=True)
class NetworkModel:
    base_delay_ms: int = 35
    jitter_ms: int = 10
    processing_ms: int = 5
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.base_delay_ms < 0 or self.jitter_ms < 0 or self.processing_ms < 0:
            raise ArcallError("network delays must be non-negative")
        if self.jitter_ms > self.base_delay_ms:
            raise ArcallError("jitter larger than the base delay would allow negative hops")

    def hop_delay(self, rng: _XorShift64Star) -> int:
        if self.jitter_ms == 0:
            return self.base_delay_ms
        return self.base_delay_ms + rng.next_u64() % (2 * self.jitter_ms + 1) - self.jitter_ms


def _mc(value: float) -> int:
    return round(value * 1000)


@dataclass(frozen=True)
class ThermalState:
    """Glasses temperature in exact millidegrees Celsius."""

    temp_mc: int = 25_000
    ambient_mc: int = 25_000
    heat_mc_per_s: int = 350
    cool_mc_per_s: int = 200
    cutoff_mc: int = 55_000

    @classmethod
    def from_celsius(cls, ambient_c=25.0, heat_c_per_s=0.35, cool_c_per_s=0.2,
                     cutoff_c=55.0, temp_c=None) -> "ThermalState":
        if heat_c_per_s < 0 or cool_c_per_s < 0:
            raise ArcallError("thermal rates must be non-negative")
        temp = _mc(ambient_c if temp_c is None else temp_c)
        if temp < _mc(ambient_c):
            raise ArcallError("temperature below ambient")
        return cls(
            temp_mc=temp,
            ambient_mc=_mc(ambient_c),
            heat_mc_per_s=_mc(heat_c_per_s),
            cool_mc_per_s=_mc(cool_c_per_s),
            cutoff_mc=_mc(cutoff_c),
        )

    @property
    def temp_c(self) -> float:
        return self.temp_mc / 1000.0

    @property
    def over_cutoff(self) -> bool:
        return self.temp_mc >= self.cutoff_mc


def thermal_step(state: ThermalState, dt_s: int, streaming: bool) -> ThermalState:
    """Advance dt whole seconds: heat while streaming, cool toward ambient
    (never below) otherwise."""
    if dt_s < 0:
        raise ArcallError("dt must be non-negative")
    if dt_s == 0:
        return state
    if streaming:
        return replace(state, temp_mc=state.temp_mc + state.heat_mc_per_s * dt_s)
    return replace(state, temp_mc=max(state.ambient_mc, state.temp_mc - state.cool_mc_per_s * dt_s))


_ACTION_OPS = {
    "start", "drop_in", "project", "reposition", "tap", "mute",
    "end_dropin", "end_session", "frame", "audio",
}


@dataclass(frozen=True)
class Action:
    t: int
    actor: str
    op: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    actions: list[Action]
    wearer: str = "wearer"
    friend: str = "friend"
    frame_interval_ms: int = 100
    audio_interval_ms: int = 250
    frame_size: tuple[int, int] = (16, 16)
    auto_stream: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioInvalid("scenario must be a JSON object")
        wearer = data.get("wearer", "wearer")
        friend = data.get("friend", "friend")
        raw_actions = data.get("actions", [])
        if not isinstance(raw_actions, list):
            raise ScenarioInvalid("actions must be a list")
        actions = []
        last_t = 0
        roles = {wearer: "wearer", friend: "friend", "wearer": "wearer", "friend": "friend"}
        for i, raw in enumerate(raw_actions):
            if not isinstance(raw, dict):
                raise ScenarioInvalid(f"action #{i} must be an object")
            t = raw.get("t")
            if not isinstance(t, int) or isinstance(t, bool) or t < 0:
                raise ScenarioInvalid(f"action #{i} has invalid time {t!r}")
            if t < last_t:
                raise ScenarioInvalid(f"action #{i} goes back in time ({t} < {last_t})")
            last_t = t
            actor = raw.get("actor")
            if actor not in roles:
                raise ScenarioInvalid(f"action #{i} has unknown actor {actor!r}")
            op = raw.get("op")
            if op not in _ACTION_OPS:
                raise ScenarioInvalid(f"action #{i} has unknown op {op!r}")
            params = {k: v for k, v in raw.items() if k not in ("t", "actor", "op")}
            actions.append(Action(t=t, actor=roles[actor], op=op, params=params))
        size = data.get("frame_size", [16, 16])
        return cls(
            actions=actions,
            wearer=wearer,
            friend=friend,
            frame_interval_ms=int(data.get("frame_interval_ms", 100)),
            audio_interval_ms=int(data.get("audio_interval_ms", 250)),
            frame_size=(int(size[0]), int(size[1])),
            auto_stream=bool(data.get("auto_stream", True)),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Scenario":
        try:
            return cls.from_dict(json.loads(Path(path).read_text("utf-8")))
        except (OSError, ValueError) as exc:
            raise ScenarioInvalid(f"cannot load scenario {path}: {exc}") from exc


_MEDIA_TYPES = ("FrameChunk", "AudioChunk")


class _Sim:
    def __init__(self, scenario: Scenario, network: NetworkModel, thermal: ThermalState,
                 tick_interval_ms: int):
        self.scenario = scenario
        self.network = network
        self.rng = _XorShift64Star(network.seed)
        self.thermal = thermal
        self.tick_interval = tick_interval_ms
        self.log: list[dict] = []
        self.queue: list = []
        self._seq = 0

        friendships = FriendshipDb()
        friendships.add(scenario.wearer, scenario.friend)
        self.core = RelayCore(friendships, on_event=self._core_event)
        self.conns: dict[str, Connection] = {}
        self.now = 0
        self._origin: Optional[tuple[int, int]] = None  # (t_send, inbound hop) of the message being handled
        self.last_session_id: Optional[str] = None
        self.last_dropin_id: Optional[str] = None
        self._audio_seq = {"wearer": 0, "friend": 0}
        self._frame_seq = 0
        self._streams: dict[str, list] = {}   # dropin_id -> [start, end) for thermal overlap
        self._tick_scheduled = False

    # -- plumbing ---------------------------------------------------------

    def _push(self, t: int, fn, *args) -> None:
        self._seq += 1
        heapq.heappush(self.queue, (t, self._seq, fn, args))

    def _record(self, entry: dict) -> None:
        self.log.append(entry)

    def _core_event(self, entry: dict) -> None:
        self._record(entry)
        kind = entry["event"]
        if kind == "session_start":
            self.last_session_id = entry["session_id"]
        elif kind == "dropin_start":
            self.last_dropin_id = entry["dropin_id"]
            self._streams[entry["dropin_id"]] = [entry["t"], None]
            if self.scenario.auto_stream:
                self._push(entry["t"] + self.scenario.audio_interval_ms,
                           self._auto_audio, entry["dropin_id"])
        elif kind == "dropin_end":
            window = self._streams.get(entry["dropin_id"])
            if window is not None and window[1] is None:
                window[1] = entry.get("at") or entry["t"]

    def _user(self, role: str) -> str:
        return self.scenario.wearer if role == "wearer" else self.scenario.friend

    def _make_sink(self, role: str):
        user = self._user(role)

        def sink(msg: protocol.Message) -> None:
            hop = self.network.hop_delay(self.rng)
            type_name = type(msg).__name__
            if type_name in _MEDIA_TYPES and self._origin is not None:
                t_send, inbound_hop = self._origin
                hops = [inbound_hop, self.network.processing_ms, hop]
            else:
                t_send = self.now
                hops = [self.network.processing_ms, hop]
            t_deliver = self.now + self.network.processing_ms + hop
            entry = {
                "event": "deliver", "type": type_name, "from": "server", "to": role,
                "t_send": t_send, "t_deliver": t_deliver, "hops": hops,
            }
            entry.update(_message_ids(msg))
            self._push(t_deliver, self._record, entry)

        return sink

    # -- client side --------------------------------------------------------

    def _client_send(self, role: str, msg: protocol.Message, t: int) -> None:
        entry = {"event": "send", "t": t, "from": role, "type": type(msg).__name__}
        entry.update(_message_ids(msg))
        self._record(entry)
        hop = self.network.hop_delay(self.rng)
        self._push(t + hop, self._server_recv, role, msg, t, hop)

    def _server_recv(self, role: str, msg: protocol.Message, t_send: int, hop: int) -> None:
        if type(msg).__name__ not in _MEDIA_TYPES:
            entry = {
                "event": "deliver", "type": type(msg).__name__, "from": role, "to": "server",
                "t_send": t_send, "t_deliver": self.now, "hops": [hop],
            }
            entry.update(_message_ids(msg))
            self._record(entry)
        self._origin = (t_send, hop)
        try:
            self.core.handle_message(self.conns[role], msg, self.now)
        finally:
            self._origin = None

    def _synthetic_frame(self) -> bytes:
        w, h = self.scenario.frame_size
        seq = self._frame_seq
        self._frame_seq += 1
        return bytes((x + y + seq) % 256 for y in range(h) for x in range(w))

    def _auto_frame(self, session_id: str) -> None:
        sess = self.core.sessions.get(session_id)
        if sess is None or sess.state is not SessionState.ACTIVE:
            return
        self._send_frame(self.now)
        self._push(self.now + self.scenario.frame_interval_ms, self._auto_frame, session_id)

    def _send_frame(self, t: int) -> None:
        w, h = self.scenario.frame_size
        msg = protocol.FrameChunk(
            dropin_id=self.last_dropin_id or "d0", captured_at=t,
            width=w, height=h, blur_applied=0, payload=self._synthetic_frame(),
        )
        self._client_send("wearer", msg, t)

    def _auto_audio(self, dropin_id: str) -> None:
        dropin = self.core.dropins.get(dropin_id)
        if dropin is None or dropin.state.value != "active":
            return
        for role in ("wearer", "friend"):
            self._send_audio(role, self.now)
        self._push(self.now + self.scenario.audio_interval_ms, self._auto_audio, dropin_id)

    def _send_audio(self, role: str, t: int) -> None:
        seq = self._audio_seq[role]
        self._audio_seq[role] += 1
        msg = protocol.AudioChunk(
            dropin_id=self.last_dropin_id or "d0", seq=seq, sender=role,
            payload=bytes((seq + i) % 256 for i in range(32)),
        )
        self._client_send(role, msg, t)

    # -- scripted actions ---------------------------------------------------

    def _run_action(self, action: Action) -> None:
        op, params, t = action.op, action.params, self.now
        if op == "start":
            config = dict(params.get("config") or {})
            config.setdefault("friend", self.scenario.friend)
            try:
                sess = self.core.handle_start(self._user("wearer"), config, now=t)
            except ArcallError as exc:
                self._record({"event": "reject", "t": t, "op": "start", "code": exc.code})
                return
            if self.scenario.auto_stream:
                self._push(t + self.scenario.frame_interval_ms, self._auto_frame, sess.id)
            return
        if op == "frame":
            self._send_frame(t)
            return
        if op == "audio":
            self._send_audio(action.actor, t)
            return
        msg = self._action_message(op, params)
        self._client_send(action.actor, msg, t)

    def _action_message(self, op: str, params: dict) -> protocol.Message:
        dropin_id = params.get("dropin_id") or self.last_dropin_id or "d0"
        session_id = params.get("session_id") or self.last_session_id or "s0"
        if op == "drop_in":
            return protocol.DropInRequest(session_id=session_id)
        if op == "project":
            return protocol.Project(dropin_id=dropin_id, content_id=params.get("content_id", "snow"))
        if op == "reposition":
            return protocol.Reposition(
                dropin_id=dropin_id,
                anchor_x=float(params.get("x", 0.5)), anchor_y=float(params.get("y", 0.5)),
            )
        if op == "tap":
            return protocol.ExtendTap(dropin_id=dropin_id)
        if op == "mute":
            return protocol.MuteToggle(dropin_id=dropin_id, muted=bool(params.get("muted", True)))
        if op == "end_dropin":
            return protocol.DropInEnd(dropin_id=dropin_id, cause="requested")
        if op == "end_session":
            return protocol.SessionEnd(session_id=session_id, cause="requested")
        raise ScenarioInvalid(f"unknown op {op!r}")

    # -- ticking --------------------------------------------------------------

    def _streaming_during(self, lo: int, hi: int) -> bool:
        for start, end in self._streams.values():
            if start < hi and (end is None or end > lo):
                return True
        return False

    def _tick(self) -> None:
        self._tick_scheduled = False
        t = self.now
        self.core.tick(t)
        was_over = self.thermal.over_cutoff
        streaming = self._streaming_during(t - self.tick_interval, t)
        self.thermal = thermal_step(self.thermal, self.tick_interval // 1000, streaming)
        self._record({"event": "thermal", "t": t, "temp_mc": self.thermal.temp_mc,
                      "streaming": streaming})
        if self.thermal.over_cutoff and not was_over:
            # the duration caps exist to keep this from happening; report it,
            # the wearer chose to extend that far
            self._record({"event": "thermal_cutoff", "t": t, "temp_mc": self.thermal.temp_mc})
        if self.queue or any(
            s.state is SessionState.ACTIVE for s in self.core.sessions.values()
        ):
            self._schedule_tick(t + self.tick_interval)

    def _schedule_tick(self, t: int) -> None:
        if not self._tick_scheduled:
            self._tick_scheduled = True
            self._push(t, self._tick)

    # -- main loop --------------------------------------------------------------

    def run(self) -> list[dict]:
        self.conns["wearer"] = self.core.attach(self._user("wearer"), WEARER, self._make_sink("wearer"), 0)
        self.conns["friend"] = self.core.attach(self._user("friend"), FRIEND, self._make_sink("friend"), 0)
        for action in self.scenario.actions:
            self._push(action.t, self._run_action, action)
        if self.scenario.actions:
            self._schedule_tick(self.tick_interval)
        while self.queue:
            t, _, fn, args = heapq.heappop(self.queue)
            if t < self.now:
                raise AssertionError("time went backwards")
            self.now = t
            fn(*args)
        return self.log


def _message_ids(msg: protocol.Message) -> dict:
    ids = {}
    for name in ("session_id", "dropin_id", "content_id", "seq", "cause", "reason", "code"):
        if hasattr(msg, name):
            ids[name] = getattr(msg, name)
    return ids


def run_scenario(
    scenario: Union[Scenario, dict],
    network: Optional[NetworkModel] = None,
    thermal: Optional[ThermalState] = None,
    *,
    tick_interval_ms: int = TICK_INTERVAL_MS,
) -> list[dict]:
    """Run the scripted scenario; returns the event log as a list of records.

    Deterministic: the log (including ``log_to_jsonl`` bytes) is a pure
    function of the scenario, the network model (with its seed), and the
    thermal parameters.
    """
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    if tick_interval_ms <= 0 or tick_interval_ms % 1000:
        raise ScenarioInvalid("tick interval must be a positive multiple of 1000 ms")
    sim = _Sim(scenario, network or NetworkModel(), thermal or ThermalState(),
               tick_interval_ms)
    return sim.run()


def log_to_jsonl(records: list[dict]) -> bytes:
    return b"".join(
        json.dumps(r, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
        for r in records
    )


def load_log(path: Union[str, Path]) -> list[dict]:
    records = []
    with open(path, "rb") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
