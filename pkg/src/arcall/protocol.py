"""Wire protocol: message variants and the framed, bit-exact envelope codec.

Envelope layout (big-endian):

    offset 0   magic     0xA2
    offset 1   version   0x01
    offset 2   msg type  0x01..0x0E, the variant order of MESSAGE_TYPES
    offset 3   length    u32, total payload byte count
    offset 7   payload

The payload starts with the message fields as canonical JSON: UTF-8,
keys sorted lexicographically, no insignificant whitespace, non-ASCII
escaped. FrameChunk and AudioChunk carry raw media bytes immediately after
the JSON header; those bytes count toward the declared length. Encoding the
same message twice yields identical bytes, which is what the golden-byte
tests pin down.

The decoder is total: any input yields either a message or a DecodeError.
``Truncated`` means "feed me more bytes" and is how stream reassembly
works; everything else poisons the stream.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from typing import Iterator, Optional, Union

from .errors import ArcallError

MAGIC = 0xA2
VERSION = 0x01
HEADER = struct.Struct(">BBBI")
MAX_PAYLOAD = 32 * 1024 * 1024
MAX_FRAME_DIM = 4096


class DecodeError(ArcallError):
    code = "decode_error"


class BadMagic(DecodeError):
    code = "bad_magic"


class BadVersion(DecodeError):
    code = "bad_version"


class UnknownType(DecodeError):
    code = "unknown_type"


class LengthMismatch(DecodeError):
    code = "length_mismatch"


class Truncated(DecodeError):
    code = "truncated"


class MalformedPayload(DecodeError):
    code = "malformed_payload"


def _check_id(value: str, name: str) -> None:
    if not value:
        raise ValueError(f"{name} must be non-empty")


@dataclass(frozen=True)
class InviteNotify:
    session_id: str
    wearer: str
    expires_at: int

    def __post_init__(self):
        _check_id(self.session_id, "session_id")
        _check_id(self.wearer, "wearer")


@dataclass(frozen=True)
class DropInRequest:
    session_id: str

    def __post_init__(self):
        _check_id(self.session_id, "session_id")


@dataclass(frozen=True)
class DropInGrant:
    dropin_id: str
    ends_at: int
    presence_indicator: bool

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class DropInDeny:
    reason: str


@dataclass(frozen=True)
class FrameChunk:
    dropin_id: str
    captured_at: int
    width: int
    height: int
    blur_applied: int
    payload: bytes

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")
        if not (1 <= self.width <= MAX_FRAME_DIM and 1 <= self.height <= MAX_FRAME_DIM):
            raise ValueError(f"frame dimensions {self.width}x{self.height} out of range")
        if len(self.payload) != self.width * self.height:
            raise ValueError("frame payload does not match declared dimensions")


@dataclass(frozen=True)
class AudioChunk:
    dropin_id: str
    seq: int
    sender: str
    payload: bytes

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")
        _check_id(self.sender, "sender")


@dataclass(frozen=True)
class MuteToggle:
    dropin_id: str
    muted: bool

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class Project:
    dropin_id: str
    content_id: str

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")
        _check_id(self.content_id, "content_id")


@dataclass(frozen=True)
class Reposition:
    dropin_id: str
    anchor_x: float
    anchor_y: float

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class ExtendTap:
    dropin_id: str

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class TimerSync:
    dropin_id: str
    remaining_ms: int

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class DropInEnd:
    dropin_id: str
    cause: str

    def __post_init__(self):
        _check_id(self.dropin_id, "dropin_id")


@dataclass(frozen=True)
class SessionEnd:
    session_id: str
    cause: str

    def __post_init__(self):
        _check_id(self.session_id, "session_id")


@dataclass(frozen=True)
class Error:
    code: str
    detail: str


MESSAGE_TYPES = (
    InviteNotify,
    DropInRequest,
    DropInGrant,
    DropInDeny,
    FrameChunk,
    AudioChunk,
    MuteToggle,
    Project,
    Reposition,
    ExtendTap,
    TimerSync,
    DropInEnd,
    SessionEnd,
    Error,
)

Message = Union[MESSAGE_TYPES]

_TYPE_BYTE = {cls: i + 1 for i, cls in enumerate(MESSAGE_TYPES)}
_BY_TYPE_BYTE = {i + 1: cls for i, cls in enumerate(MESSAGE_TYPES)}
_BINARY = frozenset((FrameChunk, AudioChunk))
_FIELD_TYPES = {
    cls: {f.name: f.type for f in fields(cls) if f.name != "payload"} for cls in MESSAGE_TYPES
}


def type_byte(msg: Message) -> int:
    return _TYPE_BYTE[type(msg)]


def encode(msg: Message) -> bytes:
    """Deterministic framing: same message, same bytes."""
    cls = type(msg)
    if cls not in _TYPE_BYTE:
        raise TypeError(f"not a wire message: {msg!r}")
    head = {name: getattr(msg, name) for name in _FIELD_TYPES[cls]}
    body = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if cls in _BINARY:
        body += msg.payload
    return HEADER.pack(MAGIC, VERSION, _TYPE_BYTE[cls], len(body)) + body


def _json_object_end(data: bytes) -> int:
    """Index one past the top-level JSON object opening ``data``."""
    depth = 0
    in_string = False
    escaped = False
    for i, b in enumerate(data):
        if in_string:
            if escaped:
                escaped = False
            elif b == 0x5C:  # backslash
                escaped = True
            elif b == 0x22:  # quote
                in_string = False
        elif b == 0x22:
            in_string = True
        elif b == 0x7B:  # {
            depth += 1
        elif b == 0x7D:  # }
            depth -= 1
            if depth == 0:
                return i + 1
        elif depth == 0:
            break
    raise MalformedPayload("payload does not start with a JSON object")


_JSON_TYPES = {"str": str, "int": int, "bool": bool, "float": float}


def _build(cls, head: object, raw: Optional[bytes]) -> Message:
    if not isinstance(head, dict):
        raise MalformedPayload("payload header is not a JSON object")
    expected = _FIELD_TYPES[cls]
    if set(head) != set(expected):
        raise MalformedPayload(
            f"{cls.__name__} fields {sorted(head)} do not match {sorted(expected)}"
        )
    kwargs = {}
    for name, type_name in expected.items():
        value = head[name]
        want = _JSON_TYPES[type_name]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or (want is int and isinstance(value, bool)):
            raise MalformedPayload(f"{cls.__name__}.{name} has wrong type")
        kwargs[name] = value
    if cls in _BINARY:
        kwargs["payload"] = raw
    if cls is FrameChunk and len(raw) != kwargs["width"] * kwargs["height"]:
        raise LengthMismatch(
            f"frame declares {kwargs['width']}x{kwargs['height']} but carries {len(raw)} bytes"
        )
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise MalformedPayload(str(exc)) from exc


def decode(buf: Union[bytes, bytearray, memoryview]) -> tuple[Message, int]:
    """Parse one envelope; returns (message, bytes consumed).

    Trailing data is fine (it belongs to the next envelope). Raises
    Truncated when the buffer cannot hold the declared envelope yet.
    """
    head = bytes(buf[: HEADER.size])
    if len(head) >= 1 and head[0] != MAGIC:
        raise BadMagic(f"bad magic 0x{head[0]:02X}")
    if len(head) >= 2 and head[1] != VERSION:
        raise BadVersion(f"unsupported version 0x{head[1]:02X}")
    if len(head) >= 3 and head[2] not in _BY_TYPE_BYTE:
        raise UnknownType(f"unknown message type 0x{head[2]:02X}")
    if len(head) < HEADER.size:
        raise Truncated("incomplete envelope header")
    _, _, msg_type, length = HEADER.unpack(head)
    if length > MAX_PAYLOAD:
        raise LengthMismatch(f"declared payload of {length} bytes exceeds maximum")
    end = HEADER.size + length
    if len(buf) < end:
        raise Truncated(f"need {end - len(buf)} more bytes")
    payload = bytes(buf[HEADER.size : end])
    cls = _BY_TYPE_BYTE[msg_type]
    if cls in _BINARY:
        split = _json_object_end(payload)
        head_bytes, raw = payload[:split], payload[split:]
    else:
        head_bytes, raw = payload, None
    try:
        fields_obj = json.loads(head_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayload(f"bad JSON header: {exc}") from exc
    return _build(cls, fields_obj, raw), end


class StreamDecoder:
    """Reassembles envelopes from arbitrarily chunked byte input."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> Iterator[Message]:
        self._buf.extend(data)
        while self._buf:
            try:
                msg, used = decode(self._buf)
            except Truncated:
                return
            del self._buf[:used]
            yield msg

    @property
    def pending(self) -> int:
        return len(self._buf)
