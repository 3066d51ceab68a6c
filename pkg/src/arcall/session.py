"""Call-session and drop-in state machines.

Timing rules:

* All timestamps are integer milliseconds on a caller-supplied clock; this
  module never reads wall-clock time, which keeps it usable from the
  deterministic simulation harness.
* Durations are configured in whole seconds and converted once.
* Deadlines are inclusive-end: ``now >= deadline`` fires the transition.
* State only changes inside an operation (``tick``, ``end_*`` ...); nothing
  expires implicitly just because time passed.

An active session *is* the invitation: the invited friend may drop in while
``started_at <= now < expires_at`` and no other drop-in is running. A
drop-in extension may push its end past the parent session's expiry; the
drop-in then runs out on its own clock, the session flips to Expired only
once no drop-in is active, and no new drop-in can start meanwhile.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Union

from .errors import ArcallError

ARCALL_MIN_S = 300
ARCALL_MAX_S = 3600
DROPIN_MIN_S = 30
DROPIN_MAX_S = 60
BLUR_MIN = 0
BLUR_MAX = 10
EXTENSION_STEP_MS = 30_000


class ConfigError(ArcallError):
    code = "invalid_config"

    def __init__(self, message: str, *, field: str):
        super().__init__(message)
        self.field = field


class DurationOutOfRange(ConfigError):
    code = "duration_out_of_range"


class BlurOutOfRange(ConfigError):
    code = "blur_out_of_range"


class MissingFriend(ConfigError):
    code = "missing_friend"

    def __init__(self, message: str = "config requires a friend to invite"):
        super().__init__(message, field="friend")


class SessionExpired(ArcallError):
    code = "session_expired"


class SessionEnded(ArcallError):
    code = "session_ended"


class AlreadyDroppedIn(ArcallError):
    code = "already_dropped_in"


class NotActive(ArcallError):
    code = "not_active"


class PastParentExpiry(ArcallError):
    code = "past_parent_expiry"


class SessionState(Enum):
    ACTIVE = "active"
    ENDED = "ended"
    EXPIRED = "expired"


class DropInState(Enum):
    ACTIVE = "active"
    ENDED = "ended"


class EventKind(Enum):
    DROPIN_ENDED = "dropin_ended"
    ARCALL_EXPIRED = "arcall_expired"


@dataclass(frozen=True)
class SessionConfig:
    friend: str
    arcall_duration_s: int = ARCALL_MAX_S
    dropin_duration_s: int = DROPIN_MAX_S
    blur_level: int = 0
    presence_indicator: bool = False


_CONFIG_FIELDS = frozenset(
    ("friend", "arcall_duration_s", "dropin_duration_s", "blur_level", "presence_indicator")
)


def _require_int(value, name: str, low: int, high: int, exc) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise exc(f"{name} must be an integer between {low} and {high}, got {value!r}", field=name)
    if not low <= value <= high:
        raise exc(f"{name} must be between {low} and {high}, got {value}", field=name)
    return value


def validate_config(raw: Union[SessionConfig, Mapping]) -> SessionConfig:
    """Check every range invariant and return a frozen config.

    Raises a ConfigError subclass naming the offending field.
    """
    if isinstance(raw, SessionConfig):
        values = {
            "friend": raw.friend,
            "arcall_duration_s": raw.arcall_duration_s,
            "dropin_duration_s": raw.dropin_duration_s,
            "blur_level": raw.blur_level,
            "presence_indicator": raw.presence_indicator,
        }
    else:
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}", field=sorted(unknown)[0])
        values = dict(raw)

    friend = values.get("friend")
    if not isinstance(friend, str) or not friend:
        raise MissingFriend()

    arcall_s = _require_int(
        values.get("arcall_duration_s", ARCALL_MAX_S),
        "arcall_duration_s", ARCALL_MIN_S, ARCALL_MAX_S, DurationOutOfRange,
    )
    dropin_s = _require_int(
        values.get("dropin_duration_s", DROPIN_MAX_S),
        "dropin_duration_s", DROPIN_MIN_S, DROPIN_MAX_S, DurationOutOfRange,
    )
    blur = _require_int(values.get("blur_level", 0), "blur_level", BLUR_MIN, BLUR_MAX, BlurOutOfRange)

    presence = values.get("presence_indicator", False)
    if not isinstance(presence, bool):
        raise ConfigError("presence_indicator must be a boolean", field="presence_indicator")

    return SessionConfig(
        friend=friend,
        arcall_duration_s=arcall_s,
        dropin_duration_s=dropin_s,
        blur_level=blur,
        presence_indicator=presence,
    )


@dataclass
class ArcallSession:
    id: str
    wearer: str
    friend: str
    config: SessionConfig
    started_at: int
    expires_at: int
    state: SessionState = SessionState.ACTIVE
    active_dropin: Optional["DropInSession"] = field(default=None, repr=False)
    ended_at: Optional[int] = None


@dataclass
class DropInSession:
    id: str
    parent: ArcallSession = field(repr=False)
    started_at: int = 0
    ends_at: int = 0
    extensions: int = 0
    state: DropInState = DropInState.ACTIVE
    ended_at: Optional[int] = None

    @property
    def parent_id(self) -> str:
        return self.parent.id


@dataclass(frozen=True)
class ExpiryEvent:
    kind: EventKind
    subject_id: str
    at: int


def _new_id(prefix: str) -> str:
    return prefix + uuid.uuid4().hex[:12]


def start_arcall(
    config: Union[SessionConfig, Mapping],
    wearer: str,
    now: int,
    session_id: Optional[str] = None,
) -> ArcallSession:
    """Open the invite window: the friend may drop in until it expires."""
    cfg = validate_config(config)
    return ArcallSession(
        id=session_id or _new_id("s-"),
        wearer=wearer,
        friend=cfg.friend,
        config=cfg,
        started_at=now,
        expires_at=now + cfg.arcall_duration_s * 1000,
    )


def drop_in(session: ArcallSession, now: int, dropin_id: Optional[str] = None) -> DropInSession:
    """Start a co-presence window under an active session.

    Succeeds iff ``started_at <= now < expires_at`` and no drop-in is
    currently active.
    """
    if session.state is SessionState.ENDED:
        raise SessionEnded(f"session {session.id} has ended")
    if session.state is SessionState.EXPIRED or not session.started_at <= now < session.expires_at:
        raise SessionExpired(f"session {session.id} invite window is closed")
    if session.active_dropin is not None:
        raise AlreadyDroppedIn(f"drop-in {session.active_dropin.id} is already active")
    dropin = DropInSession(
        id=dropin_id or _new_id("d-"),
        parent=session,
        started_at=now,
        ends_at=now + session.config.dropin_duration_s * 1000,
    )
    session.active_dropin = dropin
    return dropin


def extend_drop_in(
    dropin: DropInSession,
    now: int,
    *,
    strict_parent_expiry: bool = False,
) -> DropInSession:
    """Push the drop-in end out by 30 seconds (unbounded repeat).

    With ``strict_parent_expiry`` an extension that would outlive the parent
    session's expiry is refused instead of allowed to run over.
    """
    if dropin.state is not DropInState.ACTIVE or now >= dropin.ends_at:
        raise NotActive(f"drop-in {dropin.id} is not active")
    new_ends_at = dropin.ends_at + EXTENSION_STEP_MS
    if strict_parent_expiry and new_ends_at > dropin.parent.expires_at:
        raise PastParentExpiry(f"extension would outlive session {dropin.parent.id}")
    dropin.ends_at = new_ends_at
    dropin.extensions += 1
    return dropin


def tick(session: ArcallSession, now: int) -> list[ExpiryEvent]:
    """Fire overdue deadlines; idempotent for a fixed ``now``.

    Emits DropInEnded before ArcallExpired. A session with a drop-in that
    outlives its expiry stays out of Expired until that drop-in finishes.
    """
    events: list[ExpiryEvent] = []
    dropin = session.active_dropin
    if dropin is not None and now >= dropin.ends_at:
        dropin.state = DropInState.ENDED
        dropin.ended_at = dropin.ends_at
        session.active_dropin = None
        events.append(ExpiryEvent(EventKind.DROPIN_ENDED, dropin.id, dropin.ends_at))
    if (
        session.state is SessionState.ACTIVE
        and now >= session.expires_at
        and session.active_dropin is None
    ):
        session.state = SessionState.EXPIRED
        session.ended_at = session.expires_at
        events.append(ExpiryEvent(EventKind.ARCALL_EXPIRED, session.id, session.expires_at))
    return events


def end_dropin(dropin: DropInSession, now: int) -> DropInSession:
    if dropin.state is not DropInState.ACTIVE:
        raise NotActive(f"drop-in {dropin.id} is not active")
    dropin.state = DropInState.ENDED
    dropin.ended_at = now
    if dropin.parent.active_dropin is dropin:
        dropin.parent.active_dropin = None
    return dropin


def end_arcall(session: ArcallSession, now: int) -> ArcallSession:
    """End the session; an active drop-in is ended first (cascade)."""
    if session.state is not SessionState.ACTIVE:
        raise NotActive(f"session {session.id} is not active")
    if session.active_dropin is not None:
        end_dropin(session.active_dropin, now)
    session.state = SessionState.ENDED
    session.ended_at = now
    return session
