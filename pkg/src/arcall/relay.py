"""Transport-agnostic relay: session ownership, routing, and gating rules.

One RelayCore instance owns every session. All methods are synchronous and
take the current time explicitly, so the same core runs under the live
asyncio server (which serializes calls on one event loop) and under the
deterministic simulation harness (which drives a virtual clock).

Policy summary:

* control messages from the wrong role or outside their window come back as
  wire Error replies and never change state;
* media (frames, audio) outside an active drop-in is dropped silently and
  counted, because media is loss-tolerant and control is not;
* the privacy blur runs here, server-side, so a raw feed never reaches the
  friend when the wearer configured level > 0.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

from . import catalog as catalog_mod
from . import media, protocol, session as session_mod
from .errors import ArcallError
from .session import ArcallSession, DropInSession, DropInState, SessionState
from .store import FriendshipDb, NotFriends, Preferences

log = logging.getLogger(__name__)

WEARER = "wearer"
FRIEND = "friend"
ROLES = (WEARER, FRIEND)

DEFAULT_TIMER_SYNC_INTERVAL_MS = 1000


class UnknownSubject(ArcallError):
    code = "unknown_subject"


class WrongRole(ArcallError):
    code = "wrong_role"


@dataclass
class Connection:
    user: str
    role: str
    send: Callable[[protocol.Message], None] = field(repr=False)
    last_seen: int = 0


class RelayCore:
    def __init__(
        self,
        friendships: FriendshipDb,
        preferences: Optional[Preferences] = None,
        *,
        glasses_fraction: float = media.DEFAULT_GLASSES_FRACTION,
        catalog: Optional[Mapping[str, catalog_mod.ArContent]] = None,
        allow_wearer_reposition: bool = False,
        strict_extend: bool = False,
        echo_frames_to_wearer: bool = False,
        timer_sync_interval_ms: int = DEFAULT_TIMER_SYNC_INTERVAL_MS,
        on_event: Optional[Callable[[dict], None]] = None,
    ):
        self.friendships = friendships
        self.preferences = preferences or Preferences()
        self.fov = media.FovModel(glasses_fraction)
        self.catalog = dict(catalog) if catalog is not None else catalog_mod.catalog_by_id()
        self.allow_wearer_reposition = allow_wearer_reposition
        self.strict_extend = strict_extend
        self.echo_frames_to_wearer = echo_frames_to_wearer
        self.timer_sync_interval_ms = timer_sync_interval_ms
        self.on_event = on_event

        self.sessions: dict[str, ArcallSession] = {}
        self.dropins: dict[str, DropInSession] = {}
        self.projections: dict[str, catalog_mod.ProjectionState] = {}
        self.connections: dict[tuple[str, str], Connection] = {}
        self.pending_invites: dict[str, list[tuple[str, protocol.InviteNotify]]] = {}
        self.muted: dict[str, bool] = {}
        self.counters: Counter = Counter()
        self._next_session = 1
        self._next_dropin = 1
        self._last_timer_sync: dict[str, int] = {}

    # --- observability --------------------------------------------------

    def _event(self, kind: str, t: int, **data) -> None:
        if self.on_event is not None:
            self.on_event({"event": kind, "t": t, **data})

    # --- connections ------------------------------------------------------

    def attach(self, user: str, role: str, send: Callable[[protocol.Message], None], now: int) -> Connection:
        """Register the single live connection for (user, role); replaces a
        stale one. Queued invites still inside their window are replayed."""
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        conn = Connection(user=user, role=role, send=send, last_seen=now)
        self.connections[(user, role)] = conn
        if role == FRIEND:
            for session_id, invite in self.pending_invites.pop(user, []):
                sess = self.sessions.get(session_id)
                if sess is not None and sess.state is SessionState.ACTIVE and now < sess.expires_at:
                    self._send(user, FRIEND, invite, now)
        return conn

    def detach(self, user: str, role: str) -> None:
        self.connections.pop((user, role), None)

    def _send(self, user: str, role: str, msg: protocol.Message, now: int) -> bool:
        conn = self.connections.get((user, role))
        if conn is None:
            if isinstance(msg, protocol.InviteNotify):
                self.pending_invites.setdefault(user, []).append((msg.session_id, msg))
                self.counters["invites_queued"] += 1
            else:
                self.counters["sends_dropped_offline"] += 1
            return False
        try:
            conn.send(msg)
        except Exception:
            log.exception("dropping dead connection %s/%s", user, role)
            self.detach(user, role)
            self.counters["sends_failed"] += 1
            return False
        return True

    def _reply_error(self, conn: Connection, exc: Union[ArcallError, str], detail: str = "", *, now: int) -> None:
        if isinstance(exc, ArcallError):
            code, detail = exc.code, exc.detail
        else:
            code = exc
        self._send(conn.user, conn.role, protocol.Error(code=code, detail=detail), now)

    # --- session lifecycle -------------------------------------------------

    def handle_start(self, wearer: str, config=None, *, now: int) -> ArcallSession:
        """Validate, create the session, and push the invite to the friend
        (queued until their next connect if they are offline)."""
        if config is None:
            config = self.preferences.get(wearer)
            if config is None:
                raise session_mod.ConfigError(f"no stored preferences for {wearer!r}", field="config")
        cfg = session_mod.validate_config(config)
        if not self.friendships.are_friends(wearer, cfg.friend):
            raise NotFriends(f"{wearer!r} and {cfg.friend!r} are not friends")
        sess = session_mod.start_arcall(cfg, wearer, now, session_id=f"s{self._next_session}")
        self._next_session += 1
        self.sessions[sess.id] = sess
        self.projections[sess.id] = catalog_mod.ProjectionState()
        self.counters["sessions_started"] += 1
        self._event("session_start", now, session_id=sess.id, wearer=wearer, friend=cfg.friend,
                    expires_at=sess.expires_at)
        invite = protocol.InviteNotify(session_id=sess.id, wearer=wearer, expires_at=sess.expires_at)
        self._send(cfg.friend, FRIEND, invite, now)
        return sess

    def end_session(self, session_id: str, now: int, cause: str = "ended") -> None:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise UnknownSubject(f"unknown session {session_id!r}")
        if sess.state is not SessionState.ACTIVE:
            raise session_mod.NotActive(f"session {session_id} is not active")
        if sess.active_dropin is not None:
            self._finish_dropin(sess.active_dropin, "session_ended", now)
        session_mod.end_arcall(sess, now)
        self._announce_session_end(sess, cause, now)

    def _announce_session_end(self, sess: ArcallSession, cause: str, now: int) -> None:
        self.pending_invites.pop(sess.friend, None)
        msg = protocol.SessionEnd(session_id=sess.id, cause=cause)
        self._send(sess.wearer, WEARER, msg, now)
        self._send(sess.friend, FRIEND, msg, now)
        self._event("session_end", now, session_id=sess.id, cause=cause)

    def _finish_dropin(self, dropin: DropInSession, cause: str, now: int, *, at: Optional[int] = None) -> None:
        """Tear down everything scoped to a drop-in and tell both parties."""
        if dropin.state is DropInState.ACTIVE:
            session_mod.end_dropin(dropin, at if at is not None else now)
        sess = dropin.parent
        catalog_mod.clear_on_dropin_end(self.projections[sess.id])
        self.muted.pop(dropin.id, None)
        self._last_timer_sync.pop(dropin.id, None)
        msg = protocol.DropInEnd(dropin_id=dropin.id, cause=cause)
        self._send(sess.wearer, WEARER, msg, now)
        self._send(sess.friend, FRIEND, msg, now)
        self._event("dropin_end", now, dropin_id=dropin.id, session_id=sess.id, cause=cause,
                    at=dropin.ended_at)

    def tick(self, now: int, *, sync_timers: bool = True) -> None:
        """Fire expiries and (optionally) the periodic countdown syncs."""
        for sess in list(self.sessions.values()):
            for event in session_mod.tick(sess, now):
                if event.kind is session_mod.EventKind.DROPIN_ENDED:
                    self._finish_dropin(self.dropins[event.subject_id], "expired", now, at=event.at)
                else:
                    self._announce_session_end(sess, "expired", now)
        if sync_timers:
            for dropin in self.dropins.values():
                if dropin.state is DropInState.ACTIVE:
                    last = self._last_timer_sync.get(dropin.id)
                    if last is None or now - last >= self.timer_sync_interval_ms:
                        self._sync_timer(dropin, now)

    def _sync_timer(self, dropin: DropInSession, now: int) -> None:
        msg = protocol.TimerSync(dropin_id=dropin.id, remaining_ms=max(0, dropin.ends_at - now))
        sess = dropin.parent
        self._send(sess.wearer, WEARER, msg, now)
        self._send(sess.friend, FRIEND, msg, now)
        self._last_timer_sync[dropin.id] = now

    # --- inbound dispatch ---------------------------------------------------

    def handle_message(self, conn: Connection, msg: protocol.Message, now: int) -> None:
        """Apply one client message. Expiries are processed first so gating
        decisions never see stale windows."""
        self.tick(now, sync_timers=False)
        conn.last_seen = now
        handler = self._HANDLERS.get(type(msg))
        if handler is None:
            self._reply_error(conn, "unexpected_message",
                              f"clients do not send {type(msg).__name__}", now=now)
            return
        handler(self, conn, msg, now)

    def _require_role(self, conn: Connection, role: str, msg, now: int) -> bool:
        if conn.role != role:
            self._reply_error(conn, WrongRole(f"{type(msg).__name__} is a {role}-side message"), now=now)
            return False
        return True

    def _active_dropin_for_media(self, conn: Connection, dropin_id: str, sender_role: str, kind: str, now: int):
        """Gate a media message; returns the drop-in or None (drop, count)."""
        dropin = self.dropins.get(dropin_id)
        reason = None
        if dropin is None:
            reason = "unknown_dropin"
        elif dropin.state is not DropInState.ACTIVE:
            reason = "no_active_dropin"
        elif conn.role != sender_role or getattr(dropin.parent, conn.role) != conn.user:
            reason = "wrong_sender"
        if reason is not None:
            self.counters[f"{kind}_dropped"] += 1
            self._event("drop", now, type=kind, reason=reason, dropin_id=dropin_id)
            return None
        return dropin

    def _on_dropin_request(self, conn: Connection, msg: protocol.DropInRequest, now: int) -> None:
        if not self._require_role(conn, FRIEND, msg, now):
            return
        sess = self.sessions.get(msg.session_id)
        if sess is None:
            self._deny(conn, "unknown_session", now)
            return
        if conn.user != sess.friend:
            self._deny(conn, "not_invited", now)
            return
        try:
            dropin = session_mod.drop_in(sess, now, dropin_id=f"d{self._next_dropin}")
        except ArcallError as exc:
            self._deny(conn, exc.code, now)
            return
        self._next_dropin += 1
        self.dropins[dropin.id] = dropin
        self.muted[dropin.id] = False
        self.counters["dropins_granted"] += 1
        self._event("dropin_start", now, dropin_id=dropin.id, session_id=sess.id,
                    ends_at=dropin.ends_at)
        grant = protocol.DropInGrant(
            dropin_id=dropin.id, ends_at=dropin.ends_at,
            presence_indicator=sess.config.presence_indicator,
        )
        self._send(sess.friend, FRIEND, grant, now)
        if sess.config.presence_indicator:
            # the wearer-side presence indicator is their copy of the grant
            self._send(sess.wearer, WEARER, grant, now)
        self._sync_timer(dropin, now)

    def _deny(self, conn: Connection, reason: str, now: int) -> None:
        self.counters["dropins_denied"] += 1
        self._send(conn.user, FRIEND, protocol.DropInDeny(reason=reason), now)

    def _on_frame(self, conn: Connection, msg: protocol.FrameChunk, now: int) -> None:
        dropin = self._active_dropin_for_media(conn, msg.dropin_id, WEARER, "frame", now)
        if dropin is None:
            return
        sess = dropin.parent
        try:
            frame = media.Frame(msg.width, msg.height, msg.payload, msg.captured_at)
            blurred = media.blur_frame(frame, sess.config.blur_level)
        except (ArcallError, ValueError):
            self.counters["frame_dropped"] += 1
            self._event("drop", now, type="frame", reason="malformed", dropin_id=msg.dropin_id)
            return
        out = protocol.FrameChunk(
            dropin_id=dropin.id,
            captured_at=msg.captured_at,
            width=blurred.width,
            height=blurred.height,
            blur_applied=sess.config.blur_level,
            payload=blurred.pixels,
        )
        if self._send(sess.friend, FRIEND, out, now):
            self.counters["frames_relayed"] += 1
        if self.echo_frames_to_wearer:
            # the wearer's blur preview is the same server-blurred chunk
            self._send(sess.wearer, WEARER, out, now)

    def _on_audio(self, conn: Connection, msg: protocol.AudioChunk, now: int) -> None:
        dropin = self._active_dropin_for_media(conn, msg.dropin_id, conn.role, "audio", now)
        if dropin is None:
            return
        if conn.role == FRIEND and self.muted.get(dropin.id, False):
            self.counters["audio_dropped"] += 1
            self._event("drop", now, type="audio", reason="muted", dropin_id=dropin.id)
            return
        sess = dropin.parent
        out = protocol.AudioChunk(dropin_id=dropin.id, seq=msg.seq, sender=conn.role, payload=msg.payload)
        peer_user, peer_role = (sess.friend, FRIEND) if conn.role == WEARER else (sess.wearer, WEARER)
        if self._send(peer_user, peer_role, out, now):
            self.counters["audio_relayed"] += 1

    def _on_mute(self, conn: Connection, msg: protocol.MuteToggle, now: int) -> None:
        if not self._require_role(conn, FRIEND, msg, now):
            return
        dropin = self.dropins.get(msg.dropin_id)
        if dropin is None or dropin.parent.friend != conn.user:
            self._reply_error(conn, UnknownSubject(f"unknown drop-in {msg.dropin_id!r}"), now=now)
            return
        if dropin.state is not DropInState.ACTIVE:
            self._reply_error(conn, session_mod.NotActive("drop-in already over"), now=now)
            return
        self.muted[dropin.id] = msg.muted
        self._event("mute", now, dropin_id=dropin.id, muted=msg.muted)
        self._send(conn.user, FRIEND, msg, now)

    def _resolve_control_dropin(self, conn: Connection, dropin_id: str, now: int):
        dropin = self.dropins.get(dropin_id)
        if dropin is None or getattr(dropin.parent, conn.role, None) != conn.user:
            self._reply_error(conn, UnknownSubject(f"unknown drop-in {dropin_id!r}"), now=now)
            return None
        return dropin

    def _on_project(self, conn: Connection, msg: protocol.Project, now: int) -> None:
        if not self._require_role(conn, FRIEND, msg, now):
            return
        dropin = self._resolve_control_dropin(conn, msg.dropin_id, now)
        if dropin is None:
            return
        sess = dropin.parent
        try:
            catalog_mod.project(
                self.projections[sess.id], self.catalog, msg.content_id, now,
                dropin_active=dropin.state is DropInState.ACTIVE,
            )
        except ArcallError as exc:
            self._reply_error(conn, exc, now=now)
            return
        self.counters["contents_projected"] += 1
        self._event("project", now, dropin_id=dropin.id, session_id=sess.id, content_id=msg.content_id)
        # both views must agree, so the wearer gets the projection and the
        # friend gets the authoritative echo
        self._send(sess.wearer, WEARER, msg, now)
        self._send(sess.friend, FRIEND, msg, now)

    def _on_reposition(self, conn: Connection, msg: protocol.Reposition, now: int) -> None:
        if conn.role == WEARER and not self.allow_wearer_reposition:
            self._reply_error(conn, WrongRole("wearer repositioning is disabled"), now=now)
            return
        dropin = self._resolve_control_dropin(conn, msg.dropin_id, now)
        if dropin is None:
            return
        if dropin.state is not DropInState.ACTIVE:
            self._reply_error(conn, catalog_mod.NoActiveDropIn("drop-in already over"), now=now)
            return
        sess = dropin.parent
        state = self.projections[sess.id]
        try:
            catalog_mod.reposition(state, (msg.anchor_x, msg.anchor_y))
        except ArcallError as exc:
            self._reply_error(conn, exc, now=now)
            return
        clamped = protocol.Reposition(
            dropin_id=dropin.id, anchor_x=state.active.anchor[0], anchor_y=state.active.anchor[1]
        )
        self._event("reposition", now, dropin_id=dropin.id, anchor=list(state.active.anchor))
        self._send(sess.wearer, WEARER, clamped, now)
        self._send(sess.friend, FRIEND, clamped, now)

    def _on_extend_tap(self, conn: Connection, msg: protocol.ExtendTap, now: int) -> None:
        if not self._require_role(conn, WEARER, msg, now):
            return
        dropin = self._resolve_control_dropin(conn, msg.dropin_id, now)
        if dropin is None:
            return
        try:
            session_mod.extend_drop_in(dropin, now, strict_parent_expiry=self.strict_extend)
        except ArcallError as exc:
            self._reply_error(conn, exc, now=now)
            return
        self.counters["extensions"] += 1
        self._event("extend", now, dropin_id=dropin.id, ends_at=dropin.ends_at)
        self._sync_timer(dropin, now)

    def _on_dropin_end(self, conn: Connection, msg: protocol.DropInEnd, now: int) -> None:
        dropin = self._resolve_control_dropin(conn, msg.dropin_id, now)
        if dropin is None:
            return
        if dropin.state is not DropInState.ACTIVE:
            self._reply_error(conn, session_mod.NotActive("drop-in already over"), now=now)
            return
        self._finish_dropin(dropin, f"ended_by_{conn.role}", now)

    def _on_session_end(self, conn: Connection, msg: protocol.SessionEnd, now: int) -> None:
        if not self._require_role(conn, WEARER, msg, now):
            return
        sess = self.sessions.get(msg.session_id)
        if sess is None or sess.wearer != conn.user:
            self._reply_error(conn, UnknownSubject(f"unknown session {msg.session_id!r}"), now=now)
            return
        try:
            self.end_session(sess.id, now, cause="ended")
        except ArcallError as exc:
            self._reply_error(conn, exc, now=now)

    _HANDLERS = {
        protocol.DropInRequest: _on_dropin_request,
        protocol.FrameChunk: _on_frame,
        protocol.AudioChunk: _on_audio,
        protocol.MuteToggle: _on_mute,
        protocol.Project: _on_project,
        protocol.Reposition: _on_reposition,
        protocol.ExtendTap: _on_extend_tap,
        protocol.DropInEnd: _on_dropin_end,
        protocol.SessionEnd: _on_session_end,
    }
