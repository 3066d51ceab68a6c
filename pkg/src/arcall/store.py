"""Friendship database, per-wearer preferences, and their file stores.

Each store is one JSON document written with atomic replace (temp file +
``os.replace``), so a crash mid-write leaves the previous version intact.
A file that exists but cannot be parsed or fails a schema check refuses to
load with CorruptStore naming the offending file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

from .errors import ArcallError
from .session import SessionConfig, validate_config

FRIENDSHIPS_FILE = "friendships.json"
PREFERENCES_FILE = "preferences.json"
TOKENS_FILE = "tokens.json"


class CorruptStore(ArcallError):
    code = "corrupt_store"

    def __init__(self, path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


class NotFriends(ArcallError):
    code = "not_friends"


class FriendshipDb:
    """Symmetric friend relation; no self-friendship."""

    def __init__(self):
        self._friends: dict[str, set[str]] = {}

    def add(self, a: str, b: str) -> None:
        if a == b:
            raise ValueError("users cannot befriend themselves")
        if not a or not b:
            raise ValueError("user ids must be non-empty")
        self._friends.setdefault(a, set()).add(b)
        self._friends.setdefault(b, set()).add(a)

    def remove(self, a: str, b: str) -> None:
        self._friends.get(a, set()).discard(b)
        self._friends.get(b, set()).discard(a)

    def are_friends(self, a: str, b: str) -> bool:
        return b in self._friends.get(a, ())

    def friends_of(self, user: str) -> frozenset[str]:
        return frozenset(self._friends.get(user, ()))

    def to_dict(self) -> dict:
        return {user: sorted(peers) for user, peers in sorted(self._friends.items()) if peers}

    @classmethod
    def from_dict(cls, data: object, source: str = "<memory>") -> "FriendshipDb":
        if not isinstance(data, dict):
            raise CorruptStore(source, "friendship store must be a JSON object")
        db = cls()
        for user, peers in data.items():
            if not isinstance(peers, list) or not all(isinstance(p, str) for p in peers):
                raise CorruptStore(source, f"friend list of {user!r} must be a list of user ids")
            for peer in peers:
                if peer == user:
                    raise CorruptStore(source, f"{user!r} befriends itself")
                db._friends.setdefault(user, set()).add(peer)
        for user, peers in data.items():
            for peer in peers:
                if user not in data.get(peer, []):
                    raise CorruptStore(source, f"friendship {user!r}-{peer!r} is not symmetric")
        return db


class Preferences:
    """Default session config per wearer."""

    def __init__(self):
        self._configs: dict[str, SessionConfig] = {}

    def set(self, wearer: str, config) -> SessionConfig:
        cfg = validate_config(config)
        self._configs[wearer] = cfg
        return cfg

    def get(self, wearer: str) -> Optional[SessionConfig]:
        return self._configs.get(wearer)

    def to_dict(self) -> dict:
        return {
            wearer: {
                "friend": cfg.friend,
                "arcall_duration_s": cfg.arcall_duration_s,
                "dropin_duration_s": cfg.dropin_duration_s,
                "blur_level": cfg.blur_level,
                "presence_indicator": cfg.presence_indicator,
            }
            for wearer, cfg in sorted(self._configs.items())
        }

    @classmethod
    def from_dict(cls, data: object, source: str = "<memory>") -> "Preferences":
        if not isinstance(data, dict):
            raise CorruptStore(source, "preference store must be a JSON object")
        prefs = cls()
        for wearer, raw in data.items():
            try:
                prefs.set(wearer, raw)
            except ArcallError as exc:
                raise CorruptStore(source, f"preferences for {wearer!r}: {exc}") from exc
        return prefs


def _atomic_write_json(path: Path, document: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(document, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _load_json(path: Path) -> object:
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError:
        return None
    try:
        return json.loads(text)
    except ValueError as exc:
        raise CorruptStore(path, f"invalid JSON: {exc}") from exc


class StoreDir:
    """Bundles the relay's durable state under one directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def load_friendships(self) -> FriendshipDb:
        path = self.root / FRIENDSHIPS_FILE
        data = _load_json(path)
        return FriendshipDb() if data is None else FriendshipDb.from_dict(data, str(path))

    def save_friendships(self, db: FriendshipDb) -> None:
        _atomic_write_json(self.root / FRIENDSHIPS_FILE, db.to_dict())

    def load_preferences(self) -> Preferences:
        path = self.root / PREFERENCES_FILE
        data = _load_json(path)
        return Preferences() if data is None else Preferences.from_dict(data, str(path))

    def save_preferences(self, prefs: Preferences) -> None:
        _atomic_write_json(self.root / PREFERENCES_FILE, prefs.to_dict())

    def load_tokens(self) -> Optional[dict[str, str]]:
        """user -> static token map; None means auth is open (dev mode)."""
        path = self.root / TOKENS_FILE
        data = _load_json(path)
        if data is None:
            return None
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise CorruptStore(path, "token store must map user ids to token strings")
        return data
