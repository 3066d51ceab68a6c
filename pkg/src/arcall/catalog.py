"""AR content registry and the wearer-side projection state.

Content lives in normalized display coordinates: anchors are points in the
unit square, footprints are half-extents around the anchor. Object items
are head-locked models that default to the display center and can be moved;
particle items fill the whole display and cannot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Union

from .errors import ArcallError

PARTICLE_EXTENTS = (0.5, 0.5)


class ContentKind(Enum):
    OBJECT = "object"
    PARTICLE = "particle"


class CatalogError(ArcallError):
    code = "invalid_catalog"


class UnknownContent(ArcallError):
    code = "unknown_content"


class NoActiveDropIn(ArcallError):
    code = "no_active_dropin"


class NoActiveContent(ArcallError):
    code = "no_active_content"


class NotMovable(ArcallError):
    code = "not_movable"


@dataclass(frozen=True)
class ArContent:
    id: str
    name: str
    kind: ContentKind
    default_anchor: tuple[float, float] = (0.5, 0.5)
    footprint: tuple[float, float] = (0.2, 0.2)

    def __post_init__(self):
        w, h = self.footprint
        if self.kind is ContentKind.PARTICLE:
            if (w, h) != PARTICLE_EXTENTS:
                raise CatalogError(f"particle {self.id!r} must fill the display")
        else:
            if not (0 < w < 0.5 and 0 < h < 0.5):
                raise CatalogError(f"object {self.id!r} footprint must sit strictly inside the display")
        ax, ay = self.default_anchor
        if not (w <= ax <= 1 - w and h <= ay <= 1 - h):
            raise CatalogError(f"content {self.id!r} default anchor leaves the display")


_BUILTIN = (
    ("bird", "Bird"),
    ("dragon", "Dragon"),
    ("holiday_ornaments", "Holiday ornaments"),
    ("holiday_gifts", "Holiday gifts"),
    ("snow", "Snow"),
    ("star_of_david", "Star of David"),
    ("whale", "Whale"),
    ("mistletoe_sprig", "Mistletoe sprig"),
    ("unicorn", "Unicorn"),
    ("reindeer", "Reindeer"),
    ("santa_sleigh", "Santa on a sleigh"),
)


def builtin_catalog() -> list[ArContent]:
    """The fixed built-in set: snow is the particle effect, the rest are
    head-locked objects anchored at display center."""
    items = []
    for content_id, name in _BUILTIN:
        if content_id == "snow":
            items.append(ArContent(content_id, name, ContentKind.PARTICLE, (0.5, 0.5), PARTICLE_EXTENTS))
        else:
            items.append(ArContent(content_id, name, ContentKind.OBJECT))
    return items


def catalog_by_id(items=None) -> dict[str, ArContent]:
    return {c.id: c for c in (builtin_catalog() if items is None else items)}


def load_catalog(path: Union[str, Path]) -> list[ArContent]:
    """Load a deployment catalog from JSON: a list of
    ``{id, name, kind, anchor: [x, y], footprint: [w, h]}`` entries."""
    try:
        entries = json.loads(Path(path).read_text("utf-8"))
    except (OSError, ValueError) as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise CatalogError(f"catalog {path} must be a JSON list")
    items = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, Mapping):
            raise CatalogError(f"catalog {path}: entries must be objects")
        try:
            kind = ContentKind(entry["kind"])
            content = ArContent(
                id=str(entry["id"]),
                name=str(entry.get("name", entry["id"])),
                kind=kind,
                default_anchor=tuple(float(v) for v in entry.get("anchor", (0.5, 0.5))),
                footprint=tuple(
                    float(v)
                    for v in entry.get("footprint", PARTICLE_EXTENTS if kind is ContentKind.PARTICLE else (0.2, 0.2))
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"catalog {path}: bad entry {entry!r}: {exc}") from exc
        if content.id in seen:
            raise CatalogError(f"catalog {path}: duplicate id {content.id!r}")
        seen.add(content.id)
        items.append(content)
    return items


@dataclass
class ActiveProjection:
    content_id: str
    anchor: tuple[float, float]
    since: int
    kind: ContentKind
    footprint: tuple[float, float]


@dataclass
class ProjectionState:
    """At most one piece of content is shown at a time; history is the
    append-only record of every successful projection."""

    active: Optional[ActiveProjection] = None
    history: list[tuple[str, int]] = field(default_factory=list)


def clamp_anchor(anchor: tuple[float, float], footprint: tuple[float, float]) -> tuple[float, float]:
    w, h = footprint
    return (min(max(anchor[0], w), 1.0 - w), min(max(anchor[1], h), 1.0 - h))


def project(
    state: ProjectionState,
    catalog: Mapping[str, ArContent],
    content_id: str,
    now: int,
    *,
    dropin_active: bool = True,
) -> ProjectionState:
    """Replace whatever is shown with ``content_id`` at its default anchor.

    Repeat projections always succeed; each lands in the history.
    """
    if not dropin_active:
        raise NoActiveDropIn("content can only be projected during a drop-in")
    content = catalog.get(content_id)
    if content is None:
        raise UnknownContent(f"unknown content {content_id!r}")
    state.active = ActiveProjection(
        content_id=content.id,
        anchor=content.default_anchor,
        since=now,
        kind=content.kind,
        footprint=content.footprint,
    )
    state.history.append((content.id, now))
    return state


def reposition(state: ProjectionState, anchor: tuple[float, float]) -> ProjectionState:
    """Move the active object; the anchor clamps so the footprint stays on
    the display. Particles fill the display and cannot move."""
    if state.active is None:
        raise NoActiveContent("nothing is projected")
    if state.active.kind is ContentKind.PARTICLE:
        raise NotMovable(f"{state.active.content_id!r} fills the display and cannot move")
    state.active.anchor = clamp_anchor(anchor, state.active.footprint)
    return state


def clear_on_dropin_end(state: ProjectionState) -> ProjectionState:
    state.active = None
    return state
