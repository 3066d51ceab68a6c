"""Privacy blur, glasses field-of-view model, and overlay composition.

Frames are 8-bit grayscale, row-major. The blur ladder maps the wearer's
0..10 privacy setting onto a box-blur radius ``ceil(level * min(w, h) / 20)``
so that level 10 averages over half the short side; windows sample with
clamp-to-edge addressing and the integer mean rounds half up. Level 0 is a
bit-exact identity.

The glasses can only show a centered fraction of the phone view; the
mismatch metric reports how much of a projected footprint the friend sees
that the wearer cannot.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .catalog import ArContent, ProjectionState, clamp_anchor
from .errors import ArcallError

MAX_DIM = 4096
DEFAULT_GLASSES_FRACTION = 0.4


class FrameError(ArcallError):
    code = "invalid_frame"


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    pixels: bytes
    captured_at: int = 0

    def __post_init__(self):
        if not (1 <= self.width <= MAX_DIM and 1 <= self.height <= MAX_DIM):
            raise FrameError(f"frame dimensions {self.width}x{self.height} out of range")
        if len(self.pixels) != self.width * self.height:
            raise FrameError(
                f"frame has {len(self.pixels)} pixels, expected {self.width * self.height}"
            )


@dataclass(frozen=True)
class FovModel:
    glasses_fraction: float = DEFAULT_GLASSES_FRACTION

    def __post_init__(self):
        if not 0.0 < self.glasses_fraction <= 1.0:
            raise ArcallError(f"glasses fraction must be in (0, 1], got {self.glasses_fraction}")


class Viewport(NamedTuple):
    x: int
    y: int
    width: int
    height: int


def blur_radius(level: int, width: int, height: int) -> int:
    return math.ceil(level * min(width, height) / 20)


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def blur_frame(frame: Frame, level: int) -> Frame:
    """Single-pass box blur at the given privacy level (0 = identity)."""
    if not 0 <= level <= 10:
        raise ValueError(f"blur level must be 0..10, got {level}")
    if level == 0:
        return Frame(frame.width, frame.height, frame.pixels, frame.captured_at)
    r = blur_radius(level, frame.width, frame.height)
    n = (2 * r + 1) ** 2
    img = np.frombuffer(frame.pixels, dtype=np.uint8).reshape(frame.height, frame.width)
    padded = np.pad(img, r, mode="edge").astype(np.int64)
    # Integral image with a zero border; window sums come out exact in int64.
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    k = 2 * r + 1
    h, w = frame.height, frame.width
    sums = (
        integral[k : k + h, k : k + w]
        - integral[0:h, k : k + w]
        - integral[k : k + h, 0:w]
        + integral[0:h, 0:w]
    )
    out = (2 * sums + n) // (2 * n)
    return Frame(frame.width, frame.height, out.astype(np.uint8).tobytes(), frame.captured_at)


def glasses_viewport(fov: FovModel, width: int, height: int) -> Viewport:
    """Centered sub-rectangle of a width x height frame visible on glasses.

    Sizes round half up and clamp to at least one pixel per axis.
    """
    f = fov.glasses_fraction
    vw = max(1, _round_half_up(f * width))
    vh = max(1, _round_half_up(f * height))
    return Viewport(_round_half_up((width - vw) / 2), _round_half_up((height - vh) / 2), vw, vh)


def view_mismatch(content: ArContent, anchor: tuple[float, float], fov: FovModel) -> float:
    """Fraction of the content footprint the friend's phone view shows but
    the glasses viewport cuts off. 0 when everything fits."""
    w, h = content.footprint
    ax, ay = clamp_anchor(anchor, content.footprint)
    f = fov.glasses_fraction
    lo, hi = 0.5 - f / 2.0, 0.5 + f / 2.0
    ix = max(0.0, min(ax + w, hi) - max(ax - w, lo))
    iy = max(0.0, min(ay + h, hi) - max(ay - h, lo))
    area = 4.0 * w * h
    return min(1.0, max(0.0, 1.0 - (ix * iy) / area))


def _pixel_span(lo: float, hi: float, size: int) -> tuple[int, int]:
    return _round_half_up(lo * size), _round_half_up(hi * size)


def compose_overlay(frame: Frame, projection: ProjectionState, fov: FovModel) -> Frame:
    """Paint the active footprint (filled white) clipped to the glasses
    viewport onto a copy of the frame."""
    img = np.frombuffer(frame.pixels, dtype=np.uint8).reshape(frame.height, frame.width).copy()
    active = projection.active
    if active is not None:
        vp = glasses_viewport(fov, frame.width, frame.height)
        w, h = active.footprint
        ax, ay = clamp_anchor(active.anchor, active.footprint)
        x0, x1 = _pixel_span(ax - w, ax + w, frame.width)
        y0, y1 = _pixel_span(ay - h, ay + h, frame.height)
        x0, x1 = max(x0, vp.x), min(x1, vp.x + vp.width)
        y0, y1 = max(y0, vp.y), min(y1, vp.y + vp.height)
        if x0 < x1 and y0 < y1:
            img[y0:y1, x0:x1] = 255
    return Frame(frame.width, frame.height, img.tobytes(), frame.captured_at)


# --- PGM (P5) serialization, bit-exact for golden files ----------------------

def write_pgm(frame: Frame) -> bytes:
    return b"P5\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels


def read_pgm(data: bytes, captured_at: int = 0) -> Frame:
    match = re.match(rb"P5\s+(?:#[^\n]*\n\s*)?(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not match:
        raise FrameError("not a binary PGM")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise FrameError(f"unsupported PGM maxval {maxval}")
    pixels = data[match.end() : match.end() + width * height]
    return Frame(width, height, pixels, captured_at)
