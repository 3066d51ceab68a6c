import random
import statistics
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arcall import catalog as c
from arcall import media as m
from oracles import brute_blur, monte_carlo_mismatch, sliding_blur

DATA = Path(__file__).parent / "data"

# brute-force oracle output for a 4x4 gradient (pixel = 16 * index) at level 5,
# frozen before the production blur was written
GRADIENT4_LEVEL5 = [27, 37, 53, 64, 69, 80, 96, 107, 133, 144, 160, 171, 176, 187, 203, 213]


def frame_of(values, width, height, captured_at=0):
    return m.Frame(width, height, bytes(values), captured_at)


def random_frame(rng, max_side=32):
    w = rng.randint(1, max_side)
    h = rng.randint(1, max_side)
    return frame_of([rng.randint(0, 255) for _ in range(w * h)], w, h)


# --- blur -------------------------------------------------------------------

def test_level_zero_is_bit_identical():
    rng = random.Random(0)
    frame = random_frame(rng)
    out = m.blur_frame(frame, 0)
    assert out.pixels == frame.pixels
    assert out.captured_at == frame.captured_at


def test_constant_frame_stays_constant():
    frame = frame_of([77] * 25, 5, 5)
    for level in range(11):
        assert m.blur_frame(frame, level).pixels == frame.pixels


def test_gradient_golden_values():
    frame = frame_of([16 * i for i in range(16)], 4, 4)
    assert list(m.blur_frame(frame, 5).pixels) == GRADIENT4_LEVEL5


def test_gradient_golden_pgm_file():
    golden = m.read_pgm((DATA / "gradient4_blur5.pgm").read_bytes())
    frame = frame_of([16 * i for i in range(16)], 4, 4)
    assert m.write_pgm(m.blur_frame(frame, 5)) == m.write_pgm(golden)


def test_blur_matches_both_oracles_on_small_frames():
    rng = random.Random(42)
    for _ in range(25):
        frame = random_frame(rng, max_side=8)
        pixels = list(frame.pixels)
        for level in (0, 1, 5, 10):
            got = list(m.blur_frame(frame, level).pixels)
            assert got == brute_blur(pixels, frame.width, frame.height, level)
            assert got == sliding_blur(pixels, frame.width, frame.height, level)


def test_blur_rejects_bad_level():
    frame = frame_of([0], 1, 1)
    with pytest.raises(ValueError):
        m.blur_frame(frame, 11)
    with pytest.raises(ValueError):
        m.blur_frame(frame, -1)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 12), st.integers(1, 12), st.integers(0, 10),
    st.randoms(use_true_random=False),
)
def test_blur_variance_never_increases(w, h, level, rng):
    pixels = [rng.randint(0, 255) for _ in range(w * h)]
    out = m.blur_frame(frame_of(pixels, w, h), level)
    if w * h > 1:
        assert statistics.pvariance(out.pixels) <= statistics.pvariance(pixels) + 1e-9


def test_frame_validation():
    with pytest.raises(m.FrameError):
        m.Frame(2, 2, b"\x00" * 3)
    with pytest.raises(m.FrameError):
        m.Frame(0, 2, b"")
    with pytest.raises(m.FrameError):
        m.Frame(4097, 1, bytes(4097))


# --- glasses viewport ----------------------------------------------------------

def test_viewport_full_fraction_covers_frame():
    assert m.glasses_viewport(m.FovModel(1.0), 640, 480) == (0, 0, 640, 480)


def test_viewport_half_fraction_centered():
    assert m.glasses_viewport(m.FovModel(0.5), 100, 100) == (25, 25, 50, 50)


def test_viewport_rounding_small_frame():
    # 0.5 * 3 = 1.5 rounds half-up to 2; origin (3 - 2) / 2 = 0.5 rounds to 1
    assert m.glasses_viewport(m.FovModel(0.5), 3, 3) == (1, 1, 2, 2)


def test_viewport_clamps_to_one_pixel():
    vp = m.glasses_viewport(m.FovModel(0.1), 3, 3)
    assert vp.width == 1 and vp.height == 1


def test_fov_model_validation():
    with pytest.raises(Exception):
        m.FovModel(0.0)
    with pytest.raises(Exception):
        m.FovModel(1.5)


# --- view mismatch ---------------------------------------------------------------

def particle():
    return c.catalog_by_id()["snow"]


def obj(w=0.2, h=0.2):
    return c.ArContent("thing", "Thing", c.ContentKind.OBJECT, footprint=(w, h))


@pytest.mark.parametrize("f", [0.1, 0.25, 0.4, 0.5, 0.75, 1.0])
def test_particle_mismatch_is_one_minus_f_squared(f):
    got = m.view_mismatch(particle(), (0.5, 0.5), m.FovModel(f))
    assert got == pytest.approx(1.0 - f * f, abs=1e-12)


def test_centered_object_inside_viewport_has_zero_mismatch():
    assert m.view_mismatch(obj(0.15, 0.15), (0.5, 0.5), m.FovModel(0.5)) == 0.0


def test_mismatch_zero_at_full_fraction_everywhere():
    rng = random.Random(3)
    fov = m.FovModel(1.0)
    for _ in range(50):
        content = obj(rng.uniform(0.02, 0.45), rng.uniform(0.02, 0.45))
        anchor = (rng.uniform(-1, 2), rng.uniform(-1, 2))
        assert m.view_mismatch(content, anchor, fov) == pytest.approx(0.0, abs=1e-12)


def test_mismatch_against_monte_carlo_oracle():
    got = m.view_mismatch(obj(0.3, 0.3), (0.9, 0.5), m.FovModel(0.5))
    oracle = monte_carlo_mismatch((0.9, 0.5), (0.3, 0.3), 0.5)
    assert got == pytest.approx(oracle, abs=1e-3)
    # the clamped rectangle works out to (0.36 - 0.35 * 0.5) / 0.36
    assert got == pytest.approx(0.5138888888888888, abs=1e-12)


def test_mismatch_monotone_in_fraction():
    rng = random.Random(9)
    for _ in range(30):
        content = obj(rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45))
        anchor = (rng.uniform(0, 1), rng.uniform(0, 1))
        values = [
            m.view_mismatch(content, anchor, m.FovModel(f / 20))
            for f in range(1, 21)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


# --- overlay composition ------------------------------------------------------

def test_compose_without_content_copies_frame():
    rng = random.Random(1)
    frame = random_frame(rng, 16)
    out = m.compose_overlay(frame, c.ProjectionState(), m.FovModel(0.5))
    assert out.pixels == frame.pixels


def test_compose_particle_full_fraction_fills_frame():
    by_id = c.catalog_by_id()
    state = c.ProjectionState()
    c.project(state, by_id, "snow", 0)
    frame = frame_of([0] * 64, 8, 8)
    out = m.compose_overlay(frame, state, m.FovModel(1.0))
    assert out.pixels == bytes([255] * 64)


def test_compose_object_confined_to_viewport():
    by_id = c.catalog_by_id()
    state = c.ProjectionState()
    c.project(state, by_id, "snow", 0)   # particle covers everything the glasses show
    frame = frame_of([0] * 100 * 100, 100, 100)
    out = m.compose_overlay(frame, state, m.FovModel(0.5))
    img = [list(out.pixels[y * 100 : (y + 1) * 100]) for y in range(100)]
    for y in range(100):
        for x in range(100):
            inside = 25 <= x < 75 and 25 <= y < 75
            assert img[y][x] == (255 if inside else 0)


def test_compose_never_writes_outside_viewport():
    by_id = c.catalog_by_id()
    rng = random.Random(7)
    for _ in range(20):
        frame = random_frame(rng, 24)
        state = c.ProjectionState()
        c.project(state, by_id, rng.choice(sorted(by_id)), 0)
        if state.active.kind is c.ContentKind.OBJECT:
            c.reposition(state, (rng.random(), rng.random()))
        fov = m.FovModel(rng.choice([0.25, 0.4, 0.6, 1.0]))
        vp = m.glasses_viewport(fov, frame.width, frame.height)
        out = m.compose_overlay(frame, state, fov)
        for y in range(frame.height):
            for x in range(frame.width):
                i = y * frame.width + x
                inside = vp.x <= x < vp.x + vp.width and vp.y <= y < vp.y + vp.height
                if not inside:
                    assert out.pixels[i] == frame.pixels[i]


# --- PGM ------------------------------------------------------------------------

def test_pgm_roundtrip():
    rng = random.Random(5)
    frame = random_frame(rng, 16)
    again = m.read_pgm(m.write_pgm(frame))
    assert (again.width, again.height, again.pixels) == (frame.width, frame.height, frame.pixels)


def test_pgm_rejects_other_formats():
    with pytest.raises(m.FrameError):
        m.read_pgm(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(m.FrameError):
        m.read_pgm(b"P5\n2 2\n65535\n" + bytes(8))
