import random
import string

import pytest

from arcall import protocol as p


def envelope(msg_type: int, payload: bytes) -> bytes:
    # hand-assembled framing, independent of encode()
    return bytes([0xA2, 0x01, msg_type]) + len(payload).to_bytes(4, "big") + payload


# one golden message per wire type; JSON spelled out by hand with sorted keys
GOLDEN = [
    (
        p.InviteNotify(session_id="s1", wearer="alice", expires_at=3600000),
        envelope(0x01, b'{"expires_at":3600000,"session_id":"s1","wearer":"alice"}'),
    ),
    (
        p.DropInRequest(session_id="s1"),
        envelope(0x02, b'{"session_id":"s1"}'),
    ),
    (
        p.DropInGrant(dropin_id="d1", ends_at=160000, presence_indicator=True),
        envelope(0x03, b'{"dropin_id":"d1","ends_at":160000,"presence_indicator":true}'),
    ),
    (
        p.DropInDeny(reason="session_expired"),
        envelope(0x04, b'{"reason":"session_expired"}'),
    ),
    (
        p.FrameChunk(dropin_id="d1", captured_at=100, width=2, height=2,
                     blur_applied=0, payload=bytes([0, 64, 128, 255])),
        envelope(0x05, b'{"blur_applied":0,"captured_at":100,"dropin_id":"d1","height":2,"width":2}'
                 + bytes([0, 64, 128, 255])),
    ),
    (
        p.AudioChunk(dropin_id="d1", seq=7, sender="friend", payload=b"\x01\x02\x03"),
        envelope(0x06, b'{"dropin_id":"d1","sender":"friend","seq":7}' + b"\x01\x02\x03"),
    ),
    (
        p.MuteToggle(dropin_id="d1", muted=True),
        envelope(0x07, b'{"dropin_id":"d1","muted":true}'),
    ),
    (
        p.Project(dropin_id="d1", content_id="dragon"),
        envelope(0x08, b'{"content_id":"dragon","dropin_id":"d1"}'),
    ),
    (
        p.Reposition(dropin_id="d1", anchor_x=0.25, anchor_y=0.75),
        envelope(0x09, b'{"anchor_x":0.25,"anchor_y":0.75,"dropin_id":"d1"}'),
    ),
    (
        p.ExtendTap(dropin_id="d1"),
        envelope(0x0A, b'{"dropin_id":"d1"}'),
    ),
    (
        p.TimerSync(dropin_id="d1", remaining_ms=40000),
        envelope(0x0B, b'{"dropin_id":"d1","remaining_ms":40000}'),
    ),
    (
        p.DropInEnd(dropin_id="d1", cause="expired"),
        envelope(0x0C, b'{"cause":"expired","dropin_id":"d1"}'),
    ),
    (
        p.SessionEnd(session_id="s1", cause="ended"),
        envelope(0x0D, b'{"cause":"ended","session_id":"s1"}'),
    ),
    (
        p.Error(code="wrong_role", detail="nope"),
        envelope(0x0E, b'{"code":"wrong_role","detail":"nope"}'),
    ),
]


def test_golden_covers_every_type():
    assert [type(msg) for msg, _ in GOLDEN] == list(p.MESSAGE_TYPES)


@pytest.mark.parametrize("msg,expected", GOLDEN, ids=lambda v: type(v).__name__ if not isinstance(v, bytes) else "")
def test_golden_bytes(msg, expected):
    assert p.encode(msg) == expected


@pytest.mark.parametrize("msg,expected", GOLDEN, ids=lambda v: type(v).__name__ if not isinstance(v, bytes) else "")
def test_golden_roundtrip(msg, expected):
    decoded, used = p.decode(expected)
    assert decoded == msg
    assert used == len(expected)


def test_spec_pinned_extend_tap_bytes():
    assert p.encode(p.ExtendTap(dropin_id="d1")) == (
        b"\xa2\x01\x0a\x00\x00\x00\x12" + b'{"dropin_id":"d1"}'
    )


def test_encode_deterministic():
    a = p.encode(p.InviteNotify(session_id="s9", wearer="w", expires_at=5))
    b = p.encode(p.InviteNotify(session_id="s9", wearer="w", expires_at=5))
    assert a == b


# --- random message generator shared with the acceptance suite ----------------

def random_text(rng, allow_unicode=True):
    alphabet = string.ascii_letters + string.digits + "_-:."
    text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
    if allow_unicode and rng.random() < 0.25:
        text += rng.choice(["é", "☃", "你好", '"{}"', "\\"])
    return text


def random_message(rng: random.Random) -> p.Message:
    cls = rng.choice(p.MESSAGE_TYPES)
    if cls is p.InviteNotify:
        return cls(random_text(rng), random_text(rng), rng.randrange(2**40))
    if cls is p.DropInRequest:
        return cls(random_text(rng))
    if cls is p.DropInGrant:
        return cls(random_text(rng), rng.randrange(2**40), rng.random() < 0.5)
    if cls is p.DropInDeny:
        return cls(random_text(rng))
    if cls is p.FrameChunk:
        w, h = rng.randint(1, 24), rng.randint(1, 24)
        return cls(random_text(rng), rng.randrange(2**40), w, h, rng.randint(0, 10),
                   bytes(rng.getrandbits(8) for _ in range(w * h)))
    if cls is p.AudioChunk:
        return cls(random_text(rng), rng.randrange(2**31), random_text(rng),
                   bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 64))))
    if cls is p.MuteToggle:
        return cls(random_text(rng), rng.random() < 0.5)
    if cls is p.Project:
        return cls(random_text(rng), random_text(rng))
    if cls is p.Reposition:
        return cls(random_text(rng), rng.random(), rng.random())
    if cls is p.ExtendTap:
        return cls(random_text(rng))
    if cls is p.TimerSync:
        return cls(random_text(rng), rng.randrange(2**31))
    if cls is p.DropInEnd:
        return cls(random_text(rng), random_text(rng))
    if cls is p.SessionEnd:
        return cls(random_text(rng), random_text(rng))
    return p.Error(random_text(rng), random_text(rng))


def test_random_roundtrip_sample():
    rng = random.Random(2024)
    for _ in range(500):
        msg = random_message(rng)
        decoded, used = p.decode(p.encode(msg))
        assert decoded == msg
        assert used == len(p.encode(msg))


def test_decode_tolerates_trailing_data():
    blob = p.encode(p.ExtendTap(dropin_id="d1")) + b"GARBAGE"
    msg, used = p.decode(blob)
    assert msg == p.ExtendTap(dropin_id="d1")
    assert blob[used:] == b"GARBAGE"


# --- framing errors ---------------------------------------------------------

def test_truncated_payload():
    blob = envelope(0x0A, b'{"dropin_id":"d1"}')
    with pytest.raises(p.Truncated):
        p.decode(blob[: 7 + 10])  # length says 18, only 10 available


def test_truncated_header():
    with pytest.raises(p.Truncated):
        p.decode(b"\xa2\x01\x0a")
    with pytest.raises(p.Truncated):
        p.decode(b"")


def test_bad_magic():
    with pytest.raises(p.BadMagic):
        p.decode(b"\xff" + b"\x01\x0a\x00\x00\x00\x00")


def test_bad_version():
    with pytest.raises(p.BadVersion):
        p.decode(b"\xa2\x02\x0a\x00\x00\x00\x00")


def test_unknown_type():
    with pytest.raises(p.UnknownType):
        p.decode(b"\xa2\x01\x0f\x00\x00\x00\x00")
    with pytest.raises(p.UnknownType):
        p.decode(b"\xa2\x01\x00\x00\x00\x00\x00")


def test_length_mismatch_on_frame_dims():
    payload = b'{"blur_applied":0,"captured_at":1,"dropin_id":"d1","height":3,"width":3}' + b"\x00" * 4
    with pytest.raises(p.LengthMismatch):
        p.decode(envelope(0x05, payload))


def test_oversized_length_rejected():
    blob = bytes([0xA2, 0x01, 0x0A]) + (p.MAX_PAYLOAD + 1).to_bytes(4, "big")
    with pytest.raises(p.LengthMismatch):
        p.decode(blob)


@pytest.mark.parametrize(
    "payload",
    [
        b"not json at all",
        b'{"dropin_id": 5}',
        b'{"dropin_id":"d1","extra":1}',
        b"{}",
        b'{"dropin_id":""}',
        b'["dropin_id"]',
        b"",
    ],
)
def test_malformed_payloads(payload):
    with pytest.raises(p.MalformedPayload):
        p.decode(envelope(0x0A, payload))


# --- stream reassembly ---------------------------------------------------------

def test_stream_chunk_boundary_invariance():
    rng = random.Random(7)
    messages = [random_message(rng) for _ in range(40)]
    blob = b"".join(p.encode(m) for m in messages)
    for trial in range(25):
        rng2 = random.Random(trial)
        decoder = p.StreamDecoder()
        out = []
        i = 0
        while i < len(blob):
            step = rng2.randint(1, 37)
            out.extend(decoder.feed(blob[i : i + step]))
            i += step
        assert out == messages
        assert decoder.pending == 0


def test_stream_decoder_raises_on_poison():
    decoder = p.StreamDecoder()
    assert list(decoder.feed(p.encode(p.ExtendTap(dropin_id="d1")))) == [p.ExtendTap(dropin_id="d1")]
    with pytest.raises(p.BadMagic):
        list(decoder.feed(b"\xff\xff\xff\xff\xff\xff\xff"))


# --- fuzz smoke (the big run lives in the acceptance suite) ---------------------

def test_fuzz_never_crashes_smoke():
    rng = random.Random(1)
    for _ in range(2000):
        style = rng.random()
        if style < 0.4:
            blob = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 64)))
        else:
            blob = bytearray(p.encode(random_message(rng)))
            for _ in range(rng.randint(1, 6)):
                if blob:
                    blob[rng.randrange(len(blob))] = rng.getrandbits(8)
            blob = bytes(blob[: rng.randint(0, len(blob))]) if style < 0.7 else bytes(blob)
        try:
            p.decode(blob)
        except p.DecodeError:
            pass
