import { describe, expect, it } from "vitest";

import { DecodeError, Message, canonicalJson, decode, encode } from "../src/protocol.js";

function envelope(typeByte: number, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(7 + payload.length);
  out[0] = 0xa2;
  out[1] = 0x01;
  out[2] = typeByte;
  new DataView(out.buffer).setUint32(3, payload.length, false);
  out.set(payload, 7);
  return out;
}

const text = (s: string) => new TextEncoder().encode(s);

describe("envelope encoding", () => {
  it("produces the pinned ExtendTap bytes", () => {
    const got = encode({ type: "ExtendTap", dropin_id: "d1" });
    const expected = new Uint8Array([
      0xa2, 0x01, 0x0a, 0x00, 0x00, 0x00, 0x12,
      ...text('{"dropin_id":"d1"}'),
    ]);
    expect(got).toEqual(expected);
  });

  it("matches the relay's canonical JSON bytes per type", () => {
    expect(encode({ type: "DropInRequest", session_id: "s1" }))
      .toEqual(envelope(0x02, text('{"session_id":"s1"}')));
    expect(encode({ type: "Project", dropin_id: "d1", content_id: "dragon" }))
      .toEqual(envelope(0x08, text('{"content_id":"dragon","dropin_id":"d1"}')));
    expect(encode({ type: "MuteToggle", dropin_id: "d1", muted: true }))
      .toEqual(envelope(0x07, text('{"dropin_id":"d1","muted":true}')));
    expect(encode({ type: "Reposition", dropin_id: "d1", anchor_x: 0.25, anchor_y: 0.75 }))
      .toEqual(envelope(0x09, text('{"anchor_x":0.25,"anchor_y":0.75,"dropin_id":"d1"}')));
    expect(encode({ type: "SessionEnd", session_id: "s1", cause: "ended" }))
      .toEqual(envelope(0x0d, text('{"cause":"ended","session_id":"s1"}')));
  });

  it("escapes non-ascii like the relay does", () => {
    expect(canonicalJson({ reason: "café" })).toBe('{"reason":"caf\\u00e9"}');
  });

  it("carries raw media bytes after the JSON header", () => {
    const payload = new Uint8Array([0, 64, 128, 255]);
    const got = encode({
      type: "FrameChunk", dropin_id: "d1", captured_at: 100,
      width: 2, height: 2, blur_applied: 0, payload,
    });
    const head = text('{"blur_applied":0,"captured_at":100,"dropin_id":"d1","height":2,"width":2}');
    expect(got).toEqual(envelope(0x05, new Uint8Array([...head, ...payload])));
  });
});

describe("decoding", () => {
  const samples: Message[] = [
    { type: "InviteNotify", session_id: "s1", wearer: "alice", expires_at: 3600000 },
    { type: "DropInGrant", dropin_id: "d1", ends_at: 160000, presence_indicator: true },
    { type: "DropInDeny", reason: "session_expired" },
    { type: "FrameChunk", dropin_id: "d1", captured_at: 1, width: 2, height: 2, blur_applied: 3, payload: new Uint8Array([1, 2, 3, 4]) },
    { type: "AudioChunk", dropin_id: "d1", seq: 7, sender: "friend", payload: new Uint8Array([9, 9]) },
    { type: "TimerSync", dropin_id: "d1", remaining_ms: 40000 },
    { type: "DropInEnd", dropin_id: "d1", cause: "expired" },
    { type: "Error", code: "wrong_role", detail: "nope" },
  ];

  it("round-trips every sampled message", () => {
    for (const msg of samples) {
      const bytes = encode(msg);
      const { message, consumed } = decode(bytes);
      expect(consumed).toBe(bytes.length);
      expect(message).toEqual(msg);
    }
  });

  it("tolerates trailing data and reports consumption", () => {
    const bytes = encode({ type: "ExtendTap", dropin_id: "d1" });
    const padded = new Uint8Array([...bytes, 1, 2, 3]);
    const { consumed } = decode(padded);
    expect(consumed).toBe(bytes.length);
  });

  const expectCode = (bytes: Uint8Array, code: string) => {
    try {
      decode(bytes);
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(DecodeError);
      expect((err as DecodeError).code).toBe(code);
    }
  };

  it("rejects bad framing with structured errors", () => {
    expectCode(new Uint8Array([0xff, 1, 1, 0, 0, 0, 0]), "bad_magic");
    expectCode(new Uint8Array([0xa2, 2, 1, 0, 0, 0, 0]), "bad_version");
    expectCode(new Uint8Array([0xa2, 1, 15, 0, 0, 0, 0]), "unknown_type");
    expectCode(encode({ type: "ExtendTap", dropin_id: "d1" }).subarray(0, 10), "truncated");
    expectCode(envelope(0x0a, text("gibberish")), "malformed_payload");
  });

  it("rejects frame payloads that do not match the declared size", () => {
    const head = text('{"blur_applied":0,"captured_at":1,"dropin_id":"d1","height":3,"width":3}');
    expectCode(envelope(0x05, new Uint8Array([...head, 0, 0])), "length_mismatch");
  });
});
