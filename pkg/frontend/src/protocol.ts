// Wire envelope codec, mirroring the relay's framing byte for byte:
// magic 0xA2, version 0x01, type byte 0x01..0x0E, u32 big-endian payload
// length, then the message fields as canonical JSON (sorted keys, no
// whitespace). FrameChunk and AudioChunk carry raw media bytes right after
// the JSON header, counted in the declared length.

export const MAGIC = 0xa2;
export const VERSION = 0x01;
const HEADER_SIZE = 7;

export interface InviteNotify { type: "InviteNotify"; session_id: string; wearer: string; expires_at: number }
export interface DropInRequest { type: "DropInRequest"; session_id: string }
export interface DropInGrant { type: "DropInGrant"; dropin_id: string; ends_at: number; presence_indicator: boolean }
export interface DropInDeny { type: "DropInDeny"; reason: string }
export interface FrameChunk {
  type: "FrameChunk"; dropin_id: string; captured_at: number;
  width: number; height: number; blur_applied: number; payload: Uint8Array;
}
export interface AudioChunk { type: "AudioChunk"; dropin_id: string; seq: number; sender: string; payload: Uint8Array }
export interface MuteToggle { type: "MuteToggle"; dropin_id: string; muted: boolean }
export interface Project { type: "Project"; dropin_id: string; content_id: string }
export interface Reposition { type: "Reposition"; dropin_id: string; anchor_x: number; anchor_y: number }
export interface ExtendTap { type: "ExtendTap"; dropin_id: string }
export interface TimerSync { type: "TimerSync"; dropin_id: string; remaining_ms: number }
export interface DropInEnd { type: "DropInEnd"; dropin_id: string; cause: string }
export interface SessionEnd { type: "SessionEnd"; session_id: string; cause: string }
export interface WireError { type: "Error"; code: string; detail: string }

export type Message =
  | InviteNotify | DropInRequest | DropInGrant | DropInDeny | FrameChunk
  | AudioChunk | MuteToggle | Project | Reposition | ExtendTap
  | TimerSync | DropInEnd | SessionEnd | WireError;

const TYPE_NAMES = [
  "InviteNotify", "DropInRequest", "DropInGrant", "DropInDeny", "FrameChunk",
  "AudioChunk", "MuteToggle", "Project", "Reposition", "ExtendTap",
  "TimerSync", "DropInEnd", "SessionEnd", "Error",
] as const;

const BINARY_TYPES = new Set(["FrameChunk", "AudioChunk"]);

export class DecodeError extends Error {
  constructor(readonly code: string, detail: string) {
    super(detail);
  }
}

function typeByte(name: Message["type"]): number {
  return TYPE_NAMES.indexOf(name) + 1;
}

// Canonical JSON: sorted keys, compact separators, non-ASCII escaped so the
// bytes match the relay's encoder exactly.
export function canonicalJson(fields: Record<string, unknown>): string {
  const parts = Object.keys(fields)
    .sort()
    .map((key) => `${JSON.stringify(key)}:${JSON.stringify(fields[key])}`);
  return `{${parts.join(",")}}`.replace(
    /[-￿]/g,
    (ch) => "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0"),
  );
}

export function encode(msg: Message): Uint8Array {
  const { type, ...rest } = msg;
  let payloadBytes: Uint8Array | null = null;
  if (BINARY_TYPES.has(type)) {
    payloadBytes = (rest as { payload: Uint8Array }).payload;
    delete (rest as { payload?: Uint8Array }).payload;
  }
  const head = new TextEncoder().encode(canonicalJson(rest as Record<string, unknown>));
  const total = head.length + (payloadBytes?.length ?? 0);
  const out = new Uint8Array(HEADER_SIZE + total);
  const view = new DataView(out.buffer);
  view.setUint8(0, MAGIC);
  view.setUint8(1, VERSION);
  view.setUint8(2, typeByte(type));
  view.setUint32(3, total, false);
  out.set(head, HEADER_SIZE);
  if (payloadBytes) out.set(payloadBytes, HEADER_SIZE + head.length);
  return out;
}

function jsonObjectEnd(bytes: Uint8Array): number {
  let depth = 0;
  let inString = false;
  let escaped = false;
  for (let i = 0; i < bytes.length; i++) {
    const b = bytes[i];
    if (inString) {
      if (escaped) escaped = false;
      else if (b === 0x5c) escaped = true;
      else if (b === 0x22) inString = false;
    } else if (b === 0x22) {
      inString = true;
    } else if (b === 0x7b) {
      depth += 1;
    } else if (b === 0x7d) {
      depth -= 1;
      if (depth === 0) return i + 1;
    } else if (depth === 0) {
      break;
    }
  }
  throw new DecodeError("malformed_payload", "payload does not start with a JSON object");
}

export function decode(buf: Uint8Array): { message: Message; consumed: number } {
  if (buf.length >= 1 && buf[0] !== MAGIC) throw new DecodeError("bad_magic", `bad magic 0x${buf[0].toString(16)}`);
  if (buf.length >= 2 && buf[1] !== VERSION) throw new DecodeError("bad_version", `unsupported version ${buf[1]}`);
  if (buf.length >= 3 && (buf[2] < 1 || buf[2] > TYPE_NAMES.length)) {
    throw new DecodeError("unknown_type", `unknown message type ${buf[2]}`);
  }
  if (buf.length < HEADER_SIZE) throw new DecodeError("truncated", "incomplete envelope header");
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const length = view.getUint32(3, false);
  const end = HEADER_SIZE + length;
  if (buf.length < end) throw new DecodeError("truncated", `need ${end - buf.length} more bytes`);
  const name = TYPE_NAMES[buf[2] - 1];
  const payload = buf.subarray(HEADER_SIZE, end);

  let headBytes = payload;
  let raw: Uint8Array | null = null;
  if (BINARY_TYPES.has(name)) {
    const split = jsonObjectEnd(payload);
    headBytes = payload.subarray(0, split);
    raw = payload.subarray(split);
  }
  let fields: Record<string, unknown>;
  try {
    fields = JSON.parse(new TextDecoder("utf-8", { fatal: true }).decode(headBytes));
  } catch (err) {
    throw new DecodeError("malformed_payload", `bad JSON header: ${err}`);
  }
  if (typeof fields !== "object" || fields === null || Array.isArray(fields)) {
    throw new DecodeError("malformed_payload", "payload header is not a JSON object");
  }
  const message = { type: name, ...fields } as Message;
  if (raw !== null) (message as FrameChunk | AudioChunk).payload = new Uint8Array(raw);
  if (name === "FrameChunk") {
    const frame = message as FrameChunk;
    if (raw === null || raw.length !== frame.width * frame.height) {
      throw new DecodeError("length_mismatch", "frame bytes do not match declared dimensions");
    }
  }
  return { message, consumed: end };
}
