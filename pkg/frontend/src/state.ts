// Console state and its reducer. The console never originates state: every
// countdown, overlay, mute flag, and blur preview shown is reconstructed
// from server messages, so replaying a captured socket log rebuilds the
// exact same ConsoleState. Action builders validate locally and produce
// outgoing messages; they never touch the state.

import type { Message } from "./protocol.js";
import { encode } from "./protocol.js";

export type Role = "wearer" | "friend";

export interface CatalogItem {
  id: string;
  name: string;
  kind: "object" | "particle";
  anchor: [number, number];
  footprint: [number, number];
}

export interface FrameView {
  width: number;
  height: number;
  pixels: Uint8Array;
  blurApplied: number;
  capturedAt: number;
}

export interface ProjectionView {
  contentId: string;
  anchorX: number;
  anchorY: number;
}

export interface ConsoleState {
  role: Role;
  connection: "connecting" | "open" | "closed";
  catalog: CatalogItem[];
  glassesFraction: number;
  sessionId: string | null;
  sessionExpiresAt: number | null;
  inviteFrom: string | null;
  dropinId: string | null;
  dropinActive: boolean;
  remainingMs: number | null;
  presenceVisible: boolean;
  muted: boolean;
  carouselIndex: number;
  lastFrame: FrameView | null;
  projection: ProjectionView | null;
  audioLevel: number;
  lastDeny: string | null;
  lastError: { code: string; detail: string } | null;
  dropinEndCause: string | null;
  sessionEndCause: string | null;
}

export function initialState(role: Role): ConsoleState {
  return {
    role,
    connection: "connecting",
    catalog: [],
    glassesFraction: 0.4,
    sessionId: null,
    sessionExpiresAt: null,
    inviteFrom: null,
    dropinId: null,
    dropinActive: false,
    remainingMs: null,
    presenceVisible: false,
    muted: false,
    carouselIndex: 0,
    lastFrame: null,
    projection: null,
    audioLevel: 0,
    lastDeny: null,
    lastError: null,
    dropinEndCause: null,
    sessionEndCause: null,
  };
}

function catalogItem(state: ConsoleState, contentId: string): CatalogItem | undefined {
  return state.catalog.find((c) => c.id === contentId);
}

// --- reducer: one server message in, new state out ---------------------------

export function applyMessage(state: ConsoleState, msg: Message): ConsoleState {
  const next = { ...state };
  switch (msg.type) {
    case "InviteNotify":
      next.inviteFrom = msg.wearer;
      next.sessionId = msg.session_id;
      next.sessionExpiresAt = msg.expires_at;
      next.sessionEndCause = null;
      break;
    case "DropInGrant":
      next.dropinId = msg.dropin_id;
      next.dropinActive = true;
      next.dropinEndCause = null;
      next.lastDeny = null;
      if (state.role === "wearer") next.presenceVisible = true;
      break;
    case "DropInDeny":
      next.lastDeny = msg.reason;
      break;
    case "TimerSync":
      // server-authoritative countdown; a sync also proves the drop-in exists
      next.dropinId = msg.dropin_id;
      next.dropinActive = true;
      next.remainingMs = Math.max(0, msg.remaining_ms);
      break;
    case "FrameChunk":
      next.lastFrame = {
        width: msg.width,
        height: msg.height,
        pixels: msg.payload,
        blurApplied: msg.blur_applied,
        capturedAt: msg.captured_at,
      };
      break;
    case "AudioChunk":
      next.audioLevel = msg.payload.length;
      break;
    case "MuteToggle":
      next.muted = msg.muted;
      break;
    case "Project": {
      const item = catalogItem(state, msg.content_id);
      const anchor = item ? item.anchor : [0.5, 0.5];
      next.projection = { contentId: msg.content_id, anchorX: anchor[0], anchorY: anchor[1] };
      break;
    }
    case "Reposition":
      if (state.projection) {
        next.projection = { ...state.projection, anchorX: msg.anchor_x, anchorY: msg.anchor_y };
      }
      break;
    case "DropInEnd":
      if (state.dropinId === msg.dropin_id || state.dropinId === null) {
        next.dropinActive = false;
        next.remainingMs = null;
        next.projection = null;       // content is per-co-presence
        next.presenceVisible = false;
        next.muted = false;
        next.audioLevel = 0;
        next.dropinEndCause = msg.cause;
      }
      break;
    case "SessionEnd":
      next.sessionEndCause = msg.cause;
      next.sessionId = null;
      next.sessionExpiresAt = null;
      next.inviteFrom = null;
      next.dropinActive = false;
      next.remainingMs = null;
      next.projection = null;
      next.presenceVisible = false;
      break;
    case "Error":
      next.lastError = { code: msg.code, detail: msg.detail };
      break;
    default:
      break;
  }
  return next;
}

// Control-channel (text) replies from the server.
export function applyControlReply(state: ConsoleState, reply: Record<string, unknown>): ConsoleState {
  const next = { ...state };
  if (reply.ok === false) {
    next.lastError = { code: String(reply.code ?? "error"), detail: String(reply.detail ?? "") };
    return next;
  }
  if (reply.op === "start") {
    next.sessionId = String(reply.session_id);
    next.sessionExpiresAt = Number(reply.expires_at);
    next.sessionEndCause = null;
  }
  if (reply.op === "get_catalog") {
    next.catalog = reply.catalog as CatalogItem[];
    next.glassesFraction = Number(reply.glasses_fraction);
    next.carouselIndex = 0;
  }
  return next;
}

// --- config validation, mirroring the relay's accepted ranges ------------------

export const LIMITS = {
  arcall: { min: 300, max: 3600 },
  dropin: { min: 30, max: 60 },
  blur: { min: 0, max: 10 },
};

export function validateDurations(arcallS: number, dropinS: number): string | null {
  if (!Number.isInteger(arcallS) || arcallS < LIMITS.arcall.min || arcallS > LIMITS.arcall.max) {
    return `session duration must be ${LIMITS.arcall.min}-${LIMITS.arcall.max} s`;
  }
  if (!Number.isInteger(dropinS) || dropinS < LIMITS.dropin.min || dropinS > LIMITS.dropin.max) {
    return `drop-in duration must be ${LIMITS.dropin.min}-${LIMITS.dropin.max} s`;
  }
  return null;
}

export function validateBlur(level: number): string | null {
  if (!Number.isInteger(level) || level < LIMITS.blur.min || level > LIMITS.blur.max) {
    return `blur must be ${LIMITS.blur.min}-${LIMITS.blur.max}`;
  }
  return null;
}

// --- action builders -----------------------------------------------------------
// Each returns bytes to send (or a control-channel text payload), or null when
// the action is not available; the UI uses the same predicates to disable
// buttons, so wrong-state clicks cannot emit anything.

export function canDropIn(state: ConsoleState): boolean {
  return state.role === "friend" && state.sessionId !== null && !state.dropinActive;
}

export function dropIn(state: ConsoleState): Uint8Array | null {
  if (!canDropIn(state) || state.sessionId === null) return null;
  return encode({ type: "DropInRequest", session_id: state.sessionId });
}

export function selectContent(state: ConsoleState, delta: number): number {
  const n = state.catalog.length;
  if (n === 0) return 0;
  return ((state.carouselIndex + delta) % n + n) % n;
}

export function canSendContent(state: ConsoleState): boolean {
  return state.role === "friend" && state.dropinActive && state.catalog.length > 0;
}

export function sendContent(state: ConsoleState): Uint8Array | null {
  if (!canSendContent(state) || state.dropinId === null) return null;
  const item = state.catalog[state.carouselIndex];
  return encode({ type: "Project", dropin_id: state.dropinId, content_id: item.id });
}

export function toggleMute(state: ConsoleState): Uint8Array | null {
  if (state.role !== "friend" || !state.dropinActive || state.dropinId === null) return null;
  return encode({ type: "MuteToggle", dropin_id: state.dropinId, muted: !state.muted });
}

export interface StartConfig {
  friend: string;
  arcall_duration_s: number;
  dropin_duration_s: number;
  blur_level: number;
  presence_indicator: boolean;
}

export function startSession(config: StartConfig): { text: string } | { error: string } {
  const durationError = validateDurations(config.arcall_duration_s, config.dropin_duration_s);
  if (durationError) return { error: durationError };
  const blurError = validateBlur(config.blur_level);
  if (blurError) return { error: blurError };
  if (!config.friend) return { error: "pick a friend to invite" };
  return { text: JSON.stringify({ op: "start", config }) };
}

export function canTempleTap(state: ConsoleState): boolean {
  return state.role === "wearer" && state.dropinActive;
}

export function templeTap(state: ConsoleState): Uint8Array | null {
  if (!canTempleTap(state) || state.dropinId === null) return null;
  return encode({ type: "ExtendTap", dropin_id: state.dropinId });
}

export function endSession(state: ConsoleState): Uint8Array | null {
  if (state.role !== "wearer" || state.sessionId === null) return null;
  return encode({ type: "SessionEnd", session_id: state.sessionId, cause: "requested" });
}
