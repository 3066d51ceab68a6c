// DOM + WebSocket wiring. One page serves both roles; ?role=wearer|friend
// picks which control strip exists (wrong-role actions are simply absent).
// All rendered facts come from the reducer in state.ts; this file only
// forwards events out and repaints when messages arrive.

import { DecodeError, decode, encode } from "./protocol.js";
import {
  ConsoleState,
  applyControlReply,
  applyMessage,
  canDropIn,
  canSendContent,
  canTempleTap,
  dropIn,
  endSession,
  initialState,
  selectContent,
  sendContent,
  startSession,
  templeTap,
  toggleMute,
  validateBlur,
  validateDurations,
} from "./state.js";
import { grayToRgba, renderView, viewportRect } from "./render.js";

const params = new URLSearchParams(location.search);
const role = params.get("role") === "wearer" ? "wearer" : "friend";
const user = params.get("user") ?? (role === "wearer" ? "alice" : "bob");
const token = params.get("token") ?? "";

let state: ConsoleState = initialState(role);

const scheme = location.protocol === "https:" ? "wss" : "ws";
const ws = new WebSocket(`${scheme}://${location.host}/ws?user=${user}&role=${role}&token=${token}`);
ws.binaryType = "arraybuffer";

function send(bytes: Uint8Array | null): void {
  if (bytes && ws.readyState === WebSocket.OPEN) ws.send(bytes);
}

ws.onopen = () => {
  state = { ...state, connection: "open" };
  ws.send(JSON.stringify({ op: "get_catalog" }));
  render();
};
ws.onclose = () => {
  state = { ...state, connection: "closed" };
  render();
};
ws.onmessage = (event) => {
  if (typeof event.data === "string") {
    state = applyControlReply(state, JSON.parse(event.data));
  } else {
    try {
      state = applyMessage(state, decode(new Uint8Array(event.data as ArrayBuffer)).message);
    } catch (err) {
      if (!(err instanceof DecodeError)) throw err;
      state = { ...state, lastError: { code: err.code, detail: err.message } };
    }
  }
  render();
};

// --- DOM scaffolding -------------------------------------------------------

const app = document.getElementById("app")!;
app.innerHTML = `
  <header>
    <h1>AR call console</h1>
    <div id="status"></div>
  </header>
  <main>
    <div class="stage">
      <canvas id="view" width="320" height="240"></canvas>
      <div id="countdown"></div>
      <div class="meter"><div id="audio-level"></div></div>
    </div>
    <div id="controls"></div>
    <div id="notices"></div>
  </main>
`;

const controls = document.getElementById("controls")!;
if (role === "friend") {
  controls.innerHTML = `
    <button id="drop-in">Drop in</button>
    <div class="carousel">
      <button id="prev">&#8592;</button>
      <span id="carousel-item">-</span>
      <button id="next">&#8594;</button>
      <button id="send-content">Send</button>
    </div>
    <button id="mute">Mute</button>
  `;
  on("drop-in", () => send(dropIn(state)));
  on("prev", () => { state = { ...state, carouselIndex: selectContent(state, -1) }; render(); });
  on("next", () => { state = { ...state, carouselIndex: selectContent(state, +1) }; render(); });
  on("send-content", () => send(sendContent(state)));
  on("mute", () => send(toggleMute(state)));
} else {
  controls.innerHTML = `
    <label>Friend <input id="friend" value="bob" size="8"></label>
    <label>Session s <input id="arcall-s" type="number" value="600" min="300" max="3600"></label>
    <label>Drop-in s <input id="dropin-s" type="number" value="60" min="30" max="60"></label>
    <label>Blur <input id="blur" type="range" value="0" min="0" max="10">
      <span id="blur-value">0</span></label>
    <label><input id="presence" type="checkbox"> presence indicator</label>
    <button id="start">Start session</button>
    <button id="tap">Temple tap (+30 s)</button>
    <button id="end">End session</button>
    <div id="config-error" class="error"></div>
  `;
  on("start", () => {
    const result = startSession({
      friend: input("friend").value,
      arcall_duration_s: Number(input("arcall-s").value),
      dropin_duration_s: Number(input("dropin-s").value),
      blur_level: Number(input("blur").value),
      presence_indicator: input("presence").checked,
    });
    if ("error" in result) {
      document.getElementById("config-error")!.textContent = result.error;
    } else {
      document.getElementById("config-error")!.textContent = "";
      ws.send(result.text);
    }
  });
  on("tap", () => send(templeTap(state)));
  on("end", () => send(endSession(state)));
  input("blur").oninput = () => {
    document.getElementById("blur-value")!.textContent = input("blur").value;
    const error = validateBlur(Number(input("blur").value));
    document.getElementById("config-error")!.textContent = error ?? "";
  };
  for (const id of ["arcall-s", "dropin-s"]) {
    input(id).oninput = () => {
      const error = validateDurations(Number(input("arcall-s").value), Number(input("dropin-s").value));
      document.getElementById("config-error")!.textContent = error ?? "";
    };
  }
}

function on(id: string, fn: () => void): void {
  document.getElementById(id)!.addEventListener("click", fn);
}

function input(id: string): HTMLInputElement {
  return document.getElementById(id) as HTMLInputElement;
}

// --- wearer's stand-in camera: streams synthetic frames during drop-ins ------

const FRAME_W = 64;
const FRAME_H = 48;
let frameSeq = 0;

function syntheticFrame(): Uint8Array {
  const pixels = new Uint8Array(FRAME_W * FRAME_H);
  const cx = FRAME_W / 2 + Math.sin(frameSeq / 7) * 18;
  const cy = FRAME_H / 2 + Math.cos(frameSeq / 9) * 12;
  for (let y = 0; y < FRAME_H; y++) {
    for (let x = 0; x < FRAME_W; x++) {
      const blob = Math.hypot(x - cx, y - cy) < 8 ? 120 : 0;
      pixels[y * FRAME_W + x] = (x * 3 + y * 2 + blob) % 256;
    }
  }
  frameSeq += 1;
  return pixels;
}

let audioSeq = 0;
if (role === "wearer") {
  setInterval(() => {
    if (!state.dropinActive || state.dropinId === null) return;
    send(encode({
      type: "FrameChunk", dropin_id: state.dropinId, captured_at: Date.now(),
      width: FRAME_W, height: FRAME_H, blur_applied: 0, payload: syntheticFrame(),
    }));
  }, 400);
}
// both sides chirp a synthetic voice packet while in a drop-in (real
// microphone capture stays optional; the level meter is what is on test)
setInterval(() => {
  if (!state.dropinActive || state.dropinId === null) return;
  if (role === "friend" && state.muted) return;
  const size = 24 + Math.floor(Math.abs(Math.sin(audioSeq / 3)) * 40);
  send(encode({
    type: "AudioChunk", dropin_id: state.dropinId, seq: audioSeq++, sender: role,
    payload: new Uint8Array(size),
  }));
}, 250);

// --- painting -----------------------------------------------------------------

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

function render(): void {
  const status = document.getElementById("status")!;
  const sessionBit = state.sessionId
    ? `session ${state.sessionId}`
    : state.sessionEndCause
      ? `session over (${state.sessionEndCause})`
      : "no session";
  const presenceBit = state.role === "wearer" && state.presenceVisible ? " | friend is here" : "";
  status.textContent = `${user} (${role}) | ${state.connection} | ${sessionBit}${presenceBit}`;

  const countdown = document.getElementById("countdown")!;
  countdown.textContent = state.remainingMs !== null && state.dropinActive
    ? `${(state.remainingMs / 1000).toFixed(0)} s left`
    : "";

  const level = document.getElementById("audio-level")!;
  level.style.width = `${Math.min(100, state.audioLevel)}%`;

  if (role === "friend") {
    (document.getElementById("drop-in") as HTMLButtonElement).disabled = !canDropIn(state);
    (document.getElementById("send-content") as HTMLButtonElement).disabled = !canSendContent(state);
    (document.getElementById("mute") as HTMLButtonElement).disabled = !state.dropinActive;
    document.getElementById("mute")!.textContent = state.muted ? "Unmute" : "Mute";
    const item = state.catalog[state.carouselIndex];
    document.getElementById("carousel-item")!.textContent = item ? item.name : "-";
  } else {
    (document.getElementById("tap") as HTMLButtonElement).disabled = !canTempleTap(state);
    (document.getElementById("end") as HTMLButtonElement).disabled = state.sessionId === null;
  }

  const notices = document.getElementById("notices")!;
  const bits: string[] = [];
  if (state.inviteFrom && role === "friend") bits.push(`invited by ${state.inviteFrom}`);
  if (state.lastDeny) bits.push(`drop-in denied: ${state.lastDeny}`);
  if (state.dropinEndCause) bits.push(`drop-in over: ${state.dropinEndCause}`);
  if (state.lastError) bits.push(`server error: ${state.lastError.code} ${state.lastError.detail}`);
  notices.textContent = bits.join(" | ");

  paint();
}

function paint(): void {
  const view = renderView(state);
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (view) {
    const off = new OffscreenCanvas(view.width, view.height);
    const offCtx = off.getContext("2d")!;
    offCtx.putImageData(new ImageData(grayToRgba(view.buffer), view.width, view.height), 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  }
  if (role === "wearer") {
    const vp = viewportRect(state.glassesFraction, canvas.width, canvas.height);
    ctx.strokeStyle = "#6cf";
    ctx.lineWidth = 2;
    ctx.strokeRect(vp.x, vp.y, vp.width, vp.height);
  }
}

render();
