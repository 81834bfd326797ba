// Browser entry point: wires the socket, view state, pointer input, and
// render loop together. Everything runs on the single browser event loop;
// socket callbacks only mutate the ViewState, and the animation-frame loop
// reads it back out to draw and to stream clutch poses.

import { episodeStart, episodeStop, estop, estopRelease, mode } from "./messages.js";
import { PointerClutch } from "./input.js";
import { TeleopSocket } from "./socket.js";
import { ViewState } from "./view_state.js";
import { drawFrame } from "./render.js";

function wsUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override !== null) {
    return override;
  }
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

function mustGet<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const canvas = mustGet<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d");
if (ctx === null) {
  throw new Error("2d canvas unavailable");
}

const view = new ViewState();

const socket = new TeleopSocket({
  url: wsUrl(),
  clientName: "operator-ui",
  onStatus: (s) => view.applyStatus(s),
  onMessage: (m) => view.applyServerMessage(m, performance.now()),
  onBanner: (b) => view.applyBanner(b),
});

const input = new PointerClutch(
  {
    canSend: () => socket.isOpen(),
    sendClutch: (m) => socket.send(m),
    sendPose: (m) => socket.send(m),
    warn: (text) => view.applyBanner(text),
  },
  () => view.camera.pxPerM,
);

// ---------------------------------------------------------------- canvas

function resize(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
}
window.addEventListener("resize", resize);
resize();

canvas.addEventListener("pointerdown", (ev) => {
  if (ev.button !== 0) {
    return;
  }
  canvas.setPointerCapture(ev.pointerId);
  input.pointerDown(ev.clientX, ev.clientY);
  view.clutchHeld = input.isDragging();
});

canvas.addEventListener("pointermove", (ev) => {
  if (input.isDragging()) {
    input.pointerMove(ev.clientX, ev.clientY);
  } else if ((ev.buttons & 2) !== 0) {
    view.camera.panByScreen(ev.movementX, ev.movementY);
  }
});

function endDrag(): void {
  input.pointerUp();
  view.clutchHeld = false;
}
canvas.addEventListener("pointerup", endDrag);
canvas.addEventListener("pointercancel", endDrag);
window.addEventListener("blur", endDrag);

// Wheel twists while clutched, zooms otherwise.
canvas.addEventListener(
  "wheel",
  (ev) => {
    ev.preventDefault();
    if (input.isDragging()) {
      input.twistBy(-ev.deltaY * 0.002);
    } else {
      view.camera.zoomBy(ev.deltaY < 0 ? 1.1 : 1 / 1.1);
    }
  },
  { passive: false },
);

window.addEventListener("keydown", (ev) => {
  if (ev.key === "q") {
    input.twistBy(0.05);
  } else if (ev.key === "e") {
    input.twistBy(-0.05);
  }
});

canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

// ---------------------------------------------------------------- buttons

const modeBtn = mustGet<HTMLButtonElement>("mode");
modeBtn.addEventListener("click", () => {
  const current = view.telemetry?.mode ?? "holonomic";
  socket.send(mode(current === "holonomic" ? "differential" : "holonomic"));
});

mustGet<HTMLButtonElement>("estop").addEventListener("click", () => {
  socket.send(estop());
});

mustGet<HTMLButtonElement>("estop-release").addEventListener("click", () => {
  socket.send(estopRelease());
});

const episodeBtn = mustGet<HTMLButtonElement>("episode");
episodeBtn.addEventListener("click", () => {
  if (view.telemetry?.recording != null) {
    socket.send(episodeStop());
  } else {
    socket.send(episodeStart());
  }
});

mustGet<HTMLButtonElement>("clear-trails").addEventListener("click", () => {
  view.clearTrails();
});

function refreshButtons(): void {
  const t = view.telemetry;
  modeBtn.textContent = `mode: ${t?.mode ?? "holonomic"}`;
  episodeBtn.textContent = t?.recording != null ? "stop recording" : "record episode";
}

// ------------------------------------------------------------- main loop

let frames = 0;
let fps = 0;
let fpsWindowStart = performance.now();

function frame(): void {
  const now = performance.now();
  frames++;
  if (now - fpsWindowStart >= 1000) {
    fps = (frames * 1000) / (now - fpsWindowStart);
    frames = 0;
    fpsWindowStart = now;
  }
  input.tick();
  view.clutchHeld = input.isDragging();
  refreshButtons();
  drawFrame(ctx!, view, canvas.width, canvas.height, now, fps);
  requestAnimationFrame(frame);
}

socket.connect();
requestAnimationFrame(frame);
