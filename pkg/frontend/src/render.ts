// Top-down canvas renderer. Reads a ViewState snapshot once per frame and
// draws: metre grid, truth vs. odometry trails, the base footprint with all
// four steered wheels, the target marker, and the HUD/safety banners. The
// drawing context is typed structurally so tests can drive the renderer
// with a recording stub instead of a real canvas.

import { TelemetryMsg } from "./messages.js";
import { CasterGeom, ViewState } from "./view_state.js";

// Base footprint, metres.
export const BASE_LENGTH_M = 0.54;
export const BASE_WIDTH_M = 0.5;

// Subset of CanvasRenderingContext2D the renderer uses.
export interface Draw2D {
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(rad: number): void;
  scale(x: number, y: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

const COLORS = {
  background: "#10141a",
  grid: "#232a33",
  gridAxis: "#39434f",
  truthTrail: "#3fb950",
  odomTrail: "#e8a33d",
  base: "#58a6ff",
  baseGhost: "#8b949e",
  wheel: "#e6edf3",
  offset: "#f85149",
  target: "#d2a8ff",
  hud: "#e6edf3",
  hudDim: "#8b949e",
  warn: "#d29922",
  danger: "#f85149",
};

function drawGrid(ctx: Draw2D, view: ViewState, w: number, h: number): void {
  const cam = view.camera;
  const minX = cam.centerX - w / 2 / cam.pxPerM;
  const maxX = cam.centerX + w / 2 / cam.pxPerM;
  const minY = cam.centerY - h / 2 / cam.pxPerM;
  const maxY = cam.centerY + h / 2 / cam.pxPerM;
  ctx.lineWidth = 1;
  for (let gx = Math.ceil(minX); gx <= Math.floor(maxX); gx++) {
    ctx.strokeStyle = gx === 0 ? COLORS.gridAxis : COLORS.grid;
    const [sx] = cam.worldToScreen(gx, 0, w, h);
    ctx.beginPath();
    ctx.moveTo(sx, 0);
    ctx.lineTo(sx, h);
    ctx.stroke();
  }
  for (let gy = Math.ceil(minY); gy <= Math.floor(maxY); gy++) {
    ctx.strokeStyle = gy === 0 ? COLORS.gridAxis : COLORS.grid;
    const [, sy] = cam.worldToScreen(0, gy, w, h);
    ctx.beginPath();
    ctx.moveTo(0, sy);
    ctx.lineTo(w, sy);
    ctx.stroke();
  }
}

function drawTrail(
  ctx: Draw2D,
  view: ViewState,
  w: number,
  h: number,
  points: ReadonlyArray<[number, number]>,
  color: string,
  dash: number[],
): void {
  if (points.length < 2) {
    return;
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash(dash);
  ctx.beginPath();
  const [x0, y0] = view.camera.worldToScreen(points[0][0], points[0][1], w, h);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < points.length; i++) {
    const [sx, sy] = view.camera.worldToScreen(points[i][0], points[i][1], w, h);
    ctx.lineTo(sx, sy);
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

// Enter a world pose: subsequent drawing happens in base-frame metres with
// y up. Callers must pair with ctx.restore().
function enterPose(
  ctx: Draw2D,
  view: ViewState,
  w: number,
  h: number,
  pose: [number, number, number],
): void {
  const [sx, sy] = view.camera.worldToScreen(pose[0], pose[1], w, h);
  ctx.save();
  ctx.translate(sx, sy);
  ctx.scale(view.camera.pxPerM, -view.camera.pxPerM);
  ctx.rotate(pose[2]);
}

function drawBase(
  ctx: Draw2D,
  view: ViewState,
  w: number,
  h: number,
  telemetry: TelemetryMsg,
): void {
  // Ghost outline at the true pose; solid body at the odometry pose the
  // controller steers by. The gap between them is the live drift.
  enterPose(ctx, view, w, h, telemetry.truth_pose);
  ctx.globalAlpha = 0.45;
  ctx.strokeStyle = COLORS.baseGhost;
  ctx.lineWidth = 0.008;
  ctx.setLineDash([0.03, 0.03]);
  ctx.strokeRect(-BASE_LENGTH_M / 2, -BASE_WIDTH_M / 2, BASE_LENGTH_M, BASE_WIDTH_M);
  ctx.setLineDash([]);
  ctx.globalAlpha = 1;
  ctx.restore();

  enterPose(ctx, view, w, h, telemetry.odom_pose);
  ctx.strokeStyle = COLORS.base;
  ctx.lineWidth = 0.012;
  ctx.strokeRect(-BASE_LENGTH_M / 2, -BASE_WIDTH_M / 2, BASE_LENGTH_M, BASE_WIDTH_M);

  // Heading mark at the front edge.
  ctx.beginPath();
  ctx.moveTo(BASE_LENGTH_M / 2, 0);
  ctx.lineTo(BASE_LENGTH_M / 2 + 0.08, 0);
  ctx.stroke();

  for (let i = 0; i < view.casters.length; i++) {
    drawWheel(ctx, view.casters[i], telemetry.steer_angles[i] ?? 0);
  }
  ctx.restore();
}

// One caster, drawn in the base frame: steering-axis dot, the live offset
// vector from axis to contact point, and the wheel segment along its
// rolling direction.
function drawWheel(ctx: Draw2D, geom: CasterGeom, steer: number): void {
  const ax = geom.mountRadius * Math.cos(geom.mountAngle);
  const ay = geom.mountRadius * Math.sin(geom.mountAngle);
  const c = Math.cos(steer);
  const s = Math.sin(steer);
  const cx = ax + c * geom.offsetX - s * geom.offsetY;
  const cy = ay + s * geom.offsetX + c * geom.offsetY;

  ctx.strokeStyle = COLORS.offset;
  ctx.lineWidth = 0.006;
  ctx.beginPath();
  ctx.moveTo(ax, ay);
  ctx.lineTo(cx, cy);
  ctx.stroke();

  ctx.fillStyle = COLORS.offset;
  ctx.beginPath();
  ctx.arc(ax, ay, 0.008, 0, Math.PI * 2);
  ctx.fill();

  ctx.strokeStyle = COLORS.wheel;
  ctx.lineWidth = 0.014;
  ctx.beginPath();
  ctx.moveTo(cx - c * geom.wheelRadius, cy - s * geom.wheelRadius);
  ctx.lineTo(cx + c * geom.wheelRadius, cy + s * geom.wheelRadius);
  ctx.stroke();
}

function drawTarget(
  ctx: Draw2D,
  view: ViewState,
  w: number,
  h: number,
  pose: [number, number, number],
): void {
  enterPose(ctx, view, w, h, pose);
  ctx.strokeStyle = COLORS.target;
  ctx.lineWidth = 0.01;
  ctx.beginPath();
  ctx.arc(0, 0, 0.06, 0, Math.PI * 2);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(0.12, 0);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(-0.06, 0);
  ctx.lineTo(0.06, 0);
  ctx.moveTo(0, -0.06);
  ctx.lineTo(0, 0.06);
  ctx.stroke();
  ctx.restore();
}

function banner(ctx: Draw2D, w: number, y: number, text: string, color: string): number {
  ctx.fillStyle = color;
  ctx.globalAlpha = 0.9;
  ctx.fillRect(0, y, w, 26);
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#10141a";
  ctx.font = "bold 14px system-ui, sans-serif";
  ctx.fillText(text, 10, y + 18);
  return y + 30;
}

function hudLines(view: ViewState, fps: number): string[] {
  const t = view.telemetry;
  const lines: string[] = [];
  lines.push(`link: ${view.status}${view.sessionId !== null ? `  session ${view.sessionId}` : ""}${view.authoritative ? " (operator)" : view.sessionId !== null ? " (observer)" : ""}`);
  if (t === null) {
    lines.push("waiting for telemetry…");
    return lines;
  }
  const speed = Math.hypot(t.commanded_twist[0], t.commanded_twist[1]);
  lines.push(`t ${t.t.toFixed(2)} s   fps ${fps.toFixed(0)}`);
  lines.push(`speed ${speed.toFixed(2)} m/s   omega ${t.commanded_twist[2].toFixed(2)} rad/s`);
  lines.push(`mode ${t.mode}${t.mode === "differential" ? "  [vy suppressed]" : ""}`);
  lines.push(`clutch ${t.clutch_engaged ? "ENGAGED" : "off"}${view.clutchHeld ? " (held)" : ""}`);
  lines.push(`watchdog ${t.watchdog_stopped ? "STOPPED" : "ok"}   estop ${t.estop ? "LATCHED" : "clear"}`);
  lines.push(`fk residual ${t.fk_residual.toExponential(2)}`);
  lines.push(`episode ${t.recording === null ? "idle" : `REC ${t.recording}`}`);
  lines.push(`odom (${t.odom_pose[0].toFixed(3)}, ${t.odom_pose[1].toFixed(3)}, ${t.odom_pose[2].toFixed(3)})`);
  if (t.protocol_errors > 0) {
    lines.push(`protocol errors ${t.protocol_errors}`);
  }
  return lines;
}

export function drawFrame(
  ctx: Draw2D,
  view: ViewState,
  w: number,
  h: number,
  nowMs: number,
  fps: number,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);
  drawGrid(ctx, view, w, h);

  drawTrail(ctx, view, w, h, view.truthTrail.points, COLORS.truthTrail, []);
  drawTrail(ctx, view, w, h, view.odomTrail.points, COLORS.odomTrail, [6, 4]);

  const t = view.telemetry;
  if (t !== null) {
    drawTarget(ctx, view, w, h, t.target_pose);
    drawBase(ctx, view, w, h, t);
  }

  // HUD.
  ctx.font = "13px ui-monospace, monospace";
  const lines = hudLines(view, fps);
  for (let i = 0; i < lines.length; i++) {
    ctx.fillStyle = i === 0 ? COLORS.hudDim : COLORS.hud;
    ctx.fillText(lines[i], 10, 48 + 17 * i);
  }

  // Safety and connection banners, most urgent on top.
  let y = 0;
  if (view.banner !== null) {
    y = banner(ctx, w, y, view.banner, COLORS.danger);
  }
  if (t !== null && (t.estop || t.watchdog_stopped)) {
    y = banner(ctx, w, y, t.estop ? "E-STOP LATCHED — release to resume" : "WATCHDOG STOP — input stream lost", COLORS.danger);
  }
  if (view.isStale(nowMs)) {
    y = banner(ctx, w, y, "STALE TELEMETRY — display frozen", COLORS.warn);
  }
  if (view.lastError !== null) {
    banner(ctx, w, y, `service error: ${view.lastError}`, COLORS.warn);
  }
}
