// Client-side view model. The socket callbacks write into a ViewState
// instance; the render loop reads it once per frame. That snapshot handoff
// is the only coupling between network receive and drawing, so a stalled
// stream can never block a frame.

import { ConnectionStatus } from "./socket.js";
import { ServerMessage, TelemetryMsg } from "./messages.js";

export const TRAIL_CAP = 10000;
export const STALE_AFTER_MS = 500;

// World-plane polyline with bounded memory: points closer than minStepM to
// the previous sample are skipped, and when the buffer hits its cap every
// other point is dropped. Long sessions keep a thinned history instead of
// growing without bound.
export class Trail {
  private pts: Array<[number, number]> = [];

  constructor(
    readonly cap: number = TRAIL_CAP,
    readonly minStepM: number = 0.0005,
  ) {}

  push(x: number, y: number): void {
    const last = this.pts[this.pts.length - 1];
    if (last !== undefined) {
      const dx = x - last[0];
      const dy = y - last[1];
      if (Math.hypot(dx, dy) < this.minStepM) {
        return;
      }
    }
    if (this.pts.length >= this.cap) {
      this.pts = this.pts.filter((_, i) => i % 2 === 0);
    }
    this.pts.push([x, y]);
  }

  get length(): number {
    return this.pts.length;
  }

  get points(): ReadonlyArray<[number, number]> {
    return this.pts;
  }

  clear(): void {
    this.pts = [];
  }
}

// Top-down camera: world metres -> canvas pixels, y up in world, y down on
// screen. Pixels-per-metre doubles as the pointer-input scale.
export class Camera {
  constructor(
    public pxPerM: number = 100,
    public centerX: number = 0, // world point at the canvas centre
    public centerY: number = 0,
  ) {}

  worldToScreen(x: number, y: number, widthPx: number, heightPx: number): [number, number] {
    return [
      widthPx / 2 + (x - this.centerX) * this.pxPerM,
      heightPx / 2 - (y - this.centerY) * this.pxPerM,
    ];
  }

  screenDeltaToWorld(dxPx: number, dyPx: number): [number, number] {
    return [dxPx / this.pxPerM, -dyPx / this.pxPerM];
  }

  zoomBy(factor: number): void {
    this.pxPerM = Math.min(2000, Math.max(10, this.pxPerM * factor));
  }

  panByScreen(dxPx: number, dyPx: number): void {
    const [dx, dy] = this.screenDeltaToWorld(dxPx, dyPx);
    this.centerX -= dx;
    this.centerY -= dy;
  }
}

export interface CasterGeom {
  mountRadius: number;
  mountAngle: number;
  offsetX: number;
  offsetY: number;
  wheelRadius: number;
}

// Fallback footprint used until the service answers config_request.
export const DEFAULT_CASTERS: CasterGeom[] = [
  0.7328151017865066, 2.408777551803287, -2.408777551803287, -0.7328151017865066,
].map((angle) => ({
  mountRadius: 0.26907248094147423,
  mountAngle: angle,
  offsetX: -0.014,
  offsetY: 0.005,
  wheelRadius: 0.05,
}));

function parseCasters(config: Record<string, unknown>): CasterGeom[] | null {
  const base = config.base;
  if (typeof base !== "object" || base === null) {
    return null;
  }
  const casters = (base as Record<string, unknown>).casters;
  if (!Array.isArray(casters) || casters.length === 0) {
    return null;
  }
  const out: CasterGeom[] = [];
  for (const c of casters) {
    if (typeof c !== "object" || c === null) {
      return null;
    }
    const r = c as Record<string, unknown>;
    const fields = [r.mount_radius, r.mount_angle, r.offset_x, r.offset_y, r.wheel_radius];
    if (!fields.every((v) => typeof v === "number")) {
      return null;
    }
    out.push({
      mountRadius: r.mount_radius as number,
      mountAngle: r.mount_angle as number,
      offsetX: r.offset_x as number,
      offsetY: r.offset_y as number,
      wheelRadius: r.wheel_radius as number,
    });
  }
  return out;
}

export type InputMode = "pointer-clutch" | "keyboard-twist";

export class ViewState {
  status: ConnectionStatus = "idle";
  banner: string | null = null;
  inputMode: InputMode = "pointer-clutch";
  telemetry: TelemetryMsg | null = null;
  lastTelemetryAtMs: number | null = null; // wall clock of last telemetry frame
  sessionId: number | null = null;
  authoritative = false;
  casters: CasterGeom[] = DEFAULT_CASTERS;
  lastError: string | null = null;
  camera = new Camera();
  truthTrail = new Trail();
  odomTrail = new Trail();
  clutchHeld = false; // local pointer state, shown alongside the server's view

  applyStatus(status: ConnectionStatus): void {
    this.status = status;
    if (status === "connected") {
      this.lastError = null;
    }
  }

  applyBanner(text: string | null): void {
    this.banner = text;
  }

  applyServerMessage(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "hello_ack":
        this.sessionId = msg.session_id;
        this.authoritative = msg.authoritative;
        break;
      case "telemetry":
        this.telemetry = msg;
        this.lastTelemetryAtMs = nowMs;
        this.truthTrail.push(msg.truth_pose[0], msg.truth_pose[1]);
        this.odomTrail.push(msg.odom_pose[0], msg.odom_pose[1]);
        break;
      case "config": {
        const parsed = parseCasters(msg.config);
        if (parsed !== null) {
          this.casters = parsed;
        }
        break;
      }
      case "error":
        this.lastError = msg.message;
        break;
    }
  }

  // True once telemetry has gone quiet long enough that the drawn pose can
  // no longer be trusted; the renderer shows a warning state.
  isStale(nowMs: number): boolean {
    if (this.lastTelemetryAtMs === null) {
      return this.status === "connected";
    }
    return nowMs - this.lastTelemetryAtMs > STALE_AFTER_MS;
  }

  clearTrails(): void {
    this.truthTrail.clear();
    this.odomTrail.clear();
  }
}
