// Wire protocol types for the teleop websocket (casterbase-teleop-protocol-v1).
// Every frame is a single JSON object tagged by `type`. Client frames stream
// operator input; server frames carry acknowledgements and 20 Hz telemetry.

export const PROTOCOL_VERSION = 1;

export type Pose2 = [number, number, number]; // [x_m, y_m, theta_rad]
export type Twist2 = [number, number, number]; // [vx_m_s, vy_m_s, omega_rad_s]
export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // [w, x, y, z]
export type DriveMode = "holonomic" | "differential";

// ---------------------------------------------------------------- client

export interface HelloMsg {
  type: "hello";
  client_name: string;
  protocol_version?: number;
}

export interface PoseMsg {
  type: "pose";
  t_ms: number; // client clock, strictly increasing per session
  position: Vec3; // z is discarded by the planar projection
  quaternion: Quat;
}

export interface ClutchMsg {
  type: "clutch";
  engaged: boolean;
}

export interface ModeMsg {
  type: "mode";
  drive_mode: DriveMode;
}

export interface EstopMsg {
  type: "estop";
}

export interface EstopReleaseMsg {
  type: "estop_release";
}

export interface EpisodeMsg {
  type: "episode";
  action: "start" | "stop";
  name?: string;
}

export interface ConfigRequestMsg {
  type: "config_request";
}

export type ClientMessage =
  | HelloMsg
  | PoseMsg
  | ClutchMsg
  | ModeMsg
  | EstopMsg
  | EstopReleaseMsg
  | EpisodeMsg
  | ConfigRequestMsg;

export function hello(clientName: string): HelloMsg {
  return { type: "hello", client_name: clientName, protocol_version: PROTOCOL_VERSION };
}

export function clutch(engaged: boolean): ClutchMsg {
  return { type: "clutch", engaged };
}

export function mode(driveMode: DriveMode): ModeMsg {
  return { type: "mode", drive_mode: driveMode };
}

export function estop(): EstopMsg {
  return { type: "estop" };
}

export function estopRelease(): EstopReleaseMsg {
  return { type: "estop_release" };
}

export function episodeStart(name?: string): EpisodeMsg {
  return name === undefined
    ? { type: "episode", action: "start" }
    : { type: "episode", action: "start", name };
}

export function episodeStop(): EpisodeMsg {
  return { type: "episode", action: "stop" };
}

export function configRequest(): ConfigRequestMsg {
  return { type: "config_request" };
}

// Planar device pose: position in the device plane, yaw about +z. The
// service recovers yaw from the rotated +x axis, so a pure z rotation
// round-trips exactly.
export function planarPose(tMs: number, x: number, y: number, yaw: number): PoseMsg {
  const half = yaw / 2;
  return {
    type: "pose",
    t_ms: tMs,
    position: [x, y, 0],
    quaternion: [Math.cos(half), 0, 0, Math.sin(half)],
  };
}

// ---------------------------------------------------------------- server

export interface HelloAckMsg {
  type: "hello_ack";
  protocol_version: number;
  session_id: number;
  authoritative: boolean;
}

export interface TelemetryMsg {
  type: "telemetry";
  t: number; // simulated seconds
  odom_pose: Pose2;
  truth_pose: Pose2;
  target_pose: Pose2;
  steer_angles: number[];
  commanded_twist: Twist2;
  mode: DriveMode;
  clutch_engaged: boolean;
  estop: boolean;
  watchdog_stopped: boolean;
  fk_residual: number;
  protocol_errors: number;
  recording: string | null;
}

export interface ConfigMsg {
  type: "config";
  config: Record<string, unknown>;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMessage = HelloAckMsg | TelemetryMsg | ConfigMsg | ErrorMsg;

function isNumberTriple(v: unknown): v is [number, number, number] {
  return Array.isArray(v) && v.length === 3 && v.every((e) => typeof e === "number");
}

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((e) => typeof e === "number");
}

function isHelloAck(m: Record<string, unknown>): m is HelloAckMsg & Record<string, unknown> {
  return (
    typeof m.protocol_version === "number" &&
    Number.isInteger(m.protocol_version) &&
    typeof m.session_id === "number" &&
    Number.isInteger(m.session_id) &&
    typeof m.authoritative === "boolean"
  );
}

function isTelemetry(m: Record<string, unknown>): m is TelemetryMsg & Record<string, unknown> {
  return (
    typeof m.t === "number" &&
    isNumberTriple(m.odom_pose) &&
    isNumberTriple(m.truth_pose) &&
    isNumberTriple(m.target_pose) &&
    isNumberArray(m.steer_angles) &&
    isNumberTriple(m.commanded_twist) &&
    (m.mode === "holonomic" || m.mode === "differential") &&
    typeof m.clutch_engaged === "boolean" &&
    typeof m.estop === "boolean" &&
    typeof m.watchdog_stopped === "boolean" &&
    typeof m.fk_residual === "number" &&
    typeof m.protocol_errors === "number" &&
    (m.recording === null || typeof m.recording === "string")
  );
}

// Parse one server frame. Returns null (and logs) on anything malformed so
// a bad frame can never take down the receive loop.
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    console.warn("dropping unparseable frame:", raw.slice(0, 120));
    return null;
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    console.warn("dropping non-object frame");
    return null;
  }
  const m = data as Record<string, unknown>;
  switch (m.type) {
    case "hello_ack":
      return isHelloAck(m) ? (m as HelloAckMsg) : null;
    case "telemetry":
      return isTelemetry(m) ? (m as unknown as TelemetryMsg) : null;
    case "config":
      return typeof m.config === "object" && m.config !== null
        ? (m as unknown as ConfigMsg)
        : null;
    case "error":
      return typeof m.message === "string" ? (m as unknown as ErrorMsg) : null;
    default:
      console.warn("dropping frame with unknown type:", m.type);
      return null;
  }
}
