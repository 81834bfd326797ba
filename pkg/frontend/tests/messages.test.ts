import { describe, expect, it } from "vitest";

import {
  clutch,
  configRequest,
  episodeStart,
  episodeStop,
  estop,
  estopRelease,
  hello,
  mode,
  parseServerMessage,
  planarPose,
} from "../src/messages.js";
import {
  expectValidClient,
  expectValidServer,
  sampleTelemetry,
  validateClient,
  validateServer,
} from "./helpers.js";

describe("client message builders", () => {
  it("every builder output conforms to the wire schema", () => {
    const frames = [
      hello("operator-ui"),
      planarPose(1, 0.5, -0.25, 0.3),
      clutch(true),
      clutch(false),
      mode("holonomic"),
      mode("differential"),
      estop(),
      estopRelease(),
      episodeStart(),
      episodeStart("demo-run"),
      episodeStop(),
      configRequest(),
    ];
    for (const frame of frames) {
      expectValidClient(frame);
    }
  });

  it("builders survive a JSON round trip unchanged", () => {
    const frame = planarPose(42, 1.0, 2.0, -0.5);
    expect(JSON.parse(JSON.stringify(frame))).toEqual(frame);
  });

  it("planar pose encodes yaw as a rotation about +z", () => {
    const yaw = 0.7;
    const p = planarPose(1, 0, 0, yaw);
    const [w, x, y, z] = p.quaternion;
    expect(x).toBe(0);
    expect(y).toBe(0);
    expect(Math.hypot(w, x, y, z)).toBeCloseTo(1, 12);
    expect(2 * Math.atan2(z, w)).toBeCloseTo(yaw, 12);
  });

  it("schema rejects frames with extra fields", () => {
    expect(validateClient({ type: "clutch", engaged: true, extra: 1 })).toBe(false);
    expect(validateClient({ type: "estop", reason: "x" })).toBe(false);
  });

  it("schema rejects unknown message types", () => {
    expect(validateClient({ type: "teleport", x: 0 })).toBe(false);
  });
});

describe("server message parsing", () => {
  it("accepts the telemetry stream shape", () => {
    const raw = JSON.stringify(sampleTelemetry());
    const parsed = parseServerMessage(raw);
    expect(parsed).not.toBeNull();
    expect(parsed!.type).toBe("telemetry");
    if (parsed!.type === "telemetry") {
      expect(parsed!.odom_pose).toEqual([0.1, 0.2, 0.05]);
      expect(parsed!.recording).toBeNull();
    }
  });

  it("accepts hello_ack, config, and error frames", () => {
    const frames = [
      { type: "hello_ack", protocol_version: 1, session_id: 3, authoritative: true },
      { type: "config", config: { base: { casters: [] } } },
      { type: "error", message: "boom" },
    ];
    for (const frame of frames) {
      expectValidServer(frame);
      expect(parseServerMessage(JSON.stringify(frame))).not.toBeNull();
    }
  });

  it("returns null for malformed frames instead of throwing", () => {
    const bad = [
      "not json",
      "[]",
      "42",
      JSON.stringify({ type: "nope" }),
      JSON.stringify({ type: "telemetry", t: 1 }), // missing required fields
      JSON.stringify({ type: "hello_ack", protocol_version: 1 }),
      JSON.stringify({ type: "error" }),
      JSON.stringify(sampleTelemetry({ mode: "sideways" })),
      JSON.stringify(sampleTelemetry({ odom_pose: [1, 2] })),
    ];
    for (const raw of bad) {
      expect(parseServerMessage(raw)).toBeNull();
    }
  });

  it("parser accepts exactly what the server schema accepts", () => {
    // Cross-check: frames the parser admits must validate, and vice versa,
    // over a small grid of mutations.
    const cases: Array<Record<string, unknown>> = [
      sampleTelemetry(),
      sampleTelemetry({ recording: "ep-1" }),
      sampleTelemetry({ mode: "differential" }),
      sampleTelemetry({ estop: true, watchdog_stopped: true }),
      { type: "hello_ack", protocol_version: 1, session_id: 0, authoritative: false },
      { type: "error", message: "" },
      { type: "config", config: {} },
    ];
    for (const frame of cases) {
      const viaParser = parseServerMessage(JSON.stringify(frame)) !== null;
      const viaSchema = validateServer(frame) === true;
      expect(viaParser).toBe(viaSchema);
    }
  });
});
