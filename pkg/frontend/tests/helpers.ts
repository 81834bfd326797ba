// Shared test plumbing: compile the published wire schema once and expose
// validators for the client and server sides of the protocol.

import { readFileSync } from "node:fs";
import Ajv, { ValidateFunction } from "ajv";

const schemaPath = new URL("../protocol_schema.json", import.meta.url);
export const protocolSchema = JSON.parse(readFileSync(schemaPath, "utf-8"));

const ajv = new Ajv({ strict: false, allowUnionTypes: true });
ajv.addSchema(protocolSchema);

function compilePointer(pointer: string): ValidateFunction {
  const validate = ajv.getSchema(`${protocolSchema.$id}#${pointer}`);
  if (validate === undefined) {
    throw new Error(`schema pointer not found: ${pointer}`);
  }
  return validate;
}

export const validateClient = compilePointer("/definitions/client_message");
export const validateServer = compilePointer("/definitions/server_message");

export function expectValidClient(msg: unknown): void {
  if (!validateClient(msg)) {
    throw new Error(
      `client frame failed schema validation: ${JSON.stringify(msg)}\n${JSON.stringify(validateClient.errors)}`,
    );
  }
}

export function expectValidServer(msg: unknown): void {
  if (!validateServer(msg)) {
    throw new Error(
      `server frame failed schema validation: ${JSON.stringify(msg)}\n${JSON.stringify(validateServer.errors)}`,
    );
  }
}

// A telemetry frame shaped exactly like the service's 20 Hz stream.
export function sampleTelemetry(overrides: Record<string, unknown> = {}): Record<string, unknown> {
  return {
    type: "telemetry",
    t: 1.25,
    odom_pose: [0.1, 0.2, 0.05],
    truth_pose: [0.11, 0.19, 0.052],
    target_pose: [0.5, 0.2, 0.0],
    steer_angles: [0.1, -0.2, 0.3, -0.4],
    commanded_twist: [0.4, 0.0, 0.1],
    mode: "holonomic",
    clutch_engaged: true,
    estop: false,
    watchdog_stopped: false,
    fk_residual: 3.2e-16,
    protocol_errors: 0,
    recording: null,
    ...overrides,
  };
}
