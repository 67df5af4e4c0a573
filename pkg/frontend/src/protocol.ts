/** Wire types for the session protocol (JSON over a WebSocket).
 *
 * Every message carries an integer `version`; clients attach a `seq` to
 * commands and the server echoes it in an `ack`.  Server events are wrapped
 * as {type: "event", event: "<code>", message: "..."} so match on the
 * `event` field, not `type`.
 */

export const PROTOCOL_VERSION = 1;

// ---------------------------------------------------------------- server

export interface Hello {
  type: "hello";
  version: number;
  role: "controller" | "spectator";
  config: string;
  configs: string[];
  scripts: string[];
  groups: Record<string, number[]>;
  edges: [number, number][];
  virtual_edges: [number, number, number][];
  node_count: number;
  perimeter: number[];
  limits: {
    L_min: number;
    L_max: number[];
    sweep_limit_deg: number;
    speed_cap: number;
  };
  telemetry_hz: number;
}

export interface StateFrame {
  type: "state_frame";
  version: number;
  tick: number;
  time: number;
  positions: [number, number, number][];
  d: number[];
  drift: number[];
  margins: (number | null)[]; // per triangle, null when unbounded
  worst_edge: number;
  worst_margin: number | null;
  stability: number | null;
  fixed: number[];
  script: {
    active: boolean;
    name: string | null;
    computing: boolean;
    remaining: number;
    paused: boolean;
  };
}

export interface Ack {
  type: "ack";
  version: number;
  seq: number;
}

export type EventCode =
  | "error"
  | "limit"
  | "busy"
  | "infeasible"
  | "read_only"
  | "script_done"
  | "script_aborted"
  | "paused"
  | "resumed"
  | "aborted";

export interface SessionEvent {
  type: "event";
  version: number;
  event: EventCode | string;
  message: string;
}

export type ServerMessage = Hello | StateFrame | Ack | SessionEvent;

// ---------------------------------------------------------------- client

export interface JogCommand {
  version: number;
  type: "jog";
  seq: number;
  node: number;
  velocity: [number, number, number];
}

export interface StartScriptCommand {
  version: number;
  type: "start_script";
  seq: number;
  script: string;
  params: Record<string, unknown>;
}

export interface SetFixedNodesCommand {
  version: number;
  type: "set_fixed_nodes";
  seq: number;
  nodes: number[];
}

export interface LoadConfigCommand {
  version: number;
  type: "load_config";
  seq: number;
  name: string;
}

export interface BareCommand {
  version: number;
  type: "pause" | "resume" | "abort";
  seq: number;
}

export type ClientCommand =
  | JogCommand
  | StartScriptCommand
  | SetFixedNodesCommand
  | LoadConfigCommand
  | BareCommand;

// ---------------------------------------------------------------- guards

export function isHello(m: ServerMessage): m is Hello {
  return m.type === "hello";
}

export function isStateFrame(m: ServerMessage): m is StateFrame {
  return m.type === "state_frame";
}

export function isAck(m: ServerMessage): m is Ack {
  return m.type === "ack";
}

export function isEvent(m: ServerMessage): m is SessionEvent {
  return m.type === "event";
}

/** Parse one server message; null for anything malformed.
 *
 * The console must survive garbage on the wire, so this never throws.
 */
export function parseServer(text: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const m = data as Record<string, unknown>;
  if (typeof m.type !== "string") return null;
  switch (m.type) {
    case "hello":
      if (!Array.isArray(m.edges) || typeof m.config !== "string") return null;
      return m as unknown as Hello;
    case "state_frame":
      if (typeof m.tick !== "number" || !Array.isArray(m.positions))
        return null;
      return m as unknown as StateFrame;
    case "ack":
      if (typeof m.seq !== "number") return null;
      return m as unknown as Ack;
    case "event":
      if (typeof m.event !== "string") return null;
      return m as unknown as SessionEvent;
    default:
      return null;
  }
}

// Command builders.  seq assignment lives in the client (net.ts) so the
// builders stay pure.

export function jogCommand(
  seq: number,
  node: number,
  velocity: [number, number, number],
): JogCommand {
  return { version: PROTOCOL_VERSION, type: "jog", seq, node, velocity };
}

export function startScriptCommand(
  seq: number,
  script: string,
  params: Record<string, unknown>,
): StartScriptCommand {
  return { version: PROTOCOL_VERSION, type: "start_script", seq, script, params };
}

export function setFixedNodesCommand(
  seq: number,
  nodes: number[],
): SetFixedNodesCommand {
  return { version: PROTOCOL_VERSION, type: "set_fixed_nodes", seq, nodes };
}

export function loadConfigCommand(seq: number, name: string): LoadConfigCommand {
  return { version: PROTOCOL_VERSION, type: "load_config", seq, name };
}

export function bareCommand(
  seq: number,
  type: "pause" | "resume" | "abort",
): BareCommand {
  return { version: PROTOCOL_VERSION, type, seq };
}
