/** Shared message fixtures shaped like the solar-tower session. */

import type { Hello, StateFrame } from "../../src/protocol.js";

export function solarHello(): Hello {
  const edges: [number, number][] = [];
  // six tubes, three edges each, exact node pairs are irrelevant to the
  // console as long as indices are in range
  const rings = [
    [0, 1, 3], [1, 2, 4], [2, 0, 5],
    [3, 4, 6], [4, 5, 7], [5, 3, 8],
  ];
  for (const [a, b, c] of rings) edges.push([a, b], [b, c], [c, a]);
  return {
    type: "hello",
    version: 1,
    role: "controller",
    config: "solar",
    configs: ["single", "solar", "locomotion"],
    scripts: ["twist", "height", "tilt", "sweep"],
    groups: { bottom: [0, 1, 2], middle: [3, 4, 5], top: [6, 7, 8] },
    edges,
    virtual_edges: [[6, 7, 1.4], [7, 8, 1.4], [8, 6, 1.4]],
    node_count: 9,
    perimeter: [3.65, 3.65, 3.65, 3.65, 3.65, 3.65],
    limits: {
      L_min: 0.45,
      L_max: [1.655, 1.655, 1.655, 1.655, 1.655, 1.655],
      sweep_limit_deg: 35,
      speed_cap: 0.0613,
    },
    telemetry_hz: 20,
  };
}

export function frameAt(tick: number, over: Partial<StateFrame> = {}): StateFrame {
  const positions: [number, number, number][] = [];
  for (let i = 0; i < 9; i++) {
    const az = (i % 3) * 2.094 + Math.floor(i / 3) * 0.5;
    positions.push([
      0.7 * Math.cos(az),
      0.7 * Math.sin(az),
      Math.floor(i / 3) * 0.99,
    ]);
  }
  return {
    type: "state_frame",
    version: 1,
    tick,
    time: tick * 0.05,
    positions,
    d: new Array(12).fill(1.2),
    drift: new Array(6).fill(1e-9),
    margins: [0.4, 0.4, 0.4, 0.4, 0.4, 0.4],
    worst_edge: 4,
    worst_margin: 0.4,
    stability: 0.21,
    fixed: [0, 1, 2],
    script: {
      active: false,
      name: null,
      computing: false,
      remaining: 0,
      paused: false,
    },
    ...over,
  };
}
