import { describe, expect, it } from "vitest";
import {
  clampVelocity,
  dragToVelocity,
  jogFromDrag,
  jogRelease,
} from "../../src/jog.js";
import { ConsoleViewState } from "../../src/view_state.js";
import { frameAt, solarHello } from "./fixtures.js";

describe("velocity clamp", () => {
  it("caps the norm and keeps the direction", () => {
    const v = clampVelocity([3, 0, 4], 0.05);
    const norm = Math.hypot(...v);
    expect(norm).toBeCloseTo(0.05, 12);
    expect(v[0] / v[2]).toBeCloseTo(3 / 4, 12);
  });

  it("leaves small velocities alone", () => {
    expect(clampVelocity([0.01, 0, 0], 0.05)).toEqual([0.01, 0, 0]);
    expect(clampVelocity([0, 0, 0], 0.05)).toEqual([0, 0, 0]);
  });

  it("drag gain is applied before the cap", () => {
    const v = dragToVelocity([0.01, 0, 0], 2.0, 0.05);
    expect(v[0]).toBeCloseTo(0.02, 12);
  });
});

describe("jogFromDrag", () => {
  function viewWithFrame(): ConsoleViewState {
    const view = new ConsoleViewState();
    view.adoptHello(solarHello());
    view.ingest(frameAt(1)); // fixed: [0, 1, 2]
    return view;
  }

  it("drag up on a free node gives +z velocity", () => {
    const view = viewWithFrame();
    const intent = jogFromDrag(view, 6, [0, 0, 0.01], 2.0);
    expect("suppressed" in intent).toBe(false);
    if (!("suppressed" in intent)) {
      expect(intent.node).toBe(6);
      expect(intent.velocity[2]).toBeGreaterThan(0);
      expect(intent.velocity[0]).toBe(0);
    }
  });

  it("clamps to the hello speed cap", () => {
    const view = viewWithFrame();
    const intent = jogFromDrag(view, 6, [9, 9, 9], 10);
    if (!("suppressed" in intent)) {
      expect(Math.hypot(...intent.velocity)).toBeCloseTo(0.0613, 9);
    } else {
      throw new Error("jog unexpectedly suppressed");
    }
  });

  it("suppresses a drag on a fixed node and offers a hint", () => {
    const view = viewWithFrame();
    const intent = jogFromDrag(view, 0, [0, 0, 0.01], 2.0);
    expect("suppressed" in intent).toBe(true);
    if ("suppressed" in intent) {
      expect(intent.hint).toContain("fixed");
      expect(intent.hint).toContain("node 0");
    }
  });

  it("release always commands zero velocity", () => {
    expect(jogRelease(6)).toEqual({ node: 6, velocity: [0, 0, 0] });
  });
});
