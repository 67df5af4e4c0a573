import { describe, expect, it } from "vitest";
import * as THREE from "three";
import {
  ALERT_COLOR,
  marginColor,
  NODE_COLOR,
  PIN_COLOR,
  TrussScene,
} from "../../src/scene.js";
import { frameAt, solarHello } from "./fixtures.js";

function builtScene(): TrussScene {
  const s = new TrussScene();
  s.buildFrom(solarHello());
  return s;
}

describe("geometry counts", () => {
  it("solar array renders 18 tube segments and 3 panel edges", () => {
    const s = builtScene();
    expect(s.tubes).toHaveLength(18);
    expect(s.panelEdges).toHaveLength(3);
    expect(s.nodes).toHaveLength(9);
  });
});

describe("update", () => {
  it("places node spheres at the frame positions and shows the tick", () => {
    const s = builtScene();
    const f = frameAt(42);
    s.update(f);
    expect(s.lastTick).toBe(42);
    for (let i = 0; i < 9; i++) {
      expect(s.nodes[i].position.x).toBeCloseTo(f.positions[i][0], 12);
      expect(s.nodes[i].position.z).toBeCloseTo(f.positions[i][2], 12);
    }
  });

  it("tube segments span their end nodes", () => {
    const s = builtScene();
    const f = frameAt(1);
    s.update(f);
    const hello = solarHello();
    const [i, j] = hello.edges[0];
    const a = new THREE.Vector3(...f.positions[i]);
    const b = new THREE.Vector3(...f.positions[j]);
    const mid = a.clone().add(b).multiplyScalar(0.5);
    expect(s.tubes[0].position.distanceTo(mid)).toBeLessThan(1e-9);
    expect(s.tubes[0].scale.y).toBeCloseTo(a.distanceTo(b), 9);
  });

  it("marks fixed nodes with the pin color and a bigger sphere", () => {
    const s = builtScene();
    s.update(frameAt(1)); // fixed: [0, 1, 2]
    const pinned = s.nodes[0].material as THREE.MeshStandardMaterial;
    const free = s.nodes[6].material as THREE.MeshStandardMaterial;
    expect(pinned.color.getHex()).toBe(PIN_COLOR);
    expect(free.color.getHex()).toBe(NODE_COLOR);
    expect(s.nodes[0].scale.x).toBeGreaterThan(s.nodes[6].scale.x);
  });
});

describe("margin colors", () => {
  it("ramp runs green for wide margins to red for none", () => {
    const wide = marginColor(0.5);
    const tight = marginColor(0.0);
    expect(wide.g).toBeGreaterThan(wide.r);
    expect(tight.r).toBeGreaterThan(tight.g);
    expect(marginColor(null).getHex()).toBe(0x808890);
  });

  it("an edge at its limit turns the alert color, others keep the ramp", () => {
    const s = builtScene();
    const f = frameAt(2, {
      margins: [0.3, 0.001, 0.3, 0.3, 0.3, 0.3],
      worst_edge: 4, // lives in triangle 1
      worst_margin: 0.001,
    });
    s.update(f);
    const alert = s.tubes[4].material as THREE.MeshStandardMaterial;
    const calm = s.tubes[0].material as THREE.MeshStandardMaterial;
    expect(alert.color.getHex()).toBe(ALERT_COLOR);
    expect(calm.color.getHex()).not.toBe(ALERT_COLOR);
  });

  it("a healthy worst edge keeps its ramp color", () => {
    const s = builtScene();
    s.update(frameAt(3)); // worst_margin 0.4, well clear of the band
    const m = s.tubes[4].material as THREE.MeshStandardMaterial;
    expect(m.color.getHex()).not.toBe(ALERT_COLOR);
  });
});

describe("stale stream", () => {
  it("keeps the last frame and dims the materials", () => {
    const s = builtScene();
    s.update(frameAt(9));
    s.setStale(true);
    expect(s.lastTick).toBe(9); // pose retained
    const m = s.tubes[0].material as THREE.MeshStandardMaterial;
    expect(m.opacity).toBeLessThan(0.5);
    s.setStale(false);
    expect(m.opacity).toBe(1);
  });
});

describe("camera", () => {
  it("orbit pose looks at the target with z up", () => {
    const s = builtScene();
    const cam = new THREE.PerspectiveCamera();
    s.applyCamera(cam, { azimuth: 0.3, elevation: 0.5, distance: 6 });
    expect(cam.position.length()).toBeGreaterThan(4);
    expect(cam.up.z).toBe(1);
  });
});
