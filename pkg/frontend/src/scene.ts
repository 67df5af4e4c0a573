/** three.js scene for the truss: tube segments, panel edges, node spheres.
 *
 * Pure scene-graph math (no renderer here), so every bit of it runs
 * headless in tests.  Tubes are cylinders colored by the feasibility
 * margin of their triangle (green wide, red tight); the worst edge turns
 * the alert color once its margin is inside the alert band.  Fixed nodes
 * get the pin color and a larger sphere.  When the stream goes away the
 * last frame stays on screen and materials dim.
 */

import * as THREE from "three";
import type { Hello, StateFrame } from "./protocol.js";

export const TUBE_RADIUS = 0.035;
export const NODE_RADIUS = 0.09;
export const ALERT_MARGIN = 0.005; // m, margin at or below this is "at limit"
export const MARGIN_FULL = 0.5; // m, margin at which the ramp saturates green

export const ALERT_COLOR = 0xff2020;
export const PIN_COLOR = 0xffb020;
export const NODE_COLOR = 0xb8c4d0;
export const PANEL_COLOR = 0x3f7fbf;

/** Feasibility margin to ramp color.  null margins render neutral gray. */
export function marginColor(margin: number | null): THREE.Color {
  if (margin === null) return new THREE.Color(0x808890);
  const t = Math.min(1, Math.max(0, margin / MARGIN_FULL));
  return new THREE.Color().setHSL(t * (120 / 360), 0.85, 0.42);
}

const UP = new THREE.Vector3(0, 1, 0); // cylinder geometry axis

export class TrussScene {
  scene = new THREE.Scene();
  tubes: THREE.Mesh[] = [];
  panelEdges: THREE.Mesh[] = [];
  nodes: THREE.Mesh[] = [];
  stale = false;
  lastTick: number | null = null;

  private edges: [number, number][] = [];
  private virtual: [number, number, number][] = [];
  private group = new THREE.Group();

  constructor() {
    this.scene.add(this.group);
    const key = new THREE.DirectionalLight(0xffffff, 2.2);
    key.position.set(4, 6, 8);
    this.scene.add(key);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const floor = new THREE.Mesh(
      new THREE.CircleGeometry(6, 48),
      new THREE.MeshBasicMaterial({ color: 0x20262c }),
    );
    this.scene.add(floor);
  }

  /** Rebuild meshes for a configuration; call on every hello. */
  buildFrom(hello: Hello) {
    this.group.clear();
    this.tubes = [];
    this.panelEdges = [];
    this.nodes = [];
    this.edges = hello.edges;
    this.virtual = hello.virtual_edges;
    this.lastTick = null;

    const tubeGeo = new THREE.CylinderGeometry(TUBE_RADIUS, TUBE_RADIUS, 1, 8);
    for (let i = 0; i < this.edges.length; i++) {
      const mat = new THREE.MeshStandardMaterial({
        color: 0x44aa44,
        transparent: true,
        opacity: 1,
      });
      const mesh = new THREE.Mesh(tubeGeo, mat);
      this.tubes.push(mesh);
      this.group.add(mesh);
    }
    const panelGeo = new THREE.CylinderGeometry(
      TUBE_RADIUS * 0.6, TUBE_RADIUS * 0.6, 1, 6);
    for (let i = 0; i < this.virtual.length; i++) {
      const mat = new THREE.MeshStandardMaterial({
        color: PANEL_COLOR,
        transparent: true,
        opacity: 1,
      });
      const mesh = new THREE.Mesh(panelGeo, mat);
      this.panelEdges.push(mesh);
      this.group.add(mesh);
    }
    const nodeGeo = new THREE.SphereGeometry(NODE_RADIUS, 16, 12);
    for (let i = 0; i < hello.node_count; i++) {
      const mat = new THREE.MeshStandardMaterial({
        color: NODE_COLOR,
        transparent: true,
        opacity: 1,
      });
      const mesh = new THREE.Mesh(nodeGeo, mat);
      mesh.userData.node = i;
      this.nodes.push(mesh);
      this.group.add(mesh);
    }
  }

  /** Pose every mesh from one state frame (the only mutation path). */
  update(frame: StateFrame, selectedNode: number | null = null) {
    this.lastTick = frame.tick;
    const pos = frame.positions;
    const fixed = new Set(frame.fixed);

    for (let i = 0; i < this.nodes.length; i++) {
      const mesh = this.nodes[i];
      const p = pos[i];
      mesh.position.set(p[0], p[1], p[2]);
      const mat = mesh.material as THREE.MeshStandardMaterial;
      if (fixed.has(i)) {
        mat.color.setHex(PIN_COLOR);
        mesh.scale.setScalar(1.45);
      } else if (i === selectedNode) {
        mat.color.setHex(0xffffff);
        mesh.scale.setScalar(1.25);
      } else {
        mat.color.setHex(NODE_COLOR);
        mesh.scale.setScalar(1.0);
      }
    }

    for (let e = 0; e < this.edges.length; e++) {
      const [i, j] = this.edges[e];
      this.poseSegment(this.tubes[e], pos[i], pos[j]);
      const mat = this.tubes[e].material as THREE.MeshStandardMaterial;
      const margin = frame.margins[Math.floor(e / 3)] ?? null;
      const atLimit =
        e === frame.worst_edge &&
        frame.worst_margin !== null &&
        frame.worst_margin <= ALERT_MARGIN;
      if (atLimit) mat.color.setHex(ALERT_COLOR);
      else mat.color.copy(marginColor(margin));
    }

    for (let v = 0; v < this.virtual.length; v++) {
      const [i, j] = this.virtual[v];
      this.poseSegment(this.panelEdges[v], pos[i], pos[j]);
    }
  }

  private poseSegment(
    mesh: THREE.Mesh,
    a: [number, number, number],
    b: [number, number, number],
  ) {
    const va = new THREE.Vector3(...a);
    const vb = new THREE.Vector3(...b);
    const dir = vb.clone().sub(va);
    const len = Math.max(dir.length(), 1e-9);
    mesh.position.copy(va.add(vb).multiplyScalar(0.5));
    mesh.scale.set(1, len, 1);
    mesh.quaternion.setFromUnitVectors(UP, dir.multiplyScalar(1 / len));
  }

  /** Stale stream: keep the last pose, dim everything. */
  setStale(stale: boolean) {
    if (stale === this.stale) return;
    this.stale = stale;
    const op = stale ? 0.35 : 1.0;
    for (const m of [...this.tubes, ...this.panelEdges, ...this.nodes]) {
      (m.material as THREE.MeshStandardMaterial).opacity = op;
    }
  }

  /** z-up orbit camera from the view-state pose. */
  applyCamera(
    cam: THREE.PerspectiveCamera,
    pose: { azimuth: number; elevation: number; distance: number },
    target: [number, number, number] = [0, 0, 1.2],
  ) {
    const ce = Math.cos(pose.elevation);
    cam.up.set(0, 0, 1);
    cam.position.set(
      target[0] + pose.distance * ce * Math.cos(pose.azimuth),
      target[1] + pose.distance * ce * Math.sin(pose.azimuth),
      target[2] + pose.distance * Math.sin(pose.elevation),
    );
    cam.lookAt(new THREE.Vector3(...target));
  }
}
