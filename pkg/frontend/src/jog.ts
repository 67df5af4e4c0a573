/** Drag-to-jog mapping.
 *
 * All physics and limits live server-side; the console only pre-clamps the
 * velocity for UX so a wild mouse drag cannot ask for nonsense.  The cap
 * comes from the hello limits (falls back to the wire speed cap).
 */

import type { ConsoleViewState } from "./view_state.js";

export const DEFAULT_SPEED_CAP = 0.0613; // m/s, matches the roller cap

export interface JogIntent {
  node: number;
  velocity: [number, number, number];
}

export interface SuppressedJog {
  suppressed: true;
  hint: string;
}

export function clampVelocity(
  v: [number, number, number],
  cap: number,
): [number, number, number] {
  const norm = Math.hypot(v[0], v[1], v[2]);
  if (norm <= cap || norm === 0) return v;
  const s = cap / norm;
  return [v[0] * s, v[1] * s, v[2] * s];
}

/** Map a world-space drag vector to a jog velocity.
 *
 * `drag` is the displacement of the grab point in meters (the scene layer
 * already unprojected the pointer onto the camera plane); `gain` is 1/s.
 */
export function dragToVelocity(
  drag: [number, number, number],
  gain: number,
  cap: number,
): [number, number, number] {
  return clampVelocity(
    [drag[0] * gain, drag[1] * gain, drag[2] * gain],
    cap,
  );
}

/** Build the jog intent for a drag, or refuse it for a fixed node. */
export function jogFromDrag(
  view: ConsoleViewState,
  node: number,
  drag: [number, number, number],
  gain: number,
): JogIntent | SuppressedJog {
  if (view.isFixed(node)) {
    return {
      suppressed: true,
      hint: `node ${node} is fixed; unpin it before jogging`,
    };
  }
  const cap = view.hello?.limits.speed_cap ?? DEFAULT_SPEED_CAP;
  return { node, velocity: dragToVelocity(drag, gain, cap) };
}

/** A released drag always commands zero velocity so the node stops. */
export function jogRelease(node: number): JogIntent {
  return { node, velocity: [0, 0, 0] };
}
