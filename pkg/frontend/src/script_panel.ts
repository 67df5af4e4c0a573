/** Script launcher panel: parameter forms, queued repeats, progress.
 *
 * The panel builds start_script messages; it never runs physics.  Bounds
 * shown on the forms mirror the server's envelope and the sweep angle is
 * clamped console-side as well, so the slider (or a fiddled DOM input)
 * can never emit a command beyond the documented envelope.
 */

import type { Hello, StateFrame } from "./protocol.js";

export interface FieldSpec {
  name: string;
  label: string;
  kind: "number" | "slider" | "choice" | "int";
  def: number | string;
  min?: number;
  max?: number;
  step?: number;
  choices?: { label: string; value: Record<string, unknown> }[];
}

export interface ScriptForm {
  script: string;
  title: string;
  fields: FieldSpec[];
  repeatable: boolean;
}

export const SWEEP_LIMIT_DEG = 35;

export function clampSweep(deg: number, limit = SWEEP_LIMIT_DEG): number {
  if (Number.isNaN(deg)) return 0;
  return Math.min(limit, Math.max(-limit, deg));
}

/** The tilt pivot selector: one entry per upper joint and per upper edge. */
export function tiltTargets(): { label: string; value: Record<string, unknown> }[] {
  const out: { label: string; value: Record<string, unknown> }[] = [];
  for (let k = 0; k < 3; k++)
    out.push({ label: `joint ${k}`, value: { axis_mode: "joint", anchor: k } });
  for (let k = 0; k < 3; k++)
    out.push({ label: `edge ${k}`, value: { axis_mode: "edge", anchor: k } });
  return out;
}

export function formsFor(hello: Hello): ScriptForm[] {
  const sweepLim = hello.limits.sweep_limit_deg ?? SWEEP_LIMIT_DEG;
  const all: Record<string, ScriptForm> = {
    twist: {
      script: "twist",
      title: "Twist",
      repeatable: false,
      fields: [
        { name: "angle_deg", label: "angle (deg)", kind: "number", def: 120 },
      ],
    },
    height: {
      script: "height",
      title: "Squat / extend",
      repeatable: false,
      fields: [
        {
          name: "target_height",
          label: "target height (m)",
          kind: "number",
          def: 2.5,
          step: 0.05,
        },
      ],
    },
    tilt: {
      script: "tilt",
      title: "Panel tilt",
      repeatable: false,
      fields: [
        { name: "angle_deg", label: "angle (deg)", kind: "number", def: 20 },
        {
          name: "pivot",
          label: "pivot",
          kind: "choice",
          def: "joint 0",
          choices: tiltTargets(),
        },
      ],
    },
    sweep: {
      script: "sweep",
      title: "Panel sweep",
      repeatable: false,
      fields: [
        {
          name: "angle_deg",
          label: "azimuth (deg)",
          kind: "slider",
          def: 0,
          min: -sweepLim,
          max: sweepLim,
          step: 1,
        },
      ],
    },
    locomotion: {
      script: "locomotion",
      title: "Locomotion cycle",
      repeatable: true,
      fields: [
        { name: "cycles", label: "cycles", kind: "int", def: 1, min: 1, max: 8 },
      ],
    },
  };
  return hello.scripts.filter((s) => s in all).map((s) => all[s]);
}

/** Turn form values into start_script params, applying console-side clamps. */
export function buildParams(
  form: ScriptForm,
  values: Record<string, unknown>,
): Record<string, unknown> {
  const params: Record<string, unknown> = {};
  for (const f of form.fields) {
    const raw = values[f.name] ?? f.def;
    if (f.kind === "choice") {
      const pick = f.choices!.find((c) => c.label === raw) ?? f.choices![0];
      Object.assign(params, pick.value);
    } else if (f.name === "cycles") {
      continue; // repeat count, not a script parameter
    } else {
      let num = typeof raw === "number" ? raw : Number(raw);
      if (!Number.isFinite(num)) num = Number(f.def);
      if (form.script === "sweep" && f.name === "angle_deg")
        num = clampSweep(num, f.max ?? SWEEP_LIMIT_DEG);
      params[f.name] = num;
    }
  }
  return params;
}

/** Sequenced script runs: "Locomotion cycle x2" is two start_script
 * messages sent back to back, the second leaving only after the first
 * finishes.  Progress is derived from ticks alone.
 */
export class ScriptRunner {
  private queue: { script: string; params: Record<string, unknown> }[] = [];
  private send: (script: string, params: Record<string, unknown>) => void;

  active: string | null = null;
  runsTotal = 0;
  runsDone = 0;
  private startTick: number | null = null;
  private maxRemaining = 0;
  private lastRemaining = 0;

  constructor(send: (script: string, params: Record<string, unknown>) => void) {
    this.send = send;
  }

  start(script: string, params: Record<string, unknown>, repeats = 1) {
    this.queue = [];
    for (let i = 0; i < repeats; i++) this.queue.push({ script, params });
    this.runsTotal = repeats;
    this.runsDone = 0;
    this.launchNext();
  }

  private launchNext() {
    const next = this.queue.shift();
    if (!next) {
      this.active = null;
      return;
    }
    this.active = next.script;
    this.startTick = null;
    this.maxRemaining = 0;
    this.lastRemaining = 0;
    this.send(next.script, next.params);
  }

  /** Feed telemetry; returns progress in [0, 1] or null when idle. */
  observe(frame: StateFrame): number | null {
    if (this.active === null) return null;
    if (frame.script.active) {
      if (this.startTick === null) this.startTick = frame.tick;
      this.maxRemaining = Math.max(this.maxRemaining, frame.script.remaining);
      this.lastRemaining = frame.script.remaining;
    }
    const within = this.maxRemaining > 0
      ? 1 - this.lastRemaining / this.maxRemaining
      : 0;
    return (this.runsDone + within) / this.runsTotal;
  }

  /** Call on script_done / script_aborted events. */
  onScriptEnd(aborted: boolean) {
    if (this.active === null) return;
    this.runsDone++;
    if (aborted) {
      this.queue = [];
      this.active = null;
      return;
    }
    this.launchNext();
  }
}
