/** Browser entry point: wires the socket, the 3D view, and the panels.
 *
 * The render loop never reads the socket directly; frames flow
 * socket -> ConsoleViewState (latest-wins buffer) -> frameForRender().
 */

import * as THREE from "three";
import { SessionClient } from "./net.js";
import { ConsoleViewState } from "./view_state.js";
import { TrussScene } from "./scene.js";
import { jogFromDrag, jogRelease } from "./jog.js";
import {
  buildParams,
  formsFor,
  ScriptRunner,
  type ScriptForm,
} from "./script_panel.js";
import type { Hello } from "./protocol.js";

const JOG_GAIN = 2.0; // 1/s, drag displacement to velocity
const JOG_PERIOD_MS = 50; // resend cadence while dragging

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function defaultServerUrl(): string {
  const q = new URLSearchParams(location.search).get("server");
  if (q) return q;
  return `ws://${location.hostname || "127.0.0.1"}:8700/ws`;
}

const view = new ConsoleViewState();
const truss = new TrussScene();
let client: SessionClient | null = null;
let runner: ScriptRunner | null = null;
let forms: ScriptForm[] = [];

// ------------------------------------------------------------- renderer

const canvas = el<HTMLCanvasElement>("view");
const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
const camera = new THREE.PerspectiveCamera(50, 1, 0.05, 100);
truss.scene.background = new THREE.Color(0x14181d);

function resize() {
  const w = canvas.clientWidth || canvas.parentElement!.clientWidth;
  const h = canvas.clientHeight || canvas.parentElement!.clientHeight;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);

let renderedFrames = 0;
let rateAnchor = performance.now();

function loop() {
  requestAnimationFrame(loop);
  const frame = view.frameForRender();
  if (frame) {
    truss.update(frame, view.selectedNode);
    const progress = runner?.observe(frame);
    if (progress !== null && progress !== undefined)
      el<HTMLProgressElement>("script-progress").value = progress;
    renderedFrames++;
  }
  truss.setStale(view.status === "stale");
  truss.applyCamera(camera, view.camera);
  renderer.render(truss.scene, camera);
  refreshHud(frame?.tick ?? null);
  const now = performance.now();
  if (now - rateAnchor > 1000) {
    el("rate").textContent = `${renderedFrames} ticks/s`;
    renderedFrames = 0;
    rateAnchor = now;
  }
}

// ------------------------------------------------------------------ HUD

function refreshHud(tick: number | null) {
  el("tick").textContent = tick === null ? "-" : String(tick);
  el("status").textContent = view.status;
  el("status").className = `pill ${view.status}`;
  el("stale-banner").style.display = view.status === "stale" ? "block" : "none";

  const g = view.gauges();
  const stab = el<HTMLProgressElement>("gauge-stability");
  const marg = el<HTMLProgressElement>("gauge-margin");
  if (g) {
    stab.value = Math.min(1, Math.max(0, (g.stability ?? 0) / 0.5));
    marg.value = Math.min(1, Math.max(0, (g.worstMargin ?? 0) / 0.5));
    el("gauge-text").textContent =
      `stability ${fmt(g.stability)} m | worst edge ${g.worstEdge} ` +
      `margin ${fmt(g.worstMargin)} m`;
  }
  const flash = view.gaugeFlash > 0 && view.gaugeFlash % 4 < 2;
  el("gauges").classList.toggle("flash", flash);

  const log = el("log");
  const lines = [
    ...view.warnings.slice(-4).map((w) => `! ${w}`),
    ...view.events.slice(-6).map((e) => `[${e.code}] ${e.message}`),
  ];
  log.textContent = lines.join("\n");

  if (view.selectedNode !== null) {
    el("selected").textContent =
      `node ${view.selectedNode}` +
      (view.isFixed(view.selectedNode) ? " (fixed)" : "");
  } else {
    el("selected").textContent = "none";
  }
}

function fmt(v: number | null): string {
  return v === null ? "inf" : v.toFixed(3);
}

// ----------------------------------------------------------- interaction

const ray = new THREE.Raycaster();
let dragging: { node: number; grab: THREE.Vector3; plane: THREE.Plane } | null =
  null;
let orbiting: { x: number; y: number } | null = null;
let lastJogSent = 0;

function pointerRay(ev: PointerEvent): THREE.Raycaster {
  const r = canvas.getBoundingClientRect();
  const ndc = new THREE.Vector2(
    ((ev.clientX - r.left) / r.width) * 2 - 1,
    -((ev.clientY - r.top) / r.height) * 2 + 1,
  );
  ray.setFromCamera(ndc, camera);
  return ray;
}

canvas.addEventListener("pointerdown", (ev) => {
  canvas.setPointerCapture(ev.pointerId);
  const hits = pointerRay(ev).intersectObjects(truss.nodes, false);
  if (hits.length > 0) {
    const node = hits[0].object.userData.node as number;
    view.selectedNode = node;
    if (ev.shiftKey) {
      togglePin(node);
      return;
    }
    const grab = hits[0].point.clone();
    const normal = camera.getWorldDirection(new THREE.Vector3());
    dragging = { node, grab, plane: new THREE.Plane().setFromNormalAndCoplanarPoint(normal, grab) };
  } else {
    orbiting = { x: ev.clientX, y: ev.clientY };
  }
});

canvas.addEventListener("pointermove", (ev) => {
  if (dragging) {
    const hit = new THREE.Vector3();
    if (!pointerRay(ev).ray.intersectPlane(dragging.plane, hit)) return;
    const now = performance.now();
    if (now - lastJogSent < JOG_PERIOD_MS) return;
    lastJogSent = now;
    const drag: [number, number, number] = [
      hit.x - dragging.grab.x,
      hit.y - dragging.grab.y,
      hit.z - dragging.grab.z,
    ];
    const intent = jogFromDrag(view, dragging.node, drag, JOG_GAIN);
    if ("suppressed" in intent) {
      el("hint").textContent = intent.hint;
      return;
    }
    el("hint").textContent = "";
    client?.jog(intent.node, intent.velocity);
  } else if (orbiting) {
    view.camera.azimuth -= (ev.clientX - orbiting.x) * 0.008;
    view.camera.elevation = Math.min(
      1.45,
      Math.max(-0.2, view.camera.elevation + (ev.clientY - orbiting.y) * 0.006),
    );
    orbiting = { x: ev.clientX, y: ev.clientY };
  }
});

canvas.addEventListener("pointerup", () => {
  if (dragging) {
    const stop = jogRelease(dragging.node);
    client?.jog(stop.node, stop.velocity); // released drag commands zero
    dragging = null;
  }
  orbiting = null;
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  view.camera.distance = Math.min(
    25,
    Math.max(1.5, view.camera.distance * (1 + ev.deltaY * 0.001)),
  );
});

function togglePin(node: number) {
  if (!client) return;
  const current = new Set<number>(view.fixedNodes());
  if (current.has(node)) current.delete(node);
  else current.add(node);
  client.setFixedNodes([...current].sort((a, b) => a - b));
}

// ---------------------------------------------------------- script panel

function buildPanel(hello: Hello) {
  forms = formsFor(hello);
  const host = el("scripts");
  host.innerHTML = "";
  for (const form of forms) {
    const box = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = form.title;
    box.appendChild(legend);
    const inputs: Record<string, HTMLInputElement | HTMLSelectElement> = {};
    for (const f of form.fields) {
      const label = document.createElement("label");
      label.textContent = f.label;
      if (f.kind === "choice") {
        const sel = document.createElement("select");
        for (const c of f.choices!) {
          const opt = document.createElement("option");
          opt.textContent = c.label;
          sel.appendChild(opt);
        }
        inputs[f.name] = sel;
        label.appendChild(sel);
      } else {
        const inp = document.createElement("input");
        inp.type = f.kind === "slider" ? "range" : "number";
        if (f.min !== undefined) inp.min = String(f.min);
        if (f.max !== undefined) inp.max = String(f.max);
        if (f.step !== undefined) inp.step = String(f.step);
        inp.value = String(f.def);
        if (f.kind === "slider") {
          const out = document.createElement("span");
          out.textContent = ` ${inp.value} deg`;
          inp.addEventListener("input", () => {
            out.textContent = ` ${inp.value} deg`;
          });
          label.appendChild(inp);
          label.appendChild(out);
        } else {
          label.appendChild(inp);
        }
        inputs[f.name] = inp;
      }
      box.appendChild(label);
    }
    const run = document.createElement("button");
    run.textContent = form.repeatable ? "Run xN" : "Run";
    run.addEventListener("click", () => {
      const values: Record<string, unknown> = {};
      for (const [k, v] of Object.entries(inputs)) values[k] = v.value;
      const params = buildParams(form, values);
      const repeats = form.repeatable
        ? Math.max(1, Number(values["cycles"] ?? 1) | 0)
        : 1;
      runner?.start(form.script, params, repeats);
    });
    box.appendChild(run);
    host.appendChild(box);
  }
  const bar = el<HTMLProgressElement>("script-progress");
  bar.value = 0;
}

// ------------------------------------------------------------- lifecycle

function connect(url: string) {
  client?.disconnect();
  client = new SessionClient(url, view, (u) => new WebSocket(u));
  runner = new ScriptRunner((script, params) =>
    client!.startScript(script, params),
  );
  client.onHello = (h) => {
    truss.buildFrom(h);
    buildPanel(h);
    el("role").textContent = h.role;
    el("config").textContent = h.config;
    el("controls").classList.toggle("readonly", h.role !== "controller");
    const cfgSel = el<HTMLSelectElement>("config-select");
    cfgSel.innerHTML = "";
    for (const name of h.configs) {
      const opt = document.createElement("option");
      opt.textContent = name;
      opt.selected = name === h.config;
      cfgSel.appendChild(opt);
    }
    resize();
  };
  client.onEvent = (e) => {
    if (e.event === "script_done") runner?.onScriptEnd(false);
    if (e.event === "script_aborted") runner?.onScriptEnd(true);
  };
  client.connect();
}

el("connect").addEventListener("click", () => {
  connect(el<HTMLInputElement>("server-url").value);
});
el("pause").addEventListener("click", () => client?.pause());
el("resume").addEventListener("click", () => client?.resume());
el("abort").addEventListener("click", () => {
  client?.abort();
  runner?.onScriptEnd(true);
});
el<HTMLSelectElement>("config-select").addEventListener("change", (ev) => {
  client?.loadConfig((ev.target as HTMLSelectElement).value);
});

el<HTMLInputElement>("server-url").value = defaultServerUrl();
connect(defaultServerUrl());
resize();
loop();

setInterval(() => {
  if (runner && runner.active !== null) {
    el("script-label").textContent =
      `${runner.active} (${runner.runsDone + 1}/${runner.runsTotal})`;
  } else {
    el("script-label").textContent = "idle";
  }
}, 250);
