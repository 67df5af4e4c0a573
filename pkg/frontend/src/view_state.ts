/** Console-side session state.
 *
 * Two rules the rest of the console leans on:
 *
 *  - rendered geometry always corresponds to exactly one received
 *    state_frame tick (the render loop calls frameForRender, never touches
 *    the socket);
 *  - commands are tracked until their ack arrives, and anything un-acked
 *    after two telemetry periods is surfaced as a warning.
 */

import type { Hello, StateFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "stale" | "closed";

export interface PendingCommand {
  seq: number;
  kind: string;
  sentTick: number; // latest tick seen when the command left
  acked: boolean;
  warned: boolean;
}

export interface MarginGauges {
  stability: number | null;
  worstEdge: number;
  worstMargin: number | null;
  perTriangle: (number | null)[];
}

const ACK_TIMEOUT_TICKS = 2;

export class ConsoleViewState {
  hello: Hello | null = null;
  status: ConnectionStatus = "connecting";
  selectedNode: number | null = null;
  camera = { azimuth: 0.9, elevation: 0.45, distance: 7.0 };

  /** One-frame buffer, latest wins; ingest overwrites, render consumes. */
  private latest: StateFrame | null = null;
  private rendered: StateFrame | null = null;

  pending: PendingCommand[] = [];
  warnings: string[] = [];
  events: { code: string; message: string }[] = [];
  gaugeFlash = 0; // frames left to flash after a limit event

  receivedTicks: number[] = []; // audit trail, capped
  renderedTicks: number[] = [];

  // ------------------------------------------------------------ stream

  adoptHello(h: Hello) {
    this.hello = h;
    this.status = "connected";
    this.latest = null;
    this.rendered = null;
    this.selectedNode = null;
    this.pending = [];
  }

  ingest(frame: StateFrame) {
    this.latest = frame; // latest wins
    this.status = "connected";
    this.receivedTicks.push(frame.tick);
    if (this.receivedTicks.length > 4096) this.receivedTicks.shift();
    this.sweepPending(frame.tick);
  }

  /** The frame the render loop should draw this pass.
   *
   * Consumes the buffered frame if one arrived, else repeats the last
   * rendered frame (stale repaint).  Never interpolates or extrapolates.
   */
  frameForRender(): StateFrame | null {
    if (this.latest !== null) {
      this.rendered = this.latest;
      this.latest = null;
      this.renderedTicks.push(this.rendered.tick);
      if (this.renderedTicks.length > 4096) this.renderedTicks.shift();
    }
    if (this.gaugeFlash > 0) this.gaugeFlash--;
    return this.rendered;
  }

  lastRenderedTick(): number | null {
    return this.rendered ? this.rendered.tick : null;
  }

  /** Peek at the freshest frame without consuming the render buffer. */
  currentFrame(): StateFrame | null {
    return this.latest ?? this.rendered;
  }

  markDisconnected() {
    this.status = this.rendered || this.latest ? "stale" : "closed";
  }

  // ---------------------------------------------------------- commands

  recordSent(seq: number, kind: string) {
    const tick = this.latest?.tick ?? this.rendered?.tick ?? 0;
    this.pending.push({ seq, kind, sentTick: tick, acked: false, warned: false });
  }

  recordAck(seq: number) {
    const cmd = this.pending.find((p) => p.seq === seq);
    if (cmd) cmd.acked = true;
    this.pending = this.pending.filter((p) => !p.acked || p.warned);
  }

  /** Flag commands whose ack has not arrived within two telemetry ticks. */
  private sweepPending(nowTick: number) {
    for (const p of this.pending) {
      if (!p.acked && !p.warned && nowTick - p.sentTick > ACK_TIMEOUT_TICKS) {
        p.warned = true;
        this.warnings.push(
          `no ack for ${p.kind} (seq ${p.seq}) within ${ACK_TIMEOUT_TICKS} ticks`,
        );
      }
    }
  }

  clearPending() {
    this.pending = [];
  }

  // ------------------------------------------------------------ events

  recordEvent(code: string, message: string) {
    this.events.push({ code, message });
    if (this.events.length > 64) this.events.shift();
    if (code === "limit" || code === "infeasible") {
      // server refused the motion: flash the gauges, drop queued commands
      this.gaugeFlash = 12;
      this.clearPending();
    }
  }

  // ------------------------------------------------------------ gauges

  gauges(): MarginGauges | null {
    const f = this.rendered ?? this.latest;
    if (!f) return null;
    return {
      stability: f.stability,
      worstEdge: f.worst_edge,
      worstMargin: f.worst_margin,
      perTriangle: f.margins,
    };
  }

  isFixed(node: number): boolean {
    const f = this.rendered ?? this.latest;
    return f ? f.fixed.includes(node) : false;
  }

  /** Current fixed set without consuming the render buffer. */
  fixedNodes(): number[] {
    const f = this.rendered ?? this.latest;
    return f ? [...f.fixed] : [];
  }
}
