/** WebSocket session client.
 *
 * Owns the socket and the seq counter; everything observable lands in the
 * ConsoleViewState.  The socket type is structural (browser WebSocket and
 * the node 'ws' package both fit), so the whole client runs in tests and
 * in the e2e harness unchanged.
 */

import {
  bareCommand,
  isAck,
  isEvent,
  isHello,
  isStateFrame,
  jogCommand,
  loadConfigCommand,
  parseServer,
  setFixedNodesCommand,
  startScriptCommand,
  type ClientCommand,
  type Hello,
  type SessionEvent,
} from "./protocol.js";
import type { ConsoleViewState } from "./view_state.js";

// Handler params are `any` so both the DOM WebSocket and the node 'ws'
// socket satisfy this structurally.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class SessionClient {
  view: ConsoleViewState;
  url: string;
  onHello: ((h: Hello) => void) | null = null;
  onEvent: ((e: SessionEvent) => void) | null = null;

  private sock: SocketLike | null = null;
  private seq = 0;
  private factory: SocketFactory;

  constructor(url: string, view: ConsoleViewState, factory: SocketFactory) {
    this.url = url;
    this.view = view;
    this.factory = factory;
  }

  connect() {
    this.view.status = "connecting";
    const sock = this.factory(this.url);
    this.sock = sock;
    sock.onmessage = (ev) => this.feed(String(ev.data));
    sock.onclose = () => {
      this.view.markDisconnected();
      this.sock = null;
    };
    sock.onerror = () => {
      this.view.markDisconnected();
    };
  }

  disconnect() {
    this.sock?.close();
    this.sock = null;
    this.view.markDisconnected();
  }

  /** Route one raw server message into the view state. */
  feed(text: string) {
    const msg = parseServer(text);
    if (msg === null) return; // garbage on the wire is ignored, not fatal
    if (isHello(msg)) {
      this.view.adoptHello(msg);
      this.onHello?.(msg);
    } else if (isStateFrame(msg)) {
      this.view.ingest(msg);
    } else if (isAck(msg)) {
      this.view.recordAck(msg.seq);
    } else if (isEvent(msg)) {
      this.view.recordEvent(msg.event, msg.message);
      this.onEvent?.(msg);
    }
  }

  private post(cmd: ClientCommand) {
    if (!this.sock) return;
    this.view.recordSent(cmd.seq, cmd.type);
    this.sock.send(JSON.stringify(cmd));
  }

  jog(node: number, velocity: [number, number, number]) {
    this.post(jogCommand(++this.seq, node, velocity));
  }

  startScript(script: string, params: Record<string, unknown>) {
    this.post(startScriptCommand(++this.seq, script, params));
  }

  setFixedNodes(nodes: number[]) {
    this.post(setFixedNodesCommand(++this.seq, nodes));
  }

  loadConfig(name: string) {
    this.post(loadConfigCommand(++this.seq, name));
  }

  pause() {
    this.post(bareCommand(++this.seq, "pause"));
  }

  resume() {
    this.post(bareCommand(++this.seq, "resume"));
  }

  abort() {
    this.post(bareCommand(++this.seq, "abort"));
  }
}
