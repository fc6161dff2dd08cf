/** Reconnecting websocket link to the teleop server.
 *
 * Latest-snapshot pattern: the link keeps only the most recent state message;
 * rendering reads it whenever a frame is due. Command sequence numbers stay
 * monotonic across reconnects so the server can spot reordering.
 */

import {
  Drive,
  RecordAction,
  SavedMsg,
  StateMsg,
  cmdMsg,
  isSavedMsg,
  isStateMsg,
  recordMsg,
  resetMsg,
} from "./protocol.js";

export type LinkStatus = "connecting" | "live" | "closed";

/** The subset of the WebSocket API the link needs; injectable for tests. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  readyState: number;
}

export interface LinkOptions {
  backoffMs?: number;
  backoffCapMs?: number;
  makeSocket?: (url: string) => SocketLike;
}

const OPEN = 1;

export class TeleopLink {
  status: LinkStatus = "closed";
  lastState: StateMsg | null = null;
  lastStateAt = 0; // ms timestamp of the newest state message
  seq = 0;

  onstate: ((msg: StateMsg) => void) | null = null;
  onsaved: ((msg: SavedMsg) => void) | null = null;
  onstatus: ((status: LinkStatus) => void) | null = null;
  onrejected: ((raw: unknown) => void) | null = null;

  private sock: SocketLike | null = null;
  private backoff: number;
  private readonly backoff0: number;
  private readonly backoffCap: number;
  private readonly makeSocket: (url: string) => SocketLike;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    readonly url: string,
    opts: LinkOptions = {},
  ) {
    this.backoff0 = opts.backoffMs ?? 500;
    this.backoffCap = opts.backoffCapMs ?? 2000;
    this.backoff = this.backoff0;
    this.makeSocket = opts.makeSocket ?? ((u) => new WebSocket(u) as unknown as SocketLike);
  }

  connect(): void {
    this.stopped = false;
    this.setStatus("connecting");
    const sock = this.makeSocket(this.url);
    this.sock = sock;
    sock.onopen = () => {
      this.backoff = this.backoff0;
      this.setStatus("live");
    };
    sock.onclose = () => this.dropped(sock);
    sock.onerror = () => this.dropped(sock);
    sock.onmessage = (ev) => this.receive(ev.data);
  }

  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    this.sock?.close();
    this.sock = null;
    this.setStatus("closed");
  }

  get live(): boolean {
    return this.status === "live" && this.sock !== null && this.sock.readyState === OPEN;
  }

  sendDrive(drive: Drive): void {
    if (!this.live) return; // best-effort stream; drops are fine
    this.sock!.send(cmdMsg(drive, this.seq++));
  }

  sendRecord(action: RecordAction): void {
    if (this.live) this.sock!.send(recordMsg(action));
  }

  sendReset(scenario: string): void {
    if (this.live) this.sock!.send(resetMsg(scenario));
  }

  private receive(data: unknown): void {
    let parsed: unknown;
    try {
      parsed = JSON.parse(String(data));
    } catch {
      this.onrejected?.(data);
      return;
    }
    if (isStateMsg(parsed)) {
      this.lastState = parsed;
      this.lastStateAt = Date.now();
      this.onstate?.(parsed);
    } else if (isSavedMsg(parsed)) {
      this.onsaved?.(parsed);
    } else {
      this.onrejected?.(parsed);
    }
  }

  private dropped(sock: SocketLike): void {
    if (sock !== this.sock || this.stopped) return;
    this.sock = null;
    this.setStatus("connecting");
    if (this.reconnectTimer !== null) return;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.stopped) this.connect();
    }, this.backoff);
    this.backoff = Math.min(this.backoff * 2, this.backoffCap);
  }

  private setStatus(s: LinkStatus): void {
    if (s === this.status) return;
    this.status = s;
    this.onstatus?.(s);
  }
}
