// Connection to the player service: initial GET /state, a WebSocket for
// pushed events, POST /command for control. On any drop the socket
// reconnects with backoff and the full state is refetched from GET /state,
// so controls are never left showing stale values.

import type { Command, ServerEvent, Snapshot } from "./protocol.js";

export interface WebSocketLike {
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onopen: (() => void) | null;
  close(): void;
}

export interface TransportOptions {
  fetchFn?: typeof fetch;
  wsFactory?: (url: string) => WebSocketLike;
  reconnectDelayMs?: number;
  schedule?: (fn: () => void, delayMs: number) => unknown;
}

export interface TransportHooks {
  onEvent(event: ServerEvent): void;
  onStatus(connected: boolean): void;
}

export class PlayerClient {
  private fetchFn: typeof fetch;
  private wsFactory: (url: string) => WebSocketLike;
  private reconnectDelayMs: number;
  private schedule: (fn: () => void, delayMs: number) => unknown;
  private socket: WebSocketLike | null = null;
  private stopped = false;

  constructor(
    private baseUrl: string,
    private hooks: TransportHooks,
    options: TransportOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.wsFactory =
      options.wsFactory ??
      ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    this.reconnectDelayMs = options.reconnectDelayMs ?? 1000;
    this.schedule = options.schedule ?? ((fn, delay) => setTimeout(fn, delay));
  }

  async start(): Promise<void> {
    await this.refresh();
    this.openSocket();
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }

  /** Pull the authoritative snapshot; used on startup and every reconnect. */
  async refresh(): Promise<void> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/state`);
      const state = (await response.json()) as Snapshot;
      this.hooks.onEvent({ type: "state-changed", state });
      this.hooks.onStatus(true);
    } catch {
      this.hooks.onStatus(false);
      this.scheduleReconnect();
    }
  }

  private openSocket(): void {
    if (this.stopped) return;
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + "/events";
    let socket: WebSocketLike;
    try {
      socket = this.wsFactory(wsUrl);
    } catch {
      this.hooks.onStatus(false);
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => this.hooks.onStatus(true);
    socket.onmessage = (message) => {
      try {
        this.hooks.onEvent(JSON.parse(message.data) as ServerEvent);
      } catch {
        // tolerate malformed frames
      }
    };
    const dropped = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.hooks.onStatus(false);
      this.scheduleReconnect();
    };
    socket.onclose = dropped;
    socket.onerror = dropped;
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    this.schedule(() => {
      if (this.stopped) return;
      void this.refresh().then(() => {
        if (!this.socket) this.openSocket();
      });
    }, this.reconnectDelayMs);
  }

  async send(command: Command): Promise<ServerEvent[]> {
    const response = await this.fetchFn(`${this.baseUrl}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(command),
    });
    const doc = (await response.json()) as { events?: ServerEvent[] };
    return doc.events ?? [];
  }
}
