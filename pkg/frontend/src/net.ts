// WebSocket client with automatic reconnect. The server guarantees
// per-connection ordering, so messages are handed over exactly as received.

export type ConnectionState = "connecting" | "open" | "closed";

export interface GatewayHandlers {
  onText(text: string): void;
  onBinary(buffer: ArrayBuffer): void;
  onState(state: ConnectionState): void;
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class GatewayClient {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly handlers: GatewayHandlers,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.ws?.close();
  }

  /** Send one already-encoded client message; drops silently when closed. */
  send(text: string): void {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
    }
  }

  get isOpen(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  private open(): void {
    this.handlers.onState("connecting");
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.handlers.onState("open");
    };
    ws.onmessage = (event: MessageEvent) => {
      if (typeof event.data === "string") {
        this.handlers.onText(event.data);
      } else if (event.data instanceof ArrayBuffer) {
        this.handlers.onBinary(event.data);
      }
    };
    ws.onclose = () => {
      this.handlers.onState("closed");
      this.scheduleReconnect();
    };
    ws.onerror = () => {
      // onclose follows and owns the reconnect
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const delay = Math.min(BACKOFF_MAX_MS, BACKOFF_BASE_MS * 2 ** this.attempts);
    this.attempts += 1;
    this.timer = setTimeout(() => this.open(), delay + Math.random() * 250);
  }
}
