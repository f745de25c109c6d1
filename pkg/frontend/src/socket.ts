/**
 * The gateway's full-duplex channel: JSON envelopes in text messages, raw
 * frame records in binary messages.
 *
 * The WebSocket implementation is injected so the same class runs on the
 * browser's native socket and on node test sockets. Connection loss flips
 * the status to "disconnected" and retries on a fixed delay until close()
 * is called explicitly.
 */

export interface Envelope {
  type: string;
  payload: Record<string, unknown>;
}

export type SocketStatus = "connecting" | "connected" | "disconnected";

/** The subset of the WebSocket API the console relies on. */
export interface SocketLike {
  binaryType: string;
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

function browserFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

export interface ConsoleSocketOptions {
  /** Delay before re-dialing after an unexpected close. */
  reconnectDelayMs?: number;
  /** Re-dial automatically after connection loss (default true). */
  autoReconnect?: boolean;
}

export class ConsoleSocket {
  private socket: SocketLike | null = null;
  private status_: SocketStatus = "disconnected";
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private tagCounter = 0;

  private statusHandlers: Array<(status: SocketStatus) => void> = [];
  private messageHandlers: Array<(envelope: Envelope) => void> = [];
  private binaryHandlers: Array<(data: Uint8Array) => void> = [];

  constructor(
    readonly url: string,
    private readonly factory: SocketFactory = browserFactory,
    private readonly options: ConsoleSocketOptions = {},
  ) {}

  get status(): SocketStatus {
    return this.status_;
  }

  onStatus(handler: (status: SocketStatus) => void): void {
    this.statusHandlers.push(handler);
  }

  onMessage(handler: (envelope: Envelope) => void): void {
    this.messageHandlers.push(handler);
  }

  onBinary(handler: (data: Uint8Array) => void): void {
    this.binaryHandlers.push(handler);
  }

  open(): void {
    if (this.socket !== null) return;
    this.closedByUser = false;
    this.setStatus("connecting");
    const socket = this.factory(this.url);
    socket.binaryType = "arraybuffer";
    this.socket = socket;
    socket.addEventListener("open", () => this.setStatus("connected"));
    socket.addEventListener("message", (event: { data: unknown }) => this.route(event.data));
    socket.addEventListener("close", () => this.handleClose());
    socket.addEventListener("error", () => {
      // the close event that follows carries the reconnect logic
    });
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setStatus("disconnected");
  }

  send(type: string, payload: Record<string, unknown> = {}): void {
    if (this.socket === null || this.status_ !== "connected") {
      throw new Error(`socket is ${this.status_}`);
    }
    this.socket.send(JSON.stringify({ type, payload }));
  }

  /** Fresh correlation tag for command/marker round trips. */
  nextTag(): string {
    this.tagCounter += 1;
    return `t${this.tagCounter}`;
  }

  /** One-shot await for the next envelope matching the predicate. */
  waitForMessage(
    predicate: (envelope: Envelope) => boolean,
    timeoutMs = 10_000,
  ): Promise<Envelope> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.messageHandlers = this.messageHandlers.filter((h) => h !== handler);
        reject(new Error(`timed out after ${timeoutMs} ms waiting for a matching message`));
      }, timeoutMs);
      const handler = (envelope: Envelope) => {
        if (!predicate(envelope)) return;
        clearTimeout(timer);
        this.messageHandlers = this.messageHandlers.filter((h) => h !== handler);
        resolve(envelope);
      };
      this.messageHandlers.push(handler);
    });
  }

  /** Await the connection being established. */
  waitForOpen(timeoutMs = 10_000): Promise<void> {
    if (this.status_ === "connected") return Promise.resolve();
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out after ${timeoutMs} ms waiting for the socket`)),
        timeoutMs,
      );
      this.statusHandlers.push((status) => {
        if (status === "connected") {
          clearTimeout(timer);
          resolve();
        }
      });
    });
  }

  private route(data: unknown): void {
    if (typeof data === "string") {
      let envelope: Envelope;
      try {
        const doc = JSON.parse(data) as { type?: unknown; payload?: unknown };
        envelope = {
          type: typeof doc.type === "string" ? doc.type : "",
          payload:
            doc.payload !== null && typeof doc.payload === "object"
              ? (doc.payload as Record<string, unknown>)
              : {},
        };
      } catch {
        return; // not an envelope; ignore
      }
      for (const handler of [...this.messageHandlers]) handler(envelope);
      return;
    }
    let bytes: Uint8Array | null = null;
    if (data instanceof ArrayBuffer) bytes = new Uint8Array(data);
    else if (data instanceof Uint8Array) bytes = data;
    if (bytes !== null) {
      for (const handler of [...this.binaryHandlers]) handler(bytes);
    }
  }

  private handleClose(): void {
    this.socket = null;
    this.setStatus("disconnected");
    if (this.closedByUser || this.options.autoReconnect === false) return;
    const delay = this.options.reconnectDelayMs ?? 1000;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.closedByUser) this.open();
    }, delay);
  }

  private setStatus(status: SocketStatus): void {
    if (status === this.status_) return;
    this.status_ = status;
    for (const handler of [...this.statusHandlers]) handler(status);
  }
}
