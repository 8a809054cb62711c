/** Gateway socket wrapper: sequence numbering, reconnect, typed dispatch.
 *
 * Works against the browser WebSocket and structurally compatible
 * implementations (the `ws` package in tests). The server sends binary
 * frames, so incoming data may arrive as a string, ArrayBuffer, Blob, or
 * Buffer; everything funnels through one UTF-8 decode path.
 */

import {
  AckMessage,
  ErrorMessage,
  StateMessage,
  canonicalLine,
  decodeLine,
  isAck,
  isError,
  isState,
} from "./protocol.js";

export interface SocketLike {
  binaryType?: string;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface GatewayClientHandlers {
  onState?: (msg: StateMessage) => void;
  onAck?: (msg: AckMessage) => void;
  onError?: (msg: ErrorMessage) => void;
  onStatus?: (status: "connecting" | "open" | "lost") => void;
}

const decoder = new TextDecoder();

async function toText(data: unknown): Promise<string> {
  if (typeof data === "string") {
    return data;
  }
  if (data instanceof ArrayBuffer) {
    return decoder.decode(data);
  }
  if (ArrayBuffer.isView(data)) {
    return decoder.decode(data as Uint8Array);
  }
  if (typeof Blob !== "undefined" && data instanceof Blob) {
    return data.text();
  }
  return String(data);
}

export class GatewayClient {
  private socket: SocketLike | null = null;
  private seq = 0;
  private closed = false;
  private reconnectDelayMs = 1000;

  constructor(
    private readonly url: string,
    private readonly handlers: GatewayClientHandlers,
    private readonly makeSocket: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.closed = false;
    this.handlers.onStatus?.("connecting");
    const socket = this.makeSocket(this.url);
    if ("binaryType" in socket) {
      socket.binaryType = "arraybuffer";
    }
    socket.onopen = () => this.handlers.onStatus?.("open");
    socket.onmessage = (ev) => {
      void toText(ev.data).then((text) => this.dispatch(text));
    };
    socket.onclose = () => {
      this.handlers.onStatus?.("lost");
      this.socket = null;
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    socket.onerror = () => {
      // onclose follows; reconnects are driven from there.
    };
    this.socket = socket;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  /** Attach the next sequence number and send; returns the seq used,
   * or -1 when the socket is not open. */
  send(message: Record<string, unknown>): number {
    if (this.socket === null) {
      return -1;
    }
    const seq = ++this.seq;
    try {
      this.socket.send(canonicalLine({ ...message, seq }).trimEnd());
    } catch {
      return -1;
    }
    return seq;
  }

  private dispatch(text: string): void {
    let msg: Record<string, unknown>;
    try {
      msg = decodeLine(text);
    } catch {
      return; // unreadable server chatter; ignore rather than crash the UI
    }
    if (isState(msg)) {
      this.handlers.onState?.(msg);
    } else if (isAck(msg)) {
      this.handlers.onAck?.(msg);
    } else if (isError(msg)) {
      this.handlers.onError?.(msg);
    }
  }
}
