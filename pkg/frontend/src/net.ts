// WebSocket link to the service: binary wire messages both ways, automatic
// reconnect with capped backoff, and a safe send that drops while closed.

import { StreamDecoder, WireMessage, encode } from "./codec.js";
import { ConnectionState } from "./store.js";

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 5000;

export interface LinkEvents {
  onMessage: (message: WireMessage) => void;
  onState: (state: ConnectionState) => void;
}

export class ConsoleLink {
  private ws: WebSocket | null = null;
  private decoder = new StreamDecoder();
  private backoff = BACKOFF_START_MS;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private events: LinkEvents,
  ) {}

  start(): void {
    this.closed = false;
    this.open();
  }

  stop(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.ws?.close();
    this.ws = null;
  }

  get isOpen(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(message: WireMessage): boolean {
    if (!this.isOpen) {
      return false;
    }
    const blob = encode(message);
    this.ws!.send(blob.buffer.slice(blob.byteOffset, blob.byteOffset + blob.byteLength));
    return true;
  }

  private open(): void {
    this.events.onState("connecting");
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;
    ws.onopen = () => {
      this.backoff = BACKOFF_START_MS;
      this.events.onState("open");
    };
    ws.onmessage = (ev: MessageEvent) => {
      if (!(ev.data instanceof ArrayBuffer)) {
        return;
      }
      // the bridge sends whole messages, but tolerate refragmentation
      for (const message of this.decoder.feed(new Uint8Array(ev.data))) {
        this.events.onMessage(message);
      }
    };
    ws.onclose = () => {
      if (this.ws === ws) {
        this.ws = null;
      }
      this.events.onState("closed");
      this.scheduleRetry();
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  private scheduleRetry(): void {
    if (this.closed || this.timer !== null) {
      return;
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.closed) {
        this.open();
      }
    }, this.backoff);
    this.backoff = Math.min(this.backoff * 2, BACKOFF_MAX_MS);
  }
}
