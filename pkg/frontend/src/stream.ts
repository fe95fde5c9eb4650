/**
 * Event-stream client: one SSE connection, cursor-based resume, exponential
 * backoff, and a staleness clock.
 *
 * The transport is injectable so the resume/dedupe logic is testable
 * without a browser. On reconnect the client asks for `?cursor=<last seq>`,
 * so a service restart never loses events; duplicates (at-least-once
 * delivery) are dropped by sequence number.
 */
import { StreamEvent, StreamEventSchema } from "./types.js";

export interface StreamHandle {
  close(): void;
}

/** Opens a connection and feeds raw SSE text chunks to `onChunk`. */
export type StreamConnector = (
  url: string,
  onChunk: (text: string) => void,
  onClose: (error?: Error) => void,
) => StreamHandle;

export interface EventStreamOptions {
  baseUrl: string;
  connect?: StreamConnector;
  onEvent: (event: StreamEvent) => void;
  onStatus?: (status: ConnectionStatus) => void;
  /** ms without any traffic (events or keepalives) before "stale". */
  staleAfterMs?: number;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  setTimer?: typeof setTimeout;
  clearTimer?: typeof clearTimeout;
}

export type ConnectionStatus = "connecting" | "live" | "stale" | "reconnecting";

/** Incremental parser for the SSE wire format (data:/event:/id: lines). */
export class SseParser {
  private buffer = "";

  /** Returns the `data:` payloads of every complete event in the chunk. */
  push(chunk: string): string[] {
    this.buffer += chunk;
    const payloads: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 2);
      const data = block
        .split("\n")
        .filter((line) => line.startsWith("data: "))
        .map((line) => line.slice(6))
        .join("\n");
      if (data) payloads.push(data);
    }
    return payloads;
  }
}

function fetchConnector(url: string, onChunk: (text: string) => void, onClose: (error?: Error) => void): StreamHandle {
  const controller = new AbortController();
  (async () => {
    try {
      const response = await fetch(url, { signal: controller.signal });
      if (!response.ok || !response.body) {
        onClose(new Error(`stream failed: HTTP ${response.status}`));
        return;
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        onChunk(decoder.decode(value, { stream: true }));
      }
      onClose();
    } catch (error) {
      if (!controller.signal.aborted) onClose(error as Error);
    }
  })();
  return { close: () => controller.abort() };
}

export class EventStream {
  private cursor = 0;
  private handle: StreamHandle | null = null;
  private parser = new SseParser();
  private backoffMs: number;
  private staleTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly connect_: StreamConnector;
  private readonly setTimer: typeof setTimeout;
  private readonly clearTimer: typeof clearTimeout;

  constructor(private readonly options: EventStreamOptions) {
    this.backoffMs = options.initialBackoffMs ?? 500;
    this.connect_ = options.connect ?? fetchConnector;
    this.setTimer = options.setTimer ?? setTimeout;
    this.clearTimer = options.clearTimer ?? clearTimeout;
  }

  get lastSeq(): number {
    return this.cursor;
  }

  start(fromSeq = 0): void {
    this.cursor = Math.max(this.cursor, fromSeq);
    this.stopped = false;
    this.open();
  }

  stop(): void {
    this.stopped = true;
    this.handle?.close();
    this.handle = null;
    if (this.staleTimer) this.clearTimer(this.staleTimer);
    if (this.reconnectTimer) this.clearTimer(this.reconnectTimer);
  }

  private open(): void {
    if (this.stopped) return;
    this.options.onStatus?.("connecting");
    this.parser = new SseParser();
    const base = this.options.baseUrl.replace(/\/$/, "");
    this.handle = this.connect_(
      `${base}/events?cursor=${this.cursor}`,
      (chunk) => this.onChunk(chunk),
      () => this.scheduleReconnect(),
    );
    this.armStaleTimer();
  }

  private onChunk(chunk: string): void {
    this.armStaleTimer();
    this.backoffMs = this.options.initialBackoffMs ?? 500; // healthy again
    this.options.onStatus?.("live");
    for (const payload of this.parser.push(chunk)) {
      let event: StreamEvent;
      try {
        event = StreamEventSchema.parse(JSON.parse(payload));
      } catch {
        continue; // tolerate unknown event shapes from newer servers
      }
      if (event.seq <= this.cursor) continue; // at-least-once duplicate
      this.cursor = event.seq;
      this.options.onEvent(event);
    }
  }

  private armStaleTimer(): void {
    if (this.staleTimer) this.clearTimer(this.staleTimer);
    const staleAfter = this.options.staleAfterMs ?? 5000;
    this.staleTimer = this.setTimer(() => {
      this.options.onStatus?.("stale");
    }, staleAfter);
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    this.handle = null;
    this.options.onStatus?.("reconnecting");
    this.reconnectTimer = this.setTimer(() => this.open(), this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, this.options.maxBackoffMs ?? 10_000);
  }
}
