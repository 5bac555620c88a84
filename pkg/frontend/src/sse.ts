import type { AuditRecord } from './types';

export interface SseEvent {
  event: string;
  data: string;
  id?: string;
}

/**
 * Incremental server-sent-events parser. Feed it decoded text chunks in any
 * split; complete frames come out, comment-only frames (keepalives) do not.
 */
export class SseParser {
  private buffer = '';

  feed(chunk: string): SseEvent[] {
    this.buffer += chunk.replace(/\r\n/g, '\n');
    const events: SseEvent[] = [];
    let sep: number;
    while ((sep = this.buffer.indexOf('\n\n')) !== -1) {
      const frame = this.buffer.slice(0, sep);
      this.buffer = this.buffer.slice(sep + 2);
      const parsed = this.parseFrame(frame);
      if (parsed) events.push(parsed);
    }
    return events;
  }

  private parseFrame(frame: string): SseEvent | null {
    let event = 'message';
    let id: string | undefined;
    const data: string[] = [];
    for (const line of frame.split('\n')) {
      if (!line || line.startsWith(':')) continue;
      const colon = line.indexOf(':');
      const field = colon === -1 ? line : line.slice(0, colon);
      let value = colon === -1 ? '' : line.slice(colon + 1);
      if (value.startsWith(' ')) value = value.slice(1);
      if (field === 'data') data.push(value);
      else if (field === 'event') event = value;
      else if (field === 'id') id = value;
    }
    if (data.length === 0) return null;
    return { event, data: data.join('\n'), id };
  }
}

export interface TailHandlers {
  onRecord: (record: AuditRecord) => void;
  /** Pending-count change while paused. */
  onPending?: (count: number) => void;
  /** Records were missed across a reconnect (seq gap). */
  onGap?: (missed: number) => void;
  onStatus?: (status: 'connecting' | 'live' | 'reconnecting' | 'stopped') => void;
}

export type StreamOpener = (signal: AbortSignal) => Promise<ReadableStream<Uint8Array>>;

/**
 * Live audit-tail subscription: parses the SSE stream, supports
 * pause/resume buffering, and reconnects after drops. Sequence numbers in the
 * records themselves reveal any gap introduced by a disconnect.
 */
export class AuditTail {
  private paused = false;
  private pending: AuditRecord[] = [];
  private lastSeq = -1;
  private stopped = false;
  private abort: AbortController | null = null;

  constructor(
    private open: StreamOpener,
    private handlers: TailHandlers,
    private reconnectDelayMs = 1000,
    private sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ) {}

  async start(): Promise<void> {
    this.stopped = false;
    let first = true;
    while (!this.stopped) {
      this.handlers.onStatus?.(first ? 'connecting' : 'reconnecting');
      this.abort = new AbortController();
      try {
        const stream = await this.open(this.abort.signal);
        this.handlers.onStatus?.('live');
        await this.consume(stream, !first);
      } catch {
        /* drop: fall through to reconnect */
      }
      first = false;
      if (!this.stopped) await this.sleep(this.reconnectDelayMs);
    }
    this.handlers.onStatus?.('stopped');
  }

  private async consume(stream: ReadableStream<Uint8Array>, afterReconnect: boolean): Promise<void> {
    const parser = new SseParser();
    const decoder = new TextDecoder();
    const reader = stream.getReader();
    let firstRecord = afterReconnect;
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
        let record: AuditRecord;
        try {
          record = JSON.parse(event.data) as AuditRecord;
        } catch {
          continue;
        }
        if (record.seq <= this.lastSeq) continue; // replayed backlog
        if (firstRecord && this.lastSeq >= 0 && record.seq > this.lastSeq + 1) {
          this.handlers.onGap?.(record.seq - this.lastSeq - 1);
        }
        firstRecord = false;
        this.lastSeq = record.seq;
        if (this.paused) {
          this.pending.push(record);
          this.handlers.onPending?.(this.pending.length);
        } else {
          this.handlers.onRecord(record);
        }
      }
    }
  }

  pause(): void {
    this.paused = true;
    this.handlers.onPending?.(this.pending.length);
  }

  resume(): void {
    this.paused = false;
    for (const record of this.pending.splice(0)) this.handlers.onRecord(record);
    this.handlers.onPending?.(0);
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  stop(): void {
    this.stopped = true;
    this.abort?.abort();
  }
}
