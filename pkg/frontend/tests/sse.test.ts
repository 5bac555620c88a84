import { describe, expect, it } from 'vitest';
import { AuditTail, SseParser, StreamOpener } from '../src/sse';
import type { AuditRecord } from '../src/types';

describe('SseParser', () => {
  it('parses a complete frame', () => {
    const parser = new SseParser();
    expect(parser.feed('data: hello\n\n')).toEqual([{ event: 'message', data: 'hello', id: undefined }]);
  });

  it('reassembles frames split across arbitrary chunk boundaries', () => {
    const parser = new SseParser();
    const frames = 'id: 1\ndata: alpha\n\nevent: x\ndata: beta\ndata: gamma\n\n';
    const events = [];
    for (const ch of frames) events.push(...parser.feed(ch));
    expect(events).toEqual([
      { event: 'message', data: 'alpha', id: '1' },
      { event: 'x', data: 'beta\ngamma', id: undefined },
    ]);
  });

  it('ignores comment-only keepalive frames', () => {
    const parser = new SseParser();
    expect(parser.feed(': keepalive\n\ndata: real\n\n')).toEqual([
      { event: 'message', data: 'real', id: undefined },
    ]);
  });

  it('normalizes CRLF line endings', () => {
    const parser = new SseParser();
    expect(parser.feed('data: a\r\n\r\n')).toHaveLength(1);
  });
});

// -- tail controller ---------------------------------------------------------

function record(seq: number): AuditRecord {
  return { seq, observed_at: 0, kind: 'exchange', summary: { n: String(seq) }, prev_hash: '', hash: '' };
}

function frame(rec: AuditRecord): Uint8Array {
  return new TextEncoder().encode(`data: ${JSON.stringify(rec)}\n\n`);
}

/** Opener that serves one scripted stream per connection, then hangs up. */
function scriptedOpener(connections: AuditRecord[][]): { opener: StreamOpener; opens: () => number } {
  let opened = 0;
  const opener: StreamOpener = async () => {
    const batch = connections[Math.min(opened, connections.length - 1)];
    opened += 1;
    return new ReadableStream<Uint8Array>({
      start(controller) {
        for (const rec of batch) controller.enqueue(frame(rec));
        controller.close();
      },
    });
  };
  return { opener, opens: () => opened };
}

async function settle(ms = 30): Promise<void> {
  await new Promise((r) => setTimeout(r, ms));
}

describe('AuditTail', () => {
  it('delivers records in order and dedupes replayed backlog', async () => {
    const { opener } = scriptedOpener([
      [record(0), record(1), record(2)],
      [record(1), record(2), record(3)], // backlog overlap on reconnect
      [],
    ]);
    const seen: number[] = [];
    const tail = new AuditTail(opener, { onRecord: (r) => seen.push(r.seq) }, 1, () => new Promise((r) => setTimeout(r, 0)));
    void tail.start();
    await settle();
    tail.stop();
    expect(seen.slice(0, 4)).toEqual([0, 1, 2, 3]);
  });

  it('buffers while paused and flushes on resume', async () => {
    const { opener } = scriptedOpener([[record(0), record(1), record(2)], []]);
    const seen: number[] = [];
    const pending: number[] = [];
    const tail = new AuditTail(
      opener,
      { onRecord: (r) => seen.push(r.seq), onPending: (n) => pending.push(n) },
      1,
      () => new Promise((r) => setTimeout(r, 0)),
    );
    tail.pause();
    void tail.start();
    await settle();
    expect(seen).toEqual([]);
    expect(tail.pendingCount).toBe(3);
    tail.resume();
    tail.stop();
    expect(seen).toEqual([0, 1, 2]);
    expect(pending.at(-1)).toBe(0);
  });

  it('reports a gap when records were missed across a reconnect', async () => {
    const { opener } = scriptedOpener([
      [record(0), record(1)],
      [record(5), record(6)], // 2..4 lost while disconnected
      [],
    ]);
    const gaps: number[] = [];
    const tail = new AuditTail(opener, { onRecord: () => {}, onGap: (m) => gaps.push(m) }, 1, () => new Promise((r) => setTimeout(r, 0)));
    void tail.start();
    await settle();
    tail.stop();
    expect(gaps).toEqual([3]);
  });

  it('keeps reconnecting until stopped', async () => {
    const { opener, opens } = scriptedOpener([[record(0)], []]);
    const tail = new AuditTail(opener, { onRecord: () => {} }, 1, () => new Promise((r) => setTimeout(r, 0)));
    void tail.start();
    await settle();
    tail.stop();
    expect(opens()).toBeGreaterThan(2);
  });
});
