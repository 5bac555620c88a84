import { describe, expect, it } from 'vitest';
import { AdminClient, ApiError, VersionConflictError } from '../src/api';

interface Captured {
  url: string;
  method: string;
  headers: Record<string, string>;
  body?: string;
}

function mockFetch(status: number, payload: unknown) {
  const calls: Captured[] = [];
  const impl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    calls.push({
      url: String(input),
      method: init?.method ?? 'GET',
      headers: (init?.headers ?? {}) as Record<string, string>,
      body: init?.body as string | undefined,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { 'Content-Type': 'application/json' },
    });
  }) as typeof fetch;
  return { impl, calls };
}

describe('AdminClient', () => {
  it('sends the api key header on every request', async () => {
    const { impl, calls } = mockFetch(200, []);
    const client = new AdminClient('http://gw:9000', 'sekrit', impl);
    await client.servers();
    expect(calls[0].url).toBe('http://gw:9000/admin/servers');
    expect(calls[0].headers['X-Admin-Key']).toBe('sekrit');
  });

  it('serializes onboarding descriptors as JSON', async () => {
    const { impl, calls } = mockFetch(201, { backend: {}, route: {} });
    const client = new AdminClient('', 'k', impl);
    await client.onboard({ display_name: 'X', upstream_url: 'http://u', host_rule: 'h' });
    expect(calls[0].method).toBe('POST');
    expect(JSON.parse(calls[0].body!)).toMatchObject({ host_rule: 'h' });
    expect(calls[0].headers['Content-Type']).toBe('application/json');
  });

  it('maps 409 to VersionConflictError', async () => {
    const { impl } = mockFetch(409, { error: 'version_mismatch' });
    const client = new AdminClient('', 'k', impl);
    await expect(client.setMiddlewares('r', [], 1)).rejects.toBeInstanceOf(VersionConflictError);
  });

  it('surfaces validation diagnostics from 422 responses', async () => {
    const { impl } = mockFetch(422, {
      error: 'validation_failed',
      diagnostics: ['descriptor.upstream_url: must be an absolute http(s) URL'],
    });
    const client = new AdminClient('', 'k', impl);
    try {
      await client.onboard({ display_name: '', upstream_url: 'ftp://x', host_rule: 'h' });
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(422);
      expect((err as ApiError).diagnostics[0]).toContain('upstream_url');
    }
  });

  it('maps 401 to an ApiError with the status attached', async () => {
    const { impl } = mockFetch(401, { error: 'missing or invalid admin key' });
    const client = new AdminClient('', 'bad', impl);
    await expect(client.whoami()).rejects.toMatchObject({ status: 401 });
  });

  it('passes version with middleware updates', async () => {
    const { impl, calls } = mockFetch(200, {});
    const client = new AdminClient('', 'k', impl);
    await client.setMiddlewares('route-1', ['ban-check'], 6);
    expect(calls[0].url).toBe('/admin/routes/route-1/middlewares');
    expect(JSON.parse(calls[0].body!)).toEqual({ middleware_ids: ['ban-check'], version: 6 });
  });
});
