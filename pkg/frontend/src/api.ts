import type {
  AuditRecord,
  Ban,
  BackendServer,
  DetectionEvent,
  Health,
  OnboardRequest,
  Route,
  RoutesDocument,
  WhoAmI,
} from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public diagnostics: string[] = [],
  ) {
    super(message);
  }
}

export class VersionConflictError extends ApiError {
  constructor() {
    super(409, 'the route changed since you loaded it');
  }
}

type FetchLike = typeof fetch;

/**
 * Thin typed client for the admin REST API. The key lives only in this
 * object, never in browser storage.
 */
export class AdminClient {
  constructor(
    public baseUrl: string,
    private apiKey: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: {
        'X-Admin-Key': this.apiKey,
        ...(body !== undefined ? { 'Content-Type': 'application/json' } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (resp.status === 409) throw new VersionConflictError();
    if (!resp.ok) {
      let message = `${resp.status}`;
      let diagnostics: string[] = [];
      try {
        const payload = await resp.json();
        message = payload.error ?? message;
        diagnostics = payload.diagnostics ?? [];
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, message, diagnostics);
    }
    return (await resp.json()) as T;
  }

  whoami(): Promise<WhoAmI> {
    return this.request('GET', '/admin/whoami');
  }

  servers(): Promise<BackendServer[]> {
    return this.request('GET', '/admin/servers');
  }

  onboard(descriptor: OnboardRequest): Promise<{ backend: BackendServer; route: Route }> {
    return this.request('POST', '/admin/servers', descriptor);
  }

  routes(): Promise<RoutesDocument> {
    return this.request('GET', '/admin/routes');
  }

  setMiddlewares(routeId: string, middlewareIds: string[], version: number): Promise<Route> {
    return this.request('PUT', `/admin/routes/${encodeURIComponent(routeId)}/middlewares`, {
      middleware_ids: middlewareIds,
      version,
    });
  }

  detections(): Promise<DetectionEvent[]> {
    return this.request('GET', '/admin/detections');
  }

  bans(): Promise<Ban[]> {
    return this.request('GET', '/admin/bans');
  }

  createBan(target: string, reason: string, ttl?: number): Promise<{ id: string; target: string }> {
    return this.request('POST', '/admin/bans', { target, reason, ...(ttl ? { ttl } : {}) });
  }

  liftBan(banId: string): Promise<{ lifted: string }> {
    return this.request('DELETE', `/admin/bans/${encodeURIComponent(banId)}`);
  }

  health(): Promise<Health> {
    return this.request('GET', '/admin/health');
  }

  /**
   * Open the audit tail as a raw byte stream. EventSource cannot send the
   * X-Admin-Key header, so the tail is consumed via fetch + ReadableStream.
   */
  async openAuditTail(signal?: AbortSignal): Promise<ReadableStream<Uint8Array>> {
    const resp = await this.fetchImpl(this.baseUrl + '/admin/audit/tail', {
      headers: { 'X-Admin-Key': this.apiKey },
      signal,
    });
    if (!resp.ok || !resp.body) throw new ApiError(resp.status, 'audit tail unavailable');
    return resp.body;
  }
}

export type { AuditRecord };
