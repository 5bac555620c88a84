// Shapes mirrored from the gateway's admin REST API. The UI never derives
// security state itself; everything here is displayed as fetched.

export interface BackendServer {
  id: string;
  display_name: string;
  upstream_url: string;
  transport: string;
  health: 'unknown' | 'healthy' | 'unhealthy';
  health_since: number;
  onboarded_at: number;
}

export interface Route {
  id: string;
  host_rule: string;
  path_prefix: string;
  middleware_ids: string[];
  backend_id: string;
}

export interface RoutesDocument {
  version: number;
  routes: Route[];
}

export interface DetectionEvent {
  rule_id: string;
  severity: string;
  action: string;
  peer_ip: string;
  client_id: string;
  excerpt: string;
  observed_at: number;
}

export interface Ban {
  id: string;
  target: string;
  reason: string;
  source: 'detection' | 'operator';
  expires_in: number;
}

export interface AuditRecord {
  seq: number;
  observed_at: number;
  kind: string;
  summary: Record<string, string>;
  prev_hash: string;
  hash: string;
}

export interface Health {
  audit_healthy: boolean;
  backends: Record<string, string>;
}

export interface WhoAmI {
  name: string;
  permissions: 'read' | 'write';
}

export interface OnboardRequest {
  display_name: string;
  upstream_url: string;
  host_rule: string;
  path_prefix?: string;
  middleware_ids?: string[];
}
