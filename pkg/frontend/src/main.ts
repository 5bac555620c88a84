import './style.css';
import { AdminClient, ApiError, VersionConflictError } from './api';
import {
  addMiddleware,
  ChainEditorState,
  markSaved,
  moveMiddleware,
  openEditor,
  reloadAfterConflict,
  removeMiddleware,
  removesAuthentication,
} from './chain';
import { AuditTail } from './sse';
import type { AuditRecord, WhoAmI } from './types';

const HEALTH_POLL_MS = 5000;
// Middleware ids conventionally carrying forward-auth; removing the last of
// these from a chain makes the route public, which deserves a warning.
const AUTH_MIDDLEWARE_HINTS = ['mcp-auth', 'forward-auth', 'forward_auth'];

const app = document.getElementById('app')!;

interface Session {
  client: AdminClient;
  who: WhoAmI;
}

let session: Session | null = null;
let pollTimer: number | undefined;
let tail: AuditTail | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === 'class') node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function fmtExpiry(seconds: number): string {
  if (seconds >= 3600) return `${(seconds / 3600).toFixed(1)} h`;
  if (seconds >= 60) return `${Math.round(seconds / 60)} min`;
  return `${Math.round(seconds)} s`;
}

// -- key entry ---------------------------------------------------------------

function renderLogin(message = ''): void {
  stopBackground();
  session = null;
  app.replaceChildren(
    el('h1', {}, 'Gateway Admin Console'),
    el(
      'div',
      { class: 'panel' },
      el('p', { class: 'note' }, 'Enter an admin API key. The key is held in memory only.'),
      el('input', { id: 'api-key', type: 'password', placeholder: 'X-Admin-Key', size: '40' }),
      ' ',
      el('button', { class: 'action', id: 'connect' }, 'Connect'),
      el('p', { class: 'error', id: 'login-error' }, message),
    ),
  );
  const connect = async () => {
    const key = (document.getElementById('api-key') as HTMLInputElement).value;
    const client = new AdminClient('', key);
    try {
      const who = await client.whoami();
      session = { client, who };
      renderShell('servers');
    } catch (err) {
      (document.getElementById('login-error') as HTMLElement).textContent =
        err instanceof ApiError && err.status === 401 ? 'Key rejected.' : `Cannot reach gateway: ${err}`;
    }
  };
  document.getElementById('connect')!.addEventListener('click', connect);
  document.getElementById('api-key')!.addEventListener('keydown', (e) => {
    if ((e as KeyboardEvent).key === 'Enter') connect();
  });
}

function stopBackground(): void {
  if (pollTimer !== undefined) window.clearInterval(pollTimer);
  pollTimer = undefined;
  tail?.stop();
  tail = null;
}

function authGuard(err: unknown): boolean {
  if (err instanceof ApiError && err.status === 401) {
    renderLogin('Session key no longer valid.');
    return true;
  }
  return false;
}

// -- shell -------------------------------------------------------------------

type Tab = 'servers' | 'policy' | 'security';

function renderShell(active: Tab): void {
  stopBackground();
  const who = session!.who;
  const tabs = el('nav', { class: 'tabs' });
  const pages: [Tab, string][] = [
    ['servers', 'Servers'],
    ['policy', 'Policy'],
    ['security', 'Security'],
  ];
  for (const [tab, label] of pages) {
    const btn = el('button', { class: tab === active ? 'active' : '' }, label);
    btn.addEventListener('click', () => renderShell(tab));
    tabs.append(btn);
  }
  const content = el('div', { id: 'content' });
  app.replaceChildren(
    el('h1', {}, 'Gateway Admin Console'),
    el('p', { class: 'note' }, `Signed in as ${who.name} (${who.permissions})`),
    tabs,
    content,
  );
  if (active === 'servers') renderServers(content);
  else if (active === 'policy') renderPolicy(content);
  else renderSecurity(content);
}

// -- servers page ------------------------------------------------------------

async function renderServers(root: HTMLElement): Promise<void> {
  const { client, who } = session!;
  const canWrite = who.permissions === 'write';

  const tableBody = el('tbody');
  const formError = el('p', { class: 'error' });
  const fields = {
    display_name: el('input', { placeholder: 'Display name' }),
    upstream_url: el('input', { placeholder: 'Upstream URL (http://...)', size: '32' }),
    host_rule: el('input', { placeholder: 'Host rule (mcp.example.test)', size: '26' }),
  };
  const submit = el('button', { class: 'action' }, 'Onboard server');
  if (!canWrite) submit.setAttribute('disabled', '');

  root.replaceChildren(
    el(
      'div',
      { class: 'panel' },
      el('h2', {}, 'Onboard a server'),
      canWrite
        ? el('div', {}, fields.display_name, ' ', fields.upstream_url, ' ', fields.host_rule, ' ', submit)
        : el('p', { class: 'note' }, 'Read-only key: onboarding is disabled.'),
      formError,
    ),
    el(
      'div',
      { class: 'panel' },
      el('h2', {}, 'Registry'),
      el(
        'table',
        {},
        el(
          'thead',
          {},
          el('tr', {}, el('th', {}, 'Name'), el('th', {}, 'Upstream'), el('th', {}, 'Health'), el('th', {}, 'Since')),
        ),
        tableBody,
      ),
    ),
  );

  const refresh = async () => {
    try {
      const servers = await client.servers();
      tableBody.replaceChildren(
        ...servers.map((s) =>
          el(
            'tr',
            {},
            el('td', {}, `${s.display_name} (${s.id})`),
            el('td', {}, s.upstream_url),
            el('td', { class: `health-${s.health}` }, s.health),
            el('td', {}, s.health_since ? new Date(s.health_since * 1000).toLocaleTimeString() : '—'),
          ),
        ),
      );
    } catch (err) {
      if (!authGuard(err)) formError.textContent = String(err);
    }
  };

  submit.addEventListener('click', async () => {
    formError.textContent = '';
    if (!window.confirm(`Onboard ${fields.host_rule.value}?`)) return;
    try {
      await client.onboard({
        display_name: fields.display_name.value,
        upstream_url: fields.upstream_url.value,
        host_rule: fields.host_rule.value,
      });
      Object.values(fields).forEach((f) => (f.value = ''));
      await refresh();
    } catch (err) {
      if (authGuard(err)) return;
      formError.textContent =
        err instanceof ApiError && err.diagnostics.length ? err.diagnostics.join('; ') : String(err);
    }
  });

  await refresh();
  pollTimer = window.setInterval(refresh, HEALTH_POLL_MS);
}

// -- policy page -------------------------------------------------------------

async function renderPolicy(root: HTMLElement): Promise<void> {
  const { client, who } = session!;
  const canWrite = who.permissions === 'write';
  const container = el('div', { class: 'panel' }, el('h2', {}, 'Route middleware chains'));
  root.replaceChildren(container);

  let doc;
  try {
    doc = await client.routes();
  } catch (err) {
    if (!authGuard(err)) container.append(el('p', { class: 'error' }, String(err)));
    return;
  }

  for (const route of doc.routes) {
    let state: ChainEditorState = openEditor(route, doc.version);
    const section = el('div', { class: 'panel' });
    container.append(section);

    const render = () => {
      const chain = el('div', {});
      state.draft.forEach((mw, i) => {
        const up = el('button', { class: 'subtle', title: 'move earlier' }, '↑');
        const drop = el('button', { class: 'subtle', title: 'remove' }, '×');
        up.addEventListener('click', () => {
          state = moveMiddleware(state, i, Math.max(0, i - 1));
          render();
        });
        drop.addEventListener('click', () => {
          state = removeMiddleware(state, i);
          render();
        });
        chain.append(el('span', { class: 'chain-item' }, mw, ...(canWrite ? [up, drop] : [])));
      });

      const addInput = el('input', { placeholder: 'middleware id', size: '16' });
      const addBtn = el('button', { class: 'subtle' }, 'add');
      addBtn.addEventListener('click', () => {
        if (addInput.value.trim()) {
          state = addMiddleware(state, addInput.value.trim());
          addInput.value = '';
          render();
        }
      });

      const save = el('button', { class: 'action' }, 'Save');
      if (!canWrite || !state.dirty) save.setAttribute('disabled', '');
      const status = el('span', { class: 'note' }, state.dirty ? ' unsaved changes' : '');
      const errorLine = el('p', { class: 'error' });

      save.addEventListener('click', async () => {
        if (
          removesAuthentication(state, AUTH_MIDDLEWARE_HINTS) &&
          !window.confirm('This removes forward authentication: the route becomes PUBLIC. Save anyway?')
        ) {
          return;
        }
        if (!window.confirm(`Apply new chain to ${route.id}?`)) return;
        try {
          await client.setMiddlewares(state.routeId, state.draft, state.version);
          const fresh = await client.routes();
          state = markSaved(state, fresh.version);
          render();
        } catch (err) {
          if (authGuard(err)) return;
          if (err instanceof VersionConflictError) {
            if (window.confirm('The route changed under you. Reload the live chain? (Your draft is kept.)')) {
              const fresh = await client.routes();
              const liveRoute = fresh.routes.find((r) => r.id === route.id);
              if (liveRoute) state = reloadAfterConflict(state, liveRoute, fresh.version);
              render();
            }
            return;
          }
          errorLine.textContent = String(err);
        }
      });

      section.replaceChildren(
        el('h2', {}, `${route.id} — ${route.host_rule}${route.path_prefix}`),
        el('p', { class: 'note' }, `live chain: ${state.liveChain.join(' → ') || '(empty)'}`),
        chain,
        ...(canWrite ? [el('div', {}, addInput, ' ', addBtn, ' ', save, status)] : []),
        errorLine,
      );
    };
    render();
  }
}

// -- security console --------------------------------------------------------

async function renderSecurity(root: HTMLElement): Promise<void> {
  const { client, who } = session!;
  const canWrite = who.permissions === 'write';

  const detectionsBody = el('tbody');
  const ruleFilter = el('input', { placeholder: 'filter by rule', size: '16' });
  const severityFilter = el('select', {}, el('option', { value: '' }, 'any severity'));
  for (const s of ['low', 'medium', 'high', 'critical']) severityFilter.append(el('option', { value: s }, s));

  const bansBody = el('tbody');
  const banError = el('p', { class: 'error' });

  const tailBox = el('div', { class: 'tail' });
  const tailStatus = el('span', { class: 'note' }, 'connecting…');
  const pendingNote = el('span', { class: 'note' });
  const pauseBtn = el('button', { class: 'subtle' }, 'pause');

  root.replaceChildren(
    el(
      'div',
      { class: 'panel' },
      el('h2', {}, 'Detections'),
      el('div', {}, ruleFilter, ' ', severityFilter),
      el(
        'table',
        {},
        el(
          'thead',
          {},
          el(
            'tr',
            {},
            el('th', {}, 'Rule'),
            el('th', {}, 'Severity'),
            el('th', {}, 'Action'),
            el('th', {}, 'Peer'),
            el('th', {}, 'Excerpt'),
          ),
        ),
        detectionsBody,
      ),
    ),
    el(
      'div',
      { class: 'panel' },
      el('h2', {}, 'Active bans'),
      el(
        'table',
        {},
        el(
          'thead',
          {},
          el(
            'tr',
            {},
            el('th', {}, 'Target'),
            el('th', {}, 'Reason'),
            el('th', {}, 'Source'),
            el('th', {}, 'Expires in'),
            el('th', {}, ''),
          ),
        ),
        bansBody,
      ),
      banError,
    ),
    el('div', { class: 'panel' }, el('h2', {}, 'Audit tail '), el('div', {}, tailStatus, ' ', pauseBtn, ' ', pendingNote), tailBox),
  );

  const refreshDetections = async () => {
    try {
      const events = await client.detections();
      const rule = ruleFilter.value.trim();
      const severity = severityFilter.value;
      detectionsBody.replaceChildren(
        ...events
          .filter((e) => (!rule || e.rule_id.includes(rule)) && (!severity || e.severity === severity))
          .slice(-100)
          .reverse()
          .map((e) =>
            el(
              'tr',
              {},
              el('td', {}, e.rule_id),
              el('td', {}, e.severity),
              el('td', {}, e.action),
              el('td', {}, e.peer_ip),
              el('td', {}, e.excerpt),
            ),
          ),
      );
    } catch (err) {
      authGuard(err);
    }
  };

  const refreshBans = async () => {
    try {
      const bans = await client.bans();
      bansBody.replaceChildren(
        ...bans.map((b) => {
          const lift = el('button', { class: 'subtle' }, 'lift');
          if (!canWrite) lift.setAttribute('disabled', '');
          lift.addEventListener('click', async () => {
            if (!window.confirm(`Lift ban on ${b.target}?`)) return;
            try {
              await client.liftBan(b.id);
              await refreshBans();
            } catch (err) {
              if (!authGuard(err)) banError.textContent = String(err);
            }
          });
          return el(
            'tr',
            {},
            el('td', {}, b.target),
            el('td', {}, b.reason),
            el('td', {}, b.source),
            el('td', {}, fmtExpiry(b.expires_in)),
            el('td', {}, lift),
          );
        }),
      );
    } catch (err) {
      authGuard(err);
    }
  };

  ruleFilter.addEventListener('input', refreshDetections);
  severityFilter.addEventListener('change', refreshDetections);

  const appendRecord = (record: AuditRecord) => {
    const summary = Object.entries(record.summary)
      .map(([k, v]) => `${k}=${v}`)
      .join(' ');
    tailBox.append(el('div', {}, el('span', { class: 'kind' }, `#${record.seq} ${record.kind} `), summary));
    while (tailBox.childElementCount > 500) tailBox.firstElementChild?.remove();
    tailBox.scrollTop = tailBox.scrollHeight;
  };

  let paused = false;
  tail = new AuditTail((signal) => client.openAuditTail(signal), {
    onRecord: appendRecord,
    onPending: (n) => (pendingNote.textContent = paused ? ` ${n} pending` : ''),
    onGap: (missed) => tailBox.append(el('div', { class: 'gap' }, `— ${missed} record(s) missed during reconnect —`)),
    onStatus: (status) => (tailStatus.textContent = status),
  });
  pauseBtn.addEventListener('click', () => {
    paused = !paused;
    pauseBtn.textContent = paused ? 'resume' : 'pause';
    if (paused) tail!.pause();
    else tail!.resume();
  });
  void tail.start();

  await refreshDetections();
  await refreshBans();
  pollTimer = window.setInterval(() => {
    void refreshDetections();
    void refreshBans();
  }, HEALTH_POLL_MS);
}

renderLogin();
