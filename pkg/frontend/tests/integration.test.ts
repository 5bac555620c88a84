// Round-trip against a real gateway process: onboarding makes a route serve,
// banning produces 403 and lifting clears it, and both actions show up in the
// audit tail consumed through the UI's own client code.
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { AdminClient } from '../src/api';
import { AuditTail } from '../src/sse';
import type { AuditRecord } from '../src/types';

const ADMIN_KEY = 'ui-test-admin-key';

let stateDir: string;
let mock: ChildProcess;
let gateway: ChildProcess;
let mockPort = 0;
let publicPort = 0;
let adminPort = 0;

function waitForLine(proc: ChildProcess, regex: RegExp, timeoutMs = 20000): Promise<RegExpMatchArray> {
  return new Promise((resolve, reject) => {
    let buffer = '';
    const timer = setTimeout(() => reject(new Error(`timed out waiting for ${regex}; got: ${buffer}`)), timeoutMs);
    const onData = (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(regex);
      if (match) {
        clearTimeout(timer);
        resolve(match);
      }
    };
    proc.stdout?.on('data', onData);
    proc.stderr?.on('data', onData);
  });
}

beforeAll(async () => {
  stateDir = mkdtempSync(join(tmpdir(), 'ui-gw-'));

  mock = spawn('python3', [
    '-u',
    '-c',
    [
      'import time',
      'from mcpgate.testkit.mockserver import MockMcpServer, default_script',
      's = MockMcpServer(default_script())',
      's.start()',
      'print(f"MOCK_PORT={s.url.rsplit(chr(58),1)[1]}", flush=True)',
      'time.sleep(3600)',
    ].join('\n'),
  ]);
  mockPort = Number((await waitForLine(mock, /MOCK_PORT=(\d+)/))[1]);

  const configPath = join(stateDir, 'gw.yaml');
  writeFileSync(
    configPath,
    [
      'entry_points:',
      '  web:',
      '    address: "127.0.0.1:0"',
      'admin:',
      '  address: "127.0.0.1:0"',
      '  principals:',
      '    - name: ui-test',
      `      api_key: "${ADMIN_KEY}"`,
      '      permissions: write',
      'oauth:',
      '  issuer: "http://oauth.example.test"',
      '  users: [alice]',
      'middlewares:',
      '  ban-check:',
      '    type: ban_check',
      `state_dir: "${join(stateDir, 'state')}"`,
      '',
    ].join('\n'),
  );
  gateway = spawn('python3', ['-u', '-m', 'mcpgate.cli', 'run', '--config', configPath]);
  const match = await waitForLine(gateway, /listening on 127\.0\.0\.1:(\d+); admin on :(\d+)/);
  publicPort = Number(match[1]);
  adminPort = Number(match[2]);
});

afterAll(() => {
  gateway?.kill();
  mock?.kill();
  rmSync(stateDir, { recursive: true, force: true });
});

describe('gateway round-trip through the UI client', () => {
  it('onboards a server, enforces and lifts a ban, and shows both in the audit tail', async () => {
    const client = new AdminClient(`http://127.0.0.1:${adminPort}`, ADMIN_KEY);
    expect((await client.whoami()).permissions).toBe('write');

    const records: AuditRecord[] = [];
    const tail = new AuditTail((signal) => client.openAuditTail(signal), {
      onRecord: (r) => records.push(r),
    });
    void tail.start();

    // onboard: the new route must serve with no restart
    const onboarded = await client.onboard({
      display_name: 'UI Test Server',
      upstream_url: `http://127.0.0.1:${mockPort}`,
      host_rule: '127.0.0.1',
      middleware_ids: ['ban-check'],
    });
    expect(onboarded.route.host_rule).toBe('127.0.0.1');

    const servers = await client.servers();
    expect(servers.map((s) => s.id)).toContain('ui-test-server');

    const probe = async () => (await fetch(`http://127.0.0.1:${publicPort}/`)).status;
    expect(await probe()).toBe(200);

    // ban this client's address: gateway starts answering 403
    const ban = await client.createBan('127.0.0.1', 'ui round-trip test');
    expect(await probe()).toBe(403);
    expect((await client.bans()).map((b) => b.id)).toContain(ban.id);

    // lift: 403 clears
    await client.liftBan(ban.id);
    expect(await probe()).toBe(200);
    expect((await client.bans()).map((b) => b.id)).not.toContain(ban.id);

    // both actions are visible in the live audit tail
    await new Promise((r) => setTimeout(r, 500));
    tail.stop();
    const kinds = records.map((r) => [r.kind, r.summary.event ?? '']);
    expect(kinds).toContainEqual(['config_change', 'server_onboarded']);
    expect(kinds).toContainEqual(['ban_applied', '']);
    expect(kinds).toContainEqual(['config_change', 'ban_lifted']);
  });
});
