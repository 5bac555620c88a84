"""Gateway command line: run, validate-config, audit verify, token mint."""

from __future__ import annotations

import argparse
import sys
import time

from . import audit as audit_mod
from .config import load_config
from .gateway import Gateway


def _load_or_die(path: str):
    try:
        with open(path, "rb") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(1)
    config, diagnostics = load_config(text)
    if config is None:
        for diag in diagnostics:
            print(diag, file=sys.stderr)
        raise SystemExit(1)
    return config


def cmd_run(args) -> int:
    config = _load_or_die(args.config)
    gateway = Gateway(config)
    gateway.start()
    ports = ", ".join(f"{l.address[0]}:{l.port}" for l in gateway._listeners)
    print(f"gateway listening on {ports}" + (f"; admin on :{gateway.admin_port}" if gateway.admin_port else ""))
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        gateway.stop()
    return 0


def cmd_validate_config(args) -> int:
    try:
        with open(args.path, "rb") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    config, diagnostics = load_config(text)
    if config is None:
        for diag in diagnostics:
            print(diag)
        return 1
    print(f"ok: {len(config.routes)} router(s), {len(config.middlewares)} middleware(s), "
          f"{len(config.backends)} backend(s)")
    return 0


def cmd_audit_verify(args) -> int:
    try:
        records = audit_mod.read_log(args.path)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return 1
    outcome = audit_mod.verify_chain(records)
    if outcome == audit_mod.OK:
        print(f"ok: {len(records)} record(s) verified")
        return 0
    print(f"broken: first_bad_seq={outcome.first_bad_seq}")
    return 1


def cmd_token_mint(args) -> int:
    if not args.dev:
        print("error: token minting is a test facility; pass --dev to enable", file=sys.stderr)
        return 1
    config = _load_or_die(args.config)
    from .clock import SYSTEM_CLOCK
    from .oauth.store import TokenStore
    import os

    path = None
    if config.state_dir:
        os.makedirs(config.state_dir, exist_ok=True)
        path = os.path.join(config.state_dir, "tokens.json")
    tokens = TokenStore(path, clock=SYSTEM_CLOCK)
    token, rec = tokens.issue(client_id="dev-cli", subject=args.subject, scope="mcp", resource_host=args.host)
    print(token)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpgate", description="MCP security gateway")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="start the gateway")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate-config", help="validate a config file")
    p_val.add_argument("path")
    p_val.set_defaults(fn=cmd_validate_config)

    p_audit = sub.add_parser("audit", help="audit log operations")
    audit_sub = p_audit.add_subparsers(dest="audit_command")
    p_verify = audit_sub.add_parser("verify", help="verify a hash-chained log file")
    p_verify.add_argument("path")
    p_verify.set_defaults(fn=cmd_audit_verify)

    p_token = sub.add_parser("token", help="token operations (dev only)")
    token_sub = p_token.add_subparsers(dest="token_command")
    p_mint = token_sub.add_parser("mint", help="mint a test token into the state dir")
    p_mint.add_argument("--subject", required=True)
    p_mint.add_argument("--host", required=True)
    p_mint.add_argument("--config", required=True)
    p_mint.add_argument("--dev", action="store_true")
    p_mint.set_defaults(fn=cmd_token_mint)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn = getattr(args, "fn", None)
    if fn is None:
        parser.print_usage(sys.stderr)
        return 2
    return fn(args)


if __name__ == "__main__":
    sys.exit(main())
