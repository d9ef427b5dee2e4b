"""Thin operator CLI over the admin API.

Every command maps 1:1 to one endpoint; the server does all validation.
Exit codes: 0 success, 1 denied or rejected by the server, 2 transport
error. JSON output mode emits the raw response body, byte for byte.
"""

from __future__ import annotations

import sys

import click
import httpx

DEFAULT_BASE_URL = "http://127.0.0.1:8800"


class CliSession:
    def __init__(self, base_url: str, api_key: str, output: str):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.output = output

    def request(self, method: str, path: str, json_body=None, params=None) -> httpx.Response:
        try:
            return httpx.request(
                method,
                self.base_url + path,
                json=json_body,
                params=params,
                headers={"X-API-Key": self.api_key} if self.api_key else {},
                timeout=30.0,
            )
        except httpx.HTTPError as exc:
            click.echo(f"transport error: {exc}", err=True)
            sys.exit(2)

    def emit(self, response: httpx.Response, render=None) -> None:
        if self.output == "json":
            sys.stdout.buffer.write(response.content)
            sys.stdout.buffer.write(b"\n")
        elif response.is_success:
            if render is not None:
                render(response.json())
            else:
                click.echo(response.text)
        else:
            click.echo(f"error {response.status_code}: {response.text}", err=True)
        if not response.is_success:
            sys.exit(1)


pass_session = click.make_pass_decorator(CliSession)


@click.group()
@click.option("--base-url", envvar="FW_BASE_URL", default=DEFAULT_BASE_URL, show_default=True)
@click.option("--api-key", envvar="FW_API_KEY", default="", help="never echoed")
@click.option("--output", type=click.Choice(["table", "json"]), default="table")
@click.pass_context
def main(ctx, base_url, api_key, output):
    """Operator console for the AI-traffic firewall."""
    ctx.obj = CliSession(base_url, api_key, output)


# -- rules -------------------------------------------------------------------


@main.group()
def rules():
    """Inspect and replace the active rule set."""


@rules.command("list")
@pass_session
def rules_list(session):
    def render(data):
        click.echo(f"version {data['version']}  ({len(data['rules'])} rules)")
        for r in data["rules"]:
            click.echo(
                f"{r['id']:<10} {r['category']:<18} w={r['weight']:<6.4g} "
                f"{r['action']:<10} {r['applies_to']:<7} {r['pattern'][:50]}"
            )

    session.emit(session.request("GET", "/admin/rules"), render)


@rules.command("put")
@click.argument("file", type=click.File("r"))
@pass_session
def rules_put(session, file):
    import json as _json

    document = _json.load(file)
    session.emit(session.request("PUT", "/admin/rules", json_body=document))


@rules.command("reload")
@pass_session
def rules_reload(session):
    session.emit(session.request("POST", "/admin/rules/reload"))


# -- quarantine ----------------------------------------------------------------


@main.group()
def quarantine():
    """Review and resolve held exchanges."""


@quarantine.command("list")
@click.option("--status", default="pending", show_default=True)
@pass_session
def quarantine_list(session, status):
    def render(data):
        for item in data["items"]:
            click.echo(
                f"{item['event_id']}  {item['kind']:<6} {item['status']:<9} "
                f"rules={','.join(item['matched_rule_ids'])}"
            )
        if not data["items"]:
            click.echo("(empty)")

    session.emit(session.request("GET", "/admin/quarantine", params={"status": status}), render)


@quarantine.command("resolve")
@click.argument("event_id")
@click.option("--action", type=click.Choice(["release", "block"]), required=True)
@click.option("--label", type=click.Choice(["tp", "fp"]), required=True)
@pass_session
def quarantine_resolve(session, event_id, action, label):
    session.emit(
        session.request(
            "POST",
            f"/admin/quarantine/{event_id}/resolve",
            json_body={"action": action, "label": label},
        )
    )


# -- events ---------------------------------------------------------------------


@main.group()
def events():
    """Query the tamper-evident event log."""


@events.command("tail")
@click.option("--since", default=0, show_default=True)
@click.option("--limit", default=50, show_default=True)
@pass_session
def events_tail(session, since, limit):
    def render(data):
        for e in data["events"]:
            click.echo(
                f"{e['seq']:>5}  {e['occurred_at']}  {e['client_id']:<16} "
                f"{e['final_decision']:<10} {e.get('reason') or ''}"
            )

    session.emit(
        session.request("GET", "/admin/events", params={"since_seq": since, "limit": limit}),
        render,
    )


# -- feedback / audit / metrics ---------------------------------------------------


@main.command()
@click.argument("event_id")
@click.argument("rule_id")
@click.argument("label", type=click.Choice(["tp", "fp"]))
@pass_session
def feedback(session, event_id, rule_id, label):
    """Label a rule hit as true/false positive."""

    def render(data):
        click.echo(
            f"{data['rule_id']}: weight {data['weight_before']:.4f} -> {data['weight_after']:.4f}"
        )

    session.emit(
        session.request(
            "POST",
            "/admin/feedback",
            json_body={"event_id": event_id, "rule_id": rule_id, "label": label},
        ),
        render,
    )


@main.group()
def audit():
    """Data-security audit controls."""


@audit.command("run")
@pass_session
def audit_run(session):
    def render(data):
        click.echo(f"chain: {data['chain_result']}  jobs: {','.join(data['jobs_run'])}")
        for f in data["rescan_findings"]:
            click.echo(f"rescan hit {f['event_id']}: {','.join(f['rule_ids'])}")

    session.emit(session.request("POST", "/admin/audit/run"), render)


@main.command()
@pass_session
def metrics(session):
    """Current counters and latency stats."""

    def render(data):
        totals = data["totals"]
        lat = data["latency_ms"]
        click.echo(
            f"requests={totals['requests']} allows={totals['allows']} "
            f"blocks={totals['blocks']} quarantines={totals['quarantines']} "
            f"rate_limited={totals['rate_limited']}"
        )
        click.echo(f"latency p50={lat['p50']}ms p95={lat['p95']}ms max={lat['max']}ms")
        click.echo(f"ewma_block_rate={data['ewma_block_rate']:.4f}")

    session.emit(session.request("GET", "/metrics"), render)


# -- keys ----------------------------------------------------------------------------


@main.group()
def keys():
    """API key management (admin only)."""


@keys.command("issue")
@click.option("--role", type=click.Choice(["client", "operator", "admin"]), required=True)
@pass_session
def keys_issue(session, role):
    def render(data):
        click.echo(f"key_id: {data['key_id']}")
        click.echo(f"secret: {data['secret']}  (shown once, store it now)")

    session.emit(session.request("POST", "/admin/keys", json_body={"role": role}), render)


@keys.command("revoke")
@click.argument("key_id")
@pass_session
def keys_revoke(session, key_id):
    session.emit(session.request("DELETE", f"/admin/keys/{key_id}"))


@keys.command("list")
@pass_session
def keys_list(session):
    def render(data):
        for k in data["keys"]:
            flag = " (revoked)" if k["revoked"] else ""
            click.echo(f"{k['key_id']:<18} {k['role']:<9}{flag}")

    session.emit(session.request("GET", "/admin/keys"), render)


if __name__ == "__main__":
    main()
