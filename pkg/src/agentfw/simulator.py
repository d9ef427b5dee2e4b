"""Scripted stand-in for the protected agent workflow.

A tiny HTTP server speaking the gateway's upstream wire format, with
deterministic behaviors (echo, canary leak, PII emission, delay, error) and
a request recorder used by tests to prove blocked traffic never reached it.
"""

from __future__ import annotations

import argparse
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

MODES = ("echo", "leak_canary", "emit_pii", "delay", "error")

TEST_PAN = "4111111111111111"  # standard Luhn-valid test number


class UpstreamSimulator:
    def __init__(
        self,
        mode: str = "echo",
        canary_value: str | None = None,
        delay_ms: int = 0,
        error_status: int = 500,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.mode = mode
        self.canary_value = canary_value
        self.delay_ms = delay_ms
        self.error_status = error_status
        self.recorder: list[dict] = []
        self._recorder_lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, port), self._make_handler())
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "UpstreamSimulator":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def record(self, body: dict) -> None:
        with self._recorder_lock:
            self.recorder.append(body)

    @property
    def request_count(self) -> int:
        with self._recorder_lock:
            return len(self.recorder)

    def reply_for(self, body: dict) -> tuple[int, dict | str]:
        last_user = ""
        for message in body.get("messages", []):
            if message.get("role") == "user":
                last_user = message.get("content", "")
        if self.mode == "error":
            return self.error_status, "simulated upstream failure"
        if self.mode == "delay":
            time.sleep(self.delay_ms / 1000.0)
        content = last_user
        if self.mode == "leak_canary" and self.canary_value:
            content = f"{last_user} {self.canary_value}"
        elif self.mode == "emit_pii":
            content = f"{last_user} {TEST_PAN}"
        return 200, {"messages": [{"role": "assistant", "content": content}]}

    def _make_handler(self):
        sim = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    body = {"_raw": raw.decode("utf-8", "replace")}
                sim.record(body)
                status, payload = sim.reply_for(body)
                data = (
                    json.dumps(payload).encode("utf-8")
                    if isinstance(payload, dict)
                    else payload.encode("utf-8")
                )
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # keep test output quiet
                pass

        return Handler


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="Upstream workflow simulator")
    parser.add_argument("--mode", choices=MODES, default="echo")
    parser.add_argument("--port", type=int, default=9900)
    parser.add_argument("--canary", default=None)
    parser.add_argument("--delay-ms", type=int, default=0)
    parser.add_argument("--status", type=int, default=500)
    args = parser.parse_args(argv)
    sim = UpstreamSimulator(
        mode=args.mode,
        canary_value=args.canary,
        delay_ms=args.delay_ms,
        error_status=args.status,
        port=args.port,
    )
    sim.start()
    print(f"simulator [{args.mode}] listening on {sim.base_url}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        sim.stop()


if __name__ == "__main__":
    main()
