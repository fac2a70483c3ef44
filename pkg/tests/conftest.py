"""Shared fixtures: a deterministic local HTTP server for crawl tests.

The server dispatches on the Host header, so fixture sites with arbitrary
hostnames (main.com, sub.main.com) can be exercised through the fetcher's
resolve overrides while everything stays on 127.0.0.1.
"""

from __future__ import annotations

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class FixtureSite:
    """In-memory site: (host, path) -> response spec.

    A spec is a dict with optional keys status (default 200), headers
    (list of (name, value) pairs, duplicates allowed) and body (str|bytes).
    Paths registered under host=None match any Host header.
    """

    def __init__(self):
        self.responses: dict[tuple[str | None, str], dict] = {}
        self.requests: list[tuple[str, str]] = []
        self.user_agents: list[str] = []
        self.host = "127.0.0.1"
        self.port = 0

    def add(self, path: str, body: str = "", *, host: str | None = None,
            status: int = 200, headers: list[tuple[str, str]] | None = None,
            content_type: str = "text/html; charset=utf-8", delay: float = 0.0) -> None:
        self.responses[(host, path)] = {
            "status": status,
            "headers": headers or [],
            "body": body,
            "content_type": content_type,
            "delay": delay,
        }

    def url(self, path: str, host: str | None = None, scheme: str = "http") -> str:
        authority = host if host else f"{self.host}:{self.port}"
        if host:
            authority = host  # resolve overrides will route it here
        return f"{scheme}://{authority}{path}"

    def resolve_overrides(self, *hosts: str) -> dict[str, str]:
        return {h: f"{self.host}:{self.port}" for h in hosts}


def _make_handler(site: FixtureSite):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def do_GET(self):  # noqa: N802 (http.server API)
            host = (self.headers.get("Host") or "").split(":")[0].lower()
            site.requests.append((host, self.path))
            site.user_agents.append(self.headers.get("User-Agent", ""))
            spec = site.responses.get((host, self.path)) or site.responses.get((None, self.path))
            if spec is None:
                body = b"not found"
                self.send_response(404)
                self.send_header("Content-Type", "text/plain")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            if spec["delay"]:
                time.sleep(spec["delay"])
            body = spec["body"]
            if isinstance(body, str):
                body = body.encode("utf-8")
            self.send_response(spec["status"])
            self.send_header("Content-Type", spec["content_type"])
            for name, value in spec["headers"]:
                self.send_header(name, value)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    return Handler


@pytest.fixture
def fixture_site():
    site = FixtureSite()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_handler(site))
    site.port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield site
    finally:
        server.shutdown()
        server.server_close()
