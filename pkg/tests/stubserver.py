"""Local stub tool server used by the tool and chain tests.

Routes: POST /echo, GET /search, POST /summarize. Each route keeps an
invocation counter so tests can assert exactly which tools were contacted.
/summarize returns HTTP 500 when the text starts with "!fail".
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args) -> None:
        pass

    def _reply(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return {}

    def do_POST(self) -> None:
        path = urlparse(self.path).path
        self.server.counts[path] = self.server.counts.get(path, 0) + 1
        body = self._body()
        if path == "/echo":
            self._reply(200, {"q": body.get("q", "")})
        elif path == "/summarize":
            text = str(body.get("text", ""))
            if text.startswith("!fail"):
                self._reply(500, {"error": "forced failure"})
            else:
                self._reply(200, {"summary": f"summary[{len(text.split())} words]"})
        else:
            self._reply(404, {"error": "no such route"})

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        path = parsed.path
        self.server.counts[path] = self.server.counts.get(path, 0) + 1
        if path == "/search":
            query = parse_qs(parsed.query).get("query", [""])[0]
            self._reply(200, {"result": f"result for: {query}"})
        else:
            self._reply(404, {"error": "no such route"})


class StubToolServer:
    def __init__(self) -> None:
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._httpd.counts = {}
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def counts(self) -> dict:
        return self._httpd.counts

    def reset_counts(self) -> None:
        self._httpd.counts.clear()

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
