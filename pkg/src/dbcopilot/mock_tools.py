"""Bundled mock diagnostic-tool server.

Stands in for the production tool suite: serves the eight scripted tools
over the same REST contract (POST {endpoint} with ``{"arguments": ...}``,
reply ``{"status", "data", "message"}``), with deterministic responses
driven by a scenario file. Every response echoes the received arguments
under ``data.echo`` so tests can assert wire-level round-trips. Requests
are handled concurrently and the server keeps no per-request state.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path

SCRIPTED_TOOLS = (
    "slow_sql_rca",
    "metric_inspect",
    "io_topk_process",
    "lock_wait_check",
    "index_recommend",
    "mem_analysis",
    "wdr_report",
    "knob_recommend",
)


def load_scenarios(path: str | Path | None = None) -> dict:
    if path is None:
        data = resources.files("dbcopilot.data").joinpath("scenarios.json")
        return json.loads(data.read_text(encoding="utf-8"))
    return json.loads(Path(path).read_text(encoding="utf-8"))


class MockToolServer:
    """Threaded HTTP server replaying canned per-scenario tool responses."""

    def __init__(self, scenarios: dict, scenario: str = "default", port: int = 0):
        self.scenarios = scenarios
        self.scenario = scenario
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # silence request logging in tests
                pass

            def _reply(self, code: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/health":
                    self._reply(200, {"status": "ok", "data": {"scenario": outer.scenario},
                                      "message": ""})
                else:
                    self._reply(404, {"status": "error", "data": None,
                                      "message": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._reply(400, {"status": "error", "data": None,
                                      "message": "malformed JSON body"})
                    return
                if not self.path.startswith("/tools/"):
                    self._reply(404, {"status": "error", "data": None,
                                      "message": "unknown endpoint"})
                    return
                tool = self.path[len("/tools/"):]
                if tool not in SCRIPTED_TOOLS:
                    self._reply(404, {"status": "error", "data": None,
                                      "message": f"unknown tool: {tool}"})
                    return
                arguments = body.get("arguments", {})
                self._reply(200, outer.response_for(tool, arguments))

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread: threading.Thread | None = None

    def response_for(self, tool: str, arguments: dict) -> dict:
        canned = self.scenarios.get(self.scenario, {}).get(tool, {})
        data = dict(canned.get("data", {}))
        data.setdefault("findings", [])
        data["echo"] = arguments
        return {
            "status": canned.get("status", "ok"),
            "data": data,
            "message": canned.get("message", ""),
        }

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "MockToolServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "MockToolServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def run_mock_server(scenario_file: str | Path | None = None,
                    scenario: str = "default", port: int = 0) -> MockToolServer:
    """Start the mock suite in a daemon thread; returns the server handle."""
    return MockToolServer(load_scenarios(scenario_file), scenario, port).start()
