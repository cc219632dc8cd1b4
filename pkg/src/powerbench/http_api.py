"""HTTP/JSON front ends for the access server and the controller.

Thin, synchronous wrappers over the in-process objects: every route decodes
JSON, calls the method, and maps the exception taxonomy onto status codes.
Authentication is out of scope; callers identify via the X-Principal header
and the server trusts its role table.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .errors import (
    EncodingError,
    ExclusivityError,
    NotFoundError,
    PermissionError_,
    PowerbenchError,
    RangeError,
    RoutingError,
    SafetyError,
    StateError,
    ValidationError,
)

_STATUS = (
    (NotFoundError, 404),
    (PermissionError_, 403),
    (RangeError, 400),
    (ValidationError, 400),
    (EncodingError, 400),
    (SafetyError, 409),
    (ExclusivityError, 409),
    (StateError, 409),
    (RoutingError, 409),
    (PowerbenchError, 500),
)


def _status_for(exc: Exception) -> int:
    for etype, code in _STATUS:
        if isinstance(exc, etype):
            return code
    return 500


class JsonService:
    """Route table + threaded HTTP server; subclass and fill self.routes."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.routes: list[tuple[str, re.Pattern, object]] = []
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass  # quiet; the platform logs at a higher level

            def _dispatch(self, method):
                parsed = urlsplit(self.path)
                query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
                body = {}
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    try:
                        body = json.loads(self.rfile.read(length) or b"{}")
                    except json.JSONDecodeError:
                        return self._send(400, {"error": "invalid JSON body"})
                for verb, pattern, fn in service.routes:
                    if verb != method:
                        continue
                    match = pattern.fullmatch(parsed.path)
                    if match is None:
                        continue
                    try:
                        result = fn(self.headers, query, body, *match.groups())
                    except Exception as exc:  # mapped onto HTTP status codes
                        return self._send(
                            _status_for(exc),
                            {"error": str(exc), "type": type(exc).__name__},
                        )
                    if isinstance(result, bytes):
                        self.send_response(200)
                        self.send_header("Content-Type", "application/octet-stream")
                        self.send_header("Content-Length", str(len(result)))
                        self.end_headers()
                        self.wfile.write(result)
                        return None
                    return self._send(200, result)
                return self._send(404, {"error": f"no route for {parsed.path}"})

            def _send(self, code, doc):
                payload = json.dumps(doc).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._dispatch("GET")

            def do_POST(self):
                self._dispatch("POST")

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def route(self, method: str, pattern: str, fn) -> None:
        self.routes.append((method, re.compile(pattern), fn))

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "JsonService":
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.02), daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()


class AccessServerService(JsonService):
    """Registry, job, and refresh routes for one AccessServer."""

    def __init__(self, server, host="127.0.0.1", port=8080):
        super().__init__(host, port)
        self.server = server
        self.route("POST", r"/nodes", self._register)
        self.route("GET", r"/nodes", self._list_nodes)
        self.route("GET", r"/nodes/([^/]+)/devices", self._list_devices)
        self.route("POST", r"/jobs", self._submit)
        self.route("GET", r"/jobs/([^/]+)", self._job)
        self.route("POST", r"/jobs/([^/]+)/abort", self._abort)
        self.route("GET", r"/jobs/([^/]+)/artifacts/(.+)", self._artifact)
        self.route("POST", r"/refresh", self._refresh)
        self.route("POST", r"/schedule", self._schedule)

    def _principal(self, headers):
        return self.server.principal(headers.get("X-Principal", ""))

    def _register(self, headers, query, body):
        record = self.server.register_vantage_point(
            body.get("id"),
            body.get("address", ""),
            body.get("credential", ""),
            self._principal(headers),
            location=body.get("location", ""),
        )
        return record.to_dict()

    def _list_nodes(self, headers, query, body):
        return {
            "nodes": self.server.list_nodes(
                label=query.get("label"), state=query.get("state")
            )
        }

    def _list_devices(self, headers, query, body, node_id):
        devices, stale = self.server.list_devices(node_id)
        return {"devices": devices, "stale": stale}

    def _submit(self, headers, query, body):
        job_id = self.server.submit_job(body, self._principal(headers))
        self.server.schedule()
        return {"job_id": job_id}

    def _job(self, headers, query, body, job_id):
        return self.server.job(job_id)

    def _abort(self, headers, query, body, job_id):
        return self.server.abort_job(job_id)

    def _artifact(self, headers, query, body, job_id, name):
        return self.server.artifact(job_id, name)

    def _refresh(self, headers, query, body):
        return self.server.refresh()

    def _schedule(self, headers, query, body):
        return {"dispatched": self.server.schedule()}


class ControllerService(JsonService):
    """One route per core API operation, plus job, input, and frame routes."""

    def __init__(self, controller, host="127.0.0.1", port=8081):
        super().__init__(host, port)
        self.controller = controller
        c = controller
        self.route("GET", r"/status", lambda h, q, b: c.status())
        self.route("POST", r"/power_monitor",
                   lambda h, q, b: {"meter": c.power_monitor(b["state"])})
        self.route("POST", r"/set_voltage",
                   lambda h, q, b: {"voltage": c.set_voltage(float(b["voltage"])).voltage})
        self.route("POST", r"/batt_switch",
                   lambda h, q, b: {"channel": c.batt_switch(b["device_id"])})
        self.route("POST", r"/start_monitor",
                   lambda h, q, b: {"trace_id": c.start_monitor(
                       b["device_id"], float(b["duration"]))})
        self.route("POST", r"/stop_monitor",
                   lambda h, q, b: {"trace_id": c.stop_monitor()})
        self.route("POST", r"/device_mirroring",
                   lambda h, q, b: c.device_mirroring(b["device_id"], b["state"]))
        self.route("POST", r"/execute_command", self._execute)
        self.route("POST", r"/node_setup",
                   lambda h, q, b: c.node_setup(
                       b["device_id"], bool(b.get("power", True)),
                       bool(b.get("visual", False))))
        self.route("POST", r"/device_setup",
                   lambda h, q, b: c.device_setup(b["device_id"], b.get("brightness")))
        self.route("POST", r"/cleanup",
                   lambda h, q, b: c.cleanup(b.get("device_id")))
        self.route("POST", r"/advance",
                   lambda h, q, b: {"time": self._advance(float(b["seconds"]))})
        self.route("POST", r"/jobs/run",
                   lambda h, q, b: c.run_job(b.get("job_id", "adhoc"), b["steps"]))
        self.route("POST", r"/input", self._input)
        self.route("GET", r"/frames", self._frames)

    def _advance(self, seconds):
        self.controller.advance(seconds)
        return self.controller.clock.now()

    def _execute(self, headers, query, body):
        command = body.get("command")
        return self.controller.execute_command(
            body["device_id"], command, body.get("automation")
        )

    def _input(self, headers, query, body):
        from .replay import RecordedEvent

        action = body.get("action", "append")
        if action == "open":
            session = self.controller.open_recording(body["device_id"])
            return {"session_id": session.session_id,
                    "device_size": list(session.device_size)}
        session = self.controller.recording(body["session_id"])
        if action == "close":
            session.close()
            return {"session_id": session.session_id, "events": len(session.events)}
        count = 0
        for doc in body.get("events", []):
            count = session.ingest(RecordedEvent.from_dict(doc))
        return {"session_id": session.session_id, "events": count}

    def _frames(self, headers, query, body):
        device_id = query.get("device_id")
        count = int(query.get("count", "1"))
        return {"frames": self.controller.frames(device_id, count)}
