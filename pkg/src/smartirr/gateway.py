"""HTTP + WebSocket bridge between the platform and the operator dashboard.

Pull for history (store-backed), push for live events.  The gateway itself
is stateless apart from per-connection event queues: restarting it loses
nothing that was stored.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .controller import CommandError, Controller
from .store import TelemetryStore
from .websocket import ServerConnection, accept_key

log = logging.getLogger(__name__)

DEFAULT_PORT = 8080
QUEUE_DEPTH = 1024

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class EventQueue:
    """Bounded per-client queue; overflow drops oldest and flags a gap."""

    def __init__(self, maxlen: int = QUEUE_DEPTH):
        self._dq: deque = deque()
        self._cond = threading.Condition()
        self._dropped = 0
        self.maxlen = maxlen

    def push(self, event: dict) -> None:
        with self._cond:
            if len(self._dq) >= self.maxlen:
                self._dq.popleft()
                self._dropped += 1
            self._dq.append(event)
            self._cond.notify()

    def pop(self, timeout: float | None = None) -> dict | None:
        with self._cond:
            if self._dropped:
                n, self._dropped = self._dropped, 0
                return {"kind": "gap", "payload": {"dropped": n}, "ts": _now_ms()}
            if not self._dq:
                self._cond.wait(timeout)
            if self._dropped:
                n, self._dropped = self._dropped, 0
                return {"kind": "gap", "payload": {"dropped": n}, "ts": _now_ms()}
            return self._dq.popleft() if self._dq else None


def _now_ms() -> int:
    return int(time.time() * 1000)


class Gateway:
    """Routes API requests to the store/controller and fans out live events."""

    def __init__(
        self,
        store: TelemetryStore,
        controller: Controller | None = None,
        static_dir: str | Path | None = None,
    ):
        self.store = store
        self.controller = controller
        self.static_dir = Path(static_dir) if static_dir else None
        self._queues: set[EventQueue] = set()
        self._queues_lock = threading.Lock()
        if controller is not None:
            controller.add_listener(self._on_event)

    # -- live events ------------------------------------------------------------

    def _on_event(self, kind: str, payload: dict) -> None:
        event = {"kind": kind, "payload": payload, "ts": _now_ms()}
        with self._queues_lock:
            queues = list(self._queues)
        for q in queues:
            q.push(event)

    def subscribe_events(self) -> EventQueue:
        q = EventQueue()
        with self._queues_lock:
            self._queues.add(q)
        return q

    def unsubscribe_events(self, q: EventQueue) -> None:
        with self._queues_lock:
            self._queues.discard(q)

    def snapshot_event(self) -> dict:
        payload = {"status": None}
        if self.controller is not None:
            payload["status"] = self.controller.status()
        return {"kind": "snapshot", "payload": payload, "ts": _now_ms()}

    # -- request routing ----------------------------------------------------------

    def handle_request(self, method: str, path: str, body: bytes | None = None) -> tuple[int, dict | list]:
        """Pure request router: (status, json-serializable body)."""
        parsed = urlparse(path)
        route = parsed.path.rstrip("/") or "/"
        query = parse_qs(parsed.query)

        if method == "GET" and route == "/api/status":
            if self.controller is None:
                return 503, {"error": "controller unreachable"}
            return 200, self.controller.status()
        if method == "GET" and route == "/api/telemetry":
            start, end = self._range(query)
            return 200, [r.to_json() for r in self.store.query_range(start, end, "readings")]
        if method == "GET" and route == "/api/decisions":
            start, end = self._range(query)
            return 200, [d.to_json() for d in self.store.query_range(start, end, "decisions")]
        if method == "POST" and route == "/api/mode":
            return self._post_mode(body)
        if method == "POST" and route == "/api/command":
            return self._post_command(body)
        if route.startswith("/api/"):
            return 404, {"error": f"unknown endpoint {route}"}
        return 404, {"error": "not found"}

    @staticmethod
    def _range(query: dict) -> tuple[int, int]:
        def pick(name: str, default: int) -> int:
            try:
                return int(query[name][0])
            except (KeyError, IndexError, ValueError):
                return default

        return pick("from", 0), pick("to", _now_ms() + 1)

    def _parse_body(self, body: bytes | None) -> dict | None:
        if not body:
            return None
        try:
            obj = json.loads(body)
        except json.JSONDecodeError:
            return None
        return obj if isinstance(obj, dict) else None

    def _post_mode(self, body: bytes | None) -> tuple[int, dict]:
        obj = self._parse_body(body)
        if obj is None or "mode" not in obj:
            return 400, {"error": "body must be JSON with a 'mode' field"}
        if self.controller is None:
            return 503, {"error": "controller unreachable"}
        try:
            self.controller.set_mode(obj["mode"])
        except CommandError as exc:
            return 409, {"error": str(exc)}
        return 200, self.controller.status()

    def _post_command(self, body: bytes | None) -> tuple[int, dict]:
        obj = self._parse_body(body)
        if obj is None or "value" not in obj:
            return 400, {"error": "body must be JSON with a 'value' field"}
        if self.controller is None:
            return 503, {"error": "controller unreachable"}
        value = obj["value"]
        if not isinstance(value, int) or isinstance(value, bool):
            return 409, {"error": "value must be the integer 0 or 1"}
        try:
            self.controller.manual_command(value)
        except CommandError as exc:
            return 409, {"error": str(exc)}
        return 200, self.controller.status()

    # -- static files ---------------------------------------------------------------

    def static_file(self, path: str) -> tuple[bytes, str] | None:
        if self.static_dir is None:
            return None
        name = path.lstrip("/") or "index.html"
        target = (self.static_dir / name).resolve()
        try:
            target.relative_to(self.static_dir.resolve())
        except ValueError:
            return None
        if not target.is_file():
            return None
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return target.read_bytes(), ctype


class _GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, body) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:
        if urlparse(self.path).path == "/ws":
            self._upgrade_websocket()
            return
        if not self.path.startswith("/api/"):
            served = self.gateway.static_file(urlparse(self.path).path)
            if served is not None:
                data, ctype = served
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
                return
        status, body = self.gateway.handle_request("GET", self.path)
        self._send_json(status, body)

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, reply = self.gateway.handle_request("POST", self.path, body)
        self._send_json(status, reply)

    def _upgrade_websocket(self) -> None:
        key = self.headers.get("Sec-WebSocket-Key")
        if not key or "websocket" not in (self.headers.get("Upgrade") or "").lower():
            self._send_json(400, {"error": "expected a WebSocket upgrade"})
            return
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", accept_key(key))
        self.end_headers()
        self.wfile.flush()

        conn = ServerConnection(self.connection)
        queue = self.gateway.subscribe_events()
        reader = threading.Thread(target=conn.pump_incoming, daemon=True)
        reader.start()
        try:
            conn.send_text(json.dumps(self.gateway.snapshot_event()))
            while not conn.closed.is_set():
                event = queue.pop(timeout=0.25)
                if event is not None:
                    conn.send_text(json.dumps(event))
        except OSError:
            pass
        finally:
            self.gateway.unsubscribe_events(queue)
            conn.close()
            self.close_connection = True


class GatewayServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, gateway: Gateway, host: str = "0.0.0.0", port: int = DEFAULT_PORT):
        self.gateway = gateway
        super().__init__((host, port), _GatewayHandler)
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, name="gateway", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    @property
    def port(self) -> int:
        return self.server_address[1]
