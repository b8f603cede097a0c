"""HTTP control service for a live run.

Read endpoints serve immutable snapshots of run state; control endpoints
post messages onto the run's control bus. The service never mutates
pipeline internals directly, so it can run on any number of threads beside
the trainer. Binds loopback by default; no authentication.
"""

from __future__ import annotations

import json
import threading
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .checkpoint import load_cloud
from .errors import ControlError, ProeditError, StructuralError
from .image import to_png_bytes
from .pipeline import ProgressiveRun, select_aggressivity
from .splat import render

EVENT_STREAM_HEARTBEAT = 2.0


@lru_cache(maxsize=8)
def _cached_cloud(path: str, mtime_ns: int):
    cloud, _ = load_cloud(path)
    return cloud


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "proedit"
    run: ProgressiveRun = None  # installed by ControlService

    def log_message(self, fmt, *args):
        pass

    # ----- plumbing -------------------------------------------------------

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, code: int, payload) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, code: int, reason: str) -> None:
        self._send_json(code, {"error": reason})

    def _send_png(self, data: bytes) -> None:
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "image/png")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_body_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            return json.loads(raw.decode() or "{}")
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise StructuralError(f"request body is not valid JSON: {exc}") from exc

    # ----- verbs ----------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        try:
            if url.path == "/api/status":
                self._send_json(200, self.run.status())
            elif url.path == "/api/schedule":
                self._send_json(200, self.run.schedule_payload())
            elif url.path == "/api/snapshots":
                self._send_json(200, self.run.snapshots_payload())
            elif url.path == "/api/render":
                self._handle_render(parse_qs(url.query))
            elif url.path == "/api/events":
                self._handle_events()
            else:
                self._send_error_json(404, f"unknown path {url.path}")
        except BrokenPipeError:
            pass
        except StructuralError as exc:
            self._send_error_json(400, str(exc))
        except ProeditError as exc:
            self._send_error_json(404, str(exc))

    def do_POST(self):
        url = urlparse(self.path)
        try:
            body = self._read_body_json()
            if url.path == "/api/control":
                self._handle_control(body)
            elif url.path == "/api/schedule":
                self._handle_schedule(body)
            else:
                self._send_error_json(404, f"unknown path {url.path}")
        except ControlError as exc:
            self._send_error_json(409, str(exc))
        except StructuralError as exc:
            self._send_error_json(400, str(exc))
        except ProeditError as exc:
            self._send_error_json(400, str(exc))

    # ----- endpoint bodies --------------------------------------------------

    def _handle_render(self, query: dict) -> None:
        try:
            stage_index = int(query["snapshot"][0])
            view = int(query["view"][0])
        except (KeyError, ValueError, IndexError):
            raise StructuralError("render needs integer snapshot= and view= params")
        if not 0 <= view < len(self.run.cameras):
            raise StructuralError(f"view {view} outside 0..{len(self.run.cameras) - 1}")
        matches = [
            i
            for i, s in enumerate(self.run.snapshots)
            if s.stage_index == stage_index
        ]
        if not matches:
            self._send_error_json(404, f"no snapshot for stage {stage_index}")
            return
        snap = select_aggressivity(self.run.snapshots, matches[0])
        mtime = Path(snap.checkpoint_path).stat().st_mtime_ns
        cloud = _cached_cloud(snap.checkpoint_path, mtime)
        image = render(cloud, self.run.cameras[view]).image
        self._send_png(to_png_bytes(image))

    def _handle_events(self) -> None:
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Connection", "close")
        self.end_headers()
        index = 0
        while True:
            events = self.run.events.wait_from(index, timeout=EVENT_STREAM_HEARTBEAT)
            try:
                if events:
                    for record in events:
                        self.wfile.write(
                            (json.dumps(record, sort_keys=True) + "\n").encode()
                        )
                    index += len(events)
                else:
                    self.wfile.write(b'{"event": "heartbeat"}\n')
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return
            if self.run.control.mode in ("finished", "aborted") and not events:
                return

    def _handle_control(self, body: dict) -> None:
        action = body.get("action")
        if action == "pause":
            self.run.control.pause()
        elif action == "resume":
            self.run.control.resume()
        elif action == "skip_stage":
            self.run.control.skip_stage()
        elif action == "stop_at":
            stage = body.get("stage")
            if not isinstance(stage, int):
                raise StructuralError("stop_at needs an integer 'stage'")
            self.run.control.request_stop_at(stage, self.run.current_stage_index())
        else:
            raise StructuralError(f"unknown control action {action!r}")
        self._send_json(200, self.run.status())

    def _handle_schedule(self, body: dict) -> None:
        threshold = body.get("threshold")
        if not isinstance(threshold, (int, float)):
            raise StructuralError("schedule adjustment needs a numeric 'threshold'")
        self.run.adjust_schedule(float(threshold))
        self._send_json(200, self.run.schedule_payload())


class ControlService:
    """Threaded HTTP server bound to a run; start() returns immediately."""

    def __init__(self, run: ProgressiveRun, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"run": run})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "ControlService":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10.0)


def parse_address(addr: str) -> tuple[str, int]:
    """Parse "host:port" or ":port" or "port" into a bind address."""
    addr = addr.strip()
    if ":" in addr:
        host, _, port = addr.rpartition(":")
        host = host or "127.0.0.1"
    else:
        host, port = "127.0.0.1", addr
    try:
        return host, int(port)
    except ValueError as exc:
        raise StructuralError(f"invalid serve address {addr!r}") from exc
