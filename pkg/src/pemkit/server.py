"""TCP server exposing loaded models to an external simulator process.

Each connection runs one independent session (model, track state, seeded
generator); the model registry is read-only after startup, so sessions never
share mutable state. Protocol violations produce one error reply and leave
the session running.
"""

from __future__ import annotations

import socketserver
import threading

from . import protocol
from .geometry import OcclusionLevel, polar_from_xy, xy_from_polar
from .inject import GroundTruthObject, TrackState, apply_pem, session_rng
from .model import PemModel


class Session:
    """Per-connection state: which model, detection tracks, rng, frame clock."""

    def __init__(self, models: dict[str, PemModel]):
        self._models = models
        self.model: PemModel | None = None
        self.seed = 0
        self.rate_hz = 2.0
        self.reset_count = 0
        self.tracks: TrackState = {}
        self.last_t: int | None = None
        self.rng = None

    def handle(self, msg: dict) -> dict:
        kind = msg["type"]
        if kind == "init":
            return self._init(msg)
        if kind == "reset":
            return self._reset()
        if kind == "frame":
            return self._frame(msg)
        raise AssertionError(f"unroutable message {kind}")  # parse_request screens types

    def _init(self, msg: dict) -> dict:
        name = msg["model"]
        if name not in self._models:
            return protocol.error_msg(protocol.ERR_UNKNOWN_MODEL, f"no model named {name!r}")
        self.model = self._models[name]
        self.seed = msg["seed"]
        self.rate_hz = float(msg["rate_hz"])
        self.reset_count = 0
        self.tracks = {}
        self.last_t = None
        self.rng = session_rng(self.seed, 0)
        return protocol.ack_msg("init")

    def _reset(self) -> dict:
        if self.model is None:
            return protocol.error_msg(protocol.ERR_NOT_INITIALIZED, "reset before init")
        self.reset_count += 1
        self.tracks = {}
        self.last_t = None
        self.rng = session_rng(self.seed, self.reset_count)
        return protocol.ack_msg("reset")

    def _frame(self, msg: dict) -> dict:
        if self.model is None:
            return protocol.error_msg(protocol.ERR_NOT_INITIALIZED, "frame before init")
        t = msg["t"]
        if self.last_t is not None and t <= self.last_t:
            return protocol.error_msg(
                protocol.ERR_TIME_REGRESSION, f"frame t {t} not greater than {self.last_t}"
            )
        ids = [obj["id"] for obj in msg["objects"]]
        if len(ids) != len(set(ids)):
            dup = next(i for i in ids if ids.count(i) > 1)
            return protocol.error_msg(protocol.ERR_DUPLICATE_ID, f"duplicate object id {dup}")
        world = [
            GroundTruthObject(
                id=obj["id"],
                position=polar_from_xy(float(obj["x"]), float(obj["y"])),
                occlusion=OcclusionLevel(obj["occ"]),
            )
            for obj in msg["objects"]
        ]
        perceived, self.tracks = apply_pem(self.model, world, self.tracks, self.rng)
        self.last_t = t
        out = []
        for p in perceived:
            x, y = xy_from_polar(p.position)
            out.append({"source_id": p.source_id, "x": x, "y": y})
        return protocol.response_msg(t, out)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.models)  # type: ignore[attr-defined]
        for raw in self.rfile:
            try:
                msg = protocol.parse_request(raw)
            except protocol.ProtocolError as exc:
                self.wfile.write(protocol.encode(protocol.error_msg(exc.code, exc.message)))
                continue
            if msg["type"] == "shutdown":
                self.wfile.write(protocol.encode(protocol.ack_msg("shutdown")))
                self.wfile.flush()
                threading.Thread(target=self.server.shutdown, daemon=True).start()
                return
            self.wfile.write(protocol.encode(session.handle(msg)))


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class PemServer:
    """Serves a read-only model registry; one session per connection.

    Binds on construction (so bind failures surface as startup errors);
    ``serve_forever`` blocks until ``shutdown`` is called or a client sends a
    shutdown request.
    """

    def __init__(self, models: dict[str, PemModel], host: str = "127.0.0.1", port: int = protocol.DEFAULT_PORT):
        if not models:
            raise ValueError("at least one model is required")
        self._tcp = _ThreadingServer((host, port), _Handler)
        self._tcp.models = dict(models)  # type: ignore[attr-defined]

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def serve_forever(self) -> None:
        self._tcp.serve_forever(poll_interval=0.1)

    def shutdown(self) -> None:
        self._tcp.shutdown()

    def close(self) -> None:
        self._tcp.server_close()

    def __enter__(self) -> "PemServer":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()
        self.close()


def serve_in_thread(models: dict[str, PemModel], host: str = "127.0.0.1", port: int = 0) -> tuple[PemServer, threading.Thread]:
    """Start a server on a background thread (port 0 picks a free port)."""
    server = PemServer(models, host=host, port=port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
