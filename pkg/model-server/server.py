"""HTTP shim exposing an extractive-QA model over the answer protocol.

Endpoints:

* ``POST /answer`` with ``{"question": str, "context": str}`` returns
  ``{"answer": str, "score": float, "start": int, "end": int}``. An
  abstention is an empty answer with start and end both -1. Scores are
  clamped to [0, 1]. Non-abstention answers are verbatim slices of the
  (possibly truncated) context at [start, end).
* ``GET /health`` returns 200 with the model identifier once the model
  is loaded, 503 before that.

Malformed request bodies get 400; answer requests before the model
finishes loading get 503.

Configuration comes from the environment: ``MODEL_ID`` names the model
and is required (the server refuses to start without it), ``BIND_ADDR``
is ``host:port`` (default 127.0.0.1:8080), ``MAX_CONTEXT`` caps the
context length in characters (default 8192, longer contexts are
truncated), and ``MODEL_LOAD_DELAY`` adds seconds to model
initialization so deployments can rehearse the loading window.

The server handles requests concurrently; the model is a pure function
of its inputs, so no inference lock is needed.
"""

from __future__ import annotations

import json
import os
import sys
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from lexical_model import LexicalOverlapModel

MAX_BODY_BYTES = 1 << 20


@dataclass(frozen=True)
class ServerConfig:
    model_id: str
    host: str
    port: int
    max_context: int
    load_delay: float


class ConfigurationError(Exception):
    pass


def config_from_env(env=os.environ) -> ServerConfig:
    model_id = env.get("MODEL_ID", "").strip()
    if not model_id:
        raise ConfigurationError("MODEL_ID environment variable is required")
    bind = env.get("BIND_ADDR", "127.0.0.1:8080")
    host, sep, port_text = bind.rpartition(":")
    if not sep or not host:
        raise ConfigurationError(f"BIND_ADDR must be host:port, got {bind!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigurationError(f"BIND_ADDR port is not a number: {bind!r}") from None
    try:
        max_context = int(env.get("MAX_CONTEXT", "8192"))
        load_delay = float(env.get("MODEL_LOAD_DELAY", "0"))
    except ValueError as exc:
        raise ConfigurationError(f"bad numeric environment value: {exc}") from None
    if max_context <= 0:
        raise ConfigurationError("MAX_CONTEXT must be positive")
    return ServerConfig(
        model_id=model_id,
        host=host,
        port=port,
        max_context=max_context,
        load_delay=load_delay,
    )


class ModelSlot:
    """Holds the model once loading finishes; None while loading."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self._model: LexicalOverlapModel | None = None
        self._lock = threading.Lock()

    def load_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self._load, daemon=True)
        thread.start()
        return thread

    def _load(self) -> None:
        if self.config.load_delay > 0:
            time.sleep(self.config.load_delay)
        model = LexicalOverlapModel(self.config.model_id)
        with self._lock:
            self._model = model

    def get(self) -> LexicalOverlapModel | None:
        with self._lock:
            return self._model


class AnswerHandler(BaseHTTPRequestHandler):
    server_version = "qa-shim/1.0"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        sys.stderr.write("%s - %s\n" % (self.address_string(), format % args))

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        slot: ModelSlot = self.server.slot
        if self.path != "/health":
            self._send_json(404, {"error": "not found"})
            return
        model = slot.get()
        if model is None:
            self._send_json(503, {"status": "loading", "model": slot.config.model_id})
            return
        self._send_json(200, {"status": "ok", "model": model.model_id})

    def do_POST(self) -> None:
        slot: ModelSlot = self.server.slot
        if self.path != "/answer":
            self._send_json(404, {"error": "not found"})
            return
        model = slot.get()
        if model is None:
            self._send_json(503, {"error": "model is loading"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._send_json(400, {"error": "bad Content-Length"})
            return
        if length <= 0:
            self._send_json(400, {"error": "empty body"})
            return
        if length > MAX_BODY_BYTES:
            self._send_json(400, {"error": "body too large"})
            return
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send_json(400, {"error": "body is not valid JSON"})
            return
        if not isinstance(payload, dict):
            self._send_json(400, {"error": "body must be a JSON object"})
            return
        question = payload.get("question")
        context = payload.get("context")
        if not isinstance(question, str) or not isinstance(context, str):
            self._send_json(400, {"error": "question and context must be strings"})
            return
        context = context[: slot.config.max_context]
        span = model.answer(question, context)
        if span is None:
            self._send_json(200, {"answer": "", "score": 0.0, "start": -1, "end": -1})
            return
        score = max(0.0, min(1.0, span.score))
        self._send_json(
            200,
            {"answer": span.text, "score": score, "start": span.start, "end": span.end},
        )


def make_server(config: ServerConfig) -> ThreadingHTTPServer:
    """Bind the server and kick off model loading; caller runs serve_forever."""
    httpd = ThreadingHTTPServer((config.host, config.port), AnswerHandler)
    httpd.slot = ModelSlot(config)
    httpd.slot.load_in_background()
    return httpd


def main() -> int:
    try:
        config = config_from_env()
    except ConfigurationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    httpd = make_server(config)
    host, port = httpd.server_address[:2]
    sys.stderr.write(f"serving model {config.model_id!r} on {host}:{port}\n")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
