"""Frame protocol between the session service and a UI client.

``speller-wire.v1``: JSON frames over a persistent bidirectional channel.
Every frame is an object with a ``kind`` field drawn from FRAME_KINDS plus
kind-specific payload fields.  Two framings carry the same documents:

* stream framing — ASCII byte count, a newline, then that many bytes of
  UTF-8 JSON (``encode_frame`` / ``FrameDecoder``), for raw byte pipes;
* message framing — one JSON document per message on transports that
  already delimit message length (WebSocket text messages).

The service validates every inbound client frame with ``check_client_frame``
before acting; a frame that fails validation is answered with an ``error``
frame and leaves session state untouched.
"""

from __future__ import annotations

import json

from .errors import ProtocolError

PROTOCOL = "speller-wire.v1"

FRAME_KINDS = (
    "hello",
    "config",
    "flash",
    "trial_result",
    "compose_state",
    "suggestions",
    "attend",
    "function_key",
    "error",
    "bye",
)

# Frames a client may send; everything else is server-to-client only.
CLIENT_KINDS = ("hello", "attend", "function_key", "bye")

FUNCTION_NAMES = ("start_trial", "pause", "resume", "set_speed")

ERROR_CODES = ("busy", "bad_frame", "mid_trial", "protocol", "internal")

_MAX_FRAME_BYTES = 1 << 20


def make_frame(kind: str, **payload) -> dict:
    if kind not in FRAME_KINDS:
        raise ProtocolError(f"unknown frame kind {kind!r}")
    return {"kind": kind, **payload}


def error_frame(code: str, message: str) -> dict:
    if code not in ERROR_CODES:
        raise ProtocolError(f"unknown error code {code!r}")
    return {"kind": "error", "code": code, "message": message}


def check_client_frame(obj) -> dict:
    """Validate one inbound frame; returns it or raises ProtocolError."""
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    kind = obj.get("kind")
    if kind not in FRAME_KINDS:
        raise ProtocolError(f"unknown frame kind {kind!r}")
    if kind not in CLIENT_KINDS:
        raise ProtocolError(f"clients may not send {kind!r} frames")
    if kind == "hello":
        if obj.get("protocol") != PROTOCOL:
            raise ProtocolError(
                f"protocol mismatch: need {PROTOCOL!r}, got {obj.get('protocol')!r}"
            )
    elif kind == "attend":
        if not isinstance(obj.get("key"), str) or not obj["key"]:
            raise ProtocolError("attend frame needs a key label")
    elif kind == "function_key":
        name = obj.get("name")
        if name not in FUNCTION_NAMES:
            raise ProtocolError(f"unknown function {name!r}")
        if name == "set_speed":
            value = obj.get("value")
            if not isinstance(value, (int, float)) or not value > 0:
                raise ProtocolError("set_speed needs a positive numeric value")
    return obj


def encode_frame(frame: dict) -> bytes:
    """Stream framing: byte count, newline, JSON bytes."""
    if frame.get("kind") not in FRAME_KINDS:
        raise ProtocolError(f"refusing to encode kind {frame.get('kind')!r}")
    body = json.dumps(frame, separators=(",", ":")).encode("utf-8")
    return str(len(body)).encode("ascii") + b"\n" + body


class FrameDecoder:
    """Incremental decoder for the stream framing; feed() yields frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buf.extend(data)
        frames = []
        while True:
            newline = self._buf.find(b"\n")
            if newline < 0:
                if len(self._buf) > 20:
                    raise ProtocolError("frame length header is not terminated")
                break
            header = bytes(self._buf[:newline])
            if not header.isdigit():
                raise ProtocolError(f"bad frame length header {header!r}")
            length = int(header)
            if length > _MAX_FRAME_BYTES:
                raise ProtocolError(f"frame of {length} bytes exceeds the limit")
            start = newline + 1
            if len(self._buf) < start + length:
                break
            body = bytes(self._buf[start : start + length])
            del self._buf[: start + length]
            try:
                obj = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ProtocolError(f"frame body is not valid JSON: {exc}") from exc
            if not isinstance(obj, dict) or obj.get("kind") not in FRAME_KINDS:
                raise ProtocolError("frame body is not a known frame object")
            frames.append(obj)
        return frames


def parse_message(text: str) -> dict:
    """Message framing: one JSON document per transport message."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"message is not valid JSON: {exc}") from exc
    return check_client_frame(obj)
