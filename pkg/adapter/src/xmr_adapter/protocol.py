"""Length-prefixed JSON framing over binary streams.

Each message is a u32 little-endian byte count followed by UTF-8 JSON. The
serve loop answers decodable-but-invalid requests with {"error": str} and
keeps going; EOF or a shutdown request ends the session cleanly, a broken
frame ends it with a nonzero code.
"""

from __future__ import annotations

import json
import struct

MAX_FRAME_BYTES = 64 * 1024 * 1024


class FramingError(Exception):
    """The byte stream cannot be resynchronized."""


def write_frame(stream, obj: dict) -> None:
    payload = json.dumps(obj).encode("utf-8")
    stream.write(struct.pack("<I", len(payload)) + payload)
    stream.flush()


def read_frame_bytes(stream) -> bytes | None:
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise FramingError("stream ended inside a frame header")
    (length,) = struct.unpack("<I", header)
    if length > MAX_FRAME_BYTES:
        raise FramingError(f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} cap")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise FramingError("stream ended inside a frame payload")
        payload += chunk
    return payload


def serve(handler, stdin, stdout) -> int:
    """Dispatch protocol requests to a handler object until the session ends.

    The handler provides hello() -> dict, embed_image(id, png_bytes) -> list,
    and embed_text(id, text) -> list.
    """
    import base64

    while True:
        try:
            payload = read_frame_bytes(stdin)
        except FramingError:
            return 1
        if payload is None:
            return 0
        try:
            request = json.loads(payload.decode("utf-8"))
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except (ValueError, UnicodeDecodeError) as e:
            write_frame(stdout, {"error": f"bad request: {e}"})
            continue
        op = request.get("op")
        try:
            if op == "hello":
                write_frame(stdout, handler.hello())
            elif op == "shutdown":
                return 0
            elif op == "embed_image":
                png = base64.b64decode(request["png_b64"], validate=True)
                vec = handler.embed_image(request["id"], png)
                write_frame(stdout, {"id": request["id"], "embedding": vec})
            elif op == "embed_text":
                vec = handler.embed_text(request["id"], request["text"])
                write_frame(stdout, {"id": request["id"], "embedding": vec})
            else:
                write_frame(stdout, {"error": f"unknown op {op!r}"})
        except Exception as e:  # per-request failure: report and keep serving
            write_frame(stdout, {"error": f"{type(e).__name__}: {e}"})
