"""Length-prefixed JSON protocol to external embedder processes.

Every message is a u32 little-endian byte length followed by that many bytes
of UTF-8 JSON, exchanged over the child's standard streams in strict
request/response lockstep:

    {"op": "hello"}                          -> {"name": str, "dim": int}
    {"op": "embed_image", "id": s, "png_b64": s} -> {"id": s, "embedding": [..]}
    {"op": "embed_text",  "id": s, "text": s}    -> {"id": s, "embedding": [..]}
    {"op": "shutdown"}                       -> process exits 0

Servers answer a decodable-but-invalid request with {"error": str} and keep
serving; a broken frame ends the session. Any client-side failure raises a
typed ProtocolError subclass and the benchmark run aborts: results never
silently skip failed embeddings.
"""

from __future__ import annotations

import base64
import json
import os
import select
import struct
import subprocess
import threading
import time
from dataclasses import dataclass

import numpy as np

from .data import ImageTensor, decode_image, encode_image
from .embedders import Embedder

MAX_FRAME_BYTES = 64 * 1024 * 1024
DEFAULT_TIMEOUT = 60.0


class ProtocolError(Exception):
    """Base class for wire-protocol failures."""


class ProcessExitError(ProtocolError):
    """The embedder process ended while a response was pending."""


class MalformedResponseError(ProtocolError):
    """The embedder sent bytes that are not a valid response."""


class DimensionMismatchError(ProtocolError):
    """An embedding's length differs from the advertised dimension."""


class TimeoutError_(ProtocolError):
    """No complete response arrived within the per-request timeout."""


class RemoteError(ProtocolError):
    """The embedder answered with an {"error": ...} response."""


def write_frame(stream, obj: dict) -> None:
    payload = json.dumps(obj, sort_keys=True).encode("utf-8")
    stream.write(struct.pack("<I", len(payload)) + payload)
    stream.flush()


def read_frame_bytes(stream) -> bytes | None:
    """Read one raw frame payload from a binary stream; None on clean EOF."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise MalformedResponseError("stream ended inside a frame header")
    (length,) = struct.unpack("<I", header)
    if length > MAX_FRAME_BYTES:
        raise MalformedResponseError(f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} cap")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise MalformedResponseError("stream ended inside a frame payload")
        payload += chunk
    return payload


def decode_payload(payload: bytes) -> dict:
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedResponseError(f"frame payload is not JSON: {e}") from None


def read_frame(stream) -> dict | None:
    """Blocking frame read from a binary stream; None on clean EOF."""
    payload = read_frame_bytes(stream)
    return None if payload is None else decode_payload(payload)


class _TimedReader:
    """Reads frames from a pipe with a deadline, via select on the raw fd."""

    def __init__(self, stream):
        self._stream = stream
        self._fd = stream.fileno()
        self._buf = b""

    def _fill(self, n: int, deadline: float) -> None:
        while len(self._buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError_("timed out waiting for an embedder response")
            ready, _, _ = select.select([self._fd], [], [], remaining)
            if not ready:
                raise TimeoutError_("timed out waiting for an embedder response")
            chunk = os.read(self._fd, 65536)
            if not chunk:
                raise ProcessExitError("embedder closed its output stream")
            self._buf += chunk

    def read_frame(self, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        self._fill(4, deadline)
        (length,) = struct.unpack("<I", self._buf[:4])
        if length > MAX_FRAME_BYTES:
            raise MalformedResponseError(
                f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} cap"
            )
        self._fill(4 + length, deadline)
        payload = self._buf[4 : 4 + length]
        self._buf = self._buf[4 + length :]
        try:
            obj = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise MalformedResponseError(f"response is not JSON: {e}") from None
        if not isinstance(obj, dict):
            raise MalformedResponseError("response is not a JSON object")
        return obj


class ExternalEmbedder(Embedder):
    """Client for one embedder child process, serializing its requests.

    The handshake runs lazily on first use and pins the advertised name and
    dimension; every embedding is checked against that dimension. A lock
    keeps request/response pairs in lockstep even when the benchmark runs
    images on several threads.
    """

    def __init__(self, command: list[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._reader: _TimedReader | None = None
        self._name: str | None = None
        self._dim: int | None = None

    # -- lifecycle ----------------------------------------------------------

    def _ensure_started(self) -> None:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=None,  # let the child log to our stderr
                )
            except OSError as e:
                raise ProcessExitError(f"cannot start embedder {self.command!r}: {e}") from None
            self._reader = _TimedReader(self._proc.stdout)
            self._handshake()

    def _handshake(self) -> None:
        reply = self._request({"op": "hello"})
        name = reply.get("name")
        dim = reply.get("dim")
        if not isinstance(name, str) or not isinstance(dim, int) or dim < 1:
            raise MalformedResponseError(f"invalid hello response: {reply!r}")
        self._name = name
        self._dim = dim

    def _request(self, message: dict) -> dict:
        proc = self._proc
        try:
            write_frame(proc.stdin, message)
        except (BrokenPipeError, OSError):
            raise ProcessExitError(
                f"embedder exited (code {proc.poll()}) before accepting a request"
            ) from None
        try:
            reply = self._reader.read_frame(self.timeout)
        except ProcessExitError:
            raise ProcessExitError(f"embedder exited with code {proc.poll()}") from None
        if "error" in reply:
            raise RemoteError(str(reply["error"]))
        return reply

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.poll() is None:
                write_frame(proc.stdin, {"op": "shutdown"})
                proc.stdin.close()
            proc.wait(timeout=10)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    # -- embedding ----------------------------------------------------------

    @property
    def name(self) -> str:  # type: ignore[override]
        with self._lock:
            self._ensure_started()
            return self._name

    @property
    def dim(self) -> int:
        with self._lock:
            self._ensure_started()
            return self._dim

    def _embed(self, message: dict, id_: str) -> np.ndarray:
        with self._lock:
            self._ensure_started()
            reply = self._request(message)
        if reply.get("id") != id_ or "embedding" not in reply:
            raise MalformedResponseError(f"unexpected embed response: {list(reply)!r}")
        try:
            vec = np.asarray(reply["embedding"], dtype=np.float64)
        except (TypeError, ValueError):
            raise MalformedResponseError("embedding is not a numeric array") from None
        if vec.ndim != 1 or vec.size != self._dim:
            raise DimensionMismatchError(
                f"embedding for {id_!r} has length {vec.size}, advertised dim is {self._dim}"
            )
        if not np.isfinite(vec).all():
            raise MalformedResponseError(f"embedding for {id_!r} has non-finite entries")
        return vec

    def embed_image(self, image_id: str, image: ImageTensor | None) -> np.ndarray:
        if image is None:
            raise ValueError("external embedders require pixel data")
        png_b64 = base64.b64encode(encode_image(image, format="PNG")).decode("ascii")
        return self._embed(
            {"op": "embed_image", "id": image_id, "png_b64": png_b64}, image_id
        )

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        return self._embed({"op": "embed_text", "id": text_id, "text": text}, text_id)


# ---------------------------------------------------------------------------
# Server side
# ---------------------------------------------------------------------------

def serve_embedder(embedder: Embedder, stdin, stdout) -> int:
    """Answer protocol requests over binary streams until shutdown or EOF.

    Requests that frame correctly but fail to decode or to execute get an
    {"error": ...} reply and the loop continues; EOF ends the loop cleanly
    while a broken frame ends it with a nonzero code (the stream cannot be
    resynchronized). Returns the exit code.
    """
    while True:
        try:
            payload = read_frame_bytes(stdin)
        except MalformedResponseError:
            return 1  # framing is broken; the stream cannot be trusted
        if payload is None:
            return 0
        try:
            request = decode_payload(payload)
        except MalformedResponseError as e:
            write_frame(stdout, {"error": str(e)})
            continue
        if not isinstance(request, dict):
            write_frame(stdout, {"error": "request must be a JSON object"})
            continue
        op = request.get("op")
        try:
            if op == "hello":
                write_frame(stdout, {"name": embedder.name, "dim": embedder.dim})
            elif op == "shutdown":
                return 0
            elif op == "embed_image":
                image = decode_image(base64.b64decode(request["png_b64"], validate=True))
                vec = embedder.embed_image(request["id"], image)
                write_frame(
                    stdout, {"id": request["id"], "embedding": [float(x) for x in vec]}
                )
            elif op == "embed_text":
                vec = embedder.embed_text(request["id"], request["text"])
                write_frame(
                    stdout, {"id": request["id"], "embedding": [float(x) for x in vec]}
                )
            else:
                write_frame(stdout, {"error": f"unknown op {op!r}"})
        except Exception as e:  # answer per-request failures, keep serving
            write_frame(stdout, {"error": f"{type(e).__name__}: {e}"})


# ---------------------------------------------------------------------------
# Conformance suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConformanceResult:
    check: str
    passed: bool
    detail: str = ""


def run_conformance(command: list[str], timeout: float = DEFAULT_TIMEOUT) -> list[ConformanceResult]:
    """Exercise an embedder command against the protocol contract.

    Checks: hello shape, image and text embedding shape/dimension agreement,
    embedding determinism, error responses for malformed JSON and unknown
    ops (with the session still usable afterwards), and a clean exit 0 on
    shutdown. Returns one result per check; never raises for a misbehaving
    server.
    """
    results: list[ConformanceResult] = []

    def record(check: str, passed: bool, detail: str = ""):
        results.append(ConformanceResult(check=check, passed=passed, detail=detail))

    test_image = ImageTensor.from_array(
        np.linspace(0.0, 1.0, 64, dtype=np.float64).reshape(8, 8)
    )
    png_b64 = base64.b64encode(encode_image(test_image, format="PNG")).decode("ascii")

    proc = subprocess.Popen(
        command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL
    )
    reader = _TimedReader(proc.stdout)

    def ask(message: dict | bytes) -> dict:
        if isinstance(message, bytes):
            proc.stdin.write(struct.pack("<I", len(message)) + message)
            proc.stdin.flush()
        else:
            write_frame(proc.stdin, message)
        return reader.read_frame(timeout)

    dim = None
    try:
        reply = ask({"op": "hello"})
        ok = isinstance(reply.get("name"), str) and isinstance(reply.get("dim"), int) \
            and reply.get("dim", 0) >= 1
        record("hello advertises (name, dim)", ok, detail=repr(reply))
        dim = reply.get("dim") if ok else None

        reply = ask({"op": "embed_image", "id": "img-1", "png_b64": png_b64})
        emb = reply.get("embedding")
        ok = (
            reply.get("id") == "img-1"
            and isinstance(emb, list)
            and (dim is None or len(emb) == dim)
            and all(isinstance(x, (int, float)) for x in emb)
        )
        record("embed_image returns a dim-length embedding", ok, detail=repr(reply)[:200])
        first = emb if ok else None

        reply = ask({"op": "embed_image", "id": "img-1", "png_b64": png_b64})
        record(
            "embed_image is deterministic for identical bytes",
            first is not None and reply.get("embedding") == first,
        )

        reply = ask({"op": "embed_text", "id": "txt-1", "text": "t1 t9 t17"})
        emb = reply.get("embedding")
        ok = (
            reply.get("id") == "txt-1"
            and isinstance(emb, list)
            and (dim is None or len(emb) == dim)
        )
        record("embed_text returns a dim-length embedding", ok, detail=repr(reply)[:200])

        reply = ask(b"this is not json")
        record("malformed JSON gets an error response", "error" in reply, detail=repr(reply))

        reply = ask({"op": "no-such-op"})
        record("unknown op gets an error response", "error" in reply, detail=repr(reply))

        reply = ask({"op": "embed_image", "id": "img-2", "png_b64": "!!!not-base64!!!"})
        record("invalid image payload gets an error response", "error" in reply,
               detail=repr(reply))

        reply = ask({"op": "embed_text", "id": "txt-2", "text": "t2"})
        record(
            "session survives rejected requests",
            reply.get("id") == "txt-2" and isinstance(reply.get("embedding"), list),
        )

        write_frame(proc.stdin, {"op": "shutdown"})
        code = proc.wait(timeout=timeout)
        record("shutdown exits with code 0", code == 0, detail=f"exit code {code}")
    except (ProtocolError, OSError, subprocess.TimeoutExpired) as e:
        record("protocol session", False, detail=f"{type(e).__name__}: {e}")
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
    return results
