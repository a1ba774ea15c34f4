"""Framed request/response network service for the series store.

Wire format, one request per frame over TCP, all integers big-endian:

    request  = magic 0x54 0x4D | version 0x01 | opcode u8
             | name_len u32 | name | payload_len u32 | payload
    response = status u8 | payload_len u32 | payload

Opcodes: 0x01 PUT (payload = TSB1 blob), 0x02 GET, 0x03 LIST (the name field
holds the prefix).  Status: 0x00 OK, 0x01 NOT_FOUND, 0x02 ERROR.  GET answers
with the stored TSB1 blob byte-for-byte, LIST with newline-separated names,
errors with a UTF-8 message.

A connection may carry any number of well-formed frames.  Malformed requests
are answered with an ERROR status first; only requests that desynchronise the
framing (bad magic or version, oversized length fields) close the connection
after the response.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading

from vmsim.model import TimeSeries
from vmsim.times.codec import CodecError, decode_series, encode_series
from vmsim.times.store import InvalidName, NotFound, SeriesStore, StoreError

REQ_MAGIC = b"TM"
VERSION = 1

OP_PUT = 0x01
OP_GET = 0x02
OP_LIST = 0x03

ST_OK = 0x00
ST_NOT_FOUND = 0x01
ST_ERROR = 0x02

MAX_NAME_OCTETS = 0xFFFF
MAX_PAYLOAD_OCTETS = 1 << 28

_U32 = struct.Struct(">I")


class ProtocolError(Exception):
    """Malformed frame on the wire (either direction)."""


class RemoteError(StoreError):
    """Server answered with an ERROR status."""


class BindFailure(Exception):
    pass


class _Desync(Exception):
    """Request rejected and the stream can no longer be trusted."""

    def __init__(self, message):
        super().__init__(message)
        self.message = message


def _read_exact(rfile, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = rfile.read(remaining)
        if not chunk:
            raise EOFError(f"peer closed with {remaining} of {n} octets outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _write_response(wfile, status: int, payload: bytes = b"") -> None:
    wfile.write(bytes([status]) + _U32.pack(len(payload)) + payload)
    wfile.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        store = self.server.store
        while True:
            try:
                head = self.rfile.read(1)
                if not head:
                    return  # clean disconnect between frames
                head += _read_exact(self.rfile, 3)
                request = self._read_frame(head)
            except _Desync as exc:
                _write_response(self.wfile, ST_ERROR, exc.message.encode("utf-8"))
                return
            except (EOFError, ConnectionError, OSError):
                return  # peer vanished mid-frame, nothing left to answer
            status, payload = self._execute(store, *request)
            try:
                _write_response(self.wfile, status, payload)
            except (ConnectionError, OSError):
                return

    def _read_frame(self, head: bytes):
        if head[:2] != REQ_MAGIC:
            raise _Desync("bad request magic")
        if head[2] != VERSION:
            raise _Desync(f"unsupported protocol version {head[2]}")
        opcode = head[3]
        (name_len,) = _U32.unpack(_read_exact(self.rfile, 4))
        if name_len > MAX_NAME_OCTETS:
            raise _Desync(f"name_len {name_len} exceeds limit {MAX_NAME_OCTETS}")
        name_bytes = _read_exact(self.rfile, name_len)
        (payload_len,) = _U32.unpack(_read_exact(self.rfile, 4))
        if payload_len > MAX_PAYLOAD_OCTETS:
            raise _Desync(f"payload_len {payload_len} exceeds limit {MAX_PAYLOAD_OCTETS}")
        payload = _read_exact(self.rfile, payload_len)
        return opcode, name_bytes, payload

    def _execute(self, store, opcode, name_bytes, payload):
        try:
            name = name_bytes.decode("utf-8")
        except UnicodeDecodeError:
            return ST_ERROR, b"name is not valid UTF-8"
        try:
            if opcode == OP_PUT:
                store.put_bytes(name, payload)
                return ST_OK, b""
            if opcode == OP_GET:
                return ST_OK, store.get_bytes(name)
            if opcode == OP_LIST:
                return ST_OK, "\n".join(store.list(name)).encode("utf-8")
            return ST_ERROR, f"unknown opcode {opcode:#04x}".encode("utf-8")
        except NotFound:
            return ST_NOT_FOUND, b""
        except (CodecError, InvalidName, StoreError) as exc:
            return ST_ERROR, str(exc).encode("utf-8")


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class TimesServer:
    """Serves a SeriesStore over the wire protocol until shut down."""

    def __init__(self, store: SeriesStore, listen: tuple[str, int]):
        try:
            self._server = _TcpServer(listen, _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {listen[0]}:{listen[1]}: {exc}") from exc
        self._server.store = store
        self._thread = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def start(self) -> None:
        """Serve on a background thread (tests and embedded use)."""
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


class TimesClient:
    """Blocking client for the wire protocol; one request in flight at a time.

    Safe to hand one instance per worker; a single instance must not be shared
    between concurrent requesters.
    """

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._rfile = self._sock.makefile("rb")

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, opcode: int, name: str, payload: bytes = b""):
        name_bytes = name.encode("utf-8")
        frame = (REQ_MAGIC + bytes([VERSION, opcode])
                 + _U32.pack(len(name_bytes)) + name_bytes
                 + _U32.pack(len(payload)) + payload)
        self._sock.sendall(frame)
        head = _read_exact(self._rfile, 5)
        status = head[0]
        (length,) = _U32.unpack(head[1:])
        if length > MAX_PAYLOAD_OCTETS:
            raise ProtocolError(f"response payload_len {length} exceeds limit")
        body = _read_exact(self._rfile, length)
        return status, body

    def put(self, name: str, series: TimeSeries) -> None:
        self.put_bytes(name, encode_series(series))

    def put_bytes(self, name: str, blob: bytes) -> None:
        status, body = self._request(OP_PUT, name, blob)
        self._raise_unless_ok(status, body)

    def get(self, name: str) -> TimeSeries:
        return decode_series(self.get_bytes(name))

    def get_bytes(self, name: str) -> bytes:
        status, body = self._request(OP_GET, name)
        if status == ST_NOT_FOUND:
            raise NotFound(f"no series named {name!r}")
        self._raise_unless_ok(status, body)
        return body

    def list(self, prefix: str = "") -> list[str]:
        status, body = self._request(OP_LIST, prefix)
        self._raise_unless_ok(status, body)
        text = body.decode("utf-8")
        return text.split("\n") if text else []

    @staticmethod
    def _raise_unless_ok(status: int, body: bytes) -> None:
        if status == ST_OK:
            return
        if status == ST_ERROR:
            raise RemoteError(body.decode("utf-8", "replace"))
        raise ProtocolError(f"unexpected status {status:#04x}")


def parse_address(value: str) -> tuple[str, int]:
    """Split a HOST:PORT string; raises ValueError on malformed input."""
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected HOST:PORT, got {value!r}")
    return host, int(port)
