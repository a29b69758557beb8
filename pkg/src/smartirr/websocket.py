"""Minimal RFC 6455 WebSocket support: handshake, text frames, ping/close.

Just enough for the operator dashboard's event stream; no extensions, no
fragmentation (messages here are small JSON documents).
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketError(ConnectionError):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head.append(mask_bit | n)
    elif n <= 0xFFFF:
        head.append(mask_bit | 126)
        head += struct.pack(">H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WebSocketError("peer closed mid-frame")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    b0, b1 = _read_exact(sock, 2)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", _read_exact(sock, 2))
    elif n == 127:
        (n,) = struct.unpack(">Q", _read_exact(sock, 8))
    key = _read_exact(sock, 4) if masked else None
    payload = _read_exact(sock, n) if n else b""
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class ServerConnection:
    """Server side of an upgraded socket: thread-safe sends, reader loop."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._send_lock = threading.Lock()
        self.closed = threading.Event()

    def send_text(self, text: str) -> None:
        self._send(OP_TEXT, text.encode("utf-8"))

    def _send(self, opcode: int, payload: bytes) -> None:
        with self._send_lock:
            self._sock.sendall(encode_frame(opcode, payload))

    def pump_incoming(self) -> None:
        """Consume client frames until close; answers pings."""
        try:
            while not self.closed.is_set():
                opcode, payload = read_frame(self._sock)
                if opcode == OP_CLOSE:
                    try:
                        self._send(OP_CLOSE, payload[:2])
                    except OSError:
                        pass
                    break
                if opcode == OP_PING:
                    self._send(OP_PONG, payload)
        except (OSError, WebSocketError):
            pass
        finally:
            self.closed.set()

    def close(self) -> None:
        if not self.closed.is_set():
            try:
                self._send(OP_CLOSE, b"")
            except OSError:
                pass
        self.closed.set()


class WsTestClient:
    """Tiny blocking client used by tests and smoke checks."""

    def __init__(self, host: str, port: int, path: str = "/ws", timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(os.urandom(16)).decode("ascii")
        request = (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: {host}:{port}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        )
        self._sock.sendall(request.encode("ascii"))
        response = b""
        while b"\r\n\r\n" not in response:
            chunk = self._sock.recv(4096)
            if not chunk:
                raise WebSocketError("server closed during handshake")
            response += chunk
        status_line, _, rest = response.partition(b"\r\n")
        if b"101" not in status_line:
            raise WebSocketError(f"upgrade refused: {status_line.decode(errors='replace')}")
        headers = {}
        head, _, leftover = rest.partition(b"\r\n\r\n")
        for line in head.split(b"\r\n"):
            name, _, value = line.partition(b":")
            headers[name.strip().lower()] = value.strip()
        if headers.get(b"sec-websocket-accept", b"").decode("ascii") != accept_key(key):
            raise WebSocketError("bad Sec-WebSocket-Accept")
        self._leftover = leftover

    def recv(self, n: int) -> bytes:
        # bytes that arrived with the handshake are served first
        if self._leftover:
            out, self._leftover = self._leftover[:n], self._leftover[n:]
            return out
        return self._sock.recv(n)

    def send_text(self, text: str) -> None:
        self._sock.sendall(encode_frame(OP_TEXT, text.encode("utf-8"), mask=True))

    def recv_text(self, timeout: float = 5.0) -> str:
        self._sock.settimeout(timeout)
        while True:
            opcode, payload = read_frame(self)  # type: ignore[arg-type]
            if opcode == OP_TEXT:
                return payload.decode("utf-8")
            if opcode == OP_CLOSE:
                raise WebSocketError("server closed")
            # ignore pings/pongs from this side

    def close(self) -> None:
        try:
            self._sock.sendall(encode_frame(OP_CLOSE, b"", mask=True))
        except OSError:
            pass
        self._sock.close()
