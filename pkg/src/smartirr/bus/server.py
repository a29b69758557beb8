"""TCP transport for the broker: length-delimited packets over a stream socket.

Thread-per-connection server; keep-alive is enforced by dropping a client
after 1.5x its declared keep-alive passes with no inbound packet (any
packet, PINGREQ included, resets the clock).
"""

from __future__ import annotations

import logging
import queue
import socket
import socketserver
import threading
import time
from typing import Callable

from .broker import Broker
from .packets import (
    ConnAck,
    Connect,
    DecodeError,
    Disconnect,
    Packet,
    PingReq,
    PingResp,
    Publish,
    StreamDecoder,
    SubAck,
    Subscribe,
    encode_packet,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 1883


class _ClientHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        broker: Broker = self.server.broker  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        decoder = StreamDecoder()
        write_lock = threading.Lock()
        session = None

        def send(packet: Packet) -> None:
            data = encode_packet(packet)
            with write_lock:
                sock.sendall(data)

        try:
            sock.settimeout(30.0)  # pre-CONNECT grace
            while True:
                try:
                    data = sock.recv(4096)
                except socket.timeout:
                    log.info("dropping %s: keep-alive expired", session.client_id if session else "<unconnected>")
                    return
                if not data:
                    return
                for packet in decoder.feed(data):
                    if session is None:
                        if not isinstance(packet, Connect):
                            log.warning("first packet was %s, closing", type(packet).__name__)
                            return
                        session = broker.connect(packet.client_id, send, packet.keep_alive)
                        if packet.keep_alive:
                            sock.settimeout(packet.keep_alive * 1.5)
                        else:
                            sock.settimeout(None)
                        send(ConnAck(0))
                    else:
                        broker.handle_packet(session, packet)
                        if isinstance(packet, Disconnect):
                            return
        except DecodeError as exc:
            log.warning("protocol error from %s: %s", self.client_address, exc)
        except OSError:
            pass
        finally:
            if session is not None:
                broker.disconnect(session)


class BrokerServer(socketserver.ThreadingTCPServer):
    """Serves a Broker over TCP (default port 1883)."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, broker: Broker | None = None, host: str = "0.0.0.0", port: int = DEFAULT_PORT):
        self.broker = broker or Broker()
        super().__init__((host, port), _ClientHandler)
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, name="broker", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    @property
    def port(self) -> int:
        return self.server_address[1]


class BusClient:
    """Small blocking MQTT client used by the simulator, controller and gateway."""

    def __init__(self, host: str, port: int = DEFAULT_PORT, client_id: str = "", keep_alive: int = 0, timeout: float = 10.0):
        self.client_id = client_id or f"client-{id(self):x}"
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._write_lock = threading.Lock()
        self._callbacks: list[Callable[[str, bytes], None]] = []
        self._acks: "queue.Queue[Packet]" = queue.Queue()
        self._packet_id = 0
        self._closed = False

        self._send(Connect(self.client_id, keep_alive))
        ack = self._read_packet_blocking(timeout)
        if not isinstance(ack, ConnAck) or ack.return_code != 0:
            raise ConnectionError(f"broker refused connection: {ack!r}")
        self._sock.settimeout(None)
        self._reader = threading.Thread(target=self._read_loop, name=f"bus-{self.client_id}", daemon=True)
        self._reader.start()
        if keep_alive:
            self._pinger = threading.Thread(
                target=self._ping_loop, args=(keep_alive,), name=f"ping-{self.client_id}", daemon=True
            )
            self._pinger.start()

    def _send(self, packet: Packet) -> None:
        with self._write_lock:
            self._sock.sendall(encode_packet(packet))

    def _read_packet_blocking(self, timeout: float) -> Packet:
        self._sock.settimeout(timeout)
        decoder = StreamDecoder()
        while True:
            data = self._sock.recv(4096)
            if not data:
                raise ConnectionError("broker closed connection")
            packets = decoder.feed(data)
            if packets:
                return packets[0]

    def _read_loop(self) -> None:
        decoder = StreamDecoder()
        try:
            while not self._closed:
                data = self._sock.recv(4096)
                if not data:
                    break
                for packet in decoder.feed(data):
                    if isinstance(packet, Publish):
                        for cb in list(self._callbacks):
                            try:
                                cb(packet.topic, packet.payload)
                            except Exception:
                                log.exception("message callback failed")
                    elif isinstance(packet, (SubAck, PingResp)):
                        self._acks.put(packet)
        except OSError:
            pass
        finally:
            self._closed = True

    def _ping_loop(self, keep_alive: int) -> None:
        while not self._closed:
            time.sleep(keep_alive / 2)
            if self._closed:
                return
            try:
                self._send(PingReq())
            except OSError:
                return

    def on_message(self, callback: Callable[[str, bytes], None]) -> None:
        self._callbacks.append(callback)

    def subscribe(self, *filters: str, timeout: float = 10.0) -> None:
        self._packet_id = self._packet_id % 0xFFFF + 1
        self._send(Subscribe(self._packet_id, tuple(filters)))
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("no SUBACK from broker")
            try:
                ack = self._acks.get(timeout=remaining)
            except queue.Empty:
                continue
            if isinstance(ack, SubAck) and ack.packet_id == self._packet_id:
                return

    def publish(self, topic: str, payload: bytes | str) -> None:
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        self._send(Publish(topic, payload))

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._send(Disconnect())
        except OSError:
            pass
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
