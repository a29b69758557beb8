"""In-process broker core: subscription table and QoS-0 routing.

The core is transport-agnostic.  TCP connections (see ``server``) and the
loopback clients below both register a session with a send callback; all
table mutations and routing are serialized through one lock, so delivery
order per client equals publish arrival order.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable

from .packets import (
    ConnAck,
    Connect,
    Disconnect,
    Packet,
    PingReq,
    PingResp,
    Publish,
    SubAck,
    Subscribe,
    topic_matches,
    validate_filter,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Subscription:
    client_ref: str
    filter: str

    def __post_init__(self) -> None:
        validate_filter(self.filter)


def route_publish(pub: Publish, subs: list[Subscription]) -> list[Subscription]:
    """Return the subscription entries a publish is delivered to.

    One delivery per matching entry; a client holding two overlapping
    filters receives the message once per entry.
    """
    return [s for s in subs if topic_matches(s.filter, pub.topic)]


class Session:
    def __init__(self, client_id: str, send: Callable[[Packet], None], keep_alive: int = 0):
        self.client_id = client_id
        self.keep_alive = keep_alive
        self.connected = True
        self._send = send

    def deliver(self, packet: Packet) -> bool:
        if not self.connected:
            return False
        try:
            self._send(packet)
            return True
        except Exception:
            # QoS 0: a failing client just loses the message
            log.debug("dropping delivery to %s", self.client_id, exc_info=True)
            return False


class Broker:
    """Routes publishes to matching subscribers, QoS 0 only."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}
        self._subs: list[Subscription] = []

    def connect(self, client_id: str, send: Callable[[Packet], None], keep_alive: int = 0) -> Session:
        with self._lock:
            old = self._sessions.get(client_id)
            if old is not None:
                # 3.1.1 semantics: a reconnecting client id replaces the old session
                self._drop(old)
            session = Session(client_id, send, keep_alive)
            self._sessions[client_id] = session
            return session

    def disconnect(self, session: Session) -> None:
        with self._lock:
            self._drop(session)

    def _drop(self, session: Session) -> None:
        session.connected = False
        if self._sessions.get(session.client_id) is session:
            del self._sessions[session.client_id]
        self._subs = [s for s in self._subs if s.client_ref != session.client_id]

    def handle_packet(self, session: Session, packet: Packet) -> None:
        """Process one inbound packet from a connected session."""
        if isinstance(packet, Publish):
            self.route(packet)
        elif isinstance(packet, Subscribe):
            with self._lock:
                for f in packet.filters:
                    self._subs.append(Subscription(session.client_id, f))
            session.deliver(SubAck(packet.packet_id, tuple(0 for _ in packet.filters)))
        elif isinstance(packet, PingReq):
            session.deliver(PingResp())
        elif isinstance(packet, Disconnect):
            self.disconnect(session)
        elif isinstance(packet, (Connect, ConnAck)):
            log.warning("unexpected %s from connected client %s", type(packet).__name__, session.client_id)

    def publish(self, topic: str, payload: bytes | str) -> int:
        """Inject a publish without a session; returns delivery count."""
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        return self.route(Publish(topic, payload))

    def route(self, pub: Publish) -> int:
        with self._lock:
            targets = [(s, self._sessions.get(s.client_ref)) for s in route_publish(pub, self._subs)]
            delivered = 0
            for _, session in targets:
                if session is not None and session.deliver(pub):
                    delivered += 1
            return delivered

    def subscription_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def local_client(self, client_id: str, keep_alive: int = 0) -> "LocalClient":
        return LocalClient(self, client_id, keep_alive)


class LocalClient:
    """Loopback client: same broker semantics, no sockets or codec.

    Messages are dispatched synchronously on the publisher's thread, which
    keeps tests deterministic.
    """

    def __init__(self, broker: Broker, client_id: str, keep_alive: int = 0):
        self._broker = broker
        self.client_id = client_id
        self._callbacks: list[Callable[[str, bytes], None]] = []
        self._packet_id = 0
        self._session = broker.connect(client_id, self._on_packet, keep_alive)

    def _on_packet(self, packet: Packet) -> None:
        if isinstance(packet, Publish):
            for cb in list(self._callbacks):
                cb(packet.topic, packet.payload)

    def on_message(self, callback: Callable[[str, bytes], None]) -> None:
        self._callbacks.append(callback)

    def subscribe(self, *filters: str) -> None:
        self._packet_id = self._packet_id % 0xFFFF + 1
        self._broker.handle_packet(self._session, Subscribe(self._packet_id, tuple(filters)))

    def publish(self, topic: str, payload: bytes | str) -> None:
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        self._broker.handle_packet(self._session, Publish(topic, payload))

    def close(self) -> None:
        self._broker.handle_packet(self._session, Disconnect())

    @property
    def connected(self) -> bool:
        return self._session.connected
