"""MQTT 3.1.1-subset wire codec.

Supports the packet types the platform actually exchanges: CONNECT/CONNACK,
QoS-0 PUBLISH, SUBSCRIBE/SUBACK, PINGREQ/PINGRESP and DISCONNECT.  Byte layout
follows the MQTT 3.1.1 standard: a fixed header (4-bit type, 4-bit flags)
followed by the remaining length as a 7-bits-per-byte varint, then
big-endian u16-length-prefixed UTF-8 strings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_REMAINING_LENGTH = 268_435_455

# fixed-header type nibbles
_T_CONNECT = 1
_T_CONNACK = 2
_T_PUBLISH = 3
_T_SUBSCRIBE = 8
_T_SUBACK = 9
_T_PINGREQ = 12
_T_PINGRESP = 13
_T_DISCONNECT = 14

_CONNECT_PREAMBLE = b"\x00\x04MQTT\x04"  # protocol name + level 4
_CLEAN_SESSION = 0x02


class CodecError(ValueError):
    """Base for wire-format violations."""


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    pass


class NeedMoreData(Exception):
    """The buffer ends mid-packet; feed more bytes and retry (not a failure)."""


class TopicError(ValueError):
    pass


def validate_topic(topic: str) -> str:
    """Reject empty topics and wildcard characters in publish topics."""
    if not topic:
        raise TopicError("topic must be non-empty")
    if "+" in topic or "#" in topic:
        raise TopicError(f"wildcards not allowed in topic: {topic!r}")
    return topic


def validate_filter(filt: str) -> str:
    """Reject malformed topic filters ('#' only final, '+' a whole level)."""
    if not filt:
        raise TopicError("filter must be non-empty")
    levels = filt.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                raise TopicError(f"'#' must be the final level on its own: {filt!r}")
        elif "+" in level and level != "+":
            raise TopicError(f"'+' must occupy a whole level: {filt!r}")
    return filt


def topic_matches(filt: str, topic: str) -> bool:
    """Level-by-level filter match: '+' is one level, '#' the remainder."""
    flevels = filt.split("/")
    tlevels = topic.split("/")
    for i, f in enumerate(flevels):
        if f == "#":
            return True
        if i >= len(tlevels):
            return False
        if f != "+" and f != tlevels[i]:
            return False
    return len(flevels) == len(tlevels)


@dataclass(frozen=True)
class Connect:
    client_id: str
    keep_alive: int = 0

    def __post_init__(self) -> None:
        if not self.client_id:
            raise ValueError("client_id must be non-empty")
        if not 0 <= self.keep_alive <= 0xFFFF:
            raise ValueError("keep_alive out of u16 range")


@dataclass(frozen=True)
class ConnAck:
    return_code: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.return_code <= 5:
            raise ValueError("return_code must be 0-5")


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes

    def __post_init__(self) -> None:
        validate_topic(self.topic)
        if not isinstance(self.payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        object.__setattr__(self, "payload", bytes(self.payload))


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    filters: tuple[str, ...]

    def __post_init__(self) -> None:
        if not 0 < self.packet_id <= 0xFFFF:
            raise ValueError("packet_id must be a nonzero u16")
        object.__setattr__(self, "filters", tuple(self.filters))
        if not self.filters:
            raise ValueError("subscribe needs at least one filter")
        for f in self.filters:
            validate_filter(f)


@dataclass(frozen=True)
class SubAck:
    packet_id: int
    codes: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0 < self.packet_id <= 0xFFFF:
            raise ValueError("packet_id must be a nonzero u16")
        object.__setattr__(self, "codes", tuple(self.codes))
        for c in self.codes:
            if not 0 <= c <= 0xFF:
                raise ValueError("suback code out of byte range")


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Connect | ConnAck | Publish | Subscribe | SubAck | PingReq | PingResp | Disconnect


def encode_length(n: int) -> bytes:
    """Remaining-length varint: 7 bits per byte, MSB = continuation."""
    if n < 0 or n > MAX_REMAINING_LENGTH:
        raise EncodeError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            byte |= 0x80
        out.append(byte)
        if not n:
            return bytes(out)


def decode_length(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Return (value, bytes consumed).  Raises on a 5th continuation byte."""
    value = 0
    shift = 0
    for i in range(4):
        if offset + i >= len(buf):
            raise NeedMoreData("truncated remaining-length varint")
        byte = buf[offset + i]
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, i + 1
        shift += 7
    raise DecodeError("malformed remaining-length varint (more than 4 bytes)")


def _string(text: str) -> bytes:
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise EncodeError("string too long for u16 length prefix")
    return len(data).to_bytes(2, "big") + data


def _read_string(body: bytes, pos: int) -> tuple[str, int]:
    if pos + 2 > len(body):
        raise DecodeError("truncated string length")
    n = int.from_bytes(body[pos : pos + 2], "big")
    end = pos + 2 + n
    if end > len(body):
        raise DecodeError("string exceeds remaining length")
    try:
        return body[pos + 2 : end].decode("utf-8"), end
    except UnicodeDecodeError as exc:
        raise DecodeError(f"invalid UTF-8 in string: {exc}") from None


def encode_packet(p: Packet) -> bytes:
    """Encode a packet to its standard byte form (QoS 0, clean session)."""
    if isinstance(p, Connect):
        body = _CONNECT_PREAMBLE + bytes([_CLEAN_SESSION]) + p.keep_alive.to_bytes(2, "big")
        body += _string(p.client_id)
        head = _T_CONNECT << 4
    elif isinstance(p, ConnAck):
        body = bytes([0, p.return_code])
        head = _T_CONNACK << 4
    elif isinstance(p, Publish):
        body = _string(p.topic) + p.payload
        head = _T_PUBLISH << 4
    elif isinstance(p, Subscribe):
        body = p.packet_id.to_bytes(2, "big")
        for f in p.filters:
            body += _string(f) + b"\x00"  # requested QoS always 0
        head = (_T_SUBSCRIBE << 4) | 0x02
    elif isinstance(p, SubAck):
        body = p.packet_id.to_bytes(2, "big") + bytes(p.codes)
        head = _T_SUBACK << 4
    elif isinstance(p, PingReq):
        body, head = b"", _T_PINGREQ << 4
    elif isinstance(p, PingResp):
        body, head = b"", _T_PINGRESP << 4
    elif isinstance(p, Disconnect):
        body, head = b"", _T_DISCONNECT << 4
    else:
        raise EncodeError(f"unknown packet: {p!r}")
    return bytes([head]) + encode_length(len(body)) + body


def decode_packet(buf: bytes) -> tuple[Packet, int]:
    """Decode one packet from the front of ``buf``.

    Returns (packet, bytes consumed) so callers can reassemble chunked
    streams.  Raises NeedMoreData when the buffer ends mid-packet and
    DecodeError on real malformations.
    """
    if len(buf) < 1:
        raise NeedMoreData("empty buffer")
    head = buf[0]
    ptype = head >> 4
    flags = head & 0x0F
    length, nlen = decode_length(buf, 1)
    start = 1 + nlen
    end = start + length
    if end > len(buf):
        raise NeedMoreData("truncated packet body")
    body = bytes(buf[start:end])

    if ptype == _T_CONNECT:
        _expect_flags(flags, 0, "CONNECT")
        if body[:7] != _CONNECT_PREAMBLE:
            raise DecodeError("bad protocol name/level in CONNECT")
        if len(body) < 10:
            raise DecodeError("CONNECT body too short")
        connect_flags = body[7]
        if connect_flags & ~_CLEAN_SESSION:
            raise DecodeError("unsupported CONNECT flags (wills/auth not supported)")
        keep_alive = int.from_bytes(body[8:10], "big")
        client_id, pos = _read_string(body, 10)
        _expect_consumed(pos, body, "CONNECT")
        return Connect(client_id, keep_alive), end
    if ptype == _T_CONNACK:
        _expect_flags(flags, 0, "CONNACK")
        if len(body) != 2:
            raise DecodeError("CONNACK body must be 2 bytes")
        if body[1] > 5:
            raise DecodeError(f"CONNACK return code {body[1]} out of range")
        return ConnAck(body[1]), end
    if ptype == _T_PUBLISH:
        if flags != 0:
            raise DecodeError("only QoS 0 PUBLISH without DUP/RETAIN is supported")
        topic, pos = _read_string(body, 0)
        try:
            validate_topic(topic)
        except TopicError as exc:
            raise DecodeError(str(exc)) from None
        return Publish(topic, body[pos:]), end
    if ptype == _T_SUBSCRIBE:
        _expect_flags(flags, 2, "SUBSCRIBE")
        if len(body) < 2:
            raise DecodeError("SUBSCRIBE body too short")
        packet_id = int.from_bytes(body[:2], "big")
        pos = 2
        filters = []
        while pos < len(body):
            f, pos = _read_string(body, pos)
            if pos >= len(body):
                raise DecodeError("SUBSCRIBE filter missing QoS byte")
            if body[pos] != 0:
                raise DecodeError("only QoS 0 subscriptions are supported")
            pos += 1
            try:
                validate_filter(f)
            except TopicError as exc:
                raise DecodeError(str(exc)) from None
            filters.append(f)
        if not filters:
            raise DecodeError("SUBSCRIBE carries no filters")
        return Subscribe(packet_id, tuple(filters)), end
    if ptype == _T_SUBACK:
        _expect_flags(flags, 0, "SUBACK")
        if len(body) < 2:
            raise DecodeError("SUBACK body too short")
        return SubAck(int.from_bytes(body[:2], "big"), tuple(body[2:])), end
    if ptype == _T_PINGREQ:
        _expect_flags(flags, 0, "PINGREQ")
        _expect_empty(body, "PINGREQ")
        return PingReq(), end
    if ptype == _T_PINGRESP:
        _expect_flags(flags, 0, "PINGRESP")
        _expect_empty(body, "PINGRESP")
        return PingResp(), end
    if ptype == _T_DISCONNECT:
        _expect_flags(flags, 0, "DISCONNECT")
        _expect_empty(body, "DISCONNECT")
        return Disconnect(), end
    raise DecodeError(f"unknown packet type {ptype}")


def _expect_flags(flags: int, want: int, name: str) -> None:
    if flags != want:
        raise DecodeError(f"{name} fixed-header flags must be {want}, got {flags}")


def _expect_empty(body: bytes, name: str) -> None:
    if body:
        raise DecodeError(f"{name} must have zero remaining length")


def _expect_consumed(pos: int, body: bytes, name: str) -> None:
    if pos != len(body):
        raise DecodeError(f"{name} has {len(body) - pos} trailing bytes")


class StreamDecoder:
    """Incremental decoder for a chunked byte stream of packets."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Packet]:
        """Append bytes and return every packet that became complete."""
        self._buf.extend(data)
        out: list[Packet] = []
        while self._buf:
            try:
                packet, used = decode_packet(bytes(self._buf))
            except NeedMoreData:
                break
            del self._buf[:used]
            out.append(packet)
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)
