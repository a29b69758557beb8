import random

import pytest

from smartirr.bus.packets import (
    ConnAck,
    Connect,
    DecodeError,
    EncodeError,
    NeedMoreData,
    PingReq,
    Publish,
    StreamDecoder,
    Subscribe,
    TopicError,
    decode_length,
    decode_packet,
    encode_length,
    encode_packet,
    topic_matches,
    validate_filter,
    validate_topic,
)
from support import random_packet


class TestVarint:
    def test_known_encoding(self):
        # 321 = 65 + 2*128 -> low byte 0x41|0x80, then 0x02
        assert encode_length(321) == bytes([0xC1, 0x02])
        assert decode_length(bytes([0xC1, 0x02])) == (321, 2)

    @pytest.mark.parametrize(
        "value,nbytes",
        [(0, 1), (127, 1), (128, 2), (16383, 2), (16384, 3), (2097151, 3), (2097152, 4), (268435455, 4)],
    )
    def test_boundary_lengths(self, value, nbytes):
        encoded = encode_length(value)
        assert len(encoded) == nbytes
        assert decode_length(encoded) == (value, nbytes)

    def test_oversize_rejected(self):
        with pytest.raises(EncodeError):
            encode_length(268435456)

    def test_fifth_continuation_byte_is_malformed(self):
        with pytest.raises(DecodeError):
            decode_length(b"\xff\xff\xff\xff\xff")

    def test_truncated_varint_wants_more(self):
        with pytest.raises(NeedMoreData):
            decode_length(b"\xff\xff")


class TestCodec:
    def test_pingreq_bytes(self):
        assert encode_packet(PingReq()) == b"\xc0\x00"
        assert decode_packet(b"\xc0\x00") == (PingReq(), 2)

    def test_connack_accepted_bytes(self):
        assert encode_packet(ConnAck(0)) == b"\x20\x02\x00\x00"

    def test_publish_round_trip_telemetry_payload(self):
        p = Publish("test/newdata", b"78,9,485,1")
        decoded, used = decode_packet(encode_packet(p))
        assert decoded == p
        assert used == len(encode_packet(p))

    def test_connect_round_trip(self):
        p = Connect("node-1", keep_alive=60)
        assert decode_packet(encode_packet(p))[0] == p

    def test_subscribe_round_trip(self):
        p = Subscribe(7, ("field/+/telemetry", "test/newdata"))
        assert decode_packet(encode_packet(p))[0] == p

    def test_malformed_varint_stream(self):
        with pytest.raises(DecodeError):
            decode_packet(b"\x30\xff\xff\xff\xff\xff")
        with pytest.raises(DecodeError):
            decode_packet(b"\xff\xff\xff\xff\xff")

    def test_unknown_packet_type(self):
        with pytest.raises(DecodeError):
            decode_packet(b"\x00\x00")

    def test_truncated_body_signals_need_more(self):
        full = encode_packet(Publish("a/b", b"xyz"))
        with pytest.raises(NeedMoreData):
            decode_packet(full[:-1])

    def test_trailing_bytes_of_next_packet_ignored(self):
        first = encode_packet(PingReq())
        second = encode_packet(ConnAck(0))
        packet, used = decode_packet(first + second)
        assert packet == PingReq()
        assert used == len(first)

    def test_nonzero_publish_qos_rejected(self):
        body = encode_packet(Publish("a", b""))
        tampered = bytes([body[0] | 0x02]) + body[1:]
        with pytest.raises(DecodeError):
            decode_packet(tampered)

    def test_round_trip_corpus(self):
        rng = random.Random(20240401)
        for _ in range(1000):
            p = random_packet(rng)
            decoded, used = decode_packet(encode_packet(p))
            assert decoded == p
            assert used == len(encode_packet(p))

    def test_chunked_stream_every_split_point(self):
        rng = random.Random(99)
        packets = [random_packet(rng) for _ in range(20)]
        stream = b"".join(encode_packet(p) for p in packets)
        whole = StreamDecoder().feed(stream)
        assert whole == packets
        for cut in range(len(stream) + 1):
            dec = StreamDecoder()
            got = dec.feed(stream[:cut]) + dec.feed(stream[cut:])
            assert got == packets, f"mismatch when split at byte {cut}"

    def test_byte_at_a_time_stream(self):
        rng = random.Random(7)
        packets = [random_packet(rng) for _ in range(10)]
        stream = b"".join(encode_packet(p) for p in packets)
        dec = StreamDecoder()
        got = []
        for i in range(len(stream)):
            got.extend(dec.feed(stream[i : i + 1]))
        assert got == packets
        assert dec.pending == 0


class TestTopics:
    def test_exact_match(self):
        assert topic_matches("test/newdata", "test/newdata")

    def test_plus_matches_one_level(self):
        assert topic_matches("field/+/telemetry", "field/n1/telemetry")

    def test_level_count_mismatch(self):
        assert not topic_matches("field/+", "field/a/b")

    def test_hash_matches_remaining_including_zero(self):
        assert topic_matches("field/#", "field/n1/telemetry")
        assert topic_matches("field/#", "field")
        assert topic_matches("#", "anything/at/all")

    def test_hash_does_not_match_sibling(self):
        assert not topic_matches("c/#", "a/b")

    @pytest.mark.parametrize("bad", ["", "a/#/b", "#extra", "le+vel", "a/b+"])
    def test_invalid_filters_rejected(self, bad):
        with pytest.raises(TopicError):
            validate_filter(bad)

    @pytest.mark.parametrize("bad", ["", "has/+/wildcard", "trail#"])
    def test_invalid_topics_rejected(self, bad):
        with pytest.raises(TopicError):
            validate_topic(bad)

    def test_publish_refuses_wildcard_topic(self):
        with pytest.raises(TopicError):
            Publish("a/+", b"")
