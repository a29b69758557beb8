from .broker import Broker, LocalClient, Subscription, route_publish
from .packets import (
    ConnAck,
    Connect,
    DecodeError,
    Disconnect,
    EncodeError,
    NeedMoreData,
    Packet,
    PingReq,
    PingResp,
    Publish,
    StreamDecoder,
    SubAck,
    Subscribe,
    TopicError,
    decode_packet,
    encode_packet,
    topic_matches,
)
from .server import BrokerServer, BusClient, DEFAULT_PORT

__all__ = [
    "Broker",
    "BrokerServer",
    "BusClient",
    "ConnAck",
    "Connect",
    "DEFAULT_PORT",
    "DecodeError",
    "Disconnect",
    "EncodeError",
    "LocalClient",
    "NeedMoreData",
    "Packet",
    "PingReq",
    "PingResp",
    "Publish",
    "StreamDecoder",
    "SubAck",
    "Subscribe",
    "Subscription",
    "TopicError",
    "decode_packet",
    "encode_packet",
    "route_publish",
    "topic_matches",
]
