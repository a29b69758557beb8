"""Shared test helpers: random packet corpus generation."""

from __future__ import annotations

import random
import string

from smartirr.bus.packets import (
    ConnAck,
    Connect,
    Disconnect,
    Packet,
    PingReq,
    PingResp,
    Publish,
    SubAck,
    Subscribe,
)

_LEVEL_CHARS = string.ascii_lowercase + string.digits


def random_topic(rng: random.Random, max_levels: int = 4) -> str:
    levels = ["".join(rng.choices(_LEVEL_CHARS, k=rng.randint(1, 8))) for _ in range(rng.randint(1, max_levels))]
    return "/".join(levels)


def random_filter(rng: random.Random, max_levels: int = 4) -> str:
    levels = []
    for _ in range(rng.randint(1, max_levels)):
        roll = rng.random()
        if roll < 0.15:
            levels.append("+")
        else:
            levels.append("".join(rng.choices(_LEVEL_CHARS, k=rng.randint(1, 8))))
    if rng.random() < 0.2:
        levels.append("#")
    return "/".join(levels)


def random_packet(rng: random.Random) -> Packet:
    kind = rng.randrange(8)
    if kind == 0:
        cid = "".join(rng.choices(_LEVEL_CHARS, k=rng.randint(1, 20)))
        return Connect(cid, rng.randint(0, 0xFFFF))
    if kind == 1:
        return ConnAck(rng.randint(0, 5))
    if kind == 2:
        payload = rng.randbytes(rng.randint(0, 200))
        return Publish(random_topic(rng), payload)
    if kind == 3:
        nfilters = rng.randint(1, 4)
        return Subscribe(rng.randint(1, 0xFFFF), tuple(random_filter(rng) for _ in range(nfilters)))
    if kind == 4:
        ncodes = rng.randint(0, 4)
        return SubAck(rng.randint(1, 0xFFFF), tuple(rng.choice([0, 0x80]) for _ in range(ncodes)))
    if kind == 5:
        return PingReq()
    if kind == 6:
        return PingResp()
    return Disconnect()
