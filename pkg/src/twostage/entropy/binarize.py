"""Bin-string helpers: truncated unary, exp-Golomb and signed interleaving."""
from __future__ import annotations

from .engine import ArithmeticDecoder, ArithmeticEncoder, StreamError

#: longest exp-Golomb prefix accepted by the decoder
MAX_EG_PREFIX = 32


def interleave(d: int) -> int:
    """0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ..."""
    return 2 * d if d >= 0 else -2 * d - 1


def deinterleave(u: int) -> int:
    return u >> 1 if u % 2 == 0 else -((u + 1) >> 1)


def _ctx(coder, family: tuple, i: int, n_ctx: int):
    return coder.contexts[family + (i if i < n_ctx else n_ctx - 1,)]


def encode_tu(enc: ArithmeticEncoder, value: int, cap: int, family: tuple, n_ctx: int = 8) -> None:
    """Truncated unary in normal mode; context by bin position (capped at ``n_ctx``)."""
    if not 0 <= value <= cap:
        raise ValueError(f"value {value} outside 0..{cap}")
    for i in range(value):
        enc.encode(1, _ctx(enc, family, i, n_ctx))
    if value < cap:
        enc.encode(0, _ctx(enc, family, value, n_ctx))


def decode_tu(dec: ArithmeticDecoder, cap: int, family: tuple, n_ctx: int = 8) -> int:
    value = 0
    while value < cap and dec.decode(_ctx(dec, family, value, n_ctx)):
        value += 1
    return value


def encode_eg_bypass(enc: ArithmeticEncoder, value: int, k: int = 0) -> None:
    if value < 0:
        raise ValueError("exp-Golomb value must be non-negative")
    while value >= (1 << k):
        enc.encode_bypass(1)
        value -= 1 << k
        k += 1
    enc.encode_bypass(0)
    enc.encode_bypass_bits(value, k)


def decode_eg_bypass(dec: ArithmeticDecoder, k: int = 0) -> int:
    value = 0
    prefix = 0
    while dec.decode_bypass():
        value += 1 << k
        k += 1
        prefix += 1
        if prefix > MAX_EG_PREFIX:
            raise StreamError("exp-Golomb prefix too long")
    return value + dec.decode_bypass_bits(k)


def encode_eg(enc: ArithmeticEncoder, value: int, family: tuple, k: int = 0) -> None:
    """Exp-Golomb with every bin in normal mode (prefix contexts by position)."""
    if value < 0:
        raise ValueError("exp-Golomb value must be non-negative")
    i = 0
    while value >= (1 << k):
        enc.encode(1, _ctx(enc, family + ("p",), i, 8))
        value -= 1 << k
        k += 1
        i += 1
    enc.encode(0, _ctx(enc, family + ("p",), i, 8))
    suffix = enc.contexts[family + ("s",)]
    for b in range(k - 1, -1, -1):
        enc.encode((value >> b) & 1, suffix)


def decode_eg(dec: ArithmeticDecoder, family: tuple, k: int = 0) -> int:
    value = 0
    i = 0
    while dec.decode(_ctx(dec, family + ("p",), i, 8)):
        value += 1 << k
        k += 1
        i += 1
        if i > MAX_EG_PREFIX:
            raise StreamError("exp-Golomb prefix too long")
    suffix = dec.contexts[family + ("s",)]
    tail = 0
    for _ in range(k):
        tail = (tail << 1) | dec.decode(suffix)
    return value + tail


def encode_tu_eg(enc: ArithmeticEncoder, value: int, family: tuple, prefix_cap: int = 4) -> None:
    """Truncated-unary prefix up to ``prefix_cap`` followed by an EG0 suffix."""
    encode_tu(enc, min(value, prefix_cap), prefix_cap, family + ("tu",))
    if value >= prefix_cap:
        encode_eg(enc, value - prefix_cap, family + ("eg",))


def decode_tu_eg(dec: ArithmeticDecoder, family: tuple, prefix_cap: int = 4) -> int:
    value = decode_tu(dec, prefix_cap, family + ("tu",))
    if value == prefix_cap:
        value += decode_eg(dec, family + ("eg",))
    return value
