"""Binary arithmetic coder with adaptive per-context probabilities.

32-bit low/high interval coder (carry handled by deferred "underflow"
bits). Probabilities are 16-bit estimates of P(bin == 0), updated by a
shift-based exponential decay whose rate starts fast and settles at
``1/2**MAX_SHIFT``. The encoder emits a single terminating bit and trailing
zero bytes are trimmed; the decoder reads zeros past the end, so the
payload length alone delimits a segment.
"""
from __future__ import annotations

import math

import numpy as np

PROB_BITS = 16
PROB_ONE = 1 << PROB_BITS
PROB_HALF = PROB_ONE >> 1
PROB_MIN = 32
PROB_MAX = PROB_ONE - PROB_MIN
MAX_SHIFT = 5

_STATE_BITS = 32
_FULL = (1 << _STATE_BITS) - 1
_HALF = 1 << (_STATE_BITS - 1)
_QUARTER = 1 << (_STATE_BITS - 2)
_THREE_QUARTERS = 3 * _QUARTER


class StreamError(ValueError):
    """Malformed or inconsistent bitstream."""


class Context:
    __slots__ = ("p0", "count", "key")

    def __init__(self, key=None):
        self.p0 = PROB_HALF
        self.count = 0
        self.key = key

    def update(self, bit: int) -> None:
        shift = self.count + 1 if self.count < MAX_SHIFT else MAX_SHIFT
        self.count += 1
        if bit:
            p = self.p0 - (self.p0 >> shift)
        else:
            p = self.p0 + ((PROB_ONE - self.p0) >> shift)
        self.p0 = PROB_MIN if p < PROB_MIN else (PROB_MAX if p > PROB_MAX else p)


class ContextTable:
    """Contexts created lazily on first use, all starting at probability 1/2."""

    def __init__(self):
        self._table: dict = {}

    def __getitem__(self, key) -> Context:
        ctx = self._table.get(key)
        if ctx is None:
            ctx = self._table[key] = Context(key)
        return ctx

    def __len__(self):
        return len(self._table)


class ArithmeticEncoder:
    def __init__(self):
        self.low = 0
        self.high = _FULL
        self.pending = 0
        self.bits: list[int] = []
        self.contexts = ContextTable()
        self.n_bins = 0
        self.n_bypass = 0
        #: ideal code length of all bins so far (bypass bins count exactly one bit)
        self.cost = 0.0
        self._finished = False

    def _emit(self, bit: int) -> None:
        out = self.bits
        out.append(bit)
        if self.pending:
            out.extend([bit ^ 1] * self.pending)
            self.pending = 0

    def _code(self, bit: int, p0: int) -> None:
        low, high = self.low, self.high
        split = low + (((high - low + 1) * p0) >> PROB_BITS)
        if bit:
            low = split
        else:
            high = split - 1
        while True:
            if high < _HALF:
                self._emit(0)
            elif low >= _HALF:
                self._emit(1)
                low -= _HALF
                high -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                self.pending += 1
                low -= _QUARTER
                high -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        self.low, self.high = low, high

    def encode(self, bit: int, ctx: Context) -> None:
        """Code one bin in normal (adaptive) mode."""
        bit = 1 if bit else 0
        p0 = ctx.p0
        self.cost -= math.log2((PROB_ONE - p0 if bit else p0) / PROB_ONE)
        self._code(bit, p0)
        ctx.update(bit)
        self.n_bins += 1

    def encode_bypass(self, bit: int) -> None:
        self._code(1 if bit else 0, PROB_HALF)
        self.cost += 1.0
        self.n_bins += 1
        self.n_bypass += 1

    def encode_bypass_bits(self, value: int, width: int) -> None:
        for i in range(width - 1, -1, -1):
            self.encode_bypass((value >> i) & 1)

    def finish(self) -> bytes:
        """Terminate and return the payload; the encoder is unusable afterwards."""
        if self._finished:
            raise RuntimeError("encoder already finished")
        self._finished = True
        if self.n_bins:
            # the midpoint lies inside [low, high] once renormalized
            self._emit(1)
        if not self.bits:
            return b""
        data = np.packbits(np.asarray(self.bits, dtype=np.uint8)).tobytes()
        return data.rstrip(b"\x00")


class ArithmeticDecoder:
    def __init__(self, data: bytes):
        self.contexts = ContextTable()
        self._bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)).tolist()
        self._pos = 0
        self.low = 0
        self.high = _FULL
        code = 0
        for _ in range(_STATE_BITS):
            code = (code << 1) | self._next()
        self.code = code

    def _next(self) -> int:
        pos = self._pos
        self._pos = pos + 1
        bits = self._bits
        return bits[pos] if pos < len(bits) else 0

    @property
    def overrun(self) -> int:
        """Number of bits read past the payload end (implicit zeros)."""
        return max(0, self._pos - len(self._bits))

    def _decode(self, p0: int) -> int:
        low, high, code = self.low, self.high, self.code
        split = low + (((high - low + 1) * p0) >> PROB_BITS)
        if code >= split:
            bit = 1
            low = split
        else:
            bit = 0
            high = split - 1
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                code -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                low -= _QUARTER
                high -= _QUARTER
                code -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            code = (code << 1) | self._next()
        if not low <= code <= high:
            raise StreamError("arithmetic decoder state out of range")
        self.low, self.high, self.code = low, high, code
        return bit

    def decode(self, ctx: Context) -> int:
        bit = self._decode(ctx.p0)
        ctx.update(bit)
        return bit

    def decode_bypass(self) -> int:
        return self._decode(PROB_HALF)

    def decode_bypass_bits(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self._decode(PROB_HALF)
        return value
