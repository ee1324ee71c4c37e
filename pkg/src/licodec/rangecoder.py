"""Bit-exact range coder over per-symbol frequency tables.

64-bit low/range state, byte-wise renormalization at 2**56, carry propagation
through a cache byte plus a pending-0xFF counter.  Frequency totals are at
most 2**16, so the range never underflows and the per-symbol integer-division
loss is below 2**-40 bits.

Stream layout: big-endian renormalization bytes followed by exactly 4 tail
bytes.  At flush, ``low`` is rounded up to the next multiple of 2**32 (still
inside the final interval, whose width is >= 2**56) and its top four bytes
are emitted; the decoder zero-pads up to four virtual bytes past the end, so
it consumes exactly len(stream) + 4 byte reads.  Any read beyond that window
means the stream was truncated.

Tables are always supplied per symbol by the caller (adaptive context); the
coder never builds or mutates them.  Encoder/decoder instances are
single-use, single-threaded state machines.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .errors import CodecError, CodingRangeError, TruncatedStreamError

_MASK = (1 << 64) - 1
_TOP = 1 << 56
_FLUSH_GRID = 1 << 32
_TAIL_BYTES = 4


@dataclass(frozen=True)
class CodedStream:
    data: bytes
    symbol_count: int


class RangeEncoder:
    """Single-use encoder; feed (cum, freq, total) slots, then flush once."""

    def __init__(self):
        self._low = 0
        self._range = _MASK
        self._out = bytearray()
        self._cache = -1  # -1: no byte pending yet
        self._pending_ff = 0
        self._count = 0
        self._flushed = False

    def _shift_low(self) -> None:
        low = self._low
        if low < (0xFF << 56) or low > _MASK:
            carry = low >> 64
            if self._cache >= 0:
                self._out.append((self._cache + carry) & 0xFF)
            elif carry:  # cannot happen: interval never overflows the stream front
                raise CodecError("range coder carry with empty byte pipeline")
            if self._pending_ff:
                fill = 0x00 if carry else 0xFF
                self._out.extend(bytes([fill]) * self._pending_ff)
                self._pending_ff = 0
            self._cache = (low >> 56) & 0xFF
        else:
            self._pending_ff += 1
        self._low = (low << 8) & _MASK

    def encode_symbol(self, table, symbol: int) -> None:
        if self._flushed:
            raise CodecError("encoder already flushed")
        cum, freq = table.slot(symbol)
        total = table.total
        r = self._range // total
        self._low += r * cum
        if cum + freq == total:
            self._range -= r * cum  # last slot absorbs the division remainder
        else:
            self._range = r * freq
        while self._range < _TOP:
            self._shift_low()
            self._range <<= 8
        self._count += 1

    def flush(self) -> CodedStream:
        if self._flushed:
            raise CodecError("encoder already flushed")
        self._flushed = True
        self._low += (-self._low) % _FLUSH_GRID
        for _ in range(_TAIL_BYTES + 1):
            self._shift_low()
        return CodedStream(data=bytes(self._out), symbol_count=self._count)


class RangeDecoder:
    """Single-use decoder over one coded stream."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._range = _MASK
        code = 0
        for _ in range(8):
            code = (code << 8) | self._next_byte()
        self._code = code

    def _next_byte(self) -> int:
        p = self._pos
        self._pos = p + 1
        if p < len(self._data):
            return self._data[p]
        if p < len(self._data) + _TAIL_BYTES:
            return 0  # virtual zero padding the flush relies on
        raise TruncatedStreamError(
            f"stream exhausted after {len(self._data)} bytes"
        )

    def decode_symbol(self, table) -> int:
        total = table.total
        r = self._range // total
        v = self._code // r
        if v >= total:
            v = total - 1
        idx = bisect_right(table.cum, v) - 1
        cum = table.cum[idx]
        freq = table.freqs[idx]
        self._code -= r * cum
        if cum + freq == total:
            self._range -= r * cum
        else:
            self._range = r * freq
        while self._range < _TOP:
            self._code = ((self._code << 8) | self._next_byte()) & _MASK
            self._range <<= 8
        return table.smin + idx

    @property
    def consumed(self) -> int:
        """Bytes read so far, including virtual padding reads."""
        return self._pos


def encode(symbols, tables) -> CodedStream:
    """Encode a symbol sequence against its per-symbol table sequence."""
    symbols = list(symbols)
    tables = list(tables)
    if len(symbols) != len(tables):
        raise CodecError(
            f"{len(symbols)} symbols but {len(tables)} tables"
        )
    enc = RangeEncoder()
    for i, (s, t) in enumerate(zip(symbols, tables)):
        try:
            enc.encode_symbol(t, s)
        except CodingRangeError as exc:
            raise CodingRangeError(f"symbol index {i}: {exc.message}") from None
    return enc.flush()


def decode(stream: CodedStream, tables) -> list[int]:
    """Recover exactly ``stream.symbol_count`` symbols; tables must match the
    encoder's, in order."""
    tables = list(tables)
    if len(tables) != stream.symbol_count:
        raise CodecError(
            f"stream holds {stream.symbol_count} symbols, got {len(tables)} tables"
        )
    dec = RangeDecoder(stream.data)
    return [dec.decode_symbol(t) for t in tables]
