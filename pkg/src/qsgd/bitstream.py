"""Append-only bit stream and cursor-based reader.

Bits are packed MSB-first into bytes. Serialized form is a 64-bit
little-endian unsigned bit count followed by ceil(nbits/8) bytes with
zero padding in the final byte.
"""

from __future__ import annotations

import struct

from .errors import CorruptionError, TruncationError

_LEN_HEADER = struct.Struct("<Q")


class BitStream:
    """Growable sequence of bits supporting MSB-first appends."""

    __slots__ = ("_bytes", "_acc", "_accbits")

    def __init__(self) -> None:
        self._bytes = bytearray()
        self._acc = 0  # pending bits not yet flushed to a whole byte
        self._accbits = 0

    def __len__(self) -> int:
        return len(self._bytes) * 8 + self._accbits

    @property
    def nbits(self) -> int:
        return len(self)

    def append_bit(self, bit: int) -> None:
        self.append_bits(bit & 1, 1)

    def append_bits(self, value: int, width: int) -> None:
        """Append the `width`-bit big-endian representation of `value`."""
        if width < 0:
            raise ValueError("width must be >= 0")
        if value < 0 or (width < value.bit_length()):
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc = (self._acc << width) | value
        self._accbits += width
        while self._accbits >= 8:
            self._accbits -= 8
            self._bytes.append((self._acc >> self._accbits) & 0xFF)
        self._acc &= (1 << self._accbits) - 1

    def extend(self, other: "BitStream") -> None:
        for byte in other._bytes:
            self.append_bits(byte, 8)
        if other._accbits:
            self.append_bits(other._acc, other._accbits)

    def bit_at(self, pos: int) -> int:
        if pos < 0 or pos >= len(self):
            raise IndexError(pos)
        byte_i, bit_i = divmod(pos, 8)
        if byte_i < len(self._bytes):
            return (self._bytes[byte_i] >> (7 - bit_i)) & 1
        return (self._acc >> (self._accbits - 1 - bit_i)) & 1

    def to_bits(self) -> str:
        """Binary string form, for tests and debugging."""
        return "".join(str(self.bit_at(i)) for i in range(len(self)))

    def padded_bytes(self) -> bytes:
        """The packed bytes with the final partial byte zero-padded."""
        out = bytearray(self._bytes)
        if self._accbits:
            out.append((self._acc << (8 - self._accbits)) & 0xFF)
        return bytes(out)

    def to_bytes(self) -> bytes:
        """Serialize: 64-bit LE bit count, then MSB-first packed bytes."""
        return _LEN_HEADER.pack(len(self)) + self.padded_bytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BitStream":
        if len(blob) < _LEN_HEADER.size:
            raise TruncationError("missing bit-count header")
        (nbits,) = _LEN_HEADER.unpack_from(blob)
        body = blob[_LEN_HEADER.size:]
        need = (nbits + 7) // 8
        if len(body) < need:
            raise TruncationError(
                f"declared {nbits} bits but only {len(body)} payload bytes"
            )
        if len(body) > need:
            raise CorruptionError("trailing bytes after declared payload")
        stream = cls()
        whole, rest = divmod(nbits, 8)
        for byte in body[:whole]:
            stream.append_bits(byte, 8)
        if rest:
            stream.append_bits(body[whole] >> (8 - rest), rest)
        if rest and (body[whole] & ((1 << (8 - rest)) - 1)):
            raise CorruptionError("nonzero padding bits")
        return stream

    @classmethod
    def from_bits(cls, bits: str) -> "BitStream":
        stream = cls()
        for ch in bits:
            stream.append_bit(int(ch))
        return stream

    def prefix(self, nbits: int) -> "BitStream":
        """A copy of the first `nbits` bits (used by truncation fuzzing)."""
        if nbits < 0 or nbits > len(self):
            raise ValueError(nbits)
        out = BitStream()
        whole, rest = divmod(nbits, 8)
        for byte in self._bytes[:whole]:
            out.append_bits(byte, 8)
        for pos in range(whole * 8, whole * 8 + rest):
            out.append_bit(self.bit_at(pos))
        return out


class BitReader:
    """Cursor over a BitStream (or its packed bytes)."""

    __slots__ = ("_data", "_nbits", "pos")

    def __init__(self, stream: BitStream, pos: int = 0) -> None:
        self._data = stream.padded_bytes()
        self._nbits = len(stream)
        self.pos = pos

    @property
    def remaining(self) -> int:
        return self._nbits - self.pos

    def read_bit(self) -> int:
        if self.pos >= self._nbits:
            raise TruncationError(f"read past end of stream at bit {self.pos}")
        byte = self._data[self.pos >> 3]
        bit = (byte >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def read_bits(self, width: int) -> int:
        if width < 0:
            raise ValueError("width must be >= 0")
        if self.pos + width > self._nbits:
            raise TruncationError(
                f"need {width} bits at position {self.pos}, "
                f"only {self.remaining} remain"
            )
        out = 0
        pos = self.pos
        data = self._data
        for i in range(width):
            p = pos + i
            out = (out << 1) | ((data[p >> 3] >> (7 - (p & 7))) & 1)
        self.pos += width
        return out
