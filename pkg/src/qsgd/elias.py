"""Elias omega (recursive length-prefix) coding for positive integers.

The code of k is built by prepending binary representations: start with a
single 0 bit; while k > 1, prepend the binary form of k and continue with
(number of bits just prepended) - 1. Decoding runs the recursion forward:
start with value 1; each leading 1 bit says "the current value counts how
many more bits to read"; a 0 bit terminates.

The empty-aware variant (shifted code) maps k >= 0 to the code of k+1 so
that zero is representable.
"""

from __future__ import annotations

from .bitstream import BitReader, BitStream
from .errors import CorruptionError


def append_elias(stream: BitStream, k: int) -> None:
    """Append the code of k (k >= 1) to an existing stream."""
    if k < 1:
        raise ValueError(f"Elias omega encodes positive integers, got {k}")
    groups = []
    while k > 1:
        width = k.bit_length()
        groups.append((k, width))
        k = width - 1
    for value, width in reversed(groups):
        stream.append_bits(value, width)
    stream.append_bit(0)


def elias_encode(k: int) -> BitStream:
    """Code of a single positive integer as a fresh stream."""
    stream = BitStream()
    append_elias(stream, k)
    return stream


def read_elias(reader: BitReader, limit: int | None = None) -> int:
    """Decode one code word at the reader's cursor.

    `limit` guards structurally impossible values: a decoded group that
    already exceeds it aborts with CorruptionError instead of attempting
    to read an astronomically wide next group.
    """
    value = 1
    while True:
        bit = reader.read_bit()
        if bit == 0:
            return value
        if limit is not None and value > limit.bit_length() + 1:
            raise CorruptionError(
                f"length prefix {value} exceeds limit {limit} at bit {reader.pos}"
            )
        value = (1 << value) | reader.read_bits(value)


def elias_decode(stream: BitStream, cursor: int = 0) -> tuple[int, int]:
    """Decode one code word starting at `cursor`; return (k, bits_consumed)."""
    reader = BitReader(stream, cursor)
    value = read_elias(reader)
    return value, reader.pos - cursor


def elias_length(k: int) -> int:
    """Code length in bits without materializing the code."""
    if k < 1:
        raise ValueError(f"Elias omega encodes positive integers, got {k}")
    total = 1
    while k > 1:
        width = k.bit_length()
        total += width
        k = width - 1
    return total


def append_elias_shifted(stream: BitStream, k: int) -> None:
    """Append the shifted code of k >= 0 (the code of k+1)."""
    append_elias(stream, k + 1)


def read_elias_shifted(reader: BitReader, limit: int | None = None) -> int:
    return read_elias(reader, limit) - 1


def elias_prime_encode(k: int) -> BitStream:
    """Encode k >= 0 with the shifted code: one self-delimiting word for k+1."""
    if k < 0:
        raise ValueError(f"shifted Elias code encodes non-negative integers, got {k}")
    return elias_encode(k + 1)


def elias_prime_decode(stream: BitStream, cursor: int = 0) -> tuple[int, int]:
    """Decode one shifted code word at `cursor`; return (k, bits_consumed)."""
    value, used = elias_decode(stream, cursor)
    return value - 1, used


def elias_prime_length(k: int) -> int:
    """Length in bits of the shifted code of k >= 0."""
    if k < 0:
        raise ValueError(f"shifted Elias code encodes non-negative integers, got {k}")
    return elias_length(k + 1)
