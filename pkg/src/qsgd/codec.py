"""Wire codecs for quantized gradients, with exact bit accounting.

Two self-delimiting formats over the (scale, signs, levels) buckets:

* sparse — per bucket: 32-bit big-endian binary32 scale, then for each
  nonzero level in index order a gap code (distance from the previous
  nonzero, first gap = 1-based index), one sign bit (1 = positive) and the
  level's code; a final sentinel gap that moves the cumulative position to
  dim+1 marks the end of the bucket.  Cheap when most levels are zero.

* dense — per bucket: 32-bit scale, then one code word per coordinate with
  the sign folded into the integer (level 0 -> 1, +L -> 2L, -L -> 2L+1).
  Cheap when many levels are small but nonzero.

Both decoders validate every symbol against the bucket geometry and demand
that the payload is consumed exactly, so any truncated or trailing-garbage
payload raises instead of silently misdecoding.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .bitstream import BitReader, BitStream
from .elias import append_elias, read_elias
from .errors import CorruptionError, TruncationError
from .quantizer import NormMode, QuantizedBucket, QuantizedGradient, QuantizerConfig, Scheme

_SCALE = struct.Struct(">f")  # big-endian binary32, fixed wire endianness

_SCHEME_BYTE = {Scheme.SPARSE: 1, Scheme.DENSE: 2, Scheme.TOPSET: 3}
_BYTE_SCHEME = {v: k for k, v in _SCHEME_BYTE.items()}
_NORM_BYTE = {NormMode.L2: 1, NormMode.MAX: 2}
_BYTE_NORM = {v: k for k, v in _NORM_BYTE.items()}

QSG_MAGIC = b"QSG1"
_HEADER = struct.Struct(">IIIBB")  # n, d, s, scheme byte, norm byte


@dataclass
class EncodedGradient:
    """A quantized gradient on the wire plus the geometry needed to decode it."""

    payload: BitStream
    n: int
    d: int
    s: int
    scheme: Scheme
    norm_mode: NormMode = NormMode.L2

    @property
    def declared_bits(self) -> int:
        """Exact payload length in bits (scales + symbols; no file header)."""
        return len(self.payload)


def _append_scale(stream: BitStream, scale: float) -> None:
    (word,) = struct.unpack(">I", _SCALE.pack(scale))
    stream.append_bits(word, 32)


def _read_scale(reader: BitReader) -> float:
    word = reader.read_bits(32)
    (scale,) = _SCALE.unpack(struct.pack(">I", word))
    if not math.isfinite(scale) or scale < 0.0:
        raise CorruptionError(f"decoded bucket scale {scale!r} is not a finite non-negative float")
    return scale


def _bucket_dims(n: int, d: int) -> list[int]:
    if n < 1 or d < 1:
        raise ValueError(f"bad geometry n={n}, d={d}")
    dims = [d] * (n // d)
    if n % d:
        dims.append(n % d)
    return dims


def encode_sparse(q: QuantizedGradient) -> EncodedGradient:
    """Gap-coded nonzeros; efficient at small s where most levels are zero."""
    stream = BitStream()
    for bucket in q.buckets:
        _append_scale(stream, bucket.scale)
        dim = bucket.dim
        prev = 0  # 1-based position of the previous nonzero
        for idx in np.flatnonzero(bucket.levels):
            pos = int(idx) + 1
            append_elias(stream, pos - prev)
            stream.append_bit(1 if bucket.signs[idx] > 0 else 0)
            append_elias(stream, int(bucket.levels[idx]))
            prev = pos
        append_elias(stream, dim + 1 - prev)  # sentinel: moves position to dim+1
    cfg = q.config
    return EncodedGradient(
        payload=stream,
        n=q.total_dim,
        d=cfg.bucket_size,
        s=cfg.levels,
        scheme=Scheme.SPARSE,
        norm_mode=cfg.norm_mode,
    )


def decode_sparse(e: EncodedGradient) -> QuantizedGradient:
    """Exact inverse of encode_sparse; raises on any malformed payload."""
    reader = BitReader(e.payload)
    cfg = QuantizerConfig(
        levels=e.s, bucket_size=e.d, norm_mode=e.norm_mode, scheme=Scheme.SPARSE, seed=0
    )
    out = QuantizedGradient(config=cfg)
    for dim in _bucket_dims(e.n, e.d):
        scale = _read_scale(reader)
        signs = np.ones(dim, dtype=np.int8)
        levels = np.zeros(dim, dtype=np.int32)
        pos = 0
        while True:
            gap = read_elias(reader, limit=dim + 1)
            pos += gap
            if pos == dim + 1:
                break  # sentinel
            if pos > dim + 1:
                raise CorruptionError(f"gap overruns bucket: position {pos} > dim+1 = {dim + 1}")
            sign = 1 if reader.read_bit() else -1
            level = read_elias(reader, limit=e.s)
            if level > e.s:
                raise CorruptionError(f"level {level} exceeds configured maximum {e.s}")
            signs[pos - 1] = sign
            levels[pos - 1] = level
        if scale == 0.0 and np.any(levels):
            raise CorruptionError("nonzero level in a zero-scale bucket")
        out.buckets.append(QuantizedBucket(scale=scale, signs=signs, levels=levels))
    if reader.remaining:
        raise CorruptionError(f"{reader.remaining} unconsumed bits after the last bucket")
    return out


def _fold_signed_level(sign: int, level: int) -> int:
    # level 0 -> 1; +L -> 2L; -L -> 2L+1 (the emitted code word is of this value)
    if level == 0:
        return 1
    return 2 * level if sign > 0 else 2 * level + 1


def encode_dense(q: QuantizedGradient) -> EncodedGradient:
    """One sign-folded code word per coordinate; efficient at s near sqrt(d)."""
    stream = BitStream()
    for bucket in q.buckets:
        _append_scale(stream, bucket.scale)
        for sign, level in zip(bucket.signs, bucket.levels):
            append_elias(stream, _fold_signed_level(int(sign), int(level)))
    cfg = q.config
    return EncodedGradient(
        payload=stream,
        n=q.total_dim,
        d=cfg.bucket_size,
        s=cfg.levels,
        scheme=Scheme.DENSE,
        norm_mode=cfg.norm_mode,
    )


def decode_dense(e: EncodedGradient) -> QuantizedGradient:
    """Exact inverse of encode_dense; raises on any malformed payload."""
    reader = BitReader(e.payload)
    cfg = QuantizerConfig(
        levels=e.s, bucket_size=e.d, norm_mode=e.norm_mode, scheme=Scheme.DENSE, seed=0
    )
    out = QuantizedGradient(config=cfg)
    for dim in _bucket_dims(e.n, e.d):
        scale = _read_scale(reader)
        signs = np.ones(dim, dtype=np.int8)
        levels = np.zeros(dim, dtype=np.int32)
        for i in range(dim):
            word = read_elias(reader, limit=2 * e.s + 1)
            if word == 1:
                continue
            level, sign = (word // 2, 1) if word % 2 == 0 else (word // 2, -1)
            if level > e.s:
                raise CorruptionError(f"level {level} exceeds configured maximum {e.s}")
            signs[i] = sign
            levels[i] = level
        if scale == 0.0 and np.any(levels):
            raise CorruptionError("nonzero level in a zero-scale bucket")
        out.buckets.append(QuantizedBucket(scale=scale, signs=signs, levels=levels))
    if reader.remaining:
        raise CorruptionError(f"{reader.remaining} unconsumed bits after the last bucket")
    return out


def encode(q: QuantizedGradient) -> EncodedGradient:
    """Encode with the scheme named in the gradient's config."""
    if q.config.scheme is Scheme.SPARSE:
        return encode_sparse(q)
    if q.config.scheme is Scheme.DENSE:
        return encode_dense(q)
    raise ValueError(f"scheme {q.config.scheme.value!r} has no level-coded encoder")


def decode(e: EncodedGradient) -> QuantizedGradient:
    """Decode with the scheme recorded in the message."""
    if e.scheme is Scheme.SPARSE:
        return decode_sparse(e)
    if e.scheme is Scheme.DENSE:
        return decode_dense(e)
    raise CorruptionError(
        f"scheme {e.scheme.value!r} is not a level-coded format; use the gd decoder"
    )


def quantized_equal(a: QuantizedGradient, b: QuantizedGradient) -> bool:
    """Wire-content equality: scales (as binary32 bit patterns), levels, and
    signs on the support.  Signs of zero-level coordinates never reach the
    wire (a zero is a zero), so they are excluded."""
    if len(a.buckets) != len(b.buckets) or a.total_dim != b.total_dim:
        return False
    for x, y in zip(a.buckets, b.buckets):
        if x.dim != y.dim:
            return False
        if _SCALE.pack(x.scale) != _SCALE.pack(y.scale):
            return False
        if not np.array_equal(x.levels, y.levels):
            return False
        support = x.levels != 0
        if not np.array_equal(x.signs[support], y.signs[support]):
            return False
    return True


def theoretical_length_bound(
    n: int,
    s: int,
    scheme: Scheme,
    *,
    bucket_size: int | None = None,
    slack: float = 0.5,
) -> float | None:
    """Closed-form expected-length budget in bits, or None where inapplicable.

    Sub-logarithmic terms in the underlying analysis are replaced by the
    explicit ``slack`` constant (default 0.5).  The sparse form needs
    s^2 + sqrt(dim) <= dim/2 per bucket; outside that regime returns None.
    Used for assertions and reporting only.
    """
    if n < 1 or s < 1:
        raise ValueError(f"need n >= 1 and s >= 1, got n={n}, s={s}")
    d = n if bucket_size is None else bucket_size
    total = 0.0
    for dim in _bucket_dims(n, d):
        if scheme is Scheme.SPARSE:
            support = s * (s + math.sqrt(dim))  # expected nonzeros per bucket
            if support > dim / 2:
                return None
            total += 32.0 + (
                3.0 + (1.5 + slack) * math.log2(2.0 * (s * s + dim) / support)
            ) * support
        else:
            if s * s == dim:
                total += 32.0 + 2.8 * dim
            else:
                reach = s * s + min(dim, s * math.sqrt(dim))
                total += 32.0 + (
                    (1.0 + slack) / 2.0 * (math.log2(1.0 + reach / dim) + 1.0) + 2.0
                ) * dim
    return total


def to_qsg_bytes(e: EncodedGradient) -> bytes:
    """Self-describing file image: magic, geometry header, then the payload."""
    header = _HEADER.pack(e.n, e.d, e.s, _SCHEME_BYTE[e.scheme], _NORM_BYTE[e.norm_mode])
    return QSG_MAGIC + header + e.payload.to_bytes()


def from_qsg_bytes(blob: bytes) -> EncodedGradient:
    """Parse a .qsg image back into an EncodedGradient (payload not decoded)."""
    if len(blob) < len(QSG_MAGIC):
        raise TruncationError("file shorter than the magic prefix")
    if blob[: len(QSG_MAGIC)] != QSG_MAGIC:
        raise CorruptionError(f"bad magic {blob[:4]!r}; expected {QSG_MAGIC!r}")
    off = len(QSG_MAGIC)
    if len(blob) < off + _HEADER.size:
        raise TruncationError("file header truncated")
    n, d, s, scheme_byte, norm_byte = _HEADER.unpack_from(blob, off)
    if scheme_byte not in _BYTE_SCHEME:
        raise CorruptionError(f"unknown scheme byte {scheme_byte}")
    if norm_byte not in _BYTE_NORM:
        raise CorruptionError(f"unknown norm-mode byte {norm_byte}")
    if n < 1 or d < 1 or s < 1:
        raise CorruptionError(f"invalid geometry n={n}, d={d}, s={s}")
    payload = BitStream.from_bytes(blob[off + _HEADER.size :])
    return EncodedGradient(
        payload=payload,
        n=n,
        d=d,
        s=s,
        scheme=_BYTE_SCHEME[scheme_byte],
        norm_mode=_BYTE_NORM[norm_byte],
    )


def save_qsg(e: EncodedGradient, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_qsg_bytes(e))


def load_qsg(path) -> EncodedGradient:
    with open(path, "rb") as fh:
        return from_qsg_bytes(fh.read())
