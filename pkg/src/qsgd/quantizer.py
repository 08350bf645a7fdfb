"""Stochastic per-bucket gradient quantization.

A vector is split into consecutive buckets of at most ``bucket_size``
components.  Each bucket is scaled by its L2 norm (or max-|v_i|), every
normalized magnitude ``a = |v_i| / scale`` is randomly rounded onto the
uniform grid ``{0, 1/s, ..., 1}``, and the result is stored as a
(scale, signs, integer levels) triple.  Randomized rounding preserves the
expectation of every component; the integer levels are what the codec
compresses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .rng import substream


class NormMode(enum.Enum):
    """Which norm of the bucket is used as the quantization scale."""

    L2 = "l2"
    MAX = "max"


class Scheme(enum.Enum):
    """Wire format the codec will use for the integer levels."""

    SPARSE = "sparse"
    DENSE = "dense"
    TOPSET = "topset"  # deterministic GD messages; produced only by gdq


@dataclass(frozen=True)
class QuantizerConfig:
    """Parameters of the quantizer.

    levels:      number of positive quantization levels s >= 1.
    bucket_size: components per independently-quantized bucket, d >= 1.
    norm_mode:   scale by bucket L2 norm or by max |v_i|.
    scheme:      wire format hint for the codec (sparse or dense).
    seed:        base seed for the per-bucket random substreams.
    """

    levels: int = 1
    bucket_size: int = 512
    norm_mode: NormMode = NormMode.L2
    scheme: Scheme = Scheme.SPARSE
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.levels, (int, np.integer)) or self.levels < 1:
            raise ConfigError(f"levels must be a positive integer, got {self.levels!r}")
        if not isinstance(self.bucket_size, (int, np.integer)) or self.bucket_size < 1:
            raise ConfigError(
                f"bucket_size must be a positive integer, got {self.bucket_size!r}"
            )
        if isinstance(self.norm_mode, str):
            try:
                object.__setattr__(self, "norm_mode", NormMode(self.norm_mode.lower()))
            except ValueError:
                raise ConfigError(f"unknown norm_mode {self.norm_mode!r}") from None
        if not isinstance(self.norm_mode, NormMode):
            raise ConfigError(f"norm_mode must be a NormMode, got {self.norm_mode!r}")
        if isinstance(self.scheme, str):
            try:
                object.__setattr__(self, "scheme", Scheme(self.scheme.lower()))
            except ValueError:
                raise ConfigError(f"unknown scheme {self.scheme!r}") from None
        if not isinstance(self.scheme, Scheme):
            raise ConfigError(f"scheme must be a Scheme, got {self.scheme!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass
class QuantizedBucket:
    """One bucket's quantization: reconstructed value is scale*sign*level/s."""

    scale: float
    signs: np.ndarray  # int8, entries in {-1, +1}
    levels: np.ndarray  # int32, entries in [0, s]

    @property
    def dim(self) -> int:
        return len(self.levels)


@dataclass
class QuantizedGradient:
    """A quantized vector: per-bucket triples plus the config that made them."""

    config: QuantizerConfig
    buckets: list[QuantizedBucket] = field(default_factory=list)

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.buckets)


def level_assign(a, s: int, u):
    """Randomly round a in [0,1] onto the integer grid {0,...,s}.

    Returns ell + 1 if u < p else ell, where ell = min(floor(a*s), s-1) and
    p = a*s - ell.  E[level/s] = a for every a.  Vectorized over a and u.
    """
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not np.all((a >= 0.0) & (a <= 1.0)):
        raise ValueError("normalized magnitude must lie in [0, 1]")
    if s < 1:
        raise ValueError(f"levels must be >= 1, got {s}")
    ell = np.minimum(np.floor(a * s), s - 1)
    p = a * s - ell
    level = ell.astype(np.int32) + (u < p)
    if level.ndim == 0:
        return int(level)
    return level.astype(np.int32)


def _bucket_scale(v: np.ndarray, norm_mode: NormMode) -> float:
    if norm_mode is NormMode.L2:
        scale = float(np.linalg.norm(v))
    else:
        scale = float(np.max(np.abs(v))) if len(v) else 0.0
    # Round to binary32 so the wire scale and the arithmetic scale agree.
    with np.errstate(over="ignore"):
        rounded = float(np.float32(scale))
    if not np.isfinite(rounded):
        raise ValueError(f"bucket scale {scale!r} does not fit in a 32-bit float")
    return rounded


def quantize_bucket(
    v: Sequence[float] | np.ndarray,
    s: int,
    norm_mode: NormMode = NormMode.L2,
    rng: np.random.Generator | None = None,
) -> QuantizedBucket:
    """Quantize one bucket of components with s positive levels."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or len(v) < 1:
        raise ValueError("bucket must be a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("bucket contains NaN or Inf")
    if rng is None:
        rng = np.random.default_rng()

    signs = np.where(v < 0, -1, 1).astype(np.int8)  # sign(0) = +1
    scale = _bucket_scale(v, norm_mode)
    if scale == 0.0:
        return QuantizedBucket(scale=0.0, signs=signs, levels=np.zeros(len(v), dtype=np.int32))

    # float32 rounding of the scale can push |v_i|/scale a hair above 1.
    a = np.clip(np.abs(v) / scale, 0.0, 1.0)
    u = rng.random(len(v))
    levels = level_assign(a, s, u)
    return QuantizedBucket(scale=scale, signs=signs, levels=np.asarray(levels, dtype=np.int32))


def quantize(
    v: Sequence[float] | np.ndarray,
    cfg: QuantizerConfig,
    rng: np.random.Generator | None = None,
    *,
    nonce: Sequence[int | str] = (),
) -> QuantizedGradient:
    """Quantize a full vector bucket by bucket.

    Randomness: if ``rng`` is given, buckets consume it sequentially (callers
    that manage one stream per worker).  Otherwise each bucket draws from an
    independent substream derived from (cfg.seed, *nonce, bucket_index), so
    repeated calls with the same nonce are reproducible and different nonces
    (e.g. iteration numbers) are independent.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or len(v) < 1:
        raise ValueError("input must be a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("input contains NaN or Inf")

    out = QuantizedGradient(config=cfg)
    d = cfg.bucket_size
    for b, start in enumerate(range(0, len(v), d)):
        chunk = v[start : start + d]
        bucket_rng = rng if rng is not None else substream(cfg.seed, *nonce, b)
        out.buckets.append(quantize_bucket(chunk, cfg.levels, cfg.norm_mode, bucket_rng))
    return out


def dequantize(q: QuantizedGradient) -> np.ndarray:
    """Reconstruct the (lossy) vector: scale * sign * level / s per component."""
    s = q.config.levels
    parts = [
        b.scale * b.signs.astype(np.float64) * (b.levels.astype(np.float64) / s)
        for b in q.buckets
    ]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)
