"""Deterministic quantizer for full-gradient descent, plus its wire codec.

The quantizer keeps the smallest greedy prefix of top-magnitude coordinates
whose absolute sum reaches the vector's L2 norm and replaces each kept
magnitude by that norm.  The result has three exact properties: it never
shrinks the inner product with the original vector below ||v||^2, its squared
norm is at most sqrt(n)||v||^2, and the kept set has at most ceil(sqrt(n))
coordinates.  On the wire a message is the norm, the kept-set size, the
kept set's rank in the combinatorial number system (the cheapest exact
subset code), and one sign bit per kept coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from .bitstream import BitReader, BitStream
from .codec import EncodedGradient, _append_scale, _read_scale
from .elias import append_elias, read_elias
from .errors import CorruptionError, DivergenceError
from .quantizer import NormMode, Scheme


@dataclass
class TopSet:
    """Greedy top-magnitude index prefix and the norm it was built against."""

    indices: np.ndarray  # in greedy (descending-magnitude) order
    norm: float

    def __len__(self) -> int:
        return len(self.indices)


def top_set(v: np.ndarray) -> TopSet:
    """Smallest greedy prefix of coordinates with sum |v_i| >= ||v||_2.

    Coordinates are taken in descending |v_i| order, ties broken toward the
    lower index so the wire output is deterministic.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("input contains NaN or Inf")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return TopSet(indices=np.zeros(0, dtype=np.intp), norm=0.0)
    order = np.argsort(-np.abs(v), kind="stable")
    sums = np.cumsum(np.abs(v)[order])
    k = int(np.searchsorted(sums, norm, side="left"))
    k = min(k, len(v) - 1)  # float guard: the full sum always qualifies
    return TopSet(indices=order[: k + 1], norm=norm)


def quantize_gd(v: np.ndarray) -> np.ndarray:
    """Replace the kept coordinates by sign(v_i) * ||v||_2, zero the rest."""
    v = np.asarray(v, dtype=np.float64)
    ts = top_set(v)
    out = np.zeros_like(v)
    if len(ts):
        kept = v[ts.indices]
        out[ts.indices] = np.where(kept < 0, -ts.norm, ts.norm)
    return out


def _colex_rank(sorted_indices: np.ndarray) -> int:
    """Rank of a sorted index set in the combinatorial number system."""
    return sum(comb(int(i), j + 1) for j, i in enumerate(sorted_indices))


def _colex_unrank(rank: int, n: int, k: int) -> np.ndarray:
    """Inverse of _colex_rank for k-subsets of range(n)."""
    out = np.empty(k, dtype=np.intp)
    i = n - 1
    for j in range(k, 0, -1):
        while comb(i, j) > rank:
            i -= 1
        out[j - 1] = i
        rank -= comb(i, j)
        i -= 1
    if rank != 0:
        raise CorruptionError("subset rank does not decompose exactly")
    return out


def encode_gd(q: np.ndarray) -> EncodedGradient:
    """Encode a quantize_gd output: norm, set size, subset rank, sign bits."""
    q = np.asarray(q, dtype=np.float64)
    n = len(q)
    support = np.flatnonzero(q)
    k = len(support)
    if k:
        norm = float(np.abs(q[support[0]]))
        if not np.all(np.abs(q[support]) == norm):
            raise ValueError("not a quantize_gd output: unequal nonzero magnitudes")
    else:
        norm = 0.0

    stream = BitStream()
    _append_scale(stream, float(np.float32(norm)))
    append_elias(stream, k + 1)
    count = comb(n, k)
    width = (count - 1).bit_length()
    if width:
        stream.append_bits(_colex_rank(support), width)
    for i in support:  # ascending index order, matching the rank's set order
        stream.append_bit(1 if q[i] > 0 else 0)
    return EncodedGradient(
        payload=stream, n=n, d=n, s=1, scheme=Scheme.TOPSET, norm_mode=NormMode.L2
    )


def decode_gd(e: EncodedGradient) -> np.ndarray:
    """Exact inverse of encode_gd (norm carried as binary32 on the wire)."""
    reader = BitReader(e.payload)
    norm = _read_scale(reader)
    k = read_elias(reader, limit=e.n + 1) - 1
    if k > e.n:
        raise CorruptionError(f"kept-set size {k} exceeds dimension {e.n}")
    count = comb(e.n, k)
    width = (count - 1).bit_length()
    rank = reader.read_bits(width) if width else 0
    if rank >= count:
        raise CorruptionError(f"subset rank {rank} out of range for C({e.n},{k})")
    support = _colex_unrank(rank, e.n, k)
    out = np.zeros(e.n)
    for i in support:
        out[i] = norm if reader.read_bit() else -norm
    if reader.remaining:
        raise CorruptionError(f"{reader.remaining} unconsumed bits after the sign block")
    if k and norm == 0.0:
        raise CorruptionError("nonzero kept set with zero norm")
    return out


def gd_length_bound(n: int) -> float:
    """Wire-length budget in bits for one message of dimension n."""
    return sqrt(n) * (np.log2(n) + 1.0 + np.log2(np.e)) + 32.0


@dataclass
class GdRun:
    """Trajectory of a quantized gradient-descent run."""

    xs: list  # iterates x_0 .. x_T
    fs: list  # f(x_0) .. f(x_T)
    bits: list  # bits transmitted at each step (0 for the initial row)
    eta: float

    @property
    def total_bits(self) -> int:
        return sum(self.bits)


def run_quantized_gd(objective, x0, eta: float | None = None, T: int = 200,
                     eta_scale: float = 0.5) -> GdRun:
    """Gradient descent stepping along the deterministically quantized gradient.

    Default step size is eta_scale * ell / (L^2 sqrt(n)), the regime where the
    descent argument guarantees monotone decrease on strongly convex problems.
    Raises DivergenceError if f increases for 10 consecutive steps.
    """
    x = np.array(x0, dtype=np.float64)
    n = len(x)
    if eta is None:
        if objective.ell <= 0:
            raise ValueError("default step size needs strong convexity; pass eta explicitly")
        eta = eta_scale * objective.ell / (objective.L**2 * sqrt(n))
    run = GdRun(xs=[x.copy()], fs=[objective.value(x)], bits=[0], eta=eta)
    rising = 0
    for t in range(1, T + 1):
        g = quantize_gd(objective.full_gradient(x))
        run.bits.append(encode_gd(g).declared_bits)
        x = x - eta * g
        f = objective.value(x)
        if not np.isfinite(f):
            raise DivergenceError(f"objective became non-finite with eta={eta}", iteration=t)
        rising = rising + 1 if f > run.fs[-1] else 0
        if rising >= 10:
            raise DivergenceError(
                f"objective rose for {rising} consecutive steps with eta={eta}", iteration=t
            )
        run.xs.append(x.copy())
        run.fs.append(f)
    return run
