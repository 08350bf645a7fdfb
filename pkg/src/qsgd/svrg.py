"""Quantized SVRG: epoch-based variance reduction with per-iteration
quantized updates and exact per-epoch bit accounting.

Each epoch starts from the epoch anchor y: every worker contributes its data
partition's full gradient (raw binary32 by default, quantized behind a flag),
giving the control variate mu = grad f(y).  Each inner iteration every worker
samples one component j and broadcasts the quantized correction
Q(grad f_j(x) - grad f_j(y) + mu); the iterate steps along the K-average and
the next anchor is the average of the epoch's iterates.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np

from .codec import decode, encode
from .errors import ConfigError, DivergenceError
from .quantizer import NormMode, QuantizerConfig, Scheme, dequantize, quantize
from .rng import substream
from .sgd import RunMetrics, worker_threads


@dataclass(frozen=True)
class SvrgConfig:
    """Parameters of a quantized-SVRG run.

    T and eta default (None) to ceil(20 * L/ell) iterations per epoch and
    0.1/L, where L is the per-component smoothness.  quantizer="auto" builds
    the dense-scheme quantizer with s = ceil(sqrt(n)) and one bucket; None
    runs unquantized (the plain-SVRG reference).
    """

    K: int = 1
    P: int = 10
    T: int | None = None
    eta: float | None = None
    full_gradient_quantized: bool = False
    quantizer: QuantizerConfig | str | None = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"need at least one worker, got K={self.K}")
        if self.P < 1:
            raise ConfigError(f"need at least one epoch, got P={self.P}")
        if self.T is not None and self.T < 1:
            raise ConfigError(f"iterations per epoch must be >= 1, got {self.T}")
        if self.eta is not None and not (self.eta > 0):
            raise ConfigError(f"step size must be positive, got {self.eta}")
        if isinstance(self.quantizer, str) and self.quantizer != "auto":
            raise ConfigError(f"quantizer must be a config, None, or 'auto', got {self.quantizer!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


def default_quantizer(n: int, seed: int = 0) -> QuantizerConfig:
    """Dense scheme at s = ceil(sqrt(n)) with a single bucket of size n."""
    return QuantizerConfig(
        levels=ceil(sqrt(n)), bucket_size=n, norm_mode=NormMode.L2,
        scheme=Scheme.DENSE, seed=seed,
    )


def _resolve(obj, cfg: SvrgConfig):
    if obj.ell <= 0:
        raise ConfigError("SVRG needs strong convexity (ell > 0)")
    if obj.m % cfg.K:
        raise ConfigError(f"sample count {obj.m} not divisible by K={cfg.K}")
    L = obj.L_component
    eta = 0.1 / L if cfg.eta is None else cfg.eta
    if eta * L > 1.0 + 1e-12:
        raise ConfigError(f"eta*L = {eta * L:.3f} exceeds 1; lower the step size")
    T = ceil(20.0 * L / obj.ell) if cfg.T is None else cfg.T
    quantizer = cfg.quantizer
    if quantizer == "auto":
        quantizer = default_quantizer(obj.n, cfg.seed)
    return eta, T, quantizer


def run_qsvrg(obj, cfg: SvrgConfig, x0=None) -> RunMetrics:
    """Run P epochs; losses holds f at the anchors y_0..y_P, bits_by_worker
    one row per epoch with each worker's exact transmitted bits."""
    eta, T, quantizer = _resolve(obj, cfg)
    n, m, K = obj.n, obj.m, cfg.K
    block = m // K
    partitions = [np.arange(k * block, (k + 1) * block) for k in range(K)]
    idx_rng = substream(cfg.seed, "indices")
    qrngs = [substream(cfg.seed, "quant", k) for k in range(K)]
    threads = worker_threads(K)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def wire(v: np.ndarray, k: int) -> tuple[np.ndarray, int]:
        if quantizer is None:
            return v, 32 * n
        message = encode(quantize(v, quantizer, rng=qrngs[k]))
        return dequantize(decode(message)), message.declared_bits

    y = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    metrics = RunMetrics(eta=eta, label="epoch")
    metrics.losses.append(obj.value(y))
    metrics.grad_norms.append(float(np.linalg.norm(obj.full_gradient(y))))
    started = time.perf_counter()
    try:
        for p in range(cfg.P):
            epoch_bits = [0] * K

            def anchor_step(k: int) -> np.ndarray:
                h = obj.minibatch_gradient(partitions[k], y)
                if cfg.full_gradient_quantized and quantizer is not None:
                    h, bits = wire(h, k)
                else:
                    bits = 32 * n
                epoch_bits[k] += bits
                return h

            parts = list(pool.map(anchor_step, range(K))) if pool else [
                anchor_step(k) for k in range(K)
            ]
            mu = sum(parts) / K

            x = y.copy()
            xsum = np.zeros(n)
            for _t in range(T):
                js = idx_rng.integers(0, m, size=K)

                def inner_step(k: int) -> np.ndarray:
                    j = int(js[k])
                    u = obj.sample_gradient(j, x) - obj.sample_gradient(j, y) + mu
                    u, bits = wire(u, k)
                    epoch_bits[k] += bits
                    return u

                us = list(pool.map(inner_step, range(K))) if pool else [
                    inner_step(k) for k in range(K)
                ]
                x = x - eta * (sum(us) / K)
                xsum += x
            y = xsum / T

            loss = obj.value(y)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite with eta={eta}", iteration=p)
            metrics.losses.append(loss)
            metrics.grad_norms.append(float(np.linalg.norm(obj.full_gradient(y))))
            metrics.bits_by_worker.append(epoch_bits)
    finally:
        if pool is not None:
            pool.shutdown()
    metrics.wall_clock = time.perf_counter() - started
    return metrics


def epoch_bit_budget(n: int, T: int) -> float:
    """Per-worker per-epoch budget: (32 + 2.8 n)(T + 1) + 32 n bits."""
    return (32.0 + 2.8 * n) * (T + 1) + 32.0 * n
