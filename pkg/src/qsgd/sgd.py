"""Deterministic simulation of synchronous data-parallel SGD.

K simulated workers each draw a stochastic gradient, optionally quantize it,
push the encoded message over an in-memory bus (bits counted exactly), and
the shared iterate steps along the average of the decoded messages.  With the
quantizer disabled the loop is exact parallel SGD with an effective minibatch
of K * minibatch.  All randomness descends from the run seed through named
substreams: one stream for sample indices (drawn as a flat block of K*m_b per
iteration, so worker count and minibatch size trade off exactly) and one
quantization stream per worker.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .codec import decode, encode
from .errors import ConfigError, DivergenceError
from .quantizer import QuantizerConfig, dequantize, quantize
from .rng import substream


@dataclass(frozen=True)
class Constant:
    """Fixed step size."""

    value: float

    def __post_init__(self):
        if not (self.value > 0):
            raise ConfigError(f"step size must be positive, got {self.value}")


@dataclass(frozen=True)
class TunedStep:
    """Horizon-tuned constant step eta = 1/(L + 1/gamma), gamma = (R/sigma)sqrt(2/T).

    radius: distance ||x0 - x*|| (None = compute from the objective's known
    minimizer).  sigma: second-moment bound sqrt(B) of the gradient estimator
    the run actually steps with; "auto" probes it at x0.
    """

    radius: float | None = None
    sigma: float | str = "auto"

    def __post_init__(self):
        if self.radius is not None and not (self.radius > 0):
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if isinstance(self.sigma, str):
            if self.sigma != "auto":
                raise ConfigError(f"sigma must be a number or 'auto', got {self.sigma!r}")
        elif not (self.sigma > 0):
            raise ConfigError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one simulated data-parallel run."""

    K: int = 1
    T: int = 100
    minibatch: int = 1
    eta: Constant | TunedStep = Constant(0.01)
    quantizer: QuantizerConfig | None = None
    seed: int = 0
    projection_radius: float = 0.0  # L2-ball projection; 0 = unconstrained
    skip_below: int = 0  # send dimensions smaller than this at full precision

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"need at least one worker, got K={self.K}")
        if self.T < 1:
            raise ConfigError(f"need at least one iteration, got T={self.T}")
        if self.minibatch < 1:
            raise ConfigError(f"minibatch must be >= 1, got {self.minibatch}")
        if not isinstance(self.eta, (Constant, TunedStep)):
            raise ConfigError(f"eta must be Constant or TunedStep, got {self.eta!r}")
        if self.projection_radius < 0:
            raise ConfigError(f"projection radius must be >= 0, got {self.projection_radius}")
        if self.skip_below < 0:
            raise ConfigError(f"skip threshold must be >= 0, got {self.skip_below}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


@dataclass
class RunMetrics:
    """Everything measured during a run; wall_clock is informational only and
    excluded from determinism comparisons."""

    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    bits_by_worker: list[list[int]] = field(default_factory=list)  # per step, K sizes
    eta: float = 0.0
    variance_ratio: float = 0.0
    wall_clock: float = 0.0
    label: str = "iter"

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    @property
    def total_bits(self) -> int:
        return sum(sum(row) for row in self.bits_by_worker)

    @property
    def bits_per_worker(self) -> list[float]:
        return [sum(row) / len(row) for row in self.bits_by_worker]

    @property
    def cumulative_bits(self) -> list[int]:
        out, running = [], 0
        for row in self.bits_by_worker:
            running += sum(row)
            out.append(running)
        return out


def worker_threads(K: int) -> int:
    """Worker-parallel encoding width, capped by the QSGD_THREADS env var."""
    raw = os.environ.get("QSGD_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"QSGD_THREADS must be an integer, got {raw!r}") from exc
    return max(1, min(K, cap))


def stochastic_gradient(obj, x, m_b: int, rng: np.random.Generator) -> np.ndarray:
    """Average of m_b uniformly-sampled per-sample gradients (unbiased).

    m_b equal to the dataset size enumerates every index once, recovering the
    exact full gradient instead of sampling with replacement.
    """
    if m_b == obj.m:
        idx = np.arange(obj.m)
    else:
        idx = rng.integers(0, obj.m, size=m_b)
    return obj.minibatch_gradient(idx, x)


def _worker_step(obj, x, idx, quantizer: QuantizerConfig | None, qrng, skip: int):
    """One worker's iteration: gradient, optional quantize+wire trip, bits."""
    g = obj.minibatch_gradient(idx, x)
    if quantizer is None or len(g) < skip:
        return g, 32 * len(g)  # full precision: one binary32 per coordinate
    message = encode(quantize(g, quantizer, rng=qrng))
    return dequantize(decode(message)), message.declared_bits


def estimate_second_moment(obj, x0, cfg: RunConfig, probes: int = 1000) -> float:
    """Max of ||g||^2 over `probes` draws of the estimator the run steps with
    (the K-averaged, quantized-if-enabled gradient at x0)."""
    x0 = np.asarray(x0, dtype=np.float64)
    idx_rng = substream(cfg.seed, "probe-indices")
    qrng = substream(cfg.seed, "probe-quant")
    worst = 0.0
    for _ in range(probes):
        acc = np.zeros_like(x0)
        for _k in range(cfg.K):
            if cfg.minibatch == obj.m:
                idx = np.arange(obj.m)
            else:
                idx = idx_rng.integers(0, obj.m, size=cfg.minibatch)
            g = obj.minibatch_gradient(idx, x0)
            if cfg.quantizer is not None and len(g) >= cfg.skip_below:
                g = dequantize(quantize(g, cfg.quantizer, rng=qrng))
            acc += g
        acc /= cfg.K
        worst = max(worst, float(np.dot(acc, acc)))
    obj.B = worst
    return worst


def resolve_eta(obj, cfg: RunConfig, x0) -> float:
    """Materialize the step-size schedule into a constant eta for this run."""
    if isinstance(cfg.eta, Constant):
        return cfg.eta.value
    radius = cfg.eta.radius
    if radius is None:
        if obj.x_star is None:
            raise ConfigError(
                "TunedStep needs an explicit radius when the objective has no known minimizer"
            )
        radius = float(np.linalg.norm(np.asarray(x0) - obj.x_star))
        if radius == 0.0:
            raise ConfigError("starting point is already the minimizer; pass a radius")
    sigma = cfg.eta.sigma
    if sigma == "auto":
        sigma = sqrt(estimate_second_moment(obj, x0, cfg))
    gamma = (radius / float(sigma)) * sqrt(2.0 / cfg.T)
    return 1.0 / (obj.L + 1.0 / gamma)


def empirical_variance_ratio(
    obj_or_vector,
    x,
    quantizer: QuantizerConfig,
    N: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Measured E||Q(g) - g||^2 / ||g||^2 for the fixed vector g = grad f(x)
    (or g given directly), to compare against the min(d/s^2, sqrt(d)/s) bound."""
    if hasattr(obj_or_vector, "full_gradient"):
        g = obj_or_vector.full_gradient(np.asarray(x, dtype=np.float64))
    else:
        g = np.asarray(obj_or_vector, dtype=np.float64)
    gg = float(np.dot(g, g))
    if gg == 0.0:
        return 0.0
    if rng is None:
        rng = substream(quantizer.seed, "variance-probe")
    acc = 0.0
    for _ in range(N):
        err = dequantize(quantize(g, quantizer, rng=rng)) - g
        acc += float(np.dot(err, err))
    return acc / (N * gg)


def run_parallel_sgd(obj, cfg: RunConfig, x0=None, keep_iterates: bool = False):
    """Simulate the synchronous K-worker loop; returns RunMetrics.

    With keep_iterates=True also returns the list of raw (non-averaged)
    iterates x_1..x_T.  Losses are reported at the running averaged iterate.
    """
    x = np.zeros(obj.n) if x0 is None else np.array(x0, dtype=np.float64)
    eta = resolve_eta(obj, cfg, x)
    idx_rng = substream(cfg.seed, "indices")
    qrngs = [substream(cfg.seed, "quant", k) for k in range(cfg.K)]
    threads = worker_threads(cfg.K)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    metrics = RunMetrics(eta=eta)
    iterates: list[np.ndarray] = []
    xbar_sum = np.zeros_like(x)
    started = time.perf_counter()
    try:
        for t in range(cfg.T):
            if cfg.minibatch == obj.m:
                blocks = [np.arange(obj.m)] * cfg.K
            else:
                flat = idx_rng.integers(0, obj.m, size=cfg.K * cfg.minibatch)
                blocks = flat.reshape(cfg.K, cfg.minibatch)
            step = lambda k: _worker_step(  # noqa: E731 - tiny per-iteration closure
                obj, x, blocks[k], cfg.quantizer, qrngs[k], cfg.skip_below
            )
            if pool is None:
                results = [step(k) for k in range(cfg.K)]
            else:
                results = list(pool.map(step, range(cfg.K)))  # worker order preserved
            mean_g = sum(r[0] for r in results) / cfg.K
            metrics.bits_by_worker.append([r[1] for r in results])

            x = x - eta * mean_g
            if cfg.projection_radius > 0:
                nrm = float(np.linalg.norm(x))
                if nrm > cfg.projection_radius:
                    x = x * (cfg.projection_radius / nrm)
            if keep_iterates:
                iterates.append(x.copy())

            xbar_sum += x
            xbar = xbar_sum / (t + 1)
            loss = obj.value(xbar)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss became non-finite with eta={eta}", iteration=t
                )
            metrics.losses.append(loss)
            metrics.grad_norms.append(float(np.linalg.norm(obj.full_gradient(xbar))))
    finally:
        if pool is not None:
            pool.shutdown()
    metrics.wall_clock = time.perf_counter() - started
    if cfg.quantizer is not None:
        metrics.variance_ratio = empirical_variance_ratio(
            obj, np.zeros(obj.n) if x0 is None else x0, cfg.quantizer,
            N=1000, rng=substream(cfg.seed, "variance-probe"),
        )
    return (metrics, iterates) if keep_iterates else metrics


def run_nonconvex(obj, cfg: RunConfig, x0=None):
    """Run the loop and report ||grad f(x_R)||^2 at a uniformly random stop index.

    Returns (squared gradient norm at the stopped iterate, RunMetrics).
    """
    metrics, iterates = run_parallel_sgd(obj, cfg, x0=x0, keep_iterates=True)
    start = np.zeros(obj.n) if x0 is None else np.asarray(x0, dtype=np.float64)
    visited = [start] + iterates[:-1]  # iterates the gradient was evaluated at
    stop = int(substream(cfg.seed, "stop").integers(len(visited)))
    g = obj.full_gradient(visited[stop])
    return float(np.dot(g, g)), metrics
