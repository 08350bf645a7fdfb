"""Command-line entry point: compression, codec benchmarks, and trainers.

Subcommands: compress, decompress, bench-codec, train, svrg, gd.  Experiment
subcommands read a flat ``key = value`` config file with ``--set key=value``
overrides (flags win).  Every output embeds the fully resolved config in
``#``-prefixed header lines and contains nothing time-dependent, so identical
config + seed reproduces byte-identical files.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .codec import (
    decode,
    encode,
    load_qsg,
    save_qsg,
    theoretical_length_bound,
)
from .errors import CodecError, ConfigError, DivergenceError
from .gdq import decode_gd, run_quantized_gd
from .objectives import (
    make_least_squares,
    make_logistic,
    make_nonconvex,
    make_quadratic,
    make_ridge,
)
from .quantizer import NormMode, QuantizerConfig, Scheme, dequantize, quantize
from .rng import substream
from .sgd import Constant, RunConfig, TunedStep, run_parallel_sgd
from .svrg import SvrgConfig, default_quantizer, run_qsvrg


def _fmt(value) -> str:
    """Stable textual form: shortest round-trip repr for floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_lines(path: str | None, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _header(subcommand: str, resolved: dict) -> list[str]:
    lines = [f"# qsgd {subcommand} (version {__version__})"]
    lines += [f"# {key} = {_fmt(resolved[key])}" for key in sorted(resolved)]
    return lines


# ---------------------------------------------------------------- config files

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _coerce(key: str, raw, kind):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(kind, tuple):  # enumerated string choices
            low = raw.lower()
            if low not in kind:
                raise ValueError(f"expected one of {sorted(kind)}, got {raw!r}")
            return low
        if kind == "float_or_auto":
            return "auto" if raw.lower() == "auto" else float(raw)
        if kind == "float_or_tuned":
            return "tuned" if raw.lower() == "tuned" else float(raw)
        if kind == "int_or_none":
            return None if raw.lower() in ("none", "auto", "0") else int(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key!r}: {exc}") from exc
    raise AssertionError(f"unhandled kind {kind!r}")


def parse_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` lines; blank lines and #-comments ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
            key, _, value = stripped.partition("=")
            out[key.strip()] = value.strip()
    return out


def resolve_config(schema: dict, file_path: str | None, overrides: list[str]) -> dict:
    """Merge defaults <- config file <- --set flags, validating every key."""
    resolved = {key: default for key, (_kind, default) in schema.items()}
    sources: list[tuple[str, str]] = []
    if file_path:
        sources += parse_config_file(file_path).items()
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        sources.append((key.strip(), value.strip()))
    for key, raw in sources:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = _coerce(key, raw, schema[key][0])
    return resolved


# ------------------------------------------------------------- objective setup

_OBJECTIVE_SCHEMA = {
    "objective": (("least_squares", "ridge", "logistic", "nonconvex", "quadratic"),
                  "least_squares"),
    "n": (int, 128),
    "m": (int, 512),
    "obj_seed": ("int_or_none", None),
    "kappa": (float, 10.0),
    "lam": (float, 0.0),
    "noise": (float, 0.0),
    "realizable": (bool, True),
    "tilt": (float, 1.0),
}


def build_objective(resolved: dict):
    seed = resolved["obj_seed"] if resolved["obj_seed"] is not None else resolved["seed"]
    kind = resolved["objective"]
    n, m = resolved["n"], resolved["m"]
    if kind == "least_squares":
        return make_least_squares(n=n, m=m, seed=seed, realizable=resolved["realizable"],
                                  noise=resolved["noise"], lam=resolved["lam"])
    if kind == "ridge":
        return make_ridge(n=n, m=m, kappa=resolved["kappa"], seed=seed)
    if kind == "logistic":
        return make_logistic(n=n, m=m, seed=seed, lam=resolved["lam"] or 1e-2)
    if kind == "nonconvex":
        return make_nonconvex(n=n, m=m, seed=seed, tilt=resolved["tilt"])
    if kind == "quadratic":
        return make_quadratic(n=n, kappa=resolved["kappa"], seed=seed)
    raise ConfigError(f"unknown objective {kind!r}")


_QUANTIZER_SCHEMA = {
    "quantizer": (("none", "auto", "sparse", "dense"), "none"),
    "levels": ("int_or_none", None),
    "bits": ("int_or_none", None),
    "bucket_size": ("int_or_none", None),
    "norm": (("l2", "max"), "l2"),
}


def build_quantizer(resolved: dict, n: int, seed: int) -> QuantizerConfig | None:
    kind = resolved["quantizer"]
    if kind == "none":
        return None
    if resolved["levels"] is not None and resolved["bits"] is not None:
        raise ConfigError("set either 'levels' or 'bits', not both")
    if kind == "auto":
        base = default_quantizer(n, seed)
        levels, scheme = base.levels, base.scheme
    else:
        scheme = Scheme(kind)
        levels = 1
    if resolved["bits"] is not None:
        levels = 2 ** resolved["bits"]
    elif resolved["levels"] is not None:
        levels = resolved["levels"]
    bucket = resolved["bucket_size"] if resolved["bucket_size"] is not None else n
    norm = NormMode.L2 if resolved["norm"] == "l2" else NormMode.MAX
    return QuantizerConfig(levels=levels, bucket_size=bucket, norm_mode=norm,
                           scheme=scheme, seed=seed)


# -------------------------------------------------------------------- compress

def _read_float32_file(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) == 0:
        raise ConfigError(f"usage error: input file {path!r} is empty")
    if len(blob) % 4:
        offset = len(blob) - (len(blob) % 4)
        raise OSError(
            f"{path}: size {len(blob)} bytes is not a whole number of 32-bit floats "
            f"(dangling {len(blob) % 4} byte(s) at byte offset {offset})"
        )
    values = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise OSError(f"{path}: non-finite float at byte offset {4 * bad}")
    return values


def cmd_compress(args) -> int:
    v = _read_float32_file(args.input)
    n = len(v)
    resolved = {
        "quantizer": args.scheme, "levels": args.levels, "bits": args.bits,
        "bucket_size": args.bucket_size, "norm": args.norm,
    }
    cfg = build_quantizer(resolved, n, args.seed)
    message = encode(quantize(v, cfg))
    save_qsg(message, args.output)
    bound = theoretical_length_bound(n, cfg.levels, cfg.scheme, bucket_size=cfg.bucket_size)
    echo = {
        "input": args.input, "output": args.output, "n": n, "levels": cfg.levels,
        "bucket_size": cfg.bucket_size, "norm": cfg.norm_mode.value,
        "scheme": cfg.scheme.value, "seed": args.seed,
    }
    lines = _header("compress", echo)
    original = 32 * n
    ratio = original / message.declared_bits
    lines.append(
        f"original_bits={original} compressed_bits={message.declared_bits} "
        f"ratio={_fmt(ratio)} bound_bits={_fmt(bound) if bound is not None else 'n/a'}"
    )
    _write_lines(None, lines)
    return 0


def cmd_decompress(args) -> int:
    message = load_qsg(args.input)
    if message.scheme is Scheme.TOPSET:
        v = decode_gd(message)
    else:
        v = dequantize(decode(message))
    with open(args.output, "wb") as fh:
        fh.write(v.astype("<f4").tobytes())
    echo = {"input": args.input, "output": args.output, "n": message.n,
            "levels": message.s, "scheme": message.scheme.value}
    lines = _header("decompress", echo)
    lines.append(f"payload_bits={message.declared_bits} n={message.n}")
    _write_lines(None, lines)
    return 0


# ------------------------------------------------------------------ bench-codec

def cmd_bench_codec(args) -> int:
    if args.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {args.trials}")
    scheme = Scheme(args.scheme)
    cfg = QuantizerConfig(levels=args.s, bucket_size=args.d, norm_mode=NormMode.L2,
                          scheme=scheme, seed=args.seed)
    data_rng = substream(args.seed, "bench-data")
    quant_rng = substream(args.seed, "bench-quant")
    lengths, nonzeros = [], []
    rows = []
    for trial in range(args.trials):
        v = data_rng.standard_normal(args.n)
        q = quantize(v, cfg, rng=quant_rng)
        message = encode(q)
        nnz = int(sum(np.count_nonzero(b.levels) for b in q.buckets))
        lengths.append(message.declared_bits)
        nonzeros.append(nnz)
        rows.append(f"{trial},{message.declared_bits},{nnz}")
    bound = theoretical_length_bound(args.n, args.s, scheme, bucket_size=args.d)
    echo = {"n": args.n, "d": args.d, "s": args.s, "trials": args.trials,
            "scheme": scheme.value, "seed": args.seed}
    lines = _header("bench-codec", echo)
    lines.append("trial,bits,nonzeros")
    lines += rows
    lines.append(f"# mean_bits = {_fmt(sum(lengths) / len(lengths))}")
    lines.append(f"# mean_nonzeros = {_fmt(sum(nonzeros) / len(nonzeros))}")
    lines.append(f"# bound_bits = {_fmt(bound) if bound is not None else 'n/a'}")
    _write_lines(args.output, lines)
    return 0


# ------------------------------------------------------------------------ train

_TRAIN_SCHEMA = {
    **_OBJECTIVE_SCHEMA,
    **_QUANTIZER_SCHEMA,
    "workers": (int, 1),
    "iters": (int, 100),
    "minibatch": (int, 1),
    "eta": ("float_or_tuned", "tuned"),
    "eta_radius": ("float_or_auto", "auto"),
    "eta_sigma": ("float_or_auto", "auto"),
    "seed": (int, 0),
    "projection_radius": (float, 0.0),
    "skip_below": (int, 0),
}


def cmd_train(args) -> int:
    resolved = resolve_config(_TRAIN_SCHEMA, args.config, args.set)
    obj = build_objective(resolved)
    quantizer = build_quantizer(resolved, obj.n, resolved["seed"])
    if resolved["eta"] == "tuned":
        radius = None if resolved["eta_radius"] == "auto" else resolved["eta_radius"]
        eta: Constant | TunedStep = TunedStep(radius=radius, sigma=resolved["eta_sigma"])
    else:
        eta = Constant(resolved["eta"])
    cfg = RunConfig(
        K=resolved["workers"], T=resolved["iters"], minibatch=resolved["minibatch"],
        eta=eta, quantizer=quantizer, seed=resolved["seed"],
        projection_radius=resolved["projection_radius"], skip_below=resolved["skip_below"],
    )
    metrics = run_parallel_sgd(obj, cfg)

    lines = _header("train", resolved)
    lines.append(f"# eta_resolved = {_fmt(metrics.eta)}")
    if quantizer is not None:
        lines.append(f"# variance_ratio = {_fmt(metrics.variance_ratio)}")
    lines.append("iter,loss,bits_per_worker,cumulative_bits,grad_norm")
    cumulative = metrics.cumulative_bits
    per_worker = metrics.bits_per_worker
    for t in range(cfg.T):
        lines.append(
            f"{t + 1},{_fmt(metrics.losses[t])},{_fmt(per_worker[t])},"
            f"{cumulative[t]},{_fmt(metrics.grad_norms[t])}"
        )
    _write_lines(args.output, lines)

    if args.emit_plotdata:
        plot = _header("train plotdata", resolved)
        plot.append("cumulative_bits,loss")
        plot += [f"{cumulative[t]},{_fmt(metrics.losses[t])}" for t in range(cfg.T)]
        _write_lines(args.emit_plotdata, plot)
    return 0


# ------------------------------------------------------------------------- svrg

_SVRG_SCHEMA = {
    **{k: v for k, v in _OBJECTIVE_SCHEMA.items()},
    **_QUANTIZER_SCHEMA,
    "workers": (int, 1),
    "epochs": (int, 10),
    "iters": ("int_or_none", None),
    "eta": ("float_or_auto", "auto"),
    "full_gradient_quantized": (bool, False),
    "seed": (int, 0),
}
_SVRG_SCHEMA["objective"] = (_OBJECTIVE_SCHEMA["objective"][0], "ridge")
_SVRG_SCHEMA["n"] = (int, 64)
_SVRG_SCHEMA["m"] = (int, 256)
_SVRG_SCHEMA["quantizer"] = (_QUANTIZER_SCHEMA["quantizer"][0], "auto")


def cmd_svrg(args) -> int:
    resolved = resolve_config(_SVRG_SCHEMA, args.config, args.set)
    obj = build_objective(resolved)
    if obj.f_star is None:
        raise ConfigError("svrg needs an objective with a known optimal value")
    quantizer = build_quantizer(resolved, obj.n, resolved["seed"])
    cfg = SvrgConfig(
        K=resolved["workers"], P=resolved["epochs"], T=resolved["iters"],
        eta=None if resolved["eta"] == "auto" else resolved["eta"],
        full_gradient_quantized=resolved["full_gradient_quantized"],
        quantizer=quantizer, seed=resolved["seed"],
    )
    metrics = run_qsvrg(obj, cfg)

    lines = _header("svrg", resolved)
    lines.append(f"# eta_resolved = {_fmt(metrics.eta)}")
    lines.append("epoch,suboptimality,bits_per_worker_epoch")
    lines.append(f"0,{_fmt(metrics.losses[0] - obj.f_star)},0")
    for p in range(cfg.P):
        gap = metrics.losses[p + 1] - obj.f_star
        lines.append(f"{p + 1},{_fmt(gap)},{max(metrics.bits_by_worker[p])}")
    _write_lines(args.output, lines)
    return 0


# --------------------------------------------------------------------------- gd

def cmd_gd(args) -> int:
    if args.objective != "quadratic":
        raise ConfigError(f"unknown objective {args.objective!r}")
    obj = make_quadratic(n=args.n, kappa=args.kappa, seed=args.seed)
    x0 = substream(args.seed, "x0").standard_normal(args.n)
    run = run_quantized_gd(obj, x0, eta=args.eta, T=args.iters, eta_scale=args.eta_scale)
    echo = {"objective": args.objective, "n": args.n, "kappa": args.kappa,
            "eta_scale": args.eta_scale, "eta": args.eta, "iters": args.iters,
            "seed": args.seed}
    lines = _header("gd", echo)
    lines.append(f"# eta_resolved = {_fmt(run.eta)}")
    lines.append("iteration,f,bits")
    lines += [f"{t},{_fmt(run.fs[t])},{run.bits[t]}" for t in range(len(run.fs))]
    _write_lines(args.output, lines)
    return 0


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsgd",
        description="Gradient compression codecs and simulated data-parallel training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="quantize and encode a raw float32 vector file")
    p.add_argument("input", help="binary file of little-endian 32-bit floats")
    p.add_argument("-o", "--output", required=True, help="output .qsg path")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--levels", type=int, default=None, help="quantization levels s")
    group.add_argument("--bits", type=int, default=None, help="levels as s = 2^bits")
    p.add_argument("--bucket-size", dest="bucket_size", type=int, default=None,
                   help="components per bucket (default: whole vector)")
    p.add_argument("--norm", choices=["l2", "max"], default="l2")
    p.add_argument("--scheme", choices=["sparse", "dense"], default="sparse")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode a .qsg file to raw float32")
    p.add_argument("input", help=".qsg file")
    p.add_argument("-o", "--output", required=True, help="output float32 binary path")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("bench-codec", help="measure encoded lengths against the bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--scheme", choices=["sparse", "dense"], default="sparse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench_codec)

    p = sub.add_parser("train", help="simulated data-parallel SGD")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable; flags win)")
    p.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    p.add_argument("--emit-plotdata", default=None, metavar="PATH",
                   help="also write a loss-vs-cumulative-bits series")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("svrg", help="quantized SVRG")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_svrg)

    p = sub.add_parser("gd", help="deterministically quantized gradient descent")
    p.add_argument("--objective", default="quadratic")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--eta-scale", dest="eta_scale", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=None, help="explicit step size")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_gd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CodecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
