"""Gradient compression via stochastic quantization, lossless integer codecs
with exact bit accounting, and simulated data-parallel training loops."""

__version__ = "0.1.0"

from .bitstream import BitReader, BitStream
from .codec import (
    EncodedGradient,
    decode,
    decode_dense,
    decode_sparse,
    encode,
    encode_dense,
    encode_sparse,
    from_qsg_bytes,
    load_qsg,
    quantized_equal,
    save_qsg,
    theoretical_length_bound,
    to_qsg_bytes,
)
from .elias import (
    append_elias,
    append_elias_shifted,
    elias_decode,
    elias_encode,
    elias_length,
    elias_prime_decode,
    elias_prime_encode,
    elias_prime_length,
    read_elias,
    read_elias_shifted,
)
from .errors import (
    CodecError,
    ConfigError,
    CorruptionError,
    DivergenceError,
    TruncationError,
)
from .gdq import (
    TopSet,
    decode_gd,
    encode_gd,
    gd_length_bound,
    quantize_gd,
    run_quantized_gd,
    top_set,
)
from .objectives import (
    LeastSquares,
    LogisticRegression,
    NonconvexTest,
    Objective,
    ObjectiveKind,
    make_least_squares,
    make_logistic,
    make_nonconvex,
    make_quadratic,
    make_ridge,
)
from .quantizer import (
    NormMode,
    QuantizedBucket,
    QuantizedGradient,
    QuantizerConfig,
    Scheme,
    dequantize,
    level_assign,
    quantize,
    quantize_bucket,
)
from .rng import substream
from .sgd import (
    Constant,
    RunConfig,
    RunMetrics,
    TunedStep,
    empirical_variance_ratio,
    estimate_second_moment,
    run_nonconvex,
    resolve_eta,
    run_parallel_sgd,
    stochastic_gradient,
    worker_threads,
)
from .svrg import SvrgConfig, default_quantizer, epoch_bit_budget, run_qsvrg

__all__ = [
    "BitReader",
    "BitStream",
    "CodecError",
    "ConfigError",
    "Constant",
    "CorruptionError",
    "DivergenceError",
    "EncodedGradient",
    "LeastSquares",
    "LogisticRegression",
    "NonconvexTest",
    "NormMode",
    "Objective",
    "ObjectiveKind",
    "QuantizedBucket",
    "QuantizedGradient",
    "QuantizerConfig",
    "RunConfig",
    "RunMetrics",
    "Scheme",
    "SvrgConfig",
    "TopSet",
    "TruncationError",
    "TunedStep",
    "decode",
    "decode_dense",
    "decode_gd",
    "decode_sparse",
    "default_quantizer",
    "dequantize",
    "append_elias",
    "append_elias_shifted",
    "elias_decode",
    "elias_encode",
    "elias_length",
    "elias_prime_decode",
    "elias_prime_encode",
    "elias_prime_length",
    "read_elias",
    "read_elias_shifted",
    "empirical_variance_ratio",
    "encode",
    "encode_dense",
    "encode_gd",
    "encode_sparse",
    "epoch_bit_budget",
    "estimate_second_moment",
    "from_qsg_bytes",
    "gd_length_bound",
    "level_assign",
    "load_qsg",
    "make_least_squares",
    "make_logistic",
    "make_nonconvex",
    "make_quadratic",
    "make_ridge",
    "quantize",
    "quantize_bucket",
    "quantize_gd",
    "quantized_equal",
    "run_nonconvex",
    "resolve_eta",
    "run_parallel_sgd",
    "run_qsvrg",
    "run_quantized_gd",
    "save_qsg",
    "stochastic_gradient",
    "worker_threads",
    "substream",
    "theoretical_length_bound",
    "to_qsg_bytes",
    "top_set",
]
