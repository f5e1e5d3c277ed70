"""siglex: differential-operator signal channels and symbolic analysis.

Per-sensor processing channels embed discrete linear differential operators
(forward application, inverse solving with covariance propagation and
Student-t bands) and feed a symbolic layer: interval quantization,
run-length tokens, multi-channel combination, frequency dictionaries, and
regex-subset matching over symbol streams.
"""

from .errors import SiglexError
from .grid import Grid
from .mcla import (
    FrequencyDict,
    MultiStream,
    align_and_combine,
    classify_operation,
    compare_histograms,
    exclude_symbols,
    frequency_dictionary,
    frequency_dictionary_json,
    histogram,
    multi_tokens,
)
from .operators import (
    DiffOperatorMatrix,
    InverseSolution,
    LdoMatrix,
    LdoSpec,
    LocalKernel,
    StreamingKernel,
    apply_ldo,
    apply_streaming,
    assemble_ldo,
    build_diff_operator,
    extract_local_kernel,
    solution_operator,
    solve_inverse,
)
from .pattern import Match, SymbolPattern, compile_pattern, find_all, find_all_tokens
from .scla import (
    Alphabet,
    SymbolStream,
    Token,
    compress_runs,
    decompress,
    quantize,
    run_scla,
    usd_alphabet,
)
from .uncertainty import (
    ConfidenceBand,
    CovarianceModel,
    confidence_band,
    estimate_residual_variance,
    prediction_band,
    propagate_forward,
    propagate_inverse,
    student_t_cdf,
    student_t_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "ConfidenceBand",
    "CovarianceModel",
    "DiffOperatorMatrix",
    "FrequencyDict",
    "Grid",
    "InverseSolution",
    "LdoMatrix",
    "LdoSpec",
    "LocalKernel",
    "Match",
    "MultiStream",
    "SiglexError",
    "StreamingKernel",
    "SymbolPattern",
    "SymbolStream",
    "Token",
    "align_and_combine",
    "apply_ldo",
    "apply_streaming",
    "assemble_ldo",
    "build_diff_operator",
    "classify_operation",
    "compare_histograms",
    "compile_pattern",
    "compress_runs",
    "confidence_band",
    "decompress",
    "estimate_residual_variance",
    "exclude_symbols",
    "extract_local_kernel",
    "find_all",
    "find_all_tokens",
    "frequency_dictionary",
    "frequency_dictionary_json",
    "histogram",
    "multi_tokens",
    "prediction_band",
    "propagate_forward",
    "propagate_inverse",
    "quantize",
    "run_scla",
    "solution_operator",
    "solve_inverse",
    "student_t_cdf",
    "student_t_quantile",
    "usd_alphabet",
]
