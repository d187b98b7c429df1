"""FFT-based matvecs with block lower-triangular Toeplitz matrices.

Per-phase FP32/FP64 precision control, a Pareto-front precision selector,
a tiled batched transpose GEMV for short-wide matrices and a simulated
1 x p partitioned execution.
"""

from .core import (
    BlockVector,
    Domain,
    Layout,
    Precision,
    PrecisionConfig,
    PrecisionConfigError,
    ProblemDims,
    cast_buffer,
    enumerate_configs,
    parse_precision_config,
    reorder,
)
from .estimators import BlockToeplitzMatvec, PrecisionSelector
from .kernels import GemvMode, MatrixBatch, TilingParams, effective_bandwidth
from .pipeline import (
    BlockColumn,
    SpectralOperator,
    adjoint_matvec,
    forward_matvec,
    materialize_single,
    setup_operator,
)
from .preclab import non_representable_fill, optimal_config, pareto_front, relative_error
from .vecio import load_vector, save_vector

__version__ = "0.1.0"

__all__ = [
    "BlockColumn",
    "BlockToeplitzMatvec",
    "BlockVector",
    "Domain",
    "GemvMode",
    "Layout",
    "MatrixBatch",
    "Precision",
    "PrecisionConfig",
    "PrecisionConfigError",
    "PrecisionSelector",
    "ProblemDims",
    "SpectralOperator",
    "TilingParams",
    "adjoint_matvec",
    "cast_buffer",
    "effective_bandwidth",
    "enumerate_configs",
    "forward_matvec",
    "load_vector",
    "materialize_single",
    "non_representable_fill",
    "optimal_config",
    "parse_precision_config",
    "pareto_front",
    "relative_error",
    "reorder",
    "save_vector",
    "setup_operator",
]
