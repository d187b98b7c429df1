"""scikit-learn style wrappers.

:class:`BlockToeplitzMatvec` is fitted on a block column and then maps
parameter vectors to data vectors (``transform``) and back through the
adjoint (``adjoint_transform``). Rows of ``X`` are flattened SOTI vectors,
so the estimator drops into pipelines and ``scipy.sparse.linalg`` solvers
via :meth:`BlockToeplitzMatvec.as_linear_operator`.

:class:`PrecisionSelector` runs the 32-configuration sweep against a
fitted matvec and exposes the Pareto front and the chosen configuration.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import BlockVector, Layout, PrecisionConfig
from .kernels import TilingParams
from .partition import (
    Grid1xP,
    adjoint_matvec_partitioned,
    forward_matvec_partitioned,
    setup_shards,
    shard_operator,
)
from .pipeline import BlockColumn, adjoint_matvec, forward_matvec, setup_operator
from .preclab import SweepReport, optimal_config, pareto_front, sweep_configs


def check_block_column(X) -> BlockColumn:
    """Accept a BlockColumn or an ``(n_t, n_d, n_m)`` array."""
    if isinstance(X, BlockColumn):
        return X
    arr = check_array(X, dtype=np.float64, allow_nd=True, ensure_2d=False, copy=False)
    if arr.ndim != 3:
        raise ValueError(f"block column must be 3-D (n_t, n_d, n_m), got shape {arr.shape}")
    return BlockColumn(np.ascontiguousarray(arr))


def check_precision(precision) -> PrecisionConfig:
    if isinstance(precision, PrecisionConfig):
        return precision
    return PrecisionConfig.parse(precision)


class BlockToeplitzMatvec(TransformerMixin, BaseEstimator):
    """FFT-based product with a block lower-triangular Toeplitz operator.

    Parameters
    ----------
    precision : str, default="ddddd"
        Per-phase precisions (pad, fft, sbgemv, ifft, unpad), each ``d`` or ``s``.
    n_workers : int, default=1
        Workers of a simulated 1 x p column partition.
    tiling : TilingParams or None
        Tile sizes and dispatch thresholds for the transpose GEMV.

    Attributes
    ----------
    dims_ : ProblemDims
    operator_ : SpectralOperator or list of SpectralOperator
    n_features_in_ : int
        ``n_m * n_t``.
    """

    def __init__(self, precision="ddddd", n_workers=1, tiling=None):
        self.precision = precision
        self.n_workers = n_workers
        self.tiling = tiling

    def fit(self, X, y=None):
        """Build the spectral operator from a block column ``X``."""
        col = check_block_column(X)
        check_precision(self.precision)
        if self.tiling is not None and not isinstance(self.tiling, TilingParams):
            raise TypeError("tiling must be a TilingParams instance or None")
        self.dims_ = col.dims
        if self.n_workers == 1:
            self.operator_ = setup_operator(col)
        else:
            self.grid_ = Grid1xP(int(self.n_workers), col.dims.n_m)
            self.operator_ = setup_shards(shard_operator(col, self.grid_))
        self.n_features_in_ = self.dims_.n_m * self.dims_.n_t
        self.n_features_out_ = self.dims_.n_d * self.dims_.n_t
        return self

    def _apply(self, X, kind, cfg=None):
        check_is_fitted(self, "operator_")
        space = self.dims_.n_m if kind == "forward" else self.dims_.n_d
        cfg = check_precision(cfg if cfg is not None else self.precision)
        one_d = np.ndim(X) == 1
        X = check_array(np.atleast_2d(X), dtype=np.float64)
        n_t = self.dims_.n_t
        if X.shape[1] != space * n_t:
            raise ValueError(f"expected {space * n_t} features, got {X.shape[1]}")
        kw = {"params": self.tiling}
        if self.n_workers == 1:
            fn = forward_matvec if kind == "forward" else adjoint_matvec
            call = lambda v: fn(self.operator_, v, cfg, **kw)  # noqa: E731
        else:
            fn = forward_matvec_partitioned if kind == "forward" else adjoint_matvec_partitioned
            call = lambda v: fn(self.operator_, v, cfg, self.grid_, **kw)  # noqa: E731
        out = np.stack([call(BlockVector(np.ascontiguousarray(row), space, n_t, Layout.SOTI))[0].data
                        for row in X])
        return out[0] if one_d else out

    def transform(self, X):
        """Forward product for each row of ``X`` (``n_m * n_t`` features)."""
        return self._apply(X, "forward")

    def adjoint_transform(self, D):
        """Adjoint product for each row of ``D`` (``n_d * n_t`` features)."""
        return self._apply(D, "adjoint")

    def matvec(self, m, precision=None):
        return self._apply(np.asarray(m).ravel(), "forward", precision)

    def rmatvec(self, d, precision=None):
        return self._apply(np.asarray(d).ravel(), "adjoint", precision)

    def as_linear_operator(self) -> LinearOperator:
        check_is_fitted(self, "operator_")
        return LinearOperator((self.n_features_out_, self.n_features_in_),
                              matvec=self.matvec, rmatvec=self.rmatvec, dtype=np.float64)


class PrecisionSelector(BaseEstimator):
    """Pick the fastest precision configuration within an error tolerance.

    ``fit(X)`` sweeps all 32 configurations on the input vector ``X`` (a
    parameter vector for ``kind="forward"``, a data vector for
    ``"adjoint"``) using an already fitted :class:`BlockToeplitzMatvec`.
    """

    def __init__(self, matvec=None, tol=1e-7, kind="forward", repetitions=100, warmup=2):
        self.matvec = matvec
        self.tol = tol
        self.kind = kind
        self.repetitions = repetitions
        self.warmup = warmup

    def fit(self, X, y=None):
        if self.matvec is None:
            raise ValueError("PrecisionSelector needs a fitted BlockToeplitzMatvec")
        check_is_fitted(self.matvec, "operator_")
        est = self.matvec
        dims = est.dims_
        space = dims.n_m if self.kind == "forward" else dims.n_d
        x = check_array(np.atleast_2d(X), dtype=np.float64)
        if x.shape != (1, space * dims.n_t):
            raise ValueError(f"expected one vector of {space * dims.n_t} values")
        vec = BlockVector(np.ascontiguousarray(x[0]), space, dims.n_t, Layout.SOTI)
        mv = None
        if est.n_workers != 1:
            fn = forward_matvec_partitioned if self.kind == "forward" else adjoint_matvec_partitioned
            mv = lambda op, v, cfg: fn(op, v, cfg, est.grid_, params=est.tiling)  # noqa: E731
            kw = {}
        else:
            kw = {"params": est.tiling}
        self.results_ = sweep_configs(est.operator_, vec, self.kind, self.repetitions,
                                      self.warmup, matvec=mv, **kw)
        self.pareto_front_ = pareto_front(self.results_)
        self.best_config_ = optimal_config(self.results_, self.tol)
        self.report_ = SweepReport((dims.n_m, dims.n_d, dims.n_t), self.kind, self.repetitions,
                                   self.warmup, self.tol, self.results_, self.best_config_)
        return self

    def predict(self, tol=None):
        """Best configuration string for ``tol`` (defaults to the fitted tolerance)."""
        check_is_fitted(self, "results_")
        return str(optimal_config(self.results_, self.tol if tol is None else tol))
