"""Batched 1-D real <-> half-spectrum FFTs.

Forward transforms are unnormalized; the inverse carries the ``1/length``
factor. ``scipy.fft`` does the work and keeps float32 inputs in single
precision, which the mixed-precision pipeline relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import Precision

__all__ = ["Direction", "FftPlan", "forward_real_batched", "inverse_real_batched"]


class Direction(enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class FftPlan:
    length: int
    batch: int
    precision: Precision
    direction: Direction

    def __post_init__(self):
        if self.length < 2 or self.length % 2:
            raise ValueError(f"FFT length must be even and >= 2, got {self.length}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")

    @property
    def n_bins(self) -> int:
        return self.length // 2 + 1


def forward_real_batched(plan: FftPlan, series: np.ndarray) -> np.ndarray:
    """``(batch, length)`` reals -> ``(batch, length//2 + 1)`` complex bins."""
    if plan.direction is not Direction.FORWARD:
        raise ValueError("plan is not a forward plan")
    series = np.asarray(series)
    if series.shape != (plan.batch, plan.length):
        raise ValueError(f"expected shape {(plan.batch, plan.length)}, got {series.shape}")
    if series.dtype != plan.precision.real_dtype:
        raise TypeError(f"expected {plan.precision.real_dtype} input, got {series.dtype}")
    return scipy.fft.rfft(series, axis=-1)


def inverse_real_batched(plan: FftPlan, bins: np.ndarray) -> np.ndarray:
    """``(batch, length//2 + 1)`` complex bins -> ``(batch, length)`` reals, normalized."""
    if plan.direction is not Direction.INVERSE:
        raise ValueError("plan is not an inverse plan")
    bins = np.asarray(bins)
    if bins.shape != (plan.batch, plan.n_bins):
        raise ValueError(f"expected shape {(plan.batch, plan.n_bins)}, got {bins.shape}")
    if bins.dtype != plan.precision.complex_dtype:
        raise TypeError(f"expected {plan.precision.complex_dtype} input, got {bins.dtype}")
    return scipy.fft.irfft(bins, n=plan.length, axis=-1)
