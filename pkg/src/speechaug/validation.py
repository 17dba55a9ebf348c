"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np


def as_waveform(x, name: str = "samples") -> np.ndarray:
    """Coerce to a contiguous 1-D float64 array and reject non-finite values."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional (mono), got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite values."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_sample_rate(sample_rate) -> int:
    rate = int(sample_rate)
    if rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    return rate


def check_positive(value, name: str) -> float:
    v = float(value)
    if not v > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return v
