"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .grid import GridField
from .regions import Primitive, RegionSpec


def check_field(X, name: str = "X") -> GridField:
    if not isinstance(X, GridField):
        raise TypeError(f"{name} must be a GridField, got {type(X).__name__}")
    return X


def check_points(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n_points, 3), got {np.shape(X)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_region(X, name: str = "X") -> RegionSpec:
    if isinstance(X, RegionSpec):
        return X
    if isinstance(X, Primitive):
        return RegionSpec((X,))
    if isinstance(X, (tuple, list)) and X and all(isinstance(p, Primitive) for p in X):
        return RegionSpec(tuple(X))
    raise TypeError(f"{name} must be a RegionSpec or region primitives, got {type(X).__name__}")


def check_int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_real(value, name: str, low: float | None = None, high: float | None = None,
               low_open: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"{name} must be finite")
    if low is not None and (v <= low if low_open else v < low):
        raise ValueError(f"{name} must be {'>' if low_open else '>='} {low}, got {v}")
    if high is not None and v > high:
        raise ValueError(f"{name} must be <= {high}, got {v}")
    return v


def check_option(value, name: str, options) -> str:
    if value not in options:
        raise ValueError(f"{name} must be one of {tuple(options)}, got {value!r}")
    return value
