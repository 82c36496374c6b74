"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_condition",
    "check_positive",
    "check_finite_array",
    "check_same_shape",
]


def check_condition(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def check_positive(value: float, name: str) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def check_finite_array(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_same_shape(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"{name_a} shape {np.shape(a)} does not match {name_b} "
            f"shape {np.shape(b)}"
        )
