"""Utility methods."""

import math
from typing import Any, Final

import numpy as np

SIGNIFICANT_DIGITS: Final[int] = 17


def soft_threshold(values, threshold: float) -> np.ndarray:
    """Proximal map of ``threshold * ‖·‖₁``.

    Shrinks every entry towards zero by ``threshold``, zeroing those below it.
    """
    if threshold < 0.0:
        raise ValueError("Threshold must be non-negative.")

    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def relative_error(estimate, reference) -> float:
    """‖estimate - reference‖₂ / ‖reference‖₂; zero when both vanish."""
    error = float(np.linalg.norm(np.subtract(estimate, reference)))
    scale = float(np.linalg.norm(reference))
    if scale == 0.0:
        return 0.0 if error == 0.0 else math.inf
    return error / scale


def format_float(value: float) -> str:
    """Format a float with enough digits to round-trip."""
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def merge_config(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursively overlay ``override`` on ``base`` without mutating either."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged
