"""Uniform scalar quantizer with a widened zero bin, shared by both coding stages."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

#: rounding offset of the forward rule; 1/6 widens the zero bin for inter blocks
DEADZONE_OFFSET = 1.0 / 6.0

# float estimates closer than this to a decision boundary are settled exactly
_BOUNDARY_SLACK = 1e-9


def _exact_level(mag: float, q: float, guess: int) -> int:
    """Largest L >= 0 with L - 1/6 <= mag/q, evaluated in exact rational arithmetic."""
    m6 = 6 * Fraction(mag)
    fq = Fraction(q)
    level = max(guess - 1, 0)
    while m6 >= (6 * (level + 1) - 1) * fq:
        level += 1
    return level


def quantize(c: float, q: float) -> int:
    """Map coefficient ``c`` to ``sign(c) * floor(|c|/q + 1/6)``.

    The rule is applied exactly to the given binary values: a coefficient on
    a decision boundary (``|c| = (L - 1/6) * q``) always gets level ``L``.
    """
    if not q > 0:
        raise ValueError(f"stepsize must be positive, got {q!r}")
    if not math.isfinite(c):
        raise ValueError(f"cannot quantize non-finite coefficient {c!r}")
    mag = abs(c)
    v = mag / q + DEADZONE_OFFSET
    level = math.floor(v)
    if abs(v - round(v)) <= _BOUNDARY_SLACK * max(1.0, v):
        level = _exact_level(mag, q, level)
    return -level if c < 0 else level


def dequantize(level: int, q: float) -> float:
    if not q > 0:
        raise ValueError(f"stepsize must be positive, got {q!r}")
    return float(level) * q


def quantize_array(c: np.ndarray, q: float) -> np.ndarray:
    """Vectorized :func:`quantize`; returns int64 levels."""
    if not q > 0:
        raise ValueError(f"stepsize must be positive, got {q!r}")
    c = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise ValueError("cannot quantize non-finite coefficients")
    a = np.abs(c)
    v = a / q + DEADZONE_OFFSET
    mag = np.floor(v).astype(np.int64)
    near = np.flatnonzero(np.abs(v - np.round(v)) <= _BOUNDARY_SLACK * np.maximum(1.0, v))
    for i in near:
        mag.flat[i] = _exact_level(float(a.flat[i]), q, int(mag.flat[i]))
    return np.where(c < 0, -mag, mag)


def dequantize_array(levels: np.ndarray, q: float) -> np.ndarray:
    if not q > 0:
        raise ValueError(f"stepsize must be positive, got {q!r}")
    return np.asarray(levels, dtype=np.float64) * q
