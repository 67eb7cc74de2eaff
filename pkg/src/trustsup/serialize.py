"""Bit-exact float64 round-tripping for JSON artifacts (hex-float strings)."""

from __future__ import annotations

import numpy as np


def float_to_hex(x: float) -> str:
    return float(x).hex()


def hex_to_float(s: str) -> float:
    return float.fromhex(s)


def floats_to_hex(a) -> list[str]:
    return [float(x).hex() for x in np.asarray(a, dtype=float).ravel()]


def hex_to_floats(xs) -> np.ndarray:
    return np.array([float.fromhex(s) for s in xs], dtype=float)
