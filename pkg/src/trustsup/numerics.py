"""Shared float64 numerics: an adam optimizer over flat parameter vectors,
central-difference gradients (the package-wide test oracle), and seeded
random streams.

The supervisor network, the trust threshold, and the toy ensemble members all
train through this one optimizer. State is caller-owned and mutated in place;
nothing here holds hidden globals, so disjoint states are safe to drive
concurrently.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

__all__ = ["AdamState", "adam_step", "dirichlet", "finite_diff_grad", "seeded_rng"]


def seeded_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Deterministic random stream (uniform, normal, Dirichlet, integer draws).

    Identical seeds yield bit-identical streams. A sequence seed derives an
    independent child stream, e.g. ``seeded_rng([base_seed, 3])``.
    """
    return np.random.default_rng(seed)


def dirichlet(rng: np.random.Generator, alpha) -> np.ndarray:
    """Dirichlet draw with strict validation: every concentration must be a
    positive finite number (numpy itself tolerates zeros)."""
    a = np.asarray(alpha, dtype=float)
    if a.size == 0 or not np.isfinite(a).all() or (a <= 0).any():
        raise NumericError("Dirichlet concentrations must all be positive and finite")
    return rng.dirichlet(a)


@dataclass
class AdamState:
    """Adam moments for one flat float64 parameter vector."""

    m: np.ndarray
    v: np.ndarray
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_size(cls, size: int, lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), lr=lr,
                   beta1=beta1, beta2=beta2, eps=eps)

    def copy(self) -> "AdamState":
        return AdamState(m=self.m.copy(), v=self.v.copy(), lr=self.lr,
                         beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                         step=self.step)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """Apply one adam update in place on ``params`` and ``state``.

    A fresh state with all-zero gradients is a fixed point: the parameters do
    not move. Raises on shape mismatches and on any non-finite gradient
    component (the error names the offending parameter index).
    """
    if params.shape != grads.shape:
        raise NumericError(f"params shape {params.shape} != grads shape {grads.shape}")
    if state.m.shape != params.shape or state.v.shape != params.shape:
        raise NumericError(
            f"optimizer moment shape {state.m.shape} does not match params {params.shape}")
    bad = ~np.isfinite(grads)
    if bad.any():
        raise NumericError(
            f"non-finite gradient at parameter index {int(np.flatnonzero(bad)[0])}")
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(grads)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Evaluates f at x +- h*e_i per coordinate; raises if any probe comes back
    non-finite.
    """
    if h <= 0:
        raise NumericError("step size h must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    probe = x.copy()
    for i in range(x.size):
        probe[i] = x[i] + h
        hi = float(f(probe))
        probe[i] = x[i] - h
        lo = float(f(probe))
        probe[i] = x[i]
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite function value while probing coordinate {i}")
        out[i] = (hi - lo) / (2.0 * h)
    return out
