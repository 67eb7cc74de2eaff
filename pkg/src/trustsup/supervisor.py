"""Regression network mapping a descriptor to the expected number of correct
ensemble members, trained by summed squared error with adam.

Architecture is fixed by the input size n: dense n -> n+1 -> 2n+1 -> 1 with
ReLU on both hidden layers and a linear, unclamped output (the target lives in
[0, M] as a data property, not an architectural constraint). All parameters
sit in one flat float64 vector so the whole net updates through a single adam
state, and checkpoints round-trip bit-exactly via hex-encoded floats.

When a :class:`~trustsup.trustloss.TrustMemory` is attached to training, every
minibatch pushes its (prediction, label) pairs into the buffer and then takes
one adam step on the trust threshold.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, NumericError
from .numerics import AdamState, adam_step, finite_diff_grad, seeded_rng
from .serialize import floats_to_hex, hex_to_floats
from .trustloss import TrustMemory, memory_from_dict, memory_to_dict, push_many, update_tt

__all__ = [
    "SupervisorNet", "TrainConfig", "sse_loss", "train", "grad_check",
    "save_checkpoint", "load_checkpoint", "write_loss_trace",
]

CHECKPOINT_FORMAT = "trustsup-checkpoint-v1"


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    minibatch_size: int = 64
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise NumericError("learning rate must be positive")
        if self.minibatch_size < 1:
            raise NumericError("minibatch size must be >= 1")
        if self.epochs < 0:
            raise NumericError("epochs must be >= 0")


class SupervisorNet:
    """Three-layer regression MLP over flat parameters."""

    def __init__(self, n: int, params: np.ndarray, adam: AdamState):
        h1, h2 = n + 1, 2 * n + 1
        expected = h1 * n + h1 + h2 * h1 + h2 + h2 + 1
        if params.size != expected:
            raise NumericError(f"parameter vector has {params.size} entries, expected {expected}")
        if not np.isfinite(params).all():
            raise NumericError("non-finite network parameter")
        self.n = n
        self.h1 = h1
        self.h2 = h2
        self.params = params
        self.adam = adam
        o = 0
        self.w1 = params[o:o + h1 * n].reshape(h1, n); o += h1 * n
        self.b1 = params[o:o + h1]; o += h1
        self.w2 = params[o:o + h2 * h1].reshape(h2, h1); o += h2 * h1
        self.b2 = params[o:o + h2]; o += h2
        self.w3 = params[o:o + h2]; o += h2
        self.b3 = params[o:o + 1]

    @classmethod
    def create(cls, n: int, seed: int = 0, lr: float = 0.01) -> "SupervisorNet":
        """Fresh net with He-uniform weights scaled by fan-in.

        Biases draw from a small uniform band rather than zero so a freshly
        initialized net never sits exactly on a ReLU kink (an all-negative
        first layer would otherwise park every second-layer unit at 0).
        """
        if n < 1:
            raise NumericError("input size must be >= 1")
        rng = seeded_rng([seed, 101])
        h1, h2 = n + 1, 2 * n + 1

        def he(rows, cols):
            limit = np.sqrt(6.0 / cols)
            return rng.uniform(-limit, limit, size=rows * cols)

        def bias(size, fan_in):
            limit = 0.1 * np.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=size)

        params = np.concatenate([
            he(h1, n), bias(h1, n),
            he(h2, h1), bias(h2, h1),
            he(1, h2), bias(1, h2),
        ])
        return cls(n, params, AdamState.for_size(params.size, lr=lr))

    def copy(self) -> "SupervisorNet":
        return SupervisorNet(self.n, self.params.copy(), self.adam.copy())

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n:
            raise DataFormatError(f"input shape {x.shape} does not match network input size {self.n}")
        a1 = np.maximum(x @ self.w1.T + self.b1, 0.0)
        a2 = np.maximum(a1 @ self.w2.T + self.b2, 0.0)
        return a2 @ self.w3 + self.b3[0]

    def forward(self, usd) -> float:
        usd = np.asarray(usd, dtype=float).ravel()
        if usd.size != self.n:
            raise DataFormatError(f"descriptor length {usd.size} does not match network input size {self.n}")
        return float(self.forward_batch(usd[None, :])[0])

    def gradient(self, x: np.ndarray, e: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Summed-squared-error loss, flat gradient, and the batch predictions."""
        x = np.asarray(x, dtype=float)
        e = np.asarray(e, dtype=float).ravel()
        if x.shape[0] != e.size:
            raise DataFormatError(f"{x.shape[0]} inputs but {e.size} labels")
        z1 = x @ self.w1.T + self.b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ self.w2.T + self.b2
        a2 = np.maximum(z2, 0.0)
        y = a2 @ self.w3 + self.b3[0]

        r = y - e
        loss = float(np.dot(r, r))
        dy = 2.0 * r
        grads = np.empty_like(self.params)
        o = 0
        g_w1 = grads[o:o + self.h1 * self.n].reshape(self.h1, self.n); o += self.h1 * self.n
        g_b1 = grads[o:o + self.h1]; o += self.h1
        g_w2 = grads[o:o + self.h2 * self.h1].reshape(self.h2, self.h1); o += self.h2 * self.h1
        g_b2 = grads[o:o + self.h2]; o += self.h2
        g_w3 = grads[o:o + self.h2]; o += self.h2
        g_b3 = grads[o:o + 1]

        g_w3[:] = a2.T @ dy
        g_b3[0] = dy.sum()
        dz2 = np.outer(dy, self.w3)
        dz2 *= z2 > 0
        g_w2[:] = dz2.T @ a1
        g_b2[:] = dz2.sum(axis=0)
        dz1 = dz2 @ self.w2
        dz1 *= z1 > 0
        g_w1[:] = dz1.T @ x
        g_b1[:] = dz1.sum(axis=0)
        return loss, grads, y


def sse_loss(y, e) -> float:
    """Sum of squared errors between predictions and labels."""
    y = np.asarray(y, dtype=float).ravel()
    e = np.asarray(e, dtype=float).ravel()
    if y.size != e.size:
        raise DataFormatError(f"{y.size} predictions but {e.size} labels")
    r = y - e
    return float(np.dot(r, r))


def train(net: SupervisorNet, descriptors, labels, cfg: TrainConfig,
          memory: TrustMemory | None = None) -> list[float]:
    """Minibatch adam training on summed squared error; mutates ``net`` (and
    ``memory`` when attached). Returns the per-epoch loss trace.

    Data is reshuffled every epoch from ``cfg.seed``; identical seed, data and
    config reproduce the trained network bit-for-bit.
    """
    x = np.asarray(descriptors, dtype=float)
    e = np.asarray(labels, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataFormatError("training requires at least one sample")
    if x.shape[0] != e.size:
        raise DataFormatError(f"{x.shape[0]} descriptors but {e.size} labels")
    if not np.isfinite(e).all():
        raise NumericError("non-finite training label")
    net.adam.lr = cfg.learning_rate
    rng = seeded_rng([cfg.seed, 7])
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(x.shape[0])
        total = 0.0
        for start in range(0, x.shape[0], cfg.minibatch_size):
            idx = perm[start:start + cfg.minibatch_size]
            loss, grads, preds = net.gradient(x[idx], e[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            adam_step(net.params, grads, net.adam)
            if memory is not None:
                push_many(memory, preds, e[idx])
                update_tt(memory, 1)
            total += loss
        trace.append(total)
    return trace


def grad_check(net: SupervisorNet, usd, label, h: float = 1e-6) -> float:
    """Max mixed relative error between analytic and central-difference
    gradients across every parameter.

    Components below 1e-3 in magnitude are compared on an absolute scale:
    central differences carry roundoff noise of order |loss|*eps/h, which
    would swamp a pure ratio for vanishing components. Exactly-dead ReLU
    paths agree at exactly zero on both sides.
    """
    x = np.asarray(usd, dtype=float).ravel()[None, :]
    ev = np.array([float(label)])
    _, analytic, _ = net.gradient(x, ev)
    saved = net.params.copy()

    def f(p):
        net.params[:] = p
        return sse_loss(net.forward_batch(x), ev)

    try:
        fd = finite_diff_grad(f, saved, h)
    finally:
        net.params[:] = saved
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-3)
    return float(np.max(np.abs(analytic - fd) / denom))


def _adam_to_dict(state: AdamState) -> dict:
    return {"lr": state.lr, "beta1": state.beta1, "beta2": state.beta2,
            "eps": state.eps, "step": state.step,
            "m_hex": floats_to_hex(state.m), "v_hex": floats_to_hex(state.v)}


def _adam_from_dict(d: dict) -> AdamState:
    return AdamState(m=hex_to_floats(d["m_hex"]), v=hex_to_floats(d["v_hex"]),
                     lr=d["lr"], beta1=d["beta1"], beta2=d["beta2"],
                     eps=d["eps"], step=d["step"])


def save_checkpoint(path, net: SupervisorNet, memory: TrustMemory | None = None,
                    meta: dict | None = None, reference=None) -> None:
    """Write the net (and optional trust memory / reference set) as JSON.

    Weights are hex-float encoded, so save -> load -> save is byte-stable and
    load reproduces every float bit-exactly. ``reference`` is an optional
    (descriptors, labels) pair kept for online retraining.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "n": net.n,
        "hidden1": net.h1,
        "hidden2": net.h2,
        "params_hex": floats_to_hex(net.params),
        "adam": _adam_to_dict(net.adam),
        "meta": meta or {},
        "trust": memory_to_dict(memory) if memory is not None else None,
        "reference": None,
    }
    if reference is not None:
        ref_x, ref_e = reference
        ref_x = np.asarray(ref_x, dtype=float)
        doc["reference"] = {
            "rows": int(ref_x.shape[0]),
            "x_hex": [floats_to_hex(row) for row in ref_x],
            "e_hex": floats_to_hex(ref_e),
        }
    with open(Path(path), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (net, memory or None, meta, reference or None)."""
    with open(Path(path)) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"{path}: not a supervisor checkpoint")
    n = doc["n"]
    net = SupervisorNet(n, hex_to_floats(doc["params_hex"]), _adam_from_dict(doc["adam"]))
    memory = memory_from_dict(doc["trust"]) if doc.get("trust") else None
    reference = None
    if doc.get("reference"):
        ref = doc["reference"]
        ref_x = np.stack([hex_to_floats(row) for row in ref["x_hex"]]) if ref["rows"] else np.zeros((0, n))
        reference = (ref_x, hex_to_floats(ref["e_hex"]))
    return net, memory, doc.get("meta", {}), reference


def write_loss_trace(path, trace) -> None:
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "sse"])
        for i, loss in enumerate(trace):
            writer.writerow([i, repr(float(loss))])
