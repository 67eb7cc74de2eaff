"""Loss layer with memory: a FIFO ring of (predicted count, true count) pairs
plus a learnable trust threshold.

The threshold TT is trained against a piecewise-quadratic penalty. An entry
(y, l) is *active* when y and l fall on opposite sides of TT, i.e. the
threshold mis-sorts that observation; an active entry contributes (y - TT)^2.
Entries with y and l on the same side contribute nothing, and an entry whose
y or l sits exactly on the threshold counts as inactive. The penalty's
TT-derivative over the buffer drives adam steps on TT.

The objective is quadratic between consecutive entry values and may only jump
where a label l crosses TT (it is continuous where a prediction y crosses, the
vanishing term). ``scan_optimal_tt`` exploits that structure to return the
exact global minimizer over a range; it serves both as a diagnostic for
degenerate minima and as the oracle the gradient path is tested against.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import NumericError
from .numerics import AdamState, adam_step
from .serialize import float_to_hex, floats_to_hex, hex_to_float, hex_to_floats

__all__ = [
    "TrustMemory", "push", "push_many", "sse_tt", "grad_tt", "update_tt",
    "scan_optimal_tt", "write_tt_trace", "memory_to_dict", "memory_from_dict",
]


class TrustMemory:
    """Ring buffer of (y, l) pairs with the learnable threshold riding along.

    ``capacity`` is the buffer length; eviction is strictly FIFO. The trace
    records (step, TT, sse_tt, buffer count) after every threshold update.
    """

    def __init__(self, capacity: int = 8192, tt: float = 3.5, tt_lr: float = 0.01):
        if capacity < 1:
            raise NumericError("memory capacity must be >= 1")
        if not np.isfinite(tt):
            raise NumericError("threshold must be finite")
        self.capacity = int(capacity)
        self._ys = np.zeros(self.capacity)
        self._ls = np.zeros(self.capacity)
        self._head = 0
        self.count = 0
        self._tt = np.array([float(tt)])
        self.opt = AdamState.for_size(1, lr=tt_lr)
        self.step = 0
        self.trace: list[tuple[int, float, float, int]] = [(0, float(tt), 0.0, 0)]

    @property
    def tt(self) -> float:
        return float(self._tt[0])

    def __len__(self) -> int:
        return self.count

    def entries(self) -> tuple[np.ndarray, np.ndarray]:
        """Stored pairs in FIFO order (oldest first)."""
        if self.count < self.capacity:
            return self._ys[:self.count].copy(), self._ls[:self.count].copy()
        return (np.concatenate([self._ys[self._head:], self._ys[:self._head]]),
                np.concatenate([self._ls[self._head:], self._ls[:self._head]]))

    def _filled(self) -> tuple[np.ndarray, np.ndarray]:
        # order-agnostic views for the vectorized objective
        if self.count < self.capacity:
            return self._ys[:self.count], self._ls[:self.count]
        return self._ys, self._ls

    def copy(self) -> "TrustMemory":
        dup = TrustMemory(self.capacity, tt=self.tt, tt_lr=self.opt.lr)
        dup._ys = self._ys.copy()
        dup._ls = self._ls.copy()
        dup._head = self._head
        dup.count = self.count
        dup.opt = self.opt.copy()
        dup.step = self.step
        dup.trace = list(self.trace)
        return dup


def push(mem: TrustMemory, y: float, l: float) -> TrustMemory:
    """Append one (prediction, label) pair, evicting the oldest entry when full."""
    if not (np.isfinite(y) and np.isfinite(l)):
        raise NumericError(f"non-finite pair pushed to memory: ({y!r}, {l!r})")
    mem._ys[mem._head] = y
    mem._ls[mem._head] = l
    mem._head = (mem._head + 1) % mem.capacity
    mem.count = min(mem.count + 1, mem.capacity)
    return mem


def push_many(mem: TrustMemory, ys, ls) -> TrustMemory:
    """Vectorized push of equal-length arrays, oldest-first semantics preserved."""
    ys = np.asarray(ys, dtype=float).ravel()
    ls = np.asarray(ls, dtype=float).ravel()
    if ys.size != ls.size:
        raise NumericError("push_many requires equal-length arrays")
    if not (np.isfinite(ys).all() and np.isfinite(ls).all()):
        raise NumericError("non-finite pair in push_many batch")
    if ys.size >= mem.capacity:
        mem._ys[:] = ys[-mem.capacity:]
        mem._ls[:] = ls[-mem.capacity:]
        mem._head = 0
        mem.count = mem.capacity
        return mem
    end = mem._head + ys.size
    if end <= mem.capacity:
        mem._ys[mem._head:end] = ys
        mem._ls[mem._head:end] = ls
    else:
        split = mem.capacity - mem._head
        mem._ys[mem._head:] = ys[:split]
        mem._ls[mem._head:] = ls[:split]
        mem._ys[:end - mem.capacity] = ys[split:]
        mem._ls[:end - mem.capacity] = ls[split:]
    mem._head = end % mem.capacity
    mem.count = min(mem.count + ys.size, mem.capacity)
    return mem


def _active_mask(ys: np.ndarray, ls: np.ndarray, tt: float) -> np.ndarray:
    # strict comparisons: a pair sitting exactly on the threshold is inactive
    return ((ls < tt) & (ys > tt)) | ((ls > tt) & (ys < tt))


def sse_tt(mem: TrustMemory, tt: float | None = None) -> float:
    """Threshold penalty over the buffer at ``tt`` (default: the stored TT)."""
    t = mem.tt if tt is None else float(tt)
    ys, ls = mem._filled()
    mask = _active_mask(ys, ls, t)
    if not mask.any():
        return 0.0
    d = ys[mask] - t
    return float(np.dot(d, d))


def grad_tt(mem: TrustMemory, tt: float | None = None) -> float:
    """d(sse_tt)/dTT; entries with y or l exactly at TT contribute zero."""
    t = mem.tt if tt is None else float(tt)
    ys, ls = mem._filled()
    mask = _active_mask(ys, ls, t)
    if not mask.any():
        return 0.0
    return float(2.0 * np.sum(t - ys[mask]))


def update_tt(mem: TrustMemory, steps: int = 1) -> float:
    """Run ``steps`` adam updates on the threshold; returns the new TT.

    Each step is appended to the memory's trace for later reporting.
    """
    if steps < 1:
        raise NumericError("update_tt requires steps >= 1")
    g = np.zeros(1)
    for _ in range(steps):
        g[0] = grad_tt(mem)
        adam_step(mem._tt, g, mem.opt)
        mem.step += 1
        mem.trace.append((mem.step, mem.tt, sse_tt(mem), mem.count))
    return mem.tt


def scan_optimal_tt(mem: TrustMemory, lo: float, hi: float) -> tuple[float, float]:
    """Exact global minimizer of ``sse_tt`` over [lo, hi].

    Between consecutive stored values the active set is constant and the
    objective is a quadratic whose unconstrained minimizer is the mean of the
    active predictions; the only other candidates are the stored values
    themselves (where the equality convention may drop terms) and the range
    endpoints. Ties resolve to the smallest threshold.
    """
    if not lo < hi:
        raise NumericError(f"empty search range [{lo!r}, {hi!r}]")
    ys, ls = mem._filled()
    points = np.unique(np.concatenate([ys, ls])) if ys.size else np.empty(0)
    interior = points[(points > lo) & (points < hi)]
    knots = np.concatenate([[lo], interior, [hi]])

    candidates = list(knots)
    for a, b in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (a + b)
        mask = _active_mask(ys, ls, mid)
        if mask.any():
            vertex = float(ys[mask].mean())
            if a < vertex < b:
                candidates.append(vertex)

    best_tt, best_loss = None, None
    for t in sorted(candidates):
        loss = sse_tt(mem, t)
        if best_loss is None or loss < best_loss:
            best_tt, best_loss = float(t), loss
    return best_tt, best_loss


def write_tt_trace(path, trace) -> None:
    """CSV export of a threshold trace: step, TT, sse_tt, buffer_count."""
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "tt", "sse_tt", "buffer_count"])
        for step, tt, sse, count in trace:
            writer.writerow([step, repr(float(tt)), repr(float(sse)), count])


def memory_to_dict(mem: TrustMemory) -> dict:
    """JSON-safe snapshot; float payload is hex-encoded for bit-exact round trips."""
    ys, ls = mem.entries()
    return {
        "capacity": mem.capacity,
        "tt_hex": float_to_hex(mem.tt),
        "step": mem.step,
        "ys_hex": floats_to_hex(ys),
        "ls_hex": floats_to_hex(ls),
        "opt": {
            "lr": mem.opt.lr, "beta1": mem.opt.beta1, "beta2": mem.opt.beta2,
            "eps": mem.opt.eps, "step": mem.opt.step,
            "m_hex": floats_to_hex(mem.opt.m), "v_hex": floats_to_hex(mem.opt.v),
        },
    }


def memory_from_dict(d: dict) -> TrustMemory:
    mem = TrustMemory(capacity=d["capacity"], tt=hex_to_float(d["tt_hex"]),
                      tt_lr=d["opt"]["lr"])
    ys = hex_to_floats(d["ys_hex"])
    ls = hex_to_floats(d["ls_hex"])
    if ys.size:
        push_many(mem, ys, ls)
    mem.step = d["step"]
    opt = d["opt"]
    mem.opt = AdamState(m=hex_to_floats(opt["m_hex"]), v=hex_to_floats(opt["v_hex"]),
                        lr=opt["lr"], beta1=opt["beta1"], beta2=opt["beta2"],
                        eps=opt["eps"], step=opt["step"])
    mem.trace = [(mem.step, mem.tt, sse_tt(mem), mem.count)]
    return mem
