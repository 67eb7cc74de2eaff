"""Class-invariant shape descriptor of an ensemble's softmax activations.

A sample's raw activations form an (M, C) matrix: one row per ensemble member,
one column per class, every row on the probability simplex. The descriptor
re-indexes that matrix so agreement *shape* survives while class identity is
factored out:

1. the leading member is the one holding the single largest activation in the
   whole matrix;
2. classes are re-ordered by the leading member's activations, descending, and
   that one permutation is applied to every row, so which-class-matches-which
   stays aligned across members;
3. rows are then ordered by their per-row maximum, descending (the leading
   member lands first);
4. the rows are flattened in that order into one length M*C vector.

Ties break by original index (class ties ascending class index, member ties
ascending member index), so equal inputs always map to equal descriptors.
Relabeling the classes of a tie-free matrix leaves the descriptor unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

__all__ = ["UncertaintyDescriptor", "build_usd", "usd_batch", "validate_softmax_matrix"]

SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class UncertaintyDescriptor:
    """Flattened descriptor plus the permutations that produced it."""

    values: np.ndarray      # length M*C
    model_order: np.ndarray  # permutation of member indices, applied order
    class_perm: np.ndarray   # permutation of class indices, applied to every row

    @property
    def n(self) -> int:
        return int(self.values.size)


def validate_softmax_matrix(activations, *, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Check an (M, C) activation matrix: finite, entries in [0, 1], rows on
    the simplex within ``tol``. Returns the validated float64 array."""
    p = np.asarray(activations, dtype=float)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise DataFormatError(f"softmax matrix must be 2-D and non-empty, got shape {p.shape}")
    if np.isnan(p).any():
        raise DataFormatError("NaN in softmax matrix")
    if not np.isfinite(p).all():
        raise DataFormatError("non-finite value in softmax matrix")
    out_of_range = (p < -1e-12) | (p > 1.0 + 1e-12)
    if out_of_range.any():
        row = int(np.flatnonzero(out_of_range.any(axis=1))[0])
        raise DataFormatError(f"row {row}: activation outside [0, 1]")
    sums = p.sum(axis=1)
    off = np.abs(sums - 1.0) > tol
    if off.any():
        row = int(np.flatnonzero(off)[0])
        raise DataFormatError(f"row {row}: activations sum to {sums[row]!r}, not a softmax row")
    return p


def build_usd(activations) -> UncertaintyDescriptor:
    """Build the descriptor for one (M, C) softmax matrix."""
    p = validate_softmax_matrix(activations)
    row_max = p.max(axis=1)
    lead = int(np.argmax(row_max))  # ties -> lowest member index
    class_perm = np.argsort(-p[lead], kind="stable")  # ties -> ascending class index
    aligned = p[:, class_perm]
    model_order = np.argsort(-row_max, kind="stable")  # leading member first
    values = aligned[model_order].reshape(-1)
    return UncertaintyDescriptor(values=values, model_order=model_order, class_perm=class_perm)


def usd_batch(samples, *, models: int | None = None, classes: int | None = None) -> np.ndarray:
    """Descriptor matrix for a batch of softmax matrices, one row per sample.

    All samples must share the same (M, C); pass ``models``/``classes`` to get
    a well-shaped 0-row result for an empty batch. Bit-identical to calling
    :func:`build_usd` per sample.
    """
    mats = [np.asarray(s, dtype=float) for s in samples]
    if not mats:
        if models is None or classes is None:
            raise DataFormatError("empty batch: models and classes must be given explicitly")
        return np.zeros((0, models * classes))
    shape = mats[0].shape
    for i, m in enumerate(mats):
        if m.shape != shape:
            raise DataFormatError(f"sample {i} has shape {m.shape}, expected {shape}")
    if models is not None and shape[0] != models:
        raise DataFormatError(f"samples have {shape[0]} members, expected {models}")
    if classes is not None and shape[1] != classes:
        raise DataFormatError(f"samples have {shape[1]} classes, expected {classes}")

    p = np.stack(mats)
    n_samples, n_models, n_classes = p.shape
    for i in range(n_samples):
        try:
            validate_softmax_matrix(p[i])
        except DataFormatError as exc:
            raise DataFormatError(f"sample {i}: {exc}") from None

    row_max = p.max(axis=2)                                      # (N, M)
    lead = np.argmax(row_max, axis=1)                            # (N,)
    lead_rows = p[np.arange(n_samples), lead]                    # (N, C)
    class_perm = np.argsort(-lead_rows, axis=1, kind="stable")   # (N, C)
    aligned = np.take_along_axis(p, class_perm[:, None, :], axis=2)
    model_order = np.argsort(-row_max, axis=1, kind="stable")    # (N, M)
    ordered = np.take_along_axis(aligned, model_order[:, :, None], axis=1)
    return ordered.reshape(n_samples, n_models * n_classes)
