"""Sources of ensemble softmax outputs.

Three producers share the (M, C) activation contract:

* a synthetic activation generator that draws, per sample, how many members
  are correct and shapes each member row with a Dirichlet (peaked toward the
  true class for correct members, flatter with the peak forced elsewhere for
  incorrect ones), so the correct count holds by construction;
* CSV ingestion of activation dumps (``sample_id,group_id,true_class,
  model_id,p_0..p_{C-1}``, M consecutive rows per sample, JSON sidecar with
  M, C and class names);
* a small retrainable ensemble of single-hidden-layer softmax classifiers
  over feature vectors, carrying the minibatch-sized reference set that the
  oracle-driven active-learning loop replaces into and retrains on.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, NumericError
from .numerics import AdamState, adam_step, dirichlet, seeded_rng
from .serialize import floats_to_hex, hex_to_floats

__all__ = [
    "LabeledSample", "SynthConfig", "correct_count", "synth_generate",
    "save_samples", "load_samples", "save_features", "load_features",
    "ToyEnsemble", "toy_train", "toy_predict", "toy_predict_batch", "oracle_update",
    "save_ensemble", "load_ensemble", "stream_samples", "descriptor_dataset",
    "feature_blobs", "drift_vector", "worker_threads",
]

ENSEMBLE_FORMAT = "trustsup-ensemble-v1"

# Default correct-count profile for 8 outcomes (M=7): bimodal, mirroring how
# ensembles behave in the field: mostly either confidently right or badly
# wrong, with a thin middle. Other M values fall back to uniform.
DEFAULT_CORRECT_WEIGHTS = (0.18, 0.16, 0.04, 0.02, 0.05, 0.15, 0.20, 0.20)


@dataclass
class LabeledSample:
    """One sample's ensemble response: (M, C) softmax rows plus its label."""

    sample_id: str
    activations: np.ndarray
    true_class: int | None
    group_id: str = ""


@dataclass
class GroupProfile:
    """Per-group overrides modeling sessions of distinct character: their own
    correct-count weights, member sharpness, or confusion level."""

    weights: tuple | None = None
    alpha_correct: float | None = None
    alpha_incorrect: float | None = None
    confusion: float | None = None


@dataclass
class SynthConfig:
    """Synthetic activation generator settings.

    ``correct_weights`` is the distribution of the per-sample correct count
    over 0..models (default: the bimodal profile above for M=7, else uniform).
    ``alpha_correct`` is the Dirichlet concentration placed on the true class
    for correct members (the rest stay at 1); ``alpha_incorrect`` the
    symmetric concentration for incorrect members. ``confusion`` is the
    probability that an incorrect member locks onto the sample's shared
    confusion class with correct-member sharpness: confidently wrong, the
    correlated failure mode that fools both votes and the supervisor.
    Contiguous groups can override any of these per session via
    :class:`GroupProfile` (a bare weight list is accepted as shorthand).
    """

    classes: int = 21
    models: int = 7
    samples: int = 10000
    correct_weights: tuple | None = None
    alpha_correct: float = 12.0
    alpha_incorrect: float = 1.0
    confusion: float = 0.0
    groups: int = 0
    group_profiles: tuple | None = None
    seed: int | list = 0

    def __post_init__(self):
        if self.classes < 1 or self.models < 1 or self.samples < 0:
            raise ConfigError("classes and models must be >= 1, samples >= 0")
        if self.alpha_correct <= 0 or self.alpha_incorrect <= 0:
            raise ConfigError("Dirichlet concentrations must be > 0")
        if not 0.0 <= self.confusion <= 1.0:
            raise ConfigError("confusion probability must be in [0, 1]")
        if self.correct_weights is not None:
            self.correct_weights = _check_weights(self.correct_weights, self.models, "correct_weights")
        if self.group_profiles is not None:
            self.group_profiles = tuple(
                _as_profile(p, self.models, f"group_profiles[{i}]")
                for i, p in enumerate(self.group_profiles))
        if self.groups < 0:
            raise ConfigError("groups must be >= 0")


def _as_profile(profile, models: int, where: str) -> GroupProfile:
    if isinstance(profile, GroupProfile):
        p = profile
    elif isinstance(profile, dict):
        unknown = set(profile) - {"weights", "alpha_correct", "alpha_incorrect", "confusion"}
        if unknown:
            raise ConfigError(f"{where}: unknown profile key {sorted(unknown)[0]!r}")
        p = GroupProfile(**profile)
    else:
        p = GroupProfile(weights=profile)
    if p.weights is not None:
        p = GroupProfile(_check_weights(p.weights, models, where), p.alpha_correct,
                         p.alpha_incorrect, p.confusion)
    for alpha in (p.alpha_correct, p.alpha_incorrect):
        if alpha is not None and alpha <= 0:
            raise ConfigError(f"{where}: Dirichlet concentrations must be > 0")
    if p.confusion is not None and not 0.0 <= p.confusion <= 1.0:
        raise ConfigError(f"{where}: confusion probability must be in [0, 1]")
    return p


def _check_weights(weights, models: int, where: str) -> tuple:
    w = np.asarray(weights, dtype=float)
    if w.size != models + 1:
        raise ConfigError(f"{where} needs {models + 1} weights (counts 0..{models})")
    if (w < 0).any():
        raise ConfigError(f"{where} has negative weight")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{where} must sum to 1, got {w.sum()!r}")
    return tuple(float(v) for v in w)


def correct_count(sample: LabeledSample) -> int:
    """Number of members whose argmax (ties -> lowest class) hits the label."""
    if sample.true_class is None:
        raise DataFormatError(f"sample {sample.sample_id} has no label")
    votes = np.argmax(sample.activations, axis=1)
    return int(np.count_nonzero(votes == sample.true_class))


def synth_generate(cfg: SynthConfig) -> list[LabeledSample]:
    """Generate labeled samples whose correct count equals the drawn target.

    Correct members draw a Dirichlet peaked on the true class (the maximum is
    swapped onto it if needed). Incorrect members either lock onto the
    sample's shared confusion class with correct-member sharpness (with the
    effective ``confusion`` probability) or draw a flatter symmetric Dirichlet
    with the maximum swapped away from the true class.
    """
    m, c = cfg.models, cfg.classes
    if cfg.correct_weights is not None:
        base_weights = np.asarray(cfg.correct_weights)
    elif m + 1 == len(DEFAULT_CORRECT_WEIGHTS):
        base_weights = np.asarray(DEFAULT_CORRECT_WEIGHTS)
    else:
        base_weights = np.full(m + 1, 1.0 / (m + 1))
    profiles = list(cfg.group_profiles) if (cfg.groups > 0 and cfg.group_profiles) else None
    if c < 2 and _can_draw_below(base_weights, profiles, m):
        raise ConfigError("a single-class problem cannot have incorrect members")

    rng = seeded_rng(cfg.seed)
    samples: list[LabeledSample] = []
    for i in range(cfg.samples):
        weights, a_corr, a_inc, confusion = base_weights, cfg.alpha_correct, cfg.alpha_incorrect, cfg.confusion
        group_id = ""
        if cfg.groups > 0:
            group = i * cfg.groups // cfg.samples
            group_id = f"g{group:03d}"
            if profiles:
                p = profiles[group % len(profiles)]
                weights = np.asarray(p.weights) if p.weights is not None else base_weights
                a_corr = p.alpha_correct if p.alpha_correct is not None else cfg.alpha_correct
                a_inc = p.alpha_incorrect if p.alpha_incorrect is not None else cfg.alpha_incorrect
                confusion = p.confusion if p.confusion is not None else cfg.confusion
        true = int(rng.integers(0, c))
        k = int(rng.choice(m + 1, p=weights))
        confusion_class = None
        if k < m and c >= 2:
            confusion_class = int(rng.integers(0, c - 1))
            confusion_class += confusion_class >= true
        rows = np.empty((m, c))
        for j in range(m):
            if j < k:
                alpha = np.full(c, 1.0)
                alpha[true] = a_corr
                row = dirichlet(rng, alpha)
                peak = int(np.argmax(row))
                if peak != true:
                    row[true], row[peak] = row[peak], row[true]
            elif confusion > 0.0 and rng.uniform() < confusion:
                alpha = np.full(c, 1.0)
                alpha[confusion_class] = a_corr
                row = dirichlet(rng, alpha)
                peak = int(np.argmax(row))
                if peak != confusion_class:
                    row[confusion_class], row[peak] = row[peak], row[confusion_class]
            else:
                row = dirichlet(rng, np.full(c, a_inc))
                peak = int(np.argmax(row))
                if peak == true:
                    other = int(rng.integers(0, c - 1))
                    other += other >= true
                    row[true], row[other] = row[other], row[true]
            rows[j] = row
        samples.append(LabeledSample(f"s{i:06d}", rows, true, group_id))
    return samples


def _can_draw_below(weights, profiles, models: int) -> bool:
    pools = [np.asarray(weights)]
    for p in profiles or []:
        if p.weights is not None:
            pools.append(np.asarray(p.weights))
    return any(w[:models].sum() > 0 for w in pools)


def descriptor_dataset(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """(descriptor matrix, correct-count labels) for a homogeneous sample list."""
    from .descriptor import usd_batch

    x = usd_batch([s.activations for s in samples])
    e = np.array([correct_count(s) for s in samples], dtype=float)
    return x, e


# ---------------------------------------------------------------------------
# dataset files

def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_samples(path, samples: list[LabeledSample], class_names: list[str] | None = None,
                 models: int | None = None, classes: int | None = None) -> None:
    """Activation dump CSV + JSON sidecar; pass models/classes for empty sets."""
    path = Path(path)
    if samples:
        m, c = samples[0].activations.shape
    else:
        if models is None or classes is None:
            raise DataFormatError("empty dataset: models and classes must be given")
        m, c = models, classes
    names = class_names or [f"c{j}" for j in range(c)]
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "group_id", "true_class", "model_id"]
                        + [f"p_{j}" for j in range(c)])
        for s in samples:
            if s.activations.shape != (m, c):
                raise DataFormatError(f"sample {s.sample_id} has shape {s.activations.shape}, expected {(m, c)}")
            label = "" if s.true_class is None else s.true_class
            for model_id in range(m):
                writer.writerow([s.sample_id, s.group_id, label, model_id]
                                + [repr(float(v)) for v in s.activations[model_id]])
    with open(_sidecar_path(path), "w", newline="\n") as fh:
        json.dump({"M": m, "C": c, "class_names": names}, fh, indent=2)
        fh.write("\n")


def load_samples(path) -> tuple[list[LabeledSample], dict]:
    """Read an activation dump; returns (samples, sidecar metadata).

    Errors carry the offending CSV line number (header is line 1).
    """
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.exists():
        raise DataFormatError(f"dataset not found: {path}")
    if not sidecar.exists():
        raise DataFormatError(f"sidecar not found: {sidecar}")
    with open(sidecar) as fh:
        meta = json.load(fh)
    m, c = int(meta["M"]), int(meta["C"])
    expected_cols = 4 + c

    samples: list[LabeledSample] = []
    pending: list[tuple[int, list[str]]] = []

    def flush(rows: list[tuple[int, list[str]]]):
        first_line, first = rows[0]
        sid, gid, label_text = first[0], first[1], first[2]
        if len(rows) != m:
            raise DataFormatError(f"line {first_line}: sample {sid} has {len(rows)} rows, expected {m}")
        acts = np.empty((m, c))
        for line_no, row in rows:
            if row[0] != sid or row[1] != gid or row[2] != label_text:
                raise DataFormatError(f"line {line_no}: inconsistent sample header fields for {sid}")
            model_id = int(row[3])
            expected_model = line_no - first_line
            if model_id != expected_model:
                raise DataFormatError(f"line {line_no}: model_id {model_id}, expected {expected_model}")
            try:
                values = np.array([float(v) for v in row[4:]], dtype=float)
            except ValueError:
                raise DataFormatError(f"line {line_no}: unparseable activation value") from None
            if np.isnan(values).any() or not np.isfinite(values).all():
                raise DataFormatError(f"line {line_no}: non-finite activation")
            if (values < -1e-12).any() or (values > 1 + 1e-12).any():
                raise DataFormatError(f"line {line_no}: activation outside [0, 1]")
            if abs(values.sum() - 1.0) > 1e-6:
                raise DataFormatError(
                    f"line {line_no}: activations sum to {values.sum()!r}, not a softmax row")
            acts[model_id] = values
        if label_text == "":
            true_class = None
        else:
            true_class = int(label_text)
            if not 0 <= true_class < c:
                raise DataFormatError(f"line {first_line}: true_class {true_class} outside [0, {c})")
        samples.append(LabeledSample(sid, acts, true_class, gid))

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != expected_cols or header[0] != "sample_id":
            raise DataFormatError(f"line 1: bad header for a {c}-class activation dump")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != expected_cols:
                raise DataFormatError(f"line {line_no}: {len(row)} columns, expected {expected_cols}")
            if pending and row[0] != pending[0][1][0]:
                flush(pending)
                pending = []
            pending.append((line_no, row))
        if pending:
            flush(pending)
    return samples, meta


def save_features(path, x: np.ndarray, labels, group_ids=None, classes: int | None = None,
                  class_names: list[str] | None = None) -> None:
    """Feature-vector CSV (``sample_id,group_id,true_class,x_0..``) + sidecar."""
    path = Path(path)
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    d = x.shape[1] if x.ndim == 2 else 0
    c = classes if classes is not None else (int(labels.max()) + 1 if labels.size else 0)
    names = class_names or [f"c{j}" for j in range(c)]
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "group_id", "true_class"] + [f"x_{j}" for j in range(d)])
        for i in range(x.shape[0]):
            gid = "" if group_ids is None else group_ids[i]
            writer.writerow([f"s{i:06d}", gid, int(labels[i])] + [repr(float(v)) for v in x[i]])
    with open(_sidecar_path(path), "w", newline="\n") as fh:
        json.dump({"d": d, "C": c, "class_names": names}, fh, indent=2)
        fh.write("\n")


def load_features(path) -> tuple[np.ndarray, np.ndarray, list[str], dict]:
    """Read a feature CSV; returns (features, labels, group_ids, metadata)."""
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.exists():
        raise DataFormatError(f"feature dataset not found: {path}")
    if not sidecar.exists():
        raise DataFormatError(f"sidecar not found: {sidecar}")
    with open(sidecar) as fh:
        meta = json.load(fh)
    d = int(meta["d"])
    rows, labels, groups = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 3 + d:
            raise DataFormatError(f"line 1: bad header for a {d}-dimensional feature file")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3 + d:
                raise DataFormatError(f"line {line_no}: {len(row)} columns, expected {3 + d}")
            try:
                rows.append([float(v) for v in row[3:]])
                labels.append(int(row[2]))
            except ValueError:
                raise DataFormatError(f"line {line_no}: unparseable value") from None
            groups.append(row[1])
    x = np.asarray(rows, dtype=float) if rows else np.zeros((0, d))
    return x, np.asarray(labels, dtype=int), groups, meta


# ---------------------------------------------------------------------------
# toy retrainable ensemble

def worker_threads() -> int:
    """Worker cap for member training, from TRUSTSUP_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("TRUSTSUP_THREADS", "1")))
    except ValueError:
        return 1


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class _Member:
    """Single-hidden-layer softmax classifier on flat parameters."""

    def __init__(self, dim: int, classes: int, hidden: int, seed: int, params=None, adam=None):
        self.dim, self.classes, self.hidden, self.seed = dim, classes, hidden, seed
        size = hidden * dim + hidden + classes * hidden + classes
        if params is None:
            rng = seeded_rng([seed, 11])
            l1 = np.sqrt(6.0 / dim)
            l2 = np.sqrt(6.0 / hidden)
            params = np.concatenate([
                rng.uniform(-l1, l1, hidden * dim), np.zeros(hidden),
                rng.uniform(-l2, l2, classes * hidden), np.zeros(classes),
            ])
        if params.size != size:
            raise NumericError(f"member parameter vector has {params.size} entries, expected {size}")
        self.params = params
        self.adam = adam if adam is not None else AdamState.for_size(size, lr=0.01)
        o = 0
        self.w1 = params[o:o + hidden * dim].reshape(hidden, dim); o += hidden * dim
        self.b1 = params[o:o + hidden]; o += hidden
        self.w2 = params[o:o + classes * hidden].reshape(classes, hidden); o += classes * hidden
        self.b2 = params[o:o + classes]
        self._shuffle = seeded_rng([seed, 13])

    def probs(self, x: np.ndarray) -> np.ndarray:
        a1 = np.maximum(x @ self.w1.T + self.b1, 0.0)
        return _softmax_rows(a1 @ self.w2.T + self.b2)

    def _gradient(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        z1 = x @ self.w1.T + self.b1
        a1 = np.maximum(z1, 0.0)
        p = _softmax_rows(a1 @ self.w2.T + self.b2)
        dz2 = p
        dz2[np.arange(x.shape[0]), y] -= 1.0
        dz2 /= x.shape[0]
        grads = np.empty_like(self.params)
        o = 0
        g_w1 = grads[o:o + self.hidden * self.dim].reshape(self.hidden, self.dim); o += self.hidden * self.dim
        g_b1 = grads[o:o + self.hidden]; o += self.hidden
        g_w2 = grads[o:o + self.classes * self.hidden].reshape(self.classes, self.hidden); o += self.classes * self.hidden
        g_b2 = grads[o:o + self.classes]
        g_w2[:] = dz2.T @ a1
        g_b2[:] = dz2.sum(axis=0)
        da1 = dz2 @ self.w2
        da1 *= z1 > 0
        g_w1[:] = da1.T @ x
        g_b1[:] = da1.sum(axis=0)
        return grads

    def train(self, x: np.ndarray, y: np.ndarray, epochs: int, batch: int, lr: float) -> None:
        self.adam.lr = lr
        for _ in range(epochs):
            perm = self._shuffle.permutation(x.shape[0])
            for start in range(0, x.shape[0], batch):
                idx = perm[start:start + batch]
                adam_step(self.params, self._gradient(x[idx], y[idx]), self.adam)

    def copy(self) -> "_Member":
        dup = _Member(self.dim, self.classes, self.hidden, self.seed,
                      params=self.params.copy(), adam=self.adam.copy())
        dup._shuffle = seeded_rng([self.seed, 13])
        dup._shuffle.bit_generator.state = self._shuffle.bit_generator.state
        return dup


class ToyEnsemble:
    """M independent members plus the reference set the oracle loop rewrites."""

    def __init__(self, members: list[_Member], dim: int, classes: int, n_mb: int, seed: int):
        self.members = members
        self.dim, self.classes, self.n_mb, self.seed = dim, classes, n_mb, seed
        self.dr_x: np.ndarray | None = None
        self.dr_y: np.ndarray | None = None
        self.al_rng = seeded_rng([seed, 23])

    @property
    def models(self) -> int:
        return len(self.members)

    @classmethod
    def create(cls, models: int, dim: int, classes: int, hidden: int = 24,
               n_mb: int = 64, seed: int = 0) -> "ToyEnsemble":
        if models < 1:
            raise ConfigError("ensemble needs at least one member")
        members = [_Member(dim, classes, hidden, seed * 1009 + i) for i in range(models)]
        return cls(members, dim, classes, n_mb, seed)

    def copy(self) -> "ToyEnsemble":
        dup = ToyEnsemble([m.copy() for m in self.members], self.dim, self.classes,
                          self.n_mb, self.seed)
        dup.dr_x = None if self.dr_x is None else self.dr_x.copy()
        dup.dr_y = None if self.dr_y is None else self.dr_y.copy()
        dup.al_rng = seeded_rng([self.seed, 23])
        dup.al_rng.bit_generator.state = self.al_rng.bit_generator.state
        return dup


def toy_train(ens: ToyEnsemble, x, labels, epochs: int, lr: float = 0.01,
              batch: int = 32) -> ToyEnsemble:
    """Train every member independently and draw the reference set.

    The reference set is an ``n_mb``-sized subset of the training data sampled
    without replacement (seeded). Members may train in parallel up to
    TRUSTSUP_THREADS workers; results do not depend on the worker count.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.shape[0] < ens.n_mb:
        raise DataFormatError(f"{x.shape[0]} training samples but the reference set needs {ens.n_mb}")
    dr_idx = seeded_rng([ens.seed, 31]).choice(x.shape[0], size=ens.n_mb, replace=False)
    ens.dr_x = x[dr_idx].copy()
    ens.dr_y = y[dr_idx].copy()
    if epochs > 0:
        _train_members(ens.members, x, y, epochs, batch, lr)
    return ens


def _train_members(members, x, y, epochs, batch, lr):
    threads = worker_threads()
    if threads == 1 or len(members) == 1:
        for member in members:
            member.train(x, y, epochs, batch, lr)
        return
    with ThreadPoolExecutor(max_workers=min(threads, len(members))) as pool:
        list(pool.map(lambda m: m.train(x, y, epochs, batch, lr), members))


def toy_predict(ens: ToyEnsemble, features) -> np.ndarray:
    """(M, C) softmax matrix for one feature vector."""
    f = np.asarray(features, dtype=float).ravel()
    if f.size != ens.dim:
        raise DataFormatError(f"feature length {f.size} does not match ensemble dimension {ens.dim}")
    return np.vstack([m.probs(f[None, :])[0] for m in ens.members])


def toy_predict_batch(ens: ToyEnsemble, x) -> np.ndarray:
    """(N, M, C) softmax tensor for a feature matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != ens.dim:
        raise DataFormatError(f"feature matrix shape {x.shape} does not match dimension {ens.dim}")
    return np.stack([m.probs(x) for m in ens.members], axis=1)


def oracle_update(ens: ToyEnsemble, features, true_label: int, epochs: int = 5) -> ToyEnsemble:
    """Swap one uniformly-random reference element for the newly labeled sample,
    then retrain every member on the reference set for a few epochs."""
    if ens.dr_x is None or ens.dr_y is None:
        raise DataFormatError("ensemble has no reference set; train it first")
    f = np.asarray(features, dtype=float).ravel()
    slot = int(ens.al_rng.integers(0, ens.dr_x.shape[0]))
    ens.dr_x[slot] = f
    ens.dr_y[slot] = int(true_label)
    if epochs > 0:
        _train_members(ens.members, ens.dr_x, ens.dr_y, epochs,
                       batch=min(32, ens.dr_x.shape[0]), lr=0.01)
    return ens


def stream_samples(ens: ToyEnsemble, x, labels, group_ids=None,
                   prefix: str = "s") -> list[LabeledSample]:
    """Materialize the static ensemble's responses as labeled samples."""
    probs = toy_predict_batch(ens, x)
    labels = np.asarray(labels, dtype=int)
    out = []
    for i in range(probs.shape[0]):
        gid = "" if group_ids is None else group_ids[i]
        out.append(LabeledSample(f"{prefix}{i:06d}", probs[i], int(labels[i]), gid))
    return out


def save_ensemble(path, ens: ToyEnsemble) -> None:
    """JSON checkpoint (hex floats): members, optimizer state, reference set."""
    doc = {
        "format": ENSEMBLE_FORMAT,
        "d": ens.dim, "C": ens.classes, "M": ens.models,
        "hidden": ens.members[0].hidden, "n_mb": ens.n_mb, "seed": ens.seed,
        "members": [
            {
                "seed": m.seed,
                "params_hex": floats_to_hex(m.params),
                "adam": {"lr": m.adam.lr, "step": m.adam.step,
                         "m_hex": floats_to_hex(m.adam.m), "v_hex": floats_to_hex(m.adam.v)},
            }
            for m in ens.members
        ],
        "dr_x_hex": None if ens.dr_x is None else [floats_to_hex(r) for r in ens.dr_x],
        "dr_y": None if ens.dr_y is None else [int(v) for v in ens.dr_y],
    }
    with open(Path(path), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_ensemble(path) -> ToyEnsemble:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"ensemble checkpoint not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != ENSEMBLE_FORMAT:
        raise DataFormatError(f"{path}: not an ensemble checkpoint")
    members = []
    for entry in doc["members"]:
        adam = AdamState(m=hex_to_floats(entry["adam"]["m_hex"]),
                         v=hex_to_floats(entry["adam"]["v_hex"]),
                         lr=entry["adam"]["lr"], step=entry["adam"]["step"])
        members.append(_Member(doc["d"], doc["C"], doc["hidden"], entry["seed"],
                               params=hex_to_floats(entry["params_hex"]), adam=adam))
    ens = ToyEnsemble(members, doc["d"], doc["C"], doc["n_mb"], doc["seed"])
    if doc["dr_x_hex"] is not None:
        ens.dr_x = np.stack([hex_to_floats(r) for r in doc["dr_x_hex"]])
        ens.dr_y = np.asarray(doc["dr_y"], dtype=int)
    return ens


# ---------------------------------------------------------------------------
# synthetic feature worlds for the desk-scale active-learning loop

def feature_blobs(n: int, dim: int, classes: int, sep: float, noise: float,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian class blobs: centers ~ N(0, sep^2), samples = center + noise."""
    centers = rng.normal(0.0, sep, size=(classes, dim))
    y = rng.integers(0, classes, size=n)
    x = centers[y] + rng.normal(0.0, noise, size=(n, dim))
    return x, y


def drift_vector(dim: int, magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """Random direction scaled to ``magnitude``; added to post-drift features."""
    v = rng.normal(0.0, 1.0, size=dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v = np.zeros(dim)
        v[0] = 1.0
        norm = 1.0
    return v * (magnitude / norm)
