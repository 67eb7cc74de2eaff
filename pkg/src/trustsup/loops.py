"""Evaluation loops: the four regimes reported by the benchmark table.

* maximal   - plurality vote; the supervisor only supplies the trust flag.
* predicted - vote chosen closest to the regressed correct-member count;
              threshold fixed.
* online    - after classifying each sample, the supervisor retrains on the
              reference set plus the fresh observation and the threshold takes
              one adam step per retrain pass; the trace records its drift.
* active    - ensemble-side loop: an untrusted verdict may spend one oracle
              call to label the sample, replace a random reference element,
              and quickly retrain the members. The budget floor(beta * N) is
              enforced strictly; the supervisor itself never changes.

Every loop is sequential over its stream (memory and retraining make order
meaningful) and deterministic given the seeded inputs. Online runs never touch
the ensemble; active runs never touch the supervisor; both work on internal
copies so callers can A/B the same artifacts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decision import (EvalRecord, TrustedMetrics, maximal_vote, predicted_vote,
                       trust_flag, trusted_metrics, vote_counts)
from .descriptor import build_usd
from .ensemble import LabeledSample, ToyEnsemble, correct_count, oracle_update, toy_predict
from .errors import ConfigError, DataFormatError
from .numerics import adam_step, seeded_rng
from .supervisor import SupervisorNet
from .trustloss import TrustMemory, push, update_tt

__all__ = [
    "LoopConfig", "LoopResult", "run_maximal", "run_predicted", "run_online",
    "run_active", "order_stream", "select_reference", "write_records_csv",
    "write_loop_trace",
]

MODES = ("maximal", "predicted", "online", "active")


@dataclass
class LoopConfig:
    mode: str = "predicted"
    budget: float = 0.01
    online_epochs: int = 10
    al_epochs: int = 5
    stream_order: str = "shuffled"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 <= self.budget <= 1.0:
            raise ConfigError("oracle budget fraction must be in [0, 1]")
        if self.online_epochs < 0 or self.al_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.stream_order not in ("shuffled", "grouped"):
            raise ConfigError(f"unknown stream order {self.stream_order!r}")


@dataclass
class LoopResult:
    records: list[EvalRecord]
    metrics: TrustedMetrics
    tt_trace: list[tuple[int, float]]
    oracle_calls: int = 0


def _require_labels(samples: list[LabeledSample]) -> None:
    for s in samples:
        if s.true_class is None:
            raise DataFormatError(f"sample {s.sample_id} is unlabeled; evaluation needs labels")


def _classify(net: SupervisorNet, tt: float, sample: LabeledSample, use_predicted_vote: bool):
    usd = build_usd(sample.activations)
    if usd.n != net.n:
        raise DataFormatError(
            f"descriptor length {usd.n} does not match supervisor input size {net.n}")
    y = net.forward(usd.values)
    counts = vote_counts(sample.activations)
    voted = predicted_vote(counts, y) if use_predicted_vote else maximal_vote(counts)
    return usd, y, trust_flag(y, tt), voted


def run_maximal(net: SupervisorNet, memory: TrustMemory,
                samples: list[LabeledSample]) -> LoopResult:
    """Plurality-vote baseline; trust flags still come from (y, TT) so the
    trusted metric suite stays defined for the column."""
    _require_labels(samples)
    records = []
    for s in samples:
        _, y, b, voted = _classify(net, memory.tt, s, use_predicted_vote=False)
        records.append(EvalRecord(s.sample_id, s.true_class, voted, y, b))
    return LoopResult(records, trusted_metrics(records), [(0, memory.tt)])


def run_predicted(net: SupervisorNet, memory: TrustMemory,
                  samples: list[LabeledSample]) -> LoopResult:
    """Static supervisor: regression-guided vote, fixed threshold."""
    _require_labels(samples)
    records = []
    for s in samples:
        _, y, b, voted = _classify(net, memory.tt, s, use_predicted_vote=True)
        records.append(EvalRecord(s.sample_id, s.true_class, voted, y, b))
    return LoopResult(records, trusted_metrics(records), [(0, memory.tt)])


def run_online(net: SupervisorNet, memory: TrustMemory, reference,
               samples: list[LabeledSample], cfg: LoopConfig) -> LoopResult:
    """Supervisor life-time learning, per sample: classify; push the
    classification's (prediction, true count) pair into the memory; retrain
    the supervisor on the reference set plus the fresh labeled descriptor for
    ``online_epochs`` passes; step the threshold once per retrain pass.

    Works on copies; the caller's net and memory are untouched.
    """
    _require_labels(samples)
    ref_x, ref_e = reference
    ref_x = np.asarray(ref_x, dtype=float)
    ref_e = np.asarray(ref_e, dtype=float).ravel()
    net = net.copy()
    memory = memory.copy()
    records = []
    trace = [(0, memory.tt)]
    for i, s in enumerate(samples):
        usd, y, b, voted = _classify(net, memory.tt, s, use_predicted_vote=True)
        records.append(EvalRecord(s.sample_id, s.true_class, voted, y, b))
        if cfg.online_epochs > 0:
            e_true = float(correct_count(s))
            push(memory, y, e_true)
            batch_x = np.vstack([ref_x, usd.values[None, :]])
            batch_e = np.append(ref_e, e_true)
            for _ in range(cfg.online_epochs):
                _, grads, _ = net.gradient(batch_x, batch_e)
                adam_step(net.params, grads, net.adam)
            update_tt(memory, cfg.online_epochs)
        trace.append((i + 1, memory.tt))
    return LoopResult(records, trusted_metrics(records), trace)


def run_active(ens: ToyEnsemble, net: SupervisorNet, memory: TrustMemory,
               features, labels, cfg: LoopConfig, group_ids=None,
               prefix: str = "s") -> LoopResult:
    """Budgeted oracle loop over a feature stream.

    Classification is recorded first; when the regressed count falls below the
    threshold and budget remains, the oracle's label replaces a random
    reference element and the members retrain for ``al_epochs``. The threshold
    never moves here and the supervisor is read-only.
    """
    x = np.asarray(features, dtype=float)
    y_true = np.asarray(labels, dtype=int)
    if x.shape[0] != y_true.size:
        raise DataFormatError(f"{x.shape[0]} feature rows but {y_true.size} labels")
    if ens.dr_x is None:
        raise DataFormatError("active loop needs an ensemble with a populated reference set")
    ens = ens.copy()
    budget = math.floor(cfg.budget * x.shape[0])
    calls = 0
    records = []
    for i in range(x.shape[0]):
        sid = f"{prefix}{i:06d}"
        acts = toy_predict(ens, x[i])
        usd = build_usd(acts)
        if usd.n != net.n:
            raise DataFormatError(
                f"descriptor length {usd.n} does not match supervisor input size {net.n}")
        y = net.forward(usd.values)
        b = trust_flag(y, memory.tt)
        voted = predicted_vote(vote_counts(acts), y)
        used = False
        if y < memory.tt and calls < budget:
            oracle_update(ens, x[i], int(y_true[i]), epochs=cfg.al_epochs)
            calls += 1
            used = True
        records.append(EvalRecord(sid, int(y_true[i]), voted, y, b, oracle_used=used))
    assert calls <= budget
    return LoopResult(records, trusted_metrics(records), [(0, memory.tt)], oracle_calls=calls)


def order_stream(samples: list[LabeledSample], order: str, seed: int = 0) -> list[LabeledSample]:
    """'shuffled': seeded permutation; 'grouped': stable sort by group id."""
    if order == "shuffled":
        perm = seeded_rng([seed, 41]).permutation(len(samples))
        return [samples[i] for i in perm]
    if order == "grouped":
        return sorted(samples, key=lambda s: s.group_id)
    raise ConfigError(f"unknown stream order {order!r}")


def select_reference(descriptors, labels, size: int, seed: int = 0):
    """Seeded without-replacement reference subset for online retraining."""
    x = np.asarray(descriptors, dtype=float)
    e = np.asarray(labels, dtype=float).ravel()
    if x.shape[0] < size:
        raise DataFormatError(f"{x.shape[0]} samples but the reference set needs {size}")
    idx = seeded_rng([seed, 43]).choice(x.shape[0], size=size, replace=False)
    return x[idx].copy(), e[idx].copy()


def write_records_csv(path, records: list[EvalRecord]) -> None:
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "true_class", "voted_class", "y", "b", "oracle_used"])
        for r in records:
            writer.writerow([r.sample_id, r.true_class, r.voted_class,
                             repr(float(r.y)), r.b, int(r.oracle_used)])


def write_loop_trace(path, trace) -> None:
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "tt"])
        for step, tt in trace:
            writer.writerow([step, repr(float(tt))])
