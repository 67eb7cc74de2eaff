"""Command-line front end: gen, train, eval, bench.

Experiments are driven by one JSON config (see :mod:`trustsup.config`) and a
seed; every command is deterministic given both, manifests echo the resolved
config, and all CSV/JSON outputs are byte-stable across reruns. Two experiment
worlds exist:

* activation world (``loop.mode`` is maximal/predicted/online): ``gen`` writes
  synthetic activation dumps, ``train`` fits the supervisor and threshold on
  them, ``eval`` replays a test stream in the chosen mode;
* feature world (``loop.mode`` is active, and always for ``bench``): ``gen``
  writes feature datasets, ``train`` additionally fits the retrainable toy
  ensemble and derives the supervisor's training activations from it, ``eval``
  can then run every mode including the budgeted oracle loop.

Figures (descriptor shapes, threshold traces, metrics bars) are rendered next
to the delimited outputs. Exit codes: 0 success, 2 config error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .decision import write_metrics_csv, metrics_rows
from .descriptor import build_usd
from .ensemble import (SynthConfig, ToyEnsemble, correct_count, descriptor_dataset,
                       drift_vector, load_ensemble, load_features, load_samples,
                       save_ensemble, save_features, save_samples, stream_samples,
                       synth_generate, toy_train)
from .errors import ConfigError, DataFormatError, NumericError, TrustsupError
from .loops import (LoopConfig, order_stream, run_active, run_maximal, run_online,
                    run_predicted, select_reference, write_loop_trace, write_records_csv)
from .numerics import seeded_rng
from . import report
from .supervisor import (SupervisorNet, TrainConfig, load_checkpoint, save_checkpoint,
                         train, write_loss_trace)
from .trustloss import TrustMemory, scan_optimal_tt, write_tt_trace

MODE_LABELS = {"maximal": "Maximal", "predicted": "Predicted", "online": "Online"}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except TrustsupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustsup",
        description="Trust supervision for classifier ensembles: data generation, "
                    "supervisor training, and the four evaluation modes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p_gen = sub.add_parser("gen", help="generate datasets")
    common(p_gen)
    p_gen.set_defaults(func=_cmd_gen)

    p_train = sub.add_parser("train", help="train the supervisor (and toy ensemble)")
    common(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate one mode")
    common(p_eval)
    p_eval.add_argument("--mode", default=None,
                        choices=["maximal", "predicted", "online", "active"])
    p_eval.add_argument("--budget", type=float, default=None,
                        help="oracle budget fraction for active mode")
    p_eval.set_defaults(func=_cmd_eval)

    p_bench = sub.add_parser("bench", help="full four-mode comparison on the feature world")
    common(p_bench)
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.paths.out = args.out
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _metrics_dict(result) -> dict:
    doc = dataclasses.asdict(result.metrics)
    doc["degenerate"] = list(doc["degenerate"])
    doc["oracle_calls"] = result.oracle_calls
    return doc


def _print_metrics(columns: dict) -> None:
    width = max(len(r[0]) for r in metrics_rows(columns))
    names = list(columns.keys())
    col = max(10, max(len(n) for n in names))
    print("  ".join(["Metric".ljust(width)] + [n.rjust(col) for n in names]))
    for row in metrics_rows(columns):
        print("  ".join([row[0].ljust(width)] + [f"{v:{col}.5f}" for v in row[1:]]))


def _e_histogram(samples, models: int) -> np.ndarray:
    return np.bincount([correct_count(s) for s in samples], minlength=models + 1)


def _print_histogram(name: str, hist: np.ndarray) -> None:
    body = " ".join(f"{k}:{int(v)}" for k, v in enumerate(hist))
    print(f"e-histogram {name}: {body}")


def _usd_shape_examples(samples, models: int):
    """First sample at each of e = 0, M//2, M (whichever exist)."""
    wanted = sorted({0, models // 2, models})
    found = {}
    for s in samples:
        e = correct_count(s)
        if e in wanted and e not in found:
            found[e] = build_usd(s.activations).values
        if len(found) == len(wanted):
            break
    return [(f"{e} correct members", found[e]) for e in wanted if e in found]


# ---------------------------------------------------------------------------
# gen

def _cmd_gen(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    data_dir = out / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    if cfg.loop.mode == "active":
        files = _gen_feature_files(cfg, data_dir)
    else:
        files = _gen_activation_files(cfg, data_dir)
    _write_json(out / "gen_manifest.json",
                {"command": "gen", "config": cfg.to_dict(), "files": files})
    return 0


def _gen_activation_files(cfg: ExperimentConfig, data_dir: Path) -> list[str]:
    s = cfg.synth
    common = dict(classes=s.classes, models=s.models,
                  correct_weights=None if s.correct_weights is None else tuple(s.correct_weights),
                  alpha_correct=s.alpha_correct, alpha_incorrect=s.alpha_incorrect,
                  confusion=s.confusion, groups=s.groups,
                  group_profiles=None if s.group_profiles is None else tuple(s.group_profiles))
    train_samples = synth_generate(SynthConfig(samples=s.train_samples, seed=[cfg.seed, 0], **common))
    test_samples = synth_generate(SynthConfig(samples=s.test_samples, seed=[cfg.seed, 1], **common))
    files = []
    for name, samples in (("train", train_samples), ("test", test_samples)):
        path = data_dir / f"{name}.csv"
        save_samples(path, samples, models=s.models, classes=s.classes)
        files += [str(path), str(path.with_suffix(".meta.json"))]
        print(f"{name}: {len(samples)} samples, M={s.models}, C={s.classes}")
        _print_histogram(name, _e_histogram(samples, s.models))
    examples = _usd_shape_examples(train_samples, s.models)
    if examples:
        report.plot_usd_examples(examples, data_dir / "usd_shapes.png")
        files.append(str(data_dir / "usd_shapes.png"))
    return files


def _feature_world(cfg: ExperimentConfig) -> dict:
    """Seeded feature datasets sharing one set of class centers.

    The supervisor split spans three difficulty tiers (noise x1, x2, x3) so
    the derived descriptors cover the whole correct-count range; the stream
    carries a feature shift from ``drift_at`` on, tagged by pre/post group
    ids.
    """
    f = cfg.features
    rng = seeded_rng([cfg.seed, 50])
    centers = rng.normal(0.0, f.class_sep, size=(f.classes, f.dim))

    def draw(n, noise_scale=1.0):
        y = rng.integers(0, f.classes, size=n)
        return centers[y] + rng.normal(0.0, f.noise * noise_scale, size=(n, f.dim)), y

    x_train, y_train = draw(f.train_samples)
    tiers = []
    n_sup = f.supervisor_samples
    sizes = [round(n_sup * 5 / 12), round(n_sup * 4 / 12)]
    sizes.append(n_sup - sum(sizes))
    for scale, n in zip((1.0, 2.0, 3.0), sizes):
        tiers.append(draw(n, scale))
    x_sup = np.vstack([t[0] for t in tiers])
    y_sup = np.concatenate([t[1] for t in tiers])
    x_stream, y_stream = draw(f.stream_samples)
    shift = drift_vector(f.dim, f.drift, rng)
    cut = int(round(f.drift_at * f.stream_samples))
    x_stream[cut:] += shift
    groups = ["pre"] * cut + ["post"] * (f.stream_samples - cut)
    return {"x_train": x_train, "y_train": y_train, "x_sup": x_sup, "y_sup": y_sup,
            "x_stream": x_stream, "y_stream": y_stream, "groups": groups}


def _gen_feature_files(cfg: ExperimentConfig, data_dir: Path) -> list[str]:
    f = cfg.features
    world = _feature_world(cfg)
    files = []
    for name, x, y, groups in (("feat_train", world["x_train"], world["y_train"], None),
                               ("feat_sup", world["x_sup"], world["y_sup"], None),
                               ("feat_stream", world["x_stream"], world["y_stream"], world["groups"])):
        path = data_dir / f"{name}.csv"
        save_features(path, x, y, group_ids=groups, classes=f.classes)
        files += [str(path), str(path.with_suffix(".meta.json"))]
        hist = np.bincount(y, minlength=f.classes)
        print(f"{name}: {len(y)} samples, d={f.dim}, C={f.classes}")
        print("class histogram " + name + ": "
              + " ".join(f"{k}:{int(v)}" for k, v in enumerate(hist)))
    report.plot_feature_scatter(world["x_stream"], world["y_stream"],
                                data_dir / "features_scatter.png", title="evaluation stream")
    files.append(str(data_dir / "features_scatter.png"))
    return files


# ---------------------------------------------------------------------------
# train

def _cmd_train(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    data_dir = Path(cfg.paths.data) if cfg.paths.data else out / "data"
    model_dir = out / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    if cfg.loop.mode == "active":
        _train_feature_world(cfg, data_dir, model_dir)
    else:
        _train_activation_world(cfg, data_dir, model_dir)
    return 0


def _train_supervisor(cfg: ExperimentConfig, model_dir: Path, x, e, models: int,
                      classes: int, meta_extra: dict) -> None:
    n = x.shape[1]
    net = SupervisorNet.create(n, seed=cfg.seed, lr=cfg.train.learning_rate)
    tt0 = cfg.tt_init() if meta_extra["world"] == "activations" else cfg.tt_init_features()
    memory = TrustMemory(capacity=cfg.trust.capacity, tt=tt0,
                         tt_lr=cfg.trust.tt_learning_rate)
    tcfg = TrainConfig(learning_rate=cfg.train.learning_rate,
                       minibatch_size=cfg.train.minibatch_size,
                       epochs=cfg.train.epochs, seed=cfg.seed)
    trace = train(net, x, e, tcfg, memory=memory)
    ref_size = min(cfg.train.minibatch_size, x.shape[0])
    reference = select_reference(x, e, ref_size, seed=cfg.seed)
    meta = {"M": models, "C": classes, "n": n, **meta_extra}
    save_checkpoint(model_dir / "checkpoint.json", net, memory, meta=meta, reference=reference)
    write_loss_trace(model_dir / "loss_trace.csv", trace)
    write_tt_trace(model_dir / "tt_trace.csv", memory.trace)
    if trace:
        report.plot_series([("training SSE", np.arange(len(trace)), np.asarray(trace))],
                           model_dir / "loss_trace.png", xlabel="epoch", ylabel="SSE")
    tt_steps = np.array([row[0] for row in memory.trace])
    tt_vals = np.array([row[1] for row in memory.trace])
    report.plot_series([("trust threshold", tt_steps, tt_vals)],
                       model_dir / "tt_trace.png", xlabel="update step", ylabel="TT")
    scan_tt, scan_loss = scan_optimal_tt(memory, 0.0, float(models))
    manifest = {
        "command": "train",
        "config": cfg.to_dict(),
        "samples": int(x.shape[0]),
        "memory_capacity": memory.capacity,
        "final_tt": memory.tt,
        "scan_optimal_tt": {"tt": scan_tt, "sse_tt": scan_loss},
        "final_epoch_sse": trace[-1] if trace else None,
    }
    _write_json(model_dir / "train_manifest.json", manifest)
    print(f"trained on {x.shape[0]} descriptors (n={n}); "
          f"final TT={memory.tt:.4f}, scan-optimal TT={scan_tt:.4f}")


def _train_activation_world(cfg: ExperimentConfig, data_dir: Path, model_dir: Path) -> None:
    samples, meta = load_samples(data_dir / "train.csv")
    if meta["M"] != cfg.synth.models or meta["C"] != cfg.synth.classes:
        raise DataFormatError(
            f"dataset is M={meta['M']}, C={meta['C']} but config says "
            f"M={cfg.synth.models}, C={cfg.synth.classes}")
    x, e = descriptor_dataset(samples)
    _train_supervisor(cfg, model_dir, x, e, meta["M"], meta["C"],
                      {"world": "activations", "class_names": meta.get("class_names")})


def _train_feature_world(cfg: ExperimentConfig, data_dir: Path, model_dir: Path) -> None:
    f = cfg.features
    x_train, y_train, _, meta = load_features(data_dir / "feat_train.csv")
    if meta["d"] != f.dim or meta["C"] != f.classes:
        raise DataFormatError(
            f"feature dataset is d={meta['d']}, C={meta['C']} but config says "
            f"d={f.dim}, C={f.classes}")
    ens = ToyEnsemble.create(f.models, f.dim, f.classes, hidden=f.hidden,
                             n_mb=cfg.train.minibatch_size, seed=cfg.seed)
    toy_train(ens, x_train, y_train, epochs=f.ensemble_epochs,
              lr=f.ensemble_lr, batch=f.ensemble_batch)
    save_ensemble(model_dir / "ensemble.json", ens)
    x_sup, y_sup, _, _ = load_features(data_dir / "feat_sup.csv")
    sup_samples = stream_samples(ens, x_sup, y_sup)
    save_samples(data_dir / "sup_activations.csv", sup_samples,
                 models=f.models, classes=f.classes)
    x, e = descriptor_dataset(sup_samples)
    _train_supervisor(cfg, model_dir, x, e, f.models, f.classes, {"world": "features"})


# ---------------------------------------------------------------------------
# eval

def _cmd_eval(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    mode = args.mode or cfg.loop.mode
    budget = cfg.loop.budget if args.budget is None else float(args.budget)
    if not 0.0 <= budget <= 1.0:
        raise ConfigError("oracle budget fraction must be in [0, 1]")
    model_path = Path(cfg.paths.model) if cfg.paths.model else out / "model" / "checkpoint.json"
    if not model_path.exists():
        raise DataFormatError(f"checkpoint not found: {model_path}")
    net, memory, meta, reference = load_checkpoint(model_path)
    if memory is None:
        raise DataFormatError("checkpoint has no trust memory; retrain with this release")
    data_dir = Path(cfg.paths.data) if cfg.paths.data else out / "data"
    world = meta.get("world", "activations")

    label = MODE_LABELS.get(mode, f"Active {100 * budget:g}%")
    eval_dir = out / "eval" / (mode if mode != "active" else f"active_b{budget:g}")
    eval_dir.mkdir(parents=True, exist_ok=True)
    loop_cfg = LoopConfig(mode=mode, budget=budget, online_epochs=cfg.loop.online_epochs,
                          al_epochs=cfg.loop.al_epochs, stream_order=cfg.loop.stream_order,
                          seed=cfg.seed)

    if mode == "active":
        if world != "features":
            raise DataFormatError(
                "active mode needs a toy-ensemble experiment (loop.mode = \"active\"); "
                "this checkpoint was trained on activation dumps without an ensemble")
        ens = _load_eval_ensemble(cfg, out)
        x, y, groups, _ = load_features(data_dir / "feat_stream.csv")
        result = run_active(ens, net, memory, x, y, loop_cfg, group_ids=groups)
    elif world == "features":
        ens = _load_eval_ensemble(cfg, out)
        x, y, groups, _ = load_features(data_dir / "feat_stream.csv")
        samples = order_stream(stream_samples(ens, x, y, groups),
                               cfg.loop.stream_order, cfg.seed)
        result = _run_activation_mode(mode, net, memory, reference, samples, loop_cfg)
    else:
        samples, _ = load_samples(data_dir / "test.csv")
        samples = order_stream(samples, cfg.loop.stream_order, cfg.seed)
        result = _run_activation_mode(mode, net, memory, reference, samples, loop_cfg)

    write_records_csv(eval_dir / "records.csv", result.records)
    write_loop_trace(eval_dir / "tt_trace.csv", result.tt_trace)
    write_metrics_csv(eval_dir / "metrics.csv", {label: result.metrics})
    _write_json(eval_dir / "eval_manifest.json", {
        "command": "eval", "mode": mode, "column": label,
        "config": cfg.to_dict(), "records": len(result.records),
        "metrics": _metrics_dict(result),
    })
    if len(result.tt_trace) > 1:
        steps = np.array([p[0] for p in result.tt_trace])
        tts = np.array([p[1] for p in result.tt_trace])
        report.plot_series([(label, steps, tts)], eval_dir / "tt_trace.png",
                           xlabel="stream position", ylabel="TT")
    report.plot_metrics({label: result.metrics}, eval_dir / "metrics.png")
    _print_metrics({label: result.metrics})
    if mode == "active":
        print(f"oracle calls: {result.oracle_calls} "
              f"(budget floor({budget} * {len(result.records)}) = "
              f"{math.floor(budget * len(result.records))})")
    return 0


def _load_eval_ensemble(cfg: ExperimentConfig, out: Path) -> ToyEnsemble:
    path = Path(cfg.paths.ensemble) if cfg.paths.ensemble else out / "model" / "ensemble.json"
    return load_ensemble(path)


def _run_activation_mode(mode, net, memory, reference, samples, loop_cfg):
    if mode == "maximal":
        return run_maximal(net, memory, samples)
    if mode == "predicted":
        return run_predicted(net, memory, samples)
    if mode == "online":
        if reference is None:
            raise DataFormatError("online mode needs the reference set stored in the checkpoint")
        return run_online(net, memory, reference, samples, loop_cfg)
    raise ConfigError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# bench

def _cmd_bench(args) -> int:
    """Feature-world pipeline: generate, train ensemble + supervisor, then run
    every mode over the same drift stream in its natural order."""
    cfg = _load(args)
    out = _out_dir(cfg)
    bench_dir = out / "bench"
    data_dir = bench_dir / "data"
    model_dir = bench_dir / "model"
    data_dir.mkdir(parents=True, exist_ok=True)
    model_dir.mkdir(parents=True, exist_ok=True)
    f = cfg.features

    world = _feature_world(cfg)
    for name, x, y, groups in (("feat_train", world["x_train"], world["y_train"], None),
                               ("feat_sup", world["x_sup"], world["y_sup"], None),
                               ("feat_stream", world["x_stream"], world["y_stream"], world["groups"])):
        save_features(data_dir / f"{name}.csv", x, y, group_ids=groups, classes=f.classes)

    ens = ToyEnsemble.create(f.models, f.dim, f.classes, hidden=f.hidden,
                             n_mb=cfg.train.minibatch_size, seed=cfg.seed)
    toy_train(ens, world["x_train"], world["y_train"], epochs=f.ensemble_epochs,
              lr=f.ensemble_lr, batch=f.ensemble_batch)
    save_ensemble(model_dir / "ensemble.json", ens)

    sup_samples = stream_samples(ens, world["x_sup"], world["y_sup"])
    save_samples(data_dir / "sup_activations.csv", sup_samples,
                 models=f.models, classes=f.classes)
    x_desc, e_desc = descriptor_dataset(sup_samples)
    _train_supervisor(cfg, model_dir, x_desc, e_desc, f.models, f.classes,
                      {"world": "features"})
    net, memory, _, reference = load_checkpoint(model_dir / "checkpoint.json")

    stream = stream_samples(ens, world["x_stream"], world["y_stream"], world["groups"])
    loop_cfg = LoopConfig(mode="online", online_epochs=cfg.loop.online_epochs,
                          al_epochs=cfg.loop.al_epochs, seed=cfg.seed)

    columns: dict = {}
    calls: dict = {}
    results = {
        "Maximal": run_maximal(net, memory, stream),
        "Predicted": run_predicted(net, memory, stream),
        "Online": run_online(net, memory, reference, stream, loop_cfg),
    }
    for beta in cfg.loop.budgets:
        al_cfg = LoopConfig(mode="active", budget=float(beta),
                            al_epochs=cfg.loop.al_epochs, seed=cfg.seed)
        results[f"Active {100 * float(beta):g}%"] = run_active(
            ens, net, memory, world["x_stream"], world["y_stream"], al_cfg,
            group_ids=world["groups"])

    for label, result in results.items():
        columns[label] = result.metrics
        calls[label] = result.oracle_calls
        slug = label.lower().replace(" ", "_").replace("%", "pct")
        write_records_csv(bench_dir / f"records_{slug}.csv", result.records)
        write_loop_trace(bench_dir / f"tt_trace_{slug}.csv", result.tt_trace)

    write_metrics_csv(bench_dir / "metrics.csv", columns)
    summary = {
        "command": "bench",
        "config": cfg.to_dict(),
        "stream_length": len(stream),
        "columns": {label: {**dataclasses.asdict(m),
                            "degenerate": list(m.degenerate),
                            "oracle_calls": calls[label]}
                    for label, m in columns.items()},
    }
    _write_json(bench_dir / "summary.json", summary)

    online_trace = results["Online"].tt_trace
    report.plot_series([("Online", np.array([p[0] for p in online_trace]),
                         np.array([p[1] for p in online_trace]))],
                       bench_dir / "tt_online.png",
                       xlabel="stream position", ylabel="TT")
    examples = _usd_shape_examples(sup_samples, f.models)
    if examples:
        report.plot_usd_examples(examples, bench_dir / "usd_shapes.png")
    report.plot_metrics(columns, bench_dir / "metrics.png")

    _print_metrics(columns)
    for label, n_calls in calls.items():
        if label.startswith("Active"):
            print(f"{label}: oracle calls = {n_calls}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
