"""Batch pipeline front door.

Subcommands: ``exoticnet <stats|pretrain|train|predict|sweep|submit>
--config <path>`` with optional ``--seed`` and ``--out`` overrides.  The
config file is flat ``key=value`` lines; '#' starts a comment; unknown
keys are rejected before any work starts.

``train`` writes model/scaler/history files plus a ``manifest.json``
that records how to score new data (per-group models and scalers when
partition_mode=on).  ``predict``, ``sweep``, and ``submit`` take that
manifest via the ``model_file`` key; ``ensemble`` may list several
manifests whose scores get averaged.

All randomness flows from the single ``seed`` through named child
streams (init/<group>, pretrain/<group>, train/<group>), so each stage
is independently reproducible and two identical runs produce
byte-identical artifacts.

Exit codes: 0 success, 1 config/runtime failure (one-line reason on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .analysis import feature_stats, stats_table
from .core import Prng
from .dataset import (
    Dataset,
    FeatureScaler,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    partition_by_missingness,
    split_stratified,
)
from .errors import ConfigError, SchemaError
from .evaluation import (
    AmsConfig,
    ensemble_average,
    sweep_threshold,
    write_submission,
)
from .network import (
    Architecture,
    init_network,
    load_network,
    predict_scores,
    save_network,
)
from .training import (
    OptimizerConfig,
    PretrainConfig,
    apply_pretrained,
    pretrain_stack,
    train_loop,
)

MANIFEST_FORMAT = "exoticnet-pipeline v1"


@dataclass
class PipelineConfig:
    train_file: str = ""
    test_file: str = ""
    model_file: str = ""
    output_dir: str = "out"
    ensemble: list[str] = field(default_factory=list)
    seed: int = 1
    partition_mode: bool = False
    signal_percentile: float = 85.5
    hidden_widths: tuple[int, ...] = (300, 300, 300, 300)
    hidden_activation: str = "sigmoid"
    lr0: float = 0.05
    momentum0: float = 0.9
    momentum_final: float = 0.99
    momentum_ramp_epochs: int = 100
    anneal_rate: float = 0.0005
    anneal_mode: str = "harmonic"
    rms_beta: float = 0.9
    rms_epsilon: float = 1e-8
    batch_size: int = 50
    max_epochs: int = 500
    patience_epochs: int = 30
    min_rel_improvement: float = 0.001
    valid_fraction: float = 0.2
    weighted_loss: bool = False
    pretrain_epochs: int = 15
    pretrain_lr: float = 0.01
    pretrain_noise: float = 0.0
    pretrain_batch_size: int = 50
    b_reg: float = 10.0
    sweep_lo: float = 80.0
    sweep_hi: float = 92.0
    sweep_step: float = 0.1

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            lr0=self.lr0,
            momentum0=self.momentum0,
            momentum_final=self.momentum_final,
            momentum_ramp_epochs=self.momentum_ramp_epochs,
            anneal_rate=self.anneal_rate,
            anneal_mode=self.anneal_mode,
            rms_beta=self.rms_beta,
            rms_epsilon=self.rms_epsilon,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience_epochs=self.patience_epochs,
            min_rel_improvement=self.min_rel_improvement,
            valid_fraction=self.valid_fraction,
            weighted_loss=self.weighted_loss,
        )

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(
            epochs=self.pretrain_epochs,
            lr=self.pretrain_lr,
            noise=self.pretrain_noise,
            batch_size=self.pretrain_batch_size,
        )

    def ams_config(self) -> AmsConfig:
        return AmsConfig(b_reg=self.b_reg)

    def sweep_grid(self) -> np.ndarray:
        if self.sweep_hi < self.sweep_lo:
            raise ConfigError("sweep_hi must be >= sweep_lo")
        count = int(round((self.sweep_hi - self.sweep_lo) / self.sweep_step)) + 1
        return np.linspace(self.sweep_lo, self.sweep_hi, count)


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"key {key!r}: expected on/off, got {value!r}")


def _parse_widths(value: str, key: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated ints, got {value!r}")
    if not widths or any(w <= 0 for w in widths):
        raise ConfigError(f"key {key!r}: widths must be positive, got {value!r}")
    return widths


_STR_KEYS = {"train_file", "test_file", "model_file", "output_dir"}
_INT_KEYS = {
    "seed",
    "momentum_ramp_epochs",
    "batch_size",
    "max_epochs",
    "patience_epochs",
    "pretrain_epochs",
    "pretrain_batch_size",
}
_FLOAT_KEYS = {
    "signal_percentile",
    "lr0",
    "momentum0",
    "momentum_final",
    "anneal_rate",
    "rms_beta",
    "rms_epsilon",
    "min_rel_improvement",
    "valid_fraction",
    "pretrain_lr",
    "pretrain_noise",
    "b_reg",
    "sweep_lo",
    "sweep_hi",
    "sweep_step",
}
_BOOL_KEYS = {"partition_mode", "weighted_loss"}
_CHOICE_KEYS = {
    "hidden_activation": ("sigmoid", "tanh", "linear"),
    "anneal_mode": ("harmonic", "geometric"),
}


def parse_config(path: str) -> PipelineConfig:
    cfg = PipelineConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key == "ensemble":
            cfg.ensemble = [p.strip() for p in value.split(",") if p.strip()]
        elif key == "hidden_widths":
            cfg.hidden_widths = _parse_widths(value, key)
        elif key in _INT_KEYS:
            try:
                setattr(cfg, key, int(value))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: key {key!r} needs an int, got {value!r}")
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(value))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: key {key!r} needs a number, got {value!r}")
        elif key in _BOOL_KEYS:
            setattr(cfg, key, _parse_bool(value, key))
        elif key in _CHOICE_KEYS:
            if value not in _CHOICE_KEYS[key]:
                raise ConfigError(
                    f"{path}:{lineno}: key {key!r} must be one of {_CHOICE_KEYS[key]}"
                )
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")

    # validate the numeric blocks up front, before any data is touched
    try:
        cfg.optimizer_config()
        cfg.pretrain_config()
        cfg.ams_config()
        cfg.sweep_grid()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not 0.0 < cfg.signal_percentile < 100.0:
        raise ConfigError(
            f"signal_percentile must lie in (0, 100), got {cfg.signal_percentile}"
        )
    return cfg


def _require(cfg: PipelineConfig, key: str, command: str) -> str:
    value = getattr(cfg, key)
    if not value:
        raise ConfigError(f"{command} requires the {key!r} config key")
    return value


def _group_name(mask) -> str:
    return "all" if mask is None else f"mask{mask}"


def _training_groups(cfg: PipelineConfig, data: Dataset):
    """(name, mask, retained column indices, group dataset) per model."""
    if not cfg.partition_mode:
        return [("all", None, list(range(data.n_features)), data)]
    out = []
    for mask, sub in partition_by_missingness(data):
        keep = [j for j in range(data.n_features) if not (mask >> j) & 1]
        out.append((_group_name(mask), mask, keep, sub))
    return out


def _cmd_train(cfg: PipelineConfig) -> int:
    train_path = _require(cfg, "train_file", "train")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(train_path, "train")
    root = Prng(cfg.seed)
    opt_cfg = cfg.optimizer_config()
    grid = cfg.sweep_grid()

    manifest_groups = []
    pooled_scores, pooled_weights, pooled_labels = [], [], []
    for name, mask, keep, sub in _training_groups(cfg, data):
        scaler = fit_standardizer(sub)
        standardized = apply_standardizer(scaler, sub)
        arch = Architecture((sub.n_features, *cfg.hidden_widths, 1))
        net = init_network(arch, root.child(f"init/{name}"), cfg.hidden_activation)
        if cfg.pretrain_epochs > 0:
            layers = pretrain_stack(
                standardized.features,
                arch,
                cfg.pretrain_config(),
                root.child(f"pretrain/{name}"),
                cfg.hidden_activation,
            )
            apply_pretrained(net, layers)

        train_rng = root.child(f"train/{name}")
        _, valid_d = split_stratified(standardized, cfg.valid_fraction, Prng(train_rng.seed))
        model, history = train_loop(net, standardized, opt_cfg, train_rng, grid)

        model_path = os.path.join(cfg.output_dir, f"model_{name}.txt")
        scaler_path = os.path.join(cfg.output_dir, f"scaler_{name}.txt")
        history_path = os.path.join(cfg.output_dir, f"history_{name}.csv")
        save_network(model, model_path)
        scaler.save(scaler_path)
        history.save(history_path)

        v_scores = predict_scores(model, valid_d.features)
        pooled_scores.append(v_scores)
        pooled_weights.append(valid_d.weights)
        pooled_labels.append(valid_d.labels)
        manifest_groups.append(
            {
                "name": name,
                "mask": mask,
                "columns": keep,
                "n_events": len(sub),
                "model_file": os.path.basename(model_path),
                "scaler_file": os.path.basename(scaler_path),
                "history_file": os.path.basename(history_path),
                "stop_reason": history.stop_reason,
                "epochs_run": len(history.records),
            }
        )
        print(f"trained {name}: {len(sub)} events, {len(history.records)} epochs "
              f"({history.stop_reason})")

    result = sweep_threshold(
        np.concatenate(pooled_scores),
        np.concatenate(pooled_weights),
        np.concatenate(pooled_labels),
        grid,
        cfg.ams_config(),
    )
    manifest = {
        "format": MANIFEST_FORMAT,
        "seed": cfg.seed,
        "partition_mode": cfg.partition_mode,
        "hidden_widths": list(cfg.hidden_widths),
        "hidden_activation": cfg.hidden_activation,
        "valid_fraction": cfg.valid_fraction,
        "groups": manifest_groups,
        "valid_ams": result.best_ams,
        "valid_best_percentile": result.best_percentile,
    }
    manifest_path = os.path.join(cfg.output_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"validation AMS {result.best_ams:.6f} at percentile "
          f"{result.best_percentile:.1f}; manifest: {manifest_path}")
    return 0


def _load_manifest(path: str) -> tuple[dict, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a manifest ({exc})") from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise SchemaError(f"{path}: unexpected format {manifest.get('format')!r}")
    return manifest, os.path.dirname(os.path.abspath(path))


def _score_with_manifest(manifest: dict, base_dir: str, data: Dataset) -> np.ndarray:
    """Scores in input row order; partition manifests route per-event by
    missingness mask, unseen masks falling back to the largest group."""
    scores = np.empty(len(data))
    groups = manifest["groups"]
    loaded = []
    for g in groups:
        loaded.append(
            (
                g,
                load_network(os.path.join(base_dir, g["model_file"])),
                FeatureScaler.load(os.path.join(base_dir, g["scaler_file"])),
            )
        )
    if not manifest["partition_mode"]:
        g, net, scaler = loaded[0]
        standardized = apply_standardizer(scaler, data)
        return predict_scores(net, standardized.features)

    masks = data.signatures()
    known = {g["mask"]: i for i, (g, _, _) in enumerate(loaded)}
    route = np.zeros(len(data), dtype=np.int64)  # groups[0] is the largest
    for i, m in enumerate(masks.tolist()):
        route[i] = known.get(m, 0)
    for gi, (g, net, scaler) in enumerate(loaded):
        rows = np.flatnonzero(route == gi)
        if rows.size == 0:
            continue
        sub = data.subset(rows)
        reduced = Dataset(
            sub.ids,
            sub.features[:, g["columns"]],
            sub.weights,
            sub.labels,
            [data.feature_names[j] for j in g["columns"]],
        )
        standardized = apply_standardizer(scaler, reduced)
        scores[rows] = predict_scores(net, standardized.features)
    return scores


def _ensemble_scores(cfg: PipelineConfig, data: Dataset, command: str) -> np.ndarray:
    paths = cfg.ensemble if cfg.ensemble else [_require(cfg, "model_file", command)]
    all_scores = []
    for path in paths:
        manifest, base = _load_manifest(path)
        all_scores.append(_score_with_manifest(manifest, base, data))
    return ensemble_average(all_scores)


def _cmd_predict(cfg: PipelineConfig) -> int:
    test_path = _require(cfg, "test_file", "predict")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(test_path, "test")
    scores = _ensemble_scores(cfg, data, "predict")
    out_path = os.path.join(cfg.output_dir, "scores.csv")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("EventId,Score\n")
        for event_id, score in zip(data.ids, scores):
            fh.write(f"{event_id},{score:.17g}\n")
    print(f"scored {len(data)} events -> {out_path}")
    return 0


def _cmd_submit(cfg: PipelineConfig) -> int:
    test_path = _require(cfg, "test_file", "submit")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(test_path, "test")
    scores = _ensemble_scores(cfg, data, "submit")
    out_path = os.path.join(cfg.output_dir, "submission.csv")
    count = write_submission(data.ids, scores, cfg.signal_percentile, out_path)
    print(f"wrote {count} rows -> {out_path}")
    return 0


def _cmd_sweep(cfg: PipelineConfig) -> int:
    """Threshold grid report on the training run's pooled validation split."""
    train_path = _require(cfg, "train_file", "sweep")
    manifest_path = _require(cfg, "model_file", "sweep")
    manifest, base = _load_manifest(manifest_path)
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(train_path, "train")
    root = Prng(manifest["seed"])

    by_mask = {m: sub for m, sub in partition_by_missingness(data)}
    pooled_scores, pooled_weights, pooled_labels = [], [], []
    for g in manifest["groups"]:
        if manifest["partition_mode"]:
            sub = by_mask.get(g["mask"])
            if sub is None:
                continue
        else:
            sub = data
        scaler = FeatureScaler.load(os.path.join(base, g["scaler_file"]))
        net = load_network(os.path.join(base, g["model_file"]))
        standardized = apply_standardizer(scaler, sub)
        _, valid_d = split_stratified(
            standardized, manifest["valid_fraction"], root.child(f"train/{g['name']}")
        )
        pooled_scores.append(predict_scores(net, valid_d.features))
        pooled_weights.append(valid_d.weights)
        pooled_labels.append(valid_d.labels)

    result = sweep_threshold(
        np.concatenate(pooled_scores),
        np.concatenate(pooled_weights),
        np.concatenate(pooled_labels),
        cfg.sweep_grid(),
        cfg.ams_config(),
    )
    out_path = os.path.join(cfg.output_dir, "sweep.csv")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("percentile,threshold,ams\n")
        for p, t, a in zip(result.percentiles, result.thresholds, result.ams_values):
            fh.write(f"{p:.17g},{t:.17g},{a:.17g}\n")
    print(f"best AMS {result.best_ams:.6f} at percentile "
          f"{result.best_percentile:.2f} -> {out_path}")
    return 0


def _cmd_stats(cfg: PipelineConfig) -> int:
    train_path = _require(cfg, "train_file", "stats")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(train_path, "train")
    table = stats_table(feature_stats(data))
    out_path = os.path.join(cfg.output_dir, "feature_stats.tsv")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return 0


def _cmd_pretrain(cfg: PipelineConfig) -> int:
    train_path = _require(cfg, "train_file", "pretrain")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data = load_csv(train_path, "train")
    root = Prng(cfg.seed)
    scaler = fit_standardizer(data)
    standardized = apply_standardizer(scaler, data)
    arch = Architecture((data.n_features, *cfg.hidden_widths, 1))
    net = init_network(arch, root.child("init/all"), cfg.hidden_activation)
    layers = pretrain_stack(
        standardized.features,
        arch,
        cfg.pretrain_config(),
        root.child("pretrain/all"),
        cfg.hidden_activation,
    )
    apply_pretrained(net, layers)
    model_path = os.path.join(cfg.output_dir, "pretrained.txt")
    scaler_path = os.path.join(cfg.output_dir, "scaler_all.txt")
    save_network(net, model_path)
    scaler.save(scaler_path)
    for i, layer in enumerate(layers):
        print(f"autoencoder {i}: reconstruction loss "
              f"{layer.initial_loss:.6g} -> {layer.final_loss:.6g}")
    print(f"pretrained inits -> {model_path}")
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "sweep": _cmd_sweep,
    "submit": _cmd_submit,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exoticnet",
        description="Sigmoid MLP pipeline for weighted signal/background "
        "event selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override config output_dir")
    return parser


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        return _COMMANDS[args.command](cfg)
    except (ConfigError, SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
