"""Command-line entry point: train / toy2d / msweep / bounds / regions / eval.

Every command is deterministic given its config and seed: float columns are
written with shortest round-trip repr, JSON reports embed the resolved
config, and artifacts are staged to a temp name then atomically renamed.
Exit codes: 0 success, 1 usage or config error, 2 runtime error or
divergence, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import geometry, metrics, training
from .errors import (ConfigError, CsvFormatError, MarginlabError,
                     ProtocolError, TrainingDivergedError)
from .geometry import REGION_NAMES, RegionLabel
from .losses import ClassWeights, LossKind, LossSpec
from .training import MlpModel, TrainConfig, TrainRun

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

THREADS_ENV = "MARGINLAB_THREADS"


# ---------------------------------------------------------------------------
# experiment config: one strict JSON document


@dataclass
class ExperimentConfig:
    loss_variant: str = "lmcl"
    s: float = 30.0
    m: float = 0.2
    classes: int = 8
    per_class: int = 200
    input_dim: int = 2
    dispersion: float = 0.2
    data_seed: int = 1000
    hidden: tuple[int, ...] = (64,)
    feature_dim: int = 2
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 0.1
    lr_drop_epochs: tuple[int, ...] = (40, 50)
    weight_decay: float = 5e-4
    normalize_features: bool = True
    seeds: tuple[int, ...] = (0, 1, 2)
    out_dir: str = "out"
    m_grid: tuple[float, ...] = (0.0, 0.1, 0.2)
    holdout_per_class: int = 100
    positive_pairs: int = 2000
    negative_pairs: int = 2000

    def to_dict(self) -> dict:
        doc = {
            "loss": {"variant": self.loss_variant, "s": self.s, "m": self.m},
            "dataset": {"classes": self.classes, "per_class": self.per_class,
                        "input_dim": self.input_dim,
                        "dispersion": self.dispersion,
                        "seed": self.data_seed},
            "model": {"hidden": list(self.hidden),
                      "feature_dim": self.feature_dim},
            "train": {"epochs": self.epochs, "batch_size": self.batch_size,
                      "learning_rate": self.learning_rate,
                      "lr_drop_epochs": list(self.lr_drop_epochs),
                      "weight_decay": self.weight_decay,
                      "normalize_features": self.normalize_features},
            "eval": {"holdout_per_class": self.holdout_per_class,
                     "positive_pairs": self.positive_pairs,
                     "negative_pairs": self.negative_pairs},
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
            "m_grid": list(self.m_grid),
        }
        return doc

    def loss_spec(self, m: Optional[float] = None) -> LossSpec:
        variant = LossKind(self.loss_variant)
        if variant == LossKind.SOFTMAX:
            return LossSpec.softmax()
        if variant == LossKind.NSL:
            return LossSpec.nsl(self.s)
        return LossSpec.lmcl(self.s, self.m if m is None else m)

    def train_config(self, seed: int, m: Optional[float] = None,
                     spec: Optional[LossSpec] = None,
                     normalize_features: Optional[bool] = None) -> TrainConfig:
        return TrainConfig(
            spec=spec if spec is not None else self.loss_spec(m),
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_drop_epochs=self.lr_drop_epochs,
            weight_decay=self.weight_decay, seed=seed,
            normalize_features=self.normalize_features
            if normalize_features is None else normalize_features)


def _want(doc: dict, path: str, kind, check: Callable[[Any], bool],
          what: str, default):
    cur: Any = doc
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    if kind is float and isinstance(cur, int) and not isinstance(cur, bool):
        cur = float(cur)
    if not isinstance(cur, kind) or isinstance(cur, bool) and kind is not bool:
        raise ConfigError(f"{path}: expected {what}")
    if not check(cur):
        raise ConfigError(f"{path}: expected {what}, got {cur!r}")
    return cur


def _want_int_list(doc: dict, path: str, check: Callable[[int], bool],
                   what: str, default):
    raw = _want(doc, path, list, lambda v: True, "a list", None)
    if raw is None:
        return default
    for v in raw:
        if not isinstance(v, int) or isinstance(v, bool) or not check(v):
            raise ConfigError(f"{path}: expected a list of {what}")
    return tuple(raw)


_KNOWN_KEYS = {
    "loss": {"variant", "s", "m"},
    "dataset": {"classes", "per_class", "input_dim", "dispersion", "seed"},
    "model": {"hidden", "feature_dim"},
    "train": {"epochs", "batch_size", "learning_rate", "lr_drop_epochs",
              "weight_decay", "normalize_features"},
    "eval": {"holdout_per_class", "positive_pairs", "negative_pairs"},
}
_TOP_KEYS = set(_KNOWN_KEYS) | {"seeds", "out_dir", "m_grid"}


def _reject_unknown(doc: dict) -> None:
    for key, value in doc.items():
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key: {key}")
        if key in _KNOWN_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object")
            for sub in value:
                if sub not in _KNOWN_KEYS[key]:
                    raise ConfigError(f"unknown config key: {key}.{sub}")


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document against the strict schema; unknown keys
    are rejected and every message names the offending field path."""
    if not isinstance(doc, dict):
        raise ConfigError("config root: expected a JSON object")
    _reject_unknown(doc)
    d = ExperimentConfig()  # defaults
    variant = _want(doc, "loss.variant", str,
                    lambda v: v in {"softmax", "nsl", "lmcl"},
                    "one of softmax|nsl|lmcl", d.loss_variant)
    cfg = ExperimentConfig(
        loss_variant=variant,
        s=_want(doc, "loss.s", float, lambda v: v > 0,
                "a positive number", d.s),
        m=_want(doc, "loss.m", float, lambda v: 0.0 <= v < 1.0,
                "a number in [0, 1)", d.m),
        classes=_want(doc, "dataset.classes", int, lambda v: v >= 2,
                      "an int >= 2", d.classes),
        per_class=_want(doc, "dataset.per_class", int, lambda v: v >= 1,
                        "an int >= 1", d.per_class),
        input_dim=_want(doc, "dataset.input_dim", int, lambda v: v >= 2,
                        "an int >= 2", d.input_dim),
        dispersion=_want(doc, "dataset.dispersion", float, lambda v: v > 0,
                         "a positive number", d.dispersion),
        data_seed=_want(doc, "dataset.seed", int, lambda v: v >= 0,
                        "a non-negative int", d.data_seed),
        hidden=_want_int_list(doc, "model.hidden", lambda v: v >= 1,
                              "ints >= 1", d.hidden),
        feature_dim=_want(doc, "model.feature_dim", int, lambda v: v >= 2,
                          "an int >= 2", d.feature_dim),
        epochs=_want(doc, "train.epochs", int, lambda v: v >= 1,
                     "an int >= 1", d.epochs),
        batch_size=_want(doc, "train.batch_size", int, lambda v: v >= 1,
                         "an int >= 1", d.batch_size),
        learning_rate=_want(doc, "train.learning_rate", float,
                            lambda v: v > 0, "a positive number",
                            d.learning_rate),
        lr_drop_epochs=_want_int_list(doc, "train.lr_drop_epochs",
                                      lambda v: v >= 0,
                                      "non-negative ints", d.lr_drop_epochs),
        weight_decay=_want(doc, "train.weight_decay", float,
                           lambda v: v >= 0, "a non-negative number",
                           d.weight_decay),
        normalize_features=_want(doc, "train.normalize_features", bool,
                                 lambda v: True, "a boolean",
                                 d.normalize_features),
        seeds=_want_int_list(doc, "seeds", lambda v: v >= 0,
                             "non-negative ints", d.seeds),
        out_dir=_want(doc, "out_dir", str, lambda v: bool(v),
                      "a non-empty string", d.out_dir),
        m_grid=tuple(_want(doc, "m_grid", list,
                           lambda v: all(isinstance(x, (int, float))
                                         and not isinstance(x, bool)
                                         and 0.0 <= x < 1.0 for x in v),
                           "a list of numbers in [0, 1)",
                           list(d.m_grid))),
        holdout_per_class=_want(doc, "eval.holdout_per_class", int,
                                lambda v: v >= 1, "an int >= 1",
                                d.holdout_per_class),
        positive_pairs=_want(doc, "eval.positive_pairs", int,
                             lambda v: v >= 1, "an int >= 1",
                             d.positive_pairs),
        negative_pairs=_want(doc, "eval.negative_pairs", int,
                             lambda v: v >= 1, "an int >= 1",
                             d.negative_pairs),
    )
    if not cfg.seeds:
        raise ConfigError("seeds: must not be empty")
    if not cfg.m_grid:
        raise ConfigError("m_grid: must not be empty")
    return cfg


def load_config(path: Optional[str], overrides: argparse.Namespace
                ) -> ExperimentConfig:
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise CsvFormatError(f"cannot read config: {exc}", 0) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = parse_config(doc)
    if getattr(overrides, "seed", None) is not None:
        cfg.seeds = (overrides.seed,)
    if getattr(overrides, "out", None) is not None:
        cfg.out_dir = overrides.out
    if getattr(overrides, "m_grid", None) is not None:
        try:
            grid = tuple(float(v) for v in overrides.m_grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"--m-grid: {exc}") from exc
        if not grid or not all(0.0 <= v < 1.0 for v in grid):
            raise ConfigError("--m-grid: values must lie in [0, 1)")
        cfg.m_grid = grid
    return cfg


# ---------------------------------------------------------------------------
# deterministic artifact emission


def _fmt(value) -> str:
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str],
              rows: Sequence[Sequence]) -> None:
    """Write CSV to a temp file, then atomically rename into place."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def write_json(path: Path, doc: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    os.replace(tmp, path)


def _max_workers(n_jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(1, min(cap, n_jobs))


def _run_jobs(jobs: Sequence[Callable[[], Any]]) -> list:
    """Run independent jobs, possibly in parallel; results keep job order."""
    workers = _max_workers(len(jobs))
    if workers == 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# shared experiment plumbing


def _init_model(cfg: ExperimentConfig, seed: int) -> MlpModel:
    model = MlpModel.init(cfg.input_dim, cfg.hidden, cfg.feature_dim,
                          cfg.classes, seed)
    if cfg.feature_dim == 2 or cfg.classes <= cfg.feature_dim + 1:
        # spread class weights evenly; random directions can start two
        # classes nearly parallel and trap low-dimensional features
        spread = geometry.simplex_weights(cfg.classes, cfg.feature_dim)
        model = MlpModel(model.layers, ClassWeights(spread.matrix.copy()),
                         model.activation)
    return model


def _train_once(cfg: ExperimentConfig, seed: int,
                m: Optional[float] = None,
                spec: Optional[LossSpec] = None,
                warm_start: Optional[MlpModel] = None,
                normalize_features: Optional[bool] = None
                ) -> tuple[TrainRun, training.SyntheticDataset]:
    data = training.generate_blobs(cfg.classes, cfg.per_class, cfg.input_dim,
                                   cfg.dispersion, cfg.data_seed + seed)
    model = warm_start if warm_start is not None else _init_model(cfg, seed)
    run = training.train(model, data,
                         cfg.train_config(seed, m=m, spec=spec,
                                          normalize_features=normalize_features))
    return run, data


def _holdout_accuracy(cfg: ExperimentConfig, run: TrainRun,
                      seed: int) -> float:
    """Verification accuracy on pairs drawn from held-out blobs."""
    holdout = training.generate_blobs(
        cfg.classes, cfg.holdout_per_class, cfg.input_dim, cfg.dispersion,
        cfg.data_seed + seed + 7919)
    feats = training.extract_features(run.model, holdout.samples)
    pairs = metrics.sample_pairs(feats, holdout.labels, cfg.positive_pairs,
                                 cfg.negative_pairs, seed=seed + 104729)
    _, acc = metrics.verification_accuracy(pairs)
    return acc


def _say(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    run, data = _train_once(cfg, seed)
    write_csv(out / "trace.csv", ["epoch", "loss", "train_accuracy"],
              [(e, run.losses[e], run.accuracies[e])
               for e in range(cfg.epochs)])
    training.save_model(run.model, out / "model.json")
    feats = training.extract_features(run.model, data.samples)
    stats = training.angular_stats(feats, data.labels,
                                   run.model.class_weights)
    write_csv(out / "angular_stats.csv",
              ["class", "intra_spread", "inter_gap"],
              [(c, stats.intra_spread[c], stats.inter_gap[c])
               for c in range(cfg.classes)])
    _say(args.quiet, f"seed {seed}: final loss {run.losses[-1]:.6f}, "
         f"train accuracy {run.accuracies[-1]:.4f}, "
         f"converged {run.converged}")
    _say(args.quiet, f"artifacts in {out}")
    return EXIT_OK if run.converged else EXIT_RUNTIME


def _m_tag(m: float) -> str:
    return format(m, "g").replace(".", "p").replace("-", "neg")


def cmd_toy2d(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    if cfg.feature_dim != 2:
        raise ConfigError("toy2d needs model.feature_dim = 2")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def job(m: float, seed: int):
        run, data = _train_once(cfg, seed, m=m)
        feats = training.extract_features(run.model, data.samples)
        stats = training.angular_stats(feats, data.labels,
                                       run.model.class_weights)
        return run, data, feats, stats

    jobs = [(m, seed) for m in cfg.m_grid for seed in cfg.seeds]
    results = dict(zip(jobs, _run_jobs([lambda m=m, s=s: job(m, s)
                                        for m, s in jobs])))

    records = []
    for m in cfg.m_grid:
        first_seed = cfg.seeds[0]
        run, data, feats, _ = results[(m, first_seed)]
        tag = _m_tag(m)
        write_csv(out / f"features_m{tag}_euclidean.csv",
                  ["id", "f0", "f1"],
                  [(int(lbl), row[0], row[1])
                   for lbl, row in zip(data.labels, feats)])
        unit = feats / np.linalg.norm(feats, axis=1, keepdims=True)
        write_csv(out / f"features_m{tag}_angular.csv",
                  ["id", "f0", "f1", "angle"],
                  [(int(lbl), row[0], row[1], math.atan2(row[1], row[0]))
                   for lbl, row in zip(data.labels, unit)])
        for seed in cfg.seeds:
            run, _, _, stats = results[(m, seed)]
            records.append({
                "m": m, "seed": seed,
                "train_accuracy": float(run.accuracies[-1]),
                "converged": run.converged,
                "min_inter_gap": stats.min_inter_gap,
                "mean_intra_spread": float(stats.intra_spread.mean()),
            })
        gaps = [r["min_inter_gap"] for r in records if r["m"] == m]
        _say(args.quiet, f"m={m:g}: median min inter-class gap "
             f"{float(np.median(gaps)):.4f} rad")
    write_json(out / "toy2d_report.json",
               {"config": cfg.to_dict(), "runs": records})
    _say(args.quiet, f"artifacts in {out}")
    return EXIT_OK


def cmd_msweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def job(m: float, seed: int) -> dict:
        try:
            run, _ = _train_once(cfg, seed, m=m)
        except TrainingDivergedError as exc:
            return {"m": m, "seed": seed, "converged": False,
                    "accuracy": None, "diverged_at_epoch": exc.epoch}
        return {"m": m, "seed": seed, "converged": run.converged,
                "accuracy": _holdout_accuracy(cfg, run, seed),
                "diverged_at_epoch": None}

    jobs = [(m, seed) for m in cfg.m_grid for seed in cfg.seeds]
    records = _run_jobs([lambda m=m, s=s: job(m, s) for m, s in jobs])

    rows = []
    for m in cfg.m_grid:
        mine = [r for r in records if r["m"] == m]
        accs = [r["accuracy"] for r in mine if r["accuracy"] is not None]
        median_acc = float(np.median(accs)) if accs else 0.0
        converged = all(r["converged"] for r in mine)
        rows.append((m, median_acc, converged))
        _say(args.quiet, f"m={m:g}: median verification accuracy "
             f"{median_acc:.4f}, converged={converged}")
    write_csv(out / "msweep.csv", ["m", "median_accuracy", "converged"], rows)
    write_json(out / "msweep_report.json",
               {"config": cfg.to_dict(), "runs": records})
    _say(args.quiet, f"artifacts in {out}")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    report = geometry.bound_report(args.classes, args.feature_dim, args.p_w,
                                   s=args.s, m=args.m)
    doc = report.to_dict()
    doc["inputs"] = {"classes": args.classes, "feature_dim": args.feature_dim,
                     "p_w": args.p_w, "s": args.s, "m": args.m}
    if args.out is not None:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_json(path, doc)
    _say(args.quiet, f"s_lower = {report.s_lower!r}")
    _say(args.quiet, f"m_upper = {report.m_upper!r} "
         f"({report.m_bound_kind.value})")
    for e in report.oracle_evidence:
        mark = "ok " if e.satisfied else "VIOLATED"
        _say(args.quiet,
             f"  [{mark}] {e.description}: {e.computed!r} vs {e.bound!r}")
    return EXIT_OK


def cmd_regions(args: argparse.Namespace) -> int:
    grid = geometry.decision_regions(
        args.kind, m=args.m, multiplier=args.multiplier,
        weight_norms=(args.norm1, args.norm2) if args.kind == "softmax"
        else None,
        resolution=args.resolution)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, a in enumerate(grid.axis1):
        for j, b in enumerate(grid.axis2):
            rows.append((a, b, REGION_NAMES[RegionLabel(grid.labels[i, j])]))
    write_csv(path, ["theta1", "theta2", "label"], rows)
    if grid.space == "cosine":
        measured = geometry.margin_band_width(grid, args.m or 0.0)
        _say(args.quiet, f"measured margin band width: {measured!r}")
        if args.kind == "lmcl":
            _say(args.quiet, "predicted width sqrt(2)*m: "
                 f"{geometry.lmcl_margin_width(args.m)!r}")
    else:
        widths = geometry.margin_width_by_slice(grid)
        _say(args.quiet, f"margin width near theta=0: {widths[0]!r}, "
             f"at theta=pi/2: {widths[len(widths) // 2]!r}")
    _say(args.quiet, f"wrote {path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    doc: dict = {"mode": args.mode}
    if args.mode == "verification":
        if args.pairs is None:
            raise ConfigError("verification mode needs --pairs")
        pairs = metrics.read_pairs_csv(args.pairs)
        threshold, accuracy = metrics.verification_accuracy(pairs)
        doc["pairs_file"] = args.pairs
        doc["num_pairs"] = int(pairs.same.size)
        doc["accuracy"] = accuracy
        doc["threshold"] = threshold
        doc["tar_at_far"] = []
        for far in args.far:
            entry: dict = {"far": far}
            try:
                entry["tar"] = metrics.tar_at_far(pairs, far)
            except ProtocolError as exc:
                entry["error"] = str(exc)
            doc["tar_at_far"].append(entry)
        _say(args.quiet, f"verification accuracy {accuracy:.4f} "
             f"at threshold {threshold:.4f}")
        for entry in doc["tar_at_far"]:
            if "tar" in entry:
                _say(args.quiet,
                     f"TAR@FAR={entry['far']:g}: {entry['tar']:.4f}")
            else:
                _say(args.quiet,
                     f"TAR@FAR={entry['far']:g}: {entry['error']}")
    else:
        if args.gallery is None or args.probes is None:
            raise ConfigError("identification mode needs --gallery and --probes")
        g_ids, g_feats = metrics.read_features_csv(args.gallery)
        p_ids, p_feats = metrics.read_features_csv(args.probes)
        gp = metrics.GalleryProbe(g_feats, g_ids, p_feats, p_ids)
        doc["gallery_file"] = args.gallery
        doc["probes_file"] = args.probes
        doc["rank1"] = metrics.rank1_identification(gp)
        _say(args.quiet, f"rank-1 identification {doc['rank1']:.4f}")
    if args.out is not None:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_json(path, doc)
        _say(args.quiet, f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors -> exit code 1
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="marginlab",
                     description="Large-margin cosine loss experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the seed list")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--quiet", action="store_true")

    p_train = sub.add_parser("train", help="train one model, write artifacts")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_toy = sub.add_parser("toy2d",
                           help="2-D feature scatter across a margin grid")
    common(p_toy)
    p_toy.add_argument("--m-grid", help="comma-separated margins in [0,1)")
    p_toy.set_defaults(func=cmd_toy2d)

    p_sweep = sub.add_parser("msweep",
                             help="verification accuracy across margins")
    common(p_sweep)
    p_sweep.add_argument("--m-grid", help="comma-separated margins in [0,1)")
    p_sweep.set_defaults(func=cmd_msweep)

    p_bounds = sub.add_parser("bounds",
                              help="scale/margin bounds with evidence")
    p_bounds.add_argument("--classes", "-C", type=int, required=True)
    p_bounds.add_argument("--feature-dim", "-K", type=int, required=True)
    p_bounds.add_argument("--p-w", type=float, required=True,
                          help="target minimum class-center posterior")
    p_bounds.add_argument("--s", type=float, help="scale to check")
    p_bounds.add_argument("--m", type=float, help="margin to check")
    p_bounds.add_argument("--out", help="write the JSON report here")
    p_bounds.add_argument("--quiet", action="store_true")
    p_bounds.set_defaults(func=cmd_bounds)

    p_reg = sub.add_parser("regions", help="labeled decision-region grid")
    p_reg.add_argument("--kind", required=True,
                       choices=list(geometry.BOUNDARY_KINDS))
    p_reg.add_argument("--m", type=float, help="cosine margin (lmcl)")
    p_reg.add_argument("--multiplier", type=float,
                       help="angle multiplier (asoftmax)")
    p_reg.add_argument("--norm1", type=float, default=1.0,
                       help="first weight norm (softmax)")
    p_reg.add_argument("--norm2", type=float, default=1.0,
                       help="second weight norm (softmax)")
    p_reg.add_argument("--resolution", type=int, default=512)
    p_reg.add_argument("--out", required=True)
    p_reg.add_argument("--quiet", action="store_true")
    p_reg.set_defaults(func=cmd_regions)

    p_eval = sub.add_parser("eval", help="verification/identification metrics")
    p_eval.add_argument("--mode", required=True,
                        choices=["verification", "identification"])
    p_eval.add_argument("--pairs", help="pairs CSV (id_a,id_b,a*,b*)")
    p_eval.add_argument("--gallery", help="gallery features CSV (id,f*)")
    p_eval.add_argument("--probes", help="probe features CSV (id,f*)")
    p_eval.add_argument("--far", type=float, action="append",
                        default=None,
                        help="FAR operating point (repeatable)")
    p_eval.add_argument("--out", help="write the JSON report here")
    p_eval.add_argument("--quiet", action="store_true")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "far", None) is None and args.command == "eval":
        args.far = [0.1, 0.01, 0.001]
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CsvFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MarginlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
