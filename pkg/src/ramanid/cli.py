"""Command-line interface.

Subcommands: ingest, correct, augment-preview, train, predict, evaluate,
synth. Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
User-facing failures print a single `error: ...` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ramanid.augment import AugmentConfig, augment_dataset
from ramanid.baseline import BASELINE_KINDS, BaselineMethod, correct
from ramanid.dataset import IngestStats, build_dataset, load_dataset, save_dataset
from ramanid.harness import (
    ExperimentConfig,
    MethodSpec,
    format_report_table,
    run_experiment,
    synth_dataset,
)
from ramanid.nn.model import ArchSpec, ConvSpec, DEFAULT_ARCH, build_model, load_model, predict, save_model
from ramanid.nn.train import TrainConfig, train
from ramanid.rruff import RruffParseError, parse_rruff, serialize_rruff
from ramanid.spectrum import DEFAULT_GRID, Grid, resample

DATA_DIR_ENV = "RAMANID_DATA_DIR"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.exit_code = exit_code


def _grid_from_args(args) -> Grid:
    return Grid(start=args.grid_start, stop=args.grid_stop, points=args.grid_points)


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-start", type=float, default=DEFAULT_GRID.start)
    parser.add_argument("--grid-stop", type=float, default=DEFAULT_GRID.stop)
    parser.add_argument("--grid-points", type=int, default=DEFAULT_GRID.points)


def _resolve_data_dir(value: str | None) -> Path:
    if value:
        return Path(value)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise CliError(f"no data directory given and {DATA_DIR_ENV} is unset", EXIT_USAGE)


def _spectrum_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise CliError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.is_file())


def cmd_ingest(args) -> int:
    directory = _resolve_data_dir(args.data_dir)
    grid = _grid_from_args(args)
    records = []
    stats = IngestStats()
    for path in _spectrum_files(directory):
        try:
            records.append(parse_rruff(path.read_bytes()))
        except RruffParseError as exc:
            stats.skipped += 1
            stats.skip_reasons.append(f"{path.name}: {exc}")
    dataset = build_dataset(records, grid, stats)
    save_dataset(dataset, args.out)
    counts = dataset.class_counts
    print(f"N={len(dataset)} K={dataset.n_classes} skipped={stats.skipped}")
    print("samples-per-class histogram:")
    for count in np.unique(counts):
        print(f"  {count} sample(s): {int(np.sum(counts == count))} class(es)")
    print(f"wrote {args.out}")
    return EXIT_OK


def _parse_method_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise CliError(f"expected key=value, got {pair!r}", EXIT_USAGE)
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def cmd_correct(args) -> int:
    method = BaselineMethod(kind=args.method, params=_parse_method_params(args.param))
    in_path = Path(args.input)
    out_path = Path(args.out)
    paths = _spectrum_files(in_path) if in_path.is_dir() else [in_path]
    if in_path.is_dir():
        out_path.mkdir(parents=True, exist_ok=True)
    for path in paths:
        record = parse_rruff(path.read_bytes())
        spectrum = correct(record.to_spectrum(), method)
        record.points = list(zip(spectrum.wavenumbers.tolist(), spectrum.intensities.tolist()))
        target = out_path / path.name if in_path.is_dir() else out_path
        target.write_text(serialize_rruff(record))
        print(f"corrected {path} -> {target}")
    return EXIT_OK


def _augment_cfg_from_args(args) -> AugmentConfig:
    return AugmentConfig(
        max_shift=args.max_shift,
        noise_scale=args.noise_scale,
        mixes_per_class=args.mixes_per_class,
        copies_per_sample=args.copies_per_sample,
        seed=args.seed,
    )


def _add_augment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-shift", type=int, default=3)
    parser.add_argument("--noise-scale", type=float, default=0.05)
    parser.add_argument("--mixes-per-class", type=int, default=2)
    parser.add_argument("--copies-per-sample", type=int, default=2)


def cmd_augment_preview(args) -> int:
    dataset = load_dataset(args.cache)
    augmented = augment_dataset(dataset, _augment_cfg_from_args(args))
    print(f"seed={args.seed}")
    print(f"original: N={len(dataset)} K={dataset.n_classes}")
    print(f"augmented: N={len(augmented)} K={augmented.n_classes}")
    if args.out:
        save_dataset(augmented, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _arch_from_json(text: str | None) -> ArchSpec:
    if text is None:
        return DEFAULT_ARCH
    try:
        raw = json.loads(text)
        return ArchSpec(
            conv=tuple(ConvSpec(*block) for block in raw["conv"]),
            dense_width=raw.get("dense_width", 512),
            dropout_rate=raw.get("dropout_rate", 0.5),
            leaky_slope=raw.get("leaky_slope", 0.1),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"bad --arch-json: {exc}", EXIT_USAGE) from exc


def cmd_train(args) -> int:
    dataset = load_dataset(args.cache)
    cfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        early_stop_patience=args.patience,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )
    model = build_model(
        dataset.grid.points,
        dataset.n_classes,
        arch=_arch_from_json(args.arch_json),
        seed=args.seed,
        class_names=list(dataset.class_names),
        grid=dataset.grid,
    )
    augment_cfg = None if args.no_augment else _augment_cfg_from_args(args)
    history = train(model, dataset, cfg, augment_cfg)
    save_model(model, args.out)
    print(f"seed={args.seed}")
    print(f"epochs_run={history.epochs_run} stopped_early={history.stopped_early}")
    if history.val_accuracy:
        print(
            f"best_val_accuracy={history.best_val_accuracy:.4f} at epoch {history.best_epoch + 1}"
        )
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    record = parse_rruff(Path(args.spectrum).read_bytes())
    features = resample(record.to_spectrum(), model.grid)
    lo, hi = features.min(), features.max()
    if hi <= lo:
        raise CliError("spectrum is constant on the model grid")
    probs, ranking = predict(model, (features - lo) / (hi - lo))
    for rank, class_idx in enumerate(ranking[: args.top], start=1):
        print(f"{rank} {model.class_names[class_idx]} {probs[class_idx]:.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    grid = _grid_from_args(args)
    pair = synth_dataset(
        classes=args.classes,
        per_class=args.per_class,
        baseline_severity=args.severity,
        noise=args.noise,
        seed=args.seed,
        grid=grid,
    )
    save_dataset(pair.raw, args.out_raw)
    print(f"seed={args.seed}")
    print(f"wrote {args.out_raw} (raw): N={len(pair.raw)} K={pair.raw.n_classes}")
    if args.out_clean:
        save_dataset(pair.clean, args.out_clean)
        print(f"wrote {args.out_clean} (clean): N={len(pair.clean)} K={pair.clean.n_classes}")
    return EXIT_OK


def _method_spec_from_dict(entry: dict, index: int) -> MethodSpec:
    try:
        classifier = entry["classifier"]
    except KeyError:
        raise CliError(f"methods[{index}]: missing 'classifier'", EXIT_USAGE) from None
    corrector = entry.get("corrector")
    if corrector is not None:
        if isinstance(corrector, str):
            corrector = {"kind": corrector}
        if corrector.get("kind") not in BASELINE_KINDS:
            raise CliError(
                f"methods[{index}]: corrector kind must be one of {BASELINE_KINDS}", EXIT_USAGE
            )
        corrector = BaselineMethod(kind=corrector["kind"], params=corrector.get("params", {}))
    train_cfg = TrainConfig(**entry.get("train", {}))
    augment_entry = entry.get("augment", {})
    augment_cfg = None if augment_entry is None else AugmentConfig(**augment_entry)
    arch = DEFAULT_ARCH
    if "arch" in entry:
        raw_arch = entry["arch"]
        arch = ArchSpec(
            conv=tuple(ConvSpec(*block) for block in raw_arch["conv"]),
            dense_width=raw_arch.get("dense_width", 512),
            dropout_rate=raw_arch.get("dropout_rate", 0.5),
            leaky_slope=raw_arch.get("leaky_slope", 0.1),
        )
    return MethodSpec(
        name=entry.get("name", f"{classifier}-{index}"),
        classifier=classifier,
        corrector=corrector,
        pca=entry.get("pca", False),
        pca_retained=entry.get("pca_retained", 0.999),
        knn_k=entry.get("knn_k", 1),
        svm_epochs=entry.get("svm_epochs", 30),
        svm_lr=entry.get("svm_lr", 1.0),
        svm_reg=entry.get("svm_reg", 1e-4),
        arch=arch,
        train_cfg=train_cfg,
        augment_cfg=augment_cfg,
    )


def load_experiment_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse the JSON experiment file into an ExperimentConfig plus dataset source."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_USAGE) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config parse error at line {exc.lineno}: {exc.msg}", EXIT_USAGE) from exc
    if "dataset" not in raw and "synth" not in raw:
        raise CliError("config needs a 'dataset' path or a 'synth' block", EXIT_USAGE)
    if "methods" not in raw or not raw["methods"]:
        raise CliError("config needs a nonempty 'methods' list", EXIT_USAGE)
    try:
        methods = tuple(
            _method_spec_from_dict(entry, i) for i, entry in enumerate(raw["methods"])
        )
        cfg = ExperimentConfig(
            methods=methods,
            runs=raw.get("runs", 5),
            top_ks=tuple(raw.get("top_ks", [1, 3, 5])),
            base_seed=raw.get("base_seed", 0),
        )
    except CliError:
        raise
    except (TypeError, ValueError) as exc:
        raise CliError(f"config error: {exc}", EXIT_USAGE) from exc
    return cfg, raw


def _dataset_from_config(raw: dict, args):
    if "dataset" in raw:
        return load_dataset(raw["dataset"])
    synth = raw["synth"]
    grid_spec = synth.get("grid")
    grid = (
        Grid(start=grid_spec[0], stop=grid_spec[1], points=grid_spec[2])
        if grid_spec
        else Grid(100.0, 1900.0, 512)
    )
    pair = synth_dataset(
        classes=synth.get("classes", 10),
        per_class=synth.get("per_class", 5),
        baseline_severity=synth.get("baseline_severity", 1.0),
        noise=synth.get("noise", 0.02),
        seed=synth.get("seed", 0),
        grid=grid,
    )
    return pair.clean if synth.get("variant") == "clean" else pair.raw


def cmd_evaluate(args) -> int:
    cfg, raw = load_experiment_config(args.config)
    if args.runs is not None or args.seed is not None:
        cfg = replace(
            cfg,
            runs=args.runs if args.runs is not None else cfg.runs,
            base_seed=args.seed if args.seed is not None else cfg.base_seed,
        )
    dataset = _dataset_from_config(raw, args)
    report = run_experiment(dataset, cfg, jobs=args.jobs)

    print(f"base_seed={cfg.base_seed} runs={cfg.runs}")
    table = format_report_table(report)
    sys.stdout.write(table)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.tsv").write_text(table)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print(f"wrote {out_dir / 'report.tsv'} and {out_dir / 'report.json'}")
    if all(m.error is not None for m in report.methods):
        raise CliError("all methods failed; see report for details")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramanid",
        description="Identify chemical species from Raman spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a directory of spectrum files into a dataset cache")
    p.add_argument("--data-dir", help=f"spectrum directory (default: ${DATA_DIR_ENV})")
    p.add_argument("--out", required=True, help="dataset cache path (.npz)")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("correct", help="baseline-correct spectrum files")
    p.add_argument("--input", required=True, help="spectrum file or directory")
    p.add_argument("--method", required=True, choices=BASELINE_KINDS)
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="estimator parameter override (repeatable)",
    )
    p.add_argument("--out", required=True, help="output file or directory")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("augment-preview", help="show the effect of an augmentation config")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", help="write the augmented dataset cache here")
    p.add_argument("--seed", type=int, default=0)
    _add_augment_flags(p)
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("train", help="train the network on a dataset cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True, help="model output path (.npz)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--validation-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument(
        "--arch-json",
        help='architecture override, e.g. \'{"conv": [[8,21,2],[16,11,2]], "dense_width": 128}\'',
    )
    _add_augment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="rank species for one spectrum")
    p.add_argument("--model", required=True)
    p.add_argument("--spectrum", required=True)
    p.add_argument("--top", type=int, default=3)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run a multi-method comparison experiment")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--runs", type=int, help="override config run count")
    p.add_argument("--seed", type=int, help="override config base seed")
    p.add_argument("--jobs", type=int, default=1, help="worker cap (methods run sequentially at 1)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--severity", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-raw", required=True)
    p.add_argument("--out-clean")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
