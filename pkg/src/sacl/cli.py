"""Command-line entry point for the full pipeline.

Subcommands: ``splits`` (stratified fold manifests), ``train`` (cross-validated
training into a run directory), ``zeroshot`` (evaluate a run's fold ensemble on
an unseen language), ``ablate`` (the four-way component ablation), ``report``
(merge metrics files into one table).

Configuration precedence: built-in defaults < ``--config`` key=value file <
command-line flags. One global ``--seed`` drives every random stream through
:func:`sacl.training.derive_seed`. The run root comes from ``--runs-dir`` or
the ``SACL_RUNS_DIR`` environment variable.
"""
from __future__ import annotations

import argparse
import glob as globmod
import hashlib
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .data import Dataset, combine_multilingual, load_dataset, load_lexicon, stratified_kfold
from .evaluation import MetricsReport, ablation_grid, emit_report, write_predictions, zero_shot_eval
from .model import load_checkpoint
from .training import TrainConfig, run_cv

_CONFIG_TYPES = {f.name: f.type for f in fields(TrainConfig)}

# (flag, TrainConfig field, type) for every tunable exposed on train/ablate
_CONFIG_FLAGS = [
    ("--hidden-size", "hidden_size", int),
    ("--num-layers", "num_layers", int),
    ("--num-heads", "num_heads", int),
    ("--vocab-size", "vocab_size", int),
    ("--epochs", "epochs", int),
    ("--patience", "patience", int),
    ("--batch-size", "batch_size", int),
    ("--learning-rate", "learning_rate", float),
    ("--weight-decay", "weight_decay", float),
    ("--dropout", "dropout", float),
    ("--max-len", "max_token_length", int),
    ("--lambda", "trade_off_weight", float),
    ("--lambda-adv", "adv_trade_off_weight", float),
    ("--tau", "temperature", float),
    ("--tau-adv", "adv_temperature", float),
    ("--fgm-radius", "perturbation_radius", float),
    ("--fgm-rate", "perturbation_rate", float),
    ("--max-prefix-tokens", "max_prefix_tokens", int),
    ("--seed", "seed", int),
]


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` configuration file with TrainConfig keys."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, raw = stripped.partition("=")
        if not eq:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown configuration key: {key}")
        kind = _CONFIG_TYPES[key]
        try:
            if kind in (bool, "bool"):
                values[key] = _parse_bool(raw)
            elif kind in (int, "int"):
                values[key] = int(raw)
            elif kind in (float, "float"):
                values[key] = float(raw)
            else:
                values[key] = raw
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {err}") from None
    return values


def _parse_tagged_path(raw: str) -> tuple[str, Path]:
    """``LANG=PATH`` or a bare path whose stem becomes the language code."""
    if "=" in raw:
        lang, _, path = raw.partition("=")
        if not lang or not path:
            raise ValueError(f"expected LANG=PATH, got {raw!r}")
        return lang, Path(path)
    path = Path(raw)
    return path.stem, path


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_datasets(specs) -> tuple[Dataset, dict[str, str]]:
    datasets, digests = [], {}
    for raw in specs:
        lang, path = _parse_tagged_path(raw)
        datasets.append(load_dataset(path, language=lang))
        digests[str(path)] = _digest(path)
    return combine_multilingual(datasets), digests


def _load_lexicons(specs) -> tuple[dict, dict[str, str], dict[str, str]]:
    lexicons, digests, paths = {}, {}, {}
    for raw in specs or ():
        lang, path = _parse_tagged_path(raw)
        lexicons[lang] = load_lexicon(path, lang)
        digests[str(path)] = _digest(path)
        paths[lang] = str(path)
    return lexicons, digests, paths


def _resolve_config(args) -> TrainConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for _, dest, _ in _CONFIG_FLAGS:
        flag_value = getattr(args, dest, None)
        if flag_value is not None:
            values[dest] = flag_value
    if getattr(args, "no_lexicon", False):
        values["use_lexicon"] = False
    if getattr(args, "reduction", None):
        values["reduction"] = args.reduction
    if getattr(args, "positives_from", None):
        values["positives_from"] = args.positives_from
    if getattr(args, "dtype", None):
        values["dtype"] = args.dtype
    if getattr(args, "stratify_by_language", False):
        values["stratify_by_language"] = True
    if getattr(args, "no_class_weights", False):
        values["class_weighting"] = False
    return TrainConfig.from_dict(values)


def _runs_dir(args) -> Path:
    if getattr(args, "runs_dir", None):
        return Path(args.runs_dir)
    return Path(os.environ.get("SACL_RUNS_DIR", "runs"))


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_manifest(path: Path, *, command, config: TrainConfig | None, inputs, seed, run_id=None, lexicon_paths=None):
    payload = {
        "artifact_version": __version__,
        "command": list(command),
        "config": config.to_dict() if config else None,
        "inputs": inputs,
        "lexicons": lexicon_paths or {},
        "seed": seed,
        "run_id": run_id,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical_json(payload), encoding="utf-8")


def _prepare_run_dir(args, config: TrainConfig) -> tuple[Path, str]:
    run_id = args.run_id or f"run-{config.fingerprint()}"
    run_dir = _runs_dir(args) / run_id
    if run_dir.exists() and not args.force:
        raise ValueError(f"run directory already exists: {run_dir} (use --force to overwrite)")
    return run_dir, run_id


def cmd_splits(args) -> int:
    dataset, digests = _load_datasets(args.train)
    folds = stratified_kfold(dataset, args.k, args.seed, by_language=args.stratify_by_language)
    payload = {
        "artifact_version": __version__,
        "command": list(args._argv),
        "k": args.k,
        "seed": args.seed,
        "stratify_by_language": args.stratify_by_language,
        "languages": sorted(dataset.languages),
        "n_examples": len(dataset),
        "inputs": digests,
        "folds": [
            {
                "fold_index": fold.fold_index,
                "train_ids": list(fold.train_ids),
                "val_ids": list(fold.val_ids),
            }
            for fold in folds
        ],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_canonical_json(payload), encoding="utf-8")
    print(f"wrote {args.k}-fold manifest for {len(dataset)} examples to {out}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    dataset, digests = _load_datasets(args.train)
    lexicons, lex_digests, lex_paths = _load_lexicons(args.lexicon)
    digests.update(lex_digests)
    run_dir, run_id = _prepare_run_dir(args, config)

    folds = [args.fold] if args.fold is not None else None
    cv = run_cv(
        dataset,
        config,
        args.k,
        lexicons=lexicons or None,
        folds=folds,
        run_dir=run_dir,
        parallel=args.parallel_folds,
    )
    _write_manifest(
        run_dir / "manifest.json",
        command=args._argv,
        config=config,
        inputs=digests,
        seed=config.seed,
        run_id=run_id,
        lexicon_paths=lex_paths,
    )
    for fold in cv.folds:
        print(f"fold {fold.fold_index}: val weighted-F1 {fold.report.weighted_f1:.4f}")
    print(f"mean val weighted-F1 {cv.mean_val_weighted_f1:.4f}")
    print(f"run directory: {run_dir}")
    return 0


def cmd_zeroshot(args) -> int:
    run_dir = Path(args.run)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"not a run directory (missing config.json): {run_dir}")
    config = TrainConfig.from_dict(json.loads(config_path.read_text(encoding="utf-8")))

    checkpoints = sorted(run_dir.glob("fold*/checkpoint.pt"))
    if not checkpoints:
        raise FileNotFoundError(f"no fold checkpoints under {run_dir}")
    models = [load_checkpoint(p)[0] for p in checkpoints]

    lang, path = _parse_tagged_path(args.target)
    target = load_dataset(path, language=lang)
    digests = {str(path): _digest(path)}

    manifest_path = run_dir / "manifest.json"
    lex_specs = list(args.lexicon or ())
    if manifest_path.exists():
        recorded = json.loads(manifest_path.read_text(encoding="utf-8")).get("lexicons", {})
        given = {spec.partition("=")[0] for spec in lex_specs}
        lex_specs.extend(
            f"{lang_code}={lex_path}"
            for lang_code, lex_path in recorded.items()
            if lang_code not in given and Path(lex_path).exists()
        )
    lexicons, lex_digests, lex_paths = _load_lexicons(lex_specs)
    digests.update(lex_digests)

    report, preds = zero_shot_eval(models, target, config, lexicons=lexicons or None)
    out = Path(args.out) if args.out else run_dir / f"zeroshot-{lang}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    emit_report([report], out)
    write_predictions(target.ids(), preds, out / "predictions.tsv")
    _write_manifest(
        out / "manifest.json",
        command=args._argv,
        config=config,
        inputs=digests,
        seed=config.seed,
        lexicon_paths=lex_paths,
    )
    if report.subtask != "zero-shot":
        print(
            f"warning: target language {lang!r} was part of training; "
            f"report tagged {report.subtask!r}",
            file=sys.stderr,
        )
    print(f"{report.subtask} weighted-F1 on {lang}: {report.weighted_f1:.4f}")
    print(f"wrote metrics to {out}")
    return 0


def cmd_ablate(args) -> int:
    config = _resolve_config(args)
    train, digests = _load_datasets(args.train)
    test_lang, test_path = _parse_tagged_path(args.test)
    test = load_dataset(test_path, language=test_lang)
    digests[str(test_path)] = _digest(test_path)
    lexicons, lex_digests, lex_paths = _load_lexicons(args.lexicon)
    digests.update(lex_digests)
    run_dir, run_id = _prepare_run_dir(args, config)

    folds = [args.fold] if args.fold is not None else None
    reports = ablation_grid(
        train,
        test,
        config,
        lexicons=lexicons or None,
        k=args.k,
        folds=folds,
        run_root=run_dir,
    )
    emit_report(list(reports.values()), run_dir)
    (run_dir / "ablation_summary.json").write_text(
        _canonical_json(
            {
                name: {
                    "config_hash": report.config_hash,
                    "weighted_f1": report.weighted_f1,
                }
                for name, report in reports.items()
            }
        ),
        encoding="utf-8",
    )
    _write_manifest(
        run_dir / "manifest.json",
        command=args._argv,
        config=config,
        inputs=digests,
        seed=config.seed,
        run_id=run_id,
        lexicon_paths=lex_paths,
    )
    for name, report in reports.items():
        print(f"{name}: weighted-F1 {report.weighted_f1:.4f}")
    print(f"run directory: {run_dir}")
    return 0


def _reports_from_file(path: Path) -> list[MetricsReport]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return []
    if not isinstance(payload, dict):
        return []
    if "weighted_f1" in payload:
        return [MetricsReport.from_dict(payload)]
    if "report" in payload and isinstance(payload["report"], dict):
        return [MetricsReport.from_dict(payload["report"])]
    if "reports" in payload and isinstance(payload["reports"], list):
        return [MetricsReport.from_dict(entry) for entry in payload["reports"]]
    return []


def cmd_report(args) -> int:
    candidates: list[Path] = []
    for raw in args.paths:
        path = Path(raw)
        if path.is_dir():
            candidates.extend(sorted(path.rglob("metrics.json")))
            candidates.extend(sorted(path.rglob("scores.json")))
        elif path.is_file():
            candidates.append(path)
        else:
            candidates.extend(Path(hit) for hit in sorted(globmod.glob(raw)))
    reports: list[MetricsReport] = []
    for path in dict.fromkeys(candidates):
        reports.extend(_reports_from_file(path))
    if not reports:
        raise ValueError(f"no metrics found under: {', '.join(args.paths)}")
    out = Path(args.out)
    written = emit_report(reports, out)
    print(f"merged {len(reports)} report(s) into {out}")
    return 0 if written else 2


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    for flag, dest, kind in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)
    parser.add_argument("--reduction", choices=("sum", "mean"), default=None)
    parser.add_argument("--positives-from", choices=("gold", "predicted"), default=None)
    parser.add_argument("--dtype", choices=("float32", "float64"), default=None)
    parser.add_argument("--no-lexicon", action="store_true", help="bypass lexicon prefixes")
    parser.add_argument("--no-class-weights", action="store_true")
    parser.add_argument("--stratify-by-language", action="store_true")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train", action="append", required=True, metavar="LANG=PATH",
                        help="training TSV; repeat per language")
    parser.add_argument("--lexicon", action="append", metavar="LANG=PATH")
    parser.add_argument("--k", type=int, default=5, help="number of folds")
    parser.add_argument("--fold", type=int, default=None,
                        help="train only this fold index (single-fold mode)")
    parser.add_argument("--parallel-folds", type=int, default=1,
                        help="train folds as N parallel jobs")
    parser.add_argument("--runs-dir", default=None,
                        help="run root (default: $SACL_RUNS_DIR or ./runs)")
    parser.add_argument("--run-id", default=None)
    parser.add_argument("--force", action="store_true",
                        help="allow writing into an existing run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sacl",
        description="Lexicon-prefixed adversarial contrastive sentiment training",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_splits = sub.add_parser("splits", help="write a stratified fold manifest")
    p_splits.add_argument("--train", action="append", required=True, metavar="LANG=PATH")
    p_splits.add_argument("--k", type=int, default=5)
    p_splits.add_argument("--seed", type=int, default=0)
    p_splits.add_argument("--stratify-by-language", action="store_true")
    p_splits.add_argument("--out", default="folds.json")
    p_splits.set_defaults(func=cmd_splits)

    p_train = sub.add_parser("train", help="cross-validated training run")
    _add_run_flags(p_train)
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_zero = sub.add_parser("zeroshot", help="evaluate a run on an unseen language")
    p_zero.add_argument("--run", required=True, help="run directory from `sacl train`")
    p_zero.add_argument("--target", required=True, metavar="LANG=PATH")
    p_zero.add_argument("--lexicon", action="append", metavar="LANG=PATH")
    p_zero.add_argument("--out", default=None)
    p_zero.set_defaults(func=cmd_zeroshot)

    p_ablate = sub.add_parser("ablate", help="run the four-way component ablation")
    _add_run_flags(p_ablate)
    _add_config_flags(p_ablate)
    p_ablate.add_argument("--test", required=True, metavar="LANG=PATH",
                          help="held-out TSV scored by every variant")
    p_ablate.set_defaults(func=cmd_ablate)

    p_report = sub.add_parser("report", help="merge metrics files into one table")
    p_report.add_argument("paths", nargs="+", help="run directories, metrics files, or globs")
    p_report.add_argument("--out", default="report")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = argv
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry_point() -> None:
    raise SystemExit(main())
