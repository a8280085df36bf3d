"""Scoring and reporting: weighted-F1, per-class precision/recall/F1,
row-normalized confusion matrices, the zero-shot evaluation protocol, the
four-way ablation grid, and deterministic report emission."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import POLARITIES, Dataset

# canonical presentation order for the AfriSenti language codes; anything
# else sorts after these, alphabetically
LANGUAGE_ORDER = (
    "amh", "arq", "hau", "ibo", "kin", "ary", "pt-MZ",
    "pcm", "orm", "swa", "tir", "twi", "tso", "yor",
)

ABLATION_NAMES = ("full", "no_lexicon", "no_sacl", "no_lexicon_no_sacl")


def _resolve_labels(preds, golds, labels) -> tuple[str, ...]:
    if labels is not None:
        return tuple(labels)
    observed = set(preds) | set(golds)
    if observed <= set(POLARITIES):
        return POLARITIES
    return tuple(sorted(observed))


def _check_lengths(preds, golds):
    if len(preds) != len(golds):
        raise ValueError(f"got {len(preds)} predictions for {len(golds)} gold labels")
    if len(golds) == 0:
        raise ValueError("need at least one (prediction, gold) pair")


def confusion_matrix(preds, golds, labels=None, normalize: bool = False) -> np.ndarray:
    """Counts (or row fractions) with gold labels on rows, predictions on columns.

    Rows with zero support stay all-zero under normalization rather than
    dividing by zero.
    """
    _check_lengths(preds, golds)
    ordered = _resolve_labels(preds, golds, labels)
    index = {label: i for i, label in enumerate(ordered)}
    matrix = np.zeros((len(ordered), len(ordered)), dtype=np.int64)
    for pred, gold in zip(preds, golds):
        matrix[index[gold], index[pred]] += 1
    if not normalize:
        return matrix
    totals = matrix.sum(axis=1, keepdims=True)
    return np.divide(
        matrix, totals, out=np.zeros(matrix.shape, dtype=np.float64), where=totals > 0
    )


def per_class_stats(preds, golds, labels=None) -> dict[str, dict[str, float]]:
    """Precision/recall/F1/support per class; zero-support classes score 0."""
    _check_lengths(preds, golds)
    ordered = _resolve_labels(preds, golds, labels)
    matrix = confusion_matrix(preds, golds, ordered)
    stats = {}
    for i, label in enumerate(ordered):
        tp = int(matrix[i, i])
        predicted = int(matrix[:, i].sum())
        support = int(matrix[i, :].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        stats[label] = {"p": precision, "r": recall, "f1": f1, "support": support}
    return stats


def weighted_f1(preds, golds, labels=None) -> float:
    """Support-weighted mean of per-class F1; the task's headline metric."""
    stats = per_class_stats(preds, golds, labels)
    total = sum(s["support"] for s in stats.values())
    return sum(s["f1"] * s["support"] / total for s in stats.values())


@dataclass
class MetricsReport:
    """One evaluation outcome, serializable to the metrics.json schema."""

    subtask: str
    language: str
    weighted_f1: float
    per_class: dict[str, dict[str, float]]
    confusion: list[list[int]]
    confusion_normalized: list[list[float]]
    zero_support: list[str]
    config_hash: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "subtask": self.subtask,
            "language": self.language,
            "weighted_f1": self.weighted_f1,
            "per_class": self.per_class,
            "confusion": self.confusion,
            "confusion_normalized": self.confusion_normalized,
            "zero_support": self.zero_support,
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, values: Mapping) -> "MetricsReport":
        return cls(**{k: values[k] for k in cls.__dataclass_fields__})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(
    preds,
    golds,
    *,
    subtask: str,
    language: str,
    config_hash: str = "",
    seed: int = 0,
) -> MetricsReport:
    stats = per_class_stats(preds, golds, POLARITIES)
    return MetricsReport(
        subtask=subtask,
        language=language,
        weighted_f1=weighted_f1(preds, golds, POLARITIES),
        per_class=stats,
        confusion=confusion_matrix(preds, golds, POLARITIES).tolist(),
        confusion_normalized=confusion_matrix(
            preds, golds, POLARITIES, normalize=True
        ).tolist(),
        zero_support=[label for label in POLARITIES if stats[label]["support"] == 0],
        config_hash=config_hash,
        seed=seed,
    )


def zero_shot_eval(
    models,
    target: Dataset,
    config,
    *,
    lexicons=None,
    train_languages=None,
) -> tuple[MetricsReport, list[str]]:
    """Score a model (or fold ensemble) on an unseen-language dataset.

    No parameters are updated. If any target language was trained on, a
    warning is emitted and the report is tagged ``supervised`` instead of
    ``zero-shot``. Returns (report, predictions in dataset order).
    """
    from . import training  # local import to avoid a module cycle

    if len(target) == 0:
        raise ValueError("empty zero-shot target dataset")
    models = [models] if not isinstance(models, (list, tuple)) else list(models)
    if train_languages is None:
        train_languages = frozenset().union(*(m.train_languages for m in models))
    overlap = sorted(set(target.languages) & set(train_languages))
    subtask = "zero-shot"
    if overlap:
        warnings.warn(
            f"target language(s) {overlap} were trained on; report tagged 'supervised'",
            stacklevel=2,
        )
        subtask = "supervised"

    examples = list(target)
    preds = training.ensemble_predict(models, examples, config, lexicons)
    report = build_report(
        preds,
        [ex.label for ex in examples],
        subtask=subtask,
        language="+".join(sorted(target.languages)),
        config_hash=config.fingerprint(),
        seed=config.seed,
    )
    return report, preds


def ablation_variants(config) -> dict[str, "TrainConfig"]:
    """The four configurations: full, no lexicon, no contrastive/adversarial
    objective (plain class-weighted CE), and neither."""
    no_sacl = {
        "trade_off_weight": 0.0,
        "adv_trade_off_weight": 0.0,
        "perturbation_rate": 0.0,
        "perturbation_radius": 0.0,
    }
    return {
        "full": config.replace(use_lexicon=True),
        "no_lexicon": config.replace(use_lexicon=False),
        "no_sacl": config.replace(use_lexicon=True, **no_sacl),
        "no_lexicon_no_sacl": config.replace(use_lexicon=False, **no_sacl),
    }


def ablation_grid(
    train: Dataset,
    test: Dataset,
    config,
    *,
    lexicons=None,
    k: int = 5,
    folds: Sequence[int] | None = None,
    run_root=None,
    subtask: str = "ablation",
) -> dict[str, MetricsReport]:
    """Train and score each ablation variant on the same data.

    With ``run_root`` set, each variant becomes a run directory underneath it.
    """
    from . import training

    reports: dict[str, MetricsReport] = {}
    for name, variant in ablation_variants(config).items():
        run_dir = None if run_root is None else Path(run_root) / name
        cv = training.run_cv(
            train, variant, k, lexicons=lexicons, folds=folds, run_dir=run_dir
        )
        examples = list(test)
        preds = training.ensemble_predict(cv.models, examples, variant, lexicons)
        reports[name] = build_report(
            preds,
            [ex.label for ex in examples],
            subtask=f"{subtask}:{name}",
            language="+".join(sorted(test.languages)),
            config_hash=variant.fingerprint(),
            seed=variant.seed,
        )
    return reports


def _language_rank(language: str) -> tuple:
    try:
        return (0, LANGUAGE_ORDER.index(language))
    except ValueError:
        return (1, language)


def report_sort_key(report: MetricsReport) -> tuple:
    return (report.subtask, _language_rank(report.language))


def _markdown_table(reports: Sequence[MetricsReport]) -> str:
    header = (
        "| subtask | language | weighted-F1 | "
        + " | ".join(f"{label} F1" for label in POLARITIES)
        + " | N |"
    )
    divider = "|" + "---|" * (len(POLARITIES) + 4)
    lines = [header, divider]
    for report in reports:
        n = sum(s["support"] for s in report.per_class.values())
        cells = [
            report.subtask,
            report.language,
            f"{report.weighted_f1:.4f}",
            *(f"{report.per_class[label]['f1']:.4f}" for label in POLARITIES),
            str(n),
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[MetricsReport], out_dir) -> list[Path]:
    """Write scores.json, summary.md, and one confusion-matrix data file per
    report. Output is byte-deterministic: reports are ordered by (subtask,
    canonical language rank) and JSON keys are sorted."""
    if not reports:
        raise ValueError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(reports, key=report_sort_key)

    written = []
    scores = out_dir / "scores.json"
    scores.write_text(
        json.dumps({"reports": [r.to_dict() for r in ordered]}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    written.append(scores)

    summary = out_dir / "summary.md"
    summary.write_text(_markdown_table(ordered), encoding="utf-8")
    written.append(summary)

    for report in ordered:
        safe = "".join(
            ch if ch.isalnum() or ch in "+-_" else "_"
            for ch in f"{report.subtask}_{report.language}"
        )
        path = out_dir / f"confusion_{safe}.json"
        path.write_text(
            json.dumps(
                {
                    "labels": list(POLARITIES),
                    "matrix": report.confusion,
                    "normalized": report.confusion_normalized,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        written.append(path)
    return written


def write_predictions(ids: Sequence[str], labels: Sequence[str], path) -> Path:
    """Plain ``id<TAB>label`` prediction file, one row per example, no header."""
    if len(ids) != len(labels):
        raise ValueError("ids and labels must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(f"{i}\t{label}\n" for i, label in zip(ids, labels)), encoding="utf-8"
    )
    return path
