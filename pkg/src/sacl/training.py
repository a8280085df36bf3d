"""Training orchestration: per-step double forward/backward (clean branch plus
an optional adversarial branch on perturbed embeddings), decoupled-weight-decay
Adam updates, early stopping on validation weighted-F1, and k-fold runs.

All randomness derives from one master seed through :func:`derive_seed`, which
hashes (seed, stream labels) so each consumer (parameter init, per-epoch
shuffles, the adversarial-branch coin, dropout) gets an independent,
reproducible stream.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .data import (
    Dataset,
    Example,
    FoldSplit,
    LabelWeights,
    Lexicon,
    compute_label_weights,
    stratified_kfold,
)
from .encoder import TokenSequence, collate
from .evaluation import MetricsReport, build_report, weighted_f1
from .lexicon import prefixed_segments
from .model import SentimentModel, build_model, save_checkpoint
from .objective import (
    LossConfig,
    encode_labels,
    fgm_perturbation,
    predict,
    sacl_loss,
    soft_scl_loss,
    weights_tensor,
)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def derive_seed(seed: int, *parts) -> int:
    """Derive an independent 32-bit stream seed from a master seed and labels."""
    key = ":".join([str(seed), *map(str, parts)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


@dataclass
class TrainConfig:
    """Full run configuration; field names double as config-file keys."""

    # capacity
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    vocab_size: int = 32768
    # optimization
    epochs: int = 10
    patience: int = 3
    batch_size: int = 128
    learning_rate: float = 1e-5
    weight_decay: float = 1e-2
    dropout: float = 0.2
    max_token_length: int = 250
    # objective
    trade_off_weight: float = 0.1
    temperature: float = 0.1
    adv_trade_off_weight: float = 0.1
    adv_temperature: float = 0.1
    perturbation_radius: float = 5.0
    perturbation_rate: float = 1.0
    reduction: str = "sum"
    positives_from: str = "gold"
    class_weighting: bool = True
    # input composition
    use_lexicon: bool = True
    max_prefix_tokens: int = 64
    # plumbing
    stratify_by_language: bool = False
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1 or self.patience < 1:
            raise ValueError("epochs and patience must be >= 1")
        if self.patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}")
        LossConfig(**self._loss_kwargs())  # validates the objective fields

    def _loss_kwargs(self) -> dict:
        return {
            "scl_weight": self.trade_off_weight,
            "temperature": self.temperature,
            "adv_scl_weight": self.adv_trade_off_weight,
            "adv_temperature": self.adv_temperature,
            "fgm_radius": self.perturbation_radius,
            "fgm_rate": self.perturbation_rate,
            "reduction": self.reduction,
            "positives_from": self.positives_from,
        }

    def loss_config(self, label_weights: LabelWeights | None = None) -> LossConfig:
        return LossConfig(**self._loss_kwargs(), label_weights=label_weights)

    def torch_dtype(self) -> torch.dtype:
        return DTYPES[self.dtype]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown configuration key(s): {', '.join(unknown)}")
        return cls(**values)

    def replace(self, **changes) -> "TrainConfig":
        merged = self.to_dict()
        merged.update(changes)
        return TrainConfig.from_dict(merged)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def build_model_from_config(config: TrainConfig, seed: int | None = None) -> SentimentModel:
    return build_model(
        vocab_size=config.vocab_size,
        hidden_size=config.hidden_size,
        num_layers=config.num_layers,
        num_heads=config.num_heads,
        dropout=config.dropout,
        max_len=config.max_token_length,
        max_prefix_tokens=config.max_prefix_tokens,
        seed=config.seed if seed is None else seed,
        dtype=config.torch_dtype(),
    )


def _lexicon_for(lexicons, language: str) -> Lexicon | None:
    if lexicons is None:
        return None
    if isinstance(lexicons, Lexicon):
        return lexicons
    return lexicons.get(language)


def example_tokens(
    example: Example,
    model: SentimentModel,
    *,
    use_lexicon: bool,
    lexicons=None,
    max_prefix_tokens: int = 64,
) -> TokenSequence:
    """Compose (optional lexicon prefix, text) and tokenize for the model."""
    lexicon = _lexicon_for(lexicons, example.language) if use_lexicon else None
    segments = prefixed_segments(example.text, lexicon, max_prefix_tokens)
    return model.tokenize(segments)


def make_batch(
    examples: Sequence[Example],
    model: SentimentModel,
    config: TrainConfig,
    lexicons=None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(ids, mask, targets) tensors for a list of examples."""
    sequences = [
        example_tokens(
            ex,
            model,
            use_lexicon=config.use_lexicon,
            lexicons=lexicons,
            max_prefix_tokens=config.max_prefix_tokens,
        )
        for ex in examples
    ]
    ids, mask = collate(sequences, dtype=model.dtype)
    targets = encode_labels([ex.label for ex in examples])
    return ids, mask, targets


@dataclass
class StepLosses:
    clean: float
    adversarial: float | None
    total: float
    adversarial_applied: bool


def _check_finite(loss: torch.Tensor, *, step: int, branch: str, model: SentimentModel):
    if torch.isfinite(loss):
        return
    grad_norm = sum(
        float(p.grad.norm()) for p in model.parameters() if p.grad is not None
    )
    raise RuntimeError(
        f"non-finite loss at step {step}, branch {branch!r} "
        f"(accumulated gradient norm {grad_norm:.4g})"
    )


def train_step(
    model: SentimentModel,
    batch: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    optimizer: torch.optim.Optimizer,
    loss_cfg: LossConfig,
    adv_rng: np.random.Generator | None = None,
    step: int = 0,
) -> StepLosses:
    """One optimization step: clean soft-SCL backward, then (with probability
    ``fgm_rate``) an adversarial soft-SCL backward on perturbed embeddings
    whose gradients accumulate with the clean ones, then a single optimizer
    update. The perturbation itself is derived from the clean branch's
    embedding gradient and is never written into any parameter."""
    ids, mask, targets = batch
    weights = weights_tensor(loss_cfg.label_weights, model.dtype)

    optimizer.zero_grad()
    emb = model.embed(ids)
    emb.retain_grad()
    logits = model.head(model.encode_from_embeddings(emb, mask))
    clean = soft_scl_loss(
        logits,
        targets,
        weights=weights,
        scl_weight=loss_cfg.scl_weight,
        temperature=loss_cfg.temperature,
        reduction=loss_cfg.reduction,
        positives_from=loss_cfg.positives_from,
    )
    _check_finite(clean, step=step, branch="clean", model=model)
    clean.backward()

    if loss_cfg.fgm_rate >= 1.0:
        apply_adv = True
    elif loss_cfg.fgm_rate <= 0.0:
        apply_adv = False
    else:
        if adv_rng is None:
            raise ValueError("fractional perturbation rate needs an RNG")
        apply_adv = bool(adv_rng.random() < loss_cfg.fgm_rate)

    adv_detached = None
    if apply_adv:
        perturbation = fgm_perturbation(emb.grad.detach(), loss_cfg.fgm_radius)
        adv_emb = model.embed(ids) + perturbation
        adv_logits = model.head(model.encode_from_embeddings(adv_emb, mask))
        adv = soft_scl_loss(
            adv_logits,
            targets,
            weights=weights,
            scl_weight=loss_cfg.adv_scl_weight,
            temperature=loss_cfg.adv_temperature,
            reduction=loss_cfg.reduction,
            positives_from=loss_cfg.positives_from,
        )
        _check_finite(adv, step=step, branch="adversarial", model=model)
        adv.backward()
        adv_detached = adv.detach()

    total = float(sacl_loss(clean.detach(), adv_detached))
    optimizer.step()
    return StepLosses(
        clean=float(clean.detach()),
        adversarial=None if adv_detached is None else float(adv_detached),
        total=total,
        adversarial_applied=apply_adv,
    )


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_score = float("-inf")
        self.best_epoch: int | None = None
        self.since_improvement = 0

    def update(self, epoch: int, score: float) -> bool:
        """Record an epoch score; returns True when it improved on the best."""
        if score > self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            self.since_improvement = 0
            return True
        self.since_improvement += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.since_improvement >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    clean_loss: float
    adversarial_loss: float | None
    adversarial_steps: int
    val_weighted_f1: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: SentimentModel
    history: list[EpochRecord]
    best_epoch: int | None
    best_score: float | None
    stopped_early: bool
    label_weights: LabelWeights | None


def predict_logits(
    model: SentimentModel,
    examples: Sequence[Example],
    config: TrainConfig,
    lexicons=None,
) -> np.ndarray:
    """Evaluation-mode logits for a list of examples, batched; no updates."""
    was_training = model.training
    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(examples), config.batch_size):
            ids, mask, _ = make_batch(
                examples[start : start + config.batch_size], model, config, lexicons
            )
            chunks.append(model(ids, mask).cpu().numpy())
    if was_training:
        model.train()
    return np.concatenate(chunks, axis=0)


def predict_examples(
    model: SentimentModel,
    examples: Sequence[Example],
    config: TrainConfig,
    lexicons=None,
) -> list[str]:
    return predict(predict_logits(model, examples, config, lexicons))


def ensemble_predict(
    models: Sequence[SentimentModel],
    examples: Sequence[Example],
    config: TrainConfig,
    lexicons=None,
) -> list[str]:
    """Majority vote across models; ties break toward the polarity order."""
    if not models:
        raise ValueError("need at least one model to predict")
    votes = np.zeros((len(examples), 3), dtype=np.int64)
    index = {label: i for i, label in enumerate(("positive", "negative", "neutral"))}
    for model in models:
        for row, label in enumerate(predict_examples(model, examples, config, lexicons)):
            votes[row, index[label]] += 1
    return predict(votes.astype(np.float64))


def train_model(
    model: SentimentModel,
    train_examples: Sequence[Example],
    config: TrainConfig,
    *,
    lexicons=None,
    eval_examples: Sequence[Example] | None = None,
    label_weights: LabelWeights | None = None,
    seed_key: tuple = (),
    log: list[str] | None = None,
) -> TrainResult:
    """Run the epoch loop; with an eval set, early-stop on weighted-F1 and
    restore the best snapshot before returning."""
    if not train_examples:
        raise ValueError("empty training partition")
    if label_weights is None and config.class_weighting:
        label_weights = compute_label_weights(Dataset(list(train_examples)))
    loss_cfg = config.loss_config(label_weights)
    model.train_languages = frozenset(ex.language for ex in train_examples)

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    torch.manual_seed(derive_seed(config.seed, "dropout", *seed_key))
    adv_rng = np.random.default_rng(derive_seed(config.seed, "fgm", *seed_key))

    golds = [ex.label for ex in eval_examples] if eval_examples else None
    stopper = EarlyStopper(config.patience)
    best_state = None
    history: list[EpochRecord] = []
    stopped_early = False

    for epoch in range(1, config.epochs + 1):
        shuffle_rng = np.random.default_rng(
            derive_seed(config.seed, "shuffle", *seed_key, epoch)
        )
        order = shuffle_rng.permutation(len(train_examples))
        model.train()
        clean_sum, adv_sum, adv_steps = 0.0, 0.0, 0
        for step_index, start in enumerate(range(0, len(order), config.batch_size)):
            chosen = [train_examples[i] for i in order[start : start + config.batch_size]]
            batch = make_batch(chosen, model, config, lexicons)
            losses = train_step(model, batch, optimizer, loss_cfg, adv_rng, step=step_index)
            clean_sum += losses.clean
            if losses.adversarial is not None:
                adv_sum += losses.adversarial
                adv_steps += 1

        n_batches = max(1, -(-len(order) // config.batch_size))
        record = EpochRecord(
            epoch=epoch,
            clean_loss=clean_sum / n_batches,
            adversarial_loss=(adv_sum / adv_steps) if adv_steps else None,
            adversarial_steps=adv_steps,
            val_weighted_f1=None,
        )
        if eval_examples:
            preds = predict_examples(model, eval_examples, config, lexicons)
            record.val_weighted_f1 = weighted_f1(preds, golds)
            if stopper.update(epoch, record.val_weighted_f1):
                best_state = copy.deepcopy(model.state_dict())
        history.append(record)
        if log is not None:
            log.append(
                f"epoch {epoch}: clean={record.clean_loss:.6f} "
                f"adv={record.adversarial_loss if record.adversarial_loss is not None else '-'} "
                f"val_wf1={record.val_weighted_f1 if record.val_weighted_f1 is not None else '-'}"
            )
        if eval_examples and stopper.should_stop:
            stopped_early = True
            if log is not None:
                log.append(
                    f"early stop after epoch {epoch} "
                    f"(best epoch {stopper.best_epoch}: {stopper.best_score:.6f})"
                )
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    return TrainResult(
        model=model,
        history=history,
        best_epoch=stopper.best_epoch if eval_examples else None,
        best_score=stopper.best_score if eval_examples else None,
        stopped_early=stopped_early,
        label_weights=label_weights,
    )


@dataclass
class FoldResult:
    fold_index: int
    result: TrainResult
    report: MetricsReport

    @property
    def model(self) -> SentimentModel:
        return self.result.model


def train_fold(
    dataset: Dataset,
    fold: FoldSplit,
    config: TrainConfig,
    lexicons=None,
    label_weights: LabelWeights | None = None,
    log: list[str] | None = None,
) -> FoldResult:
    """Train one fold: fit on its train ids, early-stop on its validation ids."""
    by_id = dataset.by_id()
    train_examples = [by_id[i] for i in dataset.ids() if i in set(fold.train_ids)]
    val_examples = [by_id[i] for i in dataset.ids() if i in set(fold.val_ids)]
    if not train_examples or not val_examples:
        raise ValueError(f"fold {fold.fold_index} has an empty partition")
    # class weights follow the full train+validation pool, not the fold slice
    if label_weights is None and config.class_weighting:
        label_weights = compute_label_weights(dataset)

    model = build_model_from_config(
        config, seed=derive_seed(config.seed, "init", fold.fold_index)
    )
    result = train_model(
        model,
        train_examples,
        config,
        lexicons=lexicons,
        eval_examples=val_examples,
        label_weights=label_weights,
        seed_key=("fold", fold.fold_index),
        log=log,
    )
    preds = predict_examples(model, val_examples, config, lexicons)
    report = build_report(
        preds,
        [ex.label for ex in val_examples],
        subtask="validation",
        language="+".join(sorted({ex.language for ex in val_examples})),
        config_hash=config.fingerprint(),
        seed=config.seed,
    )
    return FoldResult(fold_index=fold.fold_index, result=result, report=report)


@dataclass
class CvResult:
    folds: list[FoldResult]
    splits: list[FoldSplit]
    mean_val_weighted_f1: float

    @property
    def models(self) -> list[SentimentModel]:
        return [fold.model for fold in self.folds]

    def summary(self, config: TrainConfig) -> dict:
        return {
            "config_hash": config.fingerprint(),
            "seed": config.seed,
            "k": len(self.splits),
            "trained_folds": [f.fold_index for f in self.folds],
            "folds": [
                {
                    "fold_index": f.fold_index,
                    "best_epoch": f.result.best_epoch,
                    "val_weighted_f1": f.report.weighted_f1,
                }
                for f in self.folds
            ],
            "mean_val_weighted_f1": self.mean_val_weighted_f1,
        }


def _fold_job(dataset, split, config_dict, lexicons, label_weights, run_dir):
    """Self-contained fold training for parallel execution in a worker process."""
    config = TrainConfig.from_dict(config_dict)
    log: list[str] = []
    fold_result = train_fold(dataset, split, config, lexicons, label_weights, log=log)
    if run_dir is not None:
        _write_fold_artifacts(Path(run_dir), fold_result, log)
    return fold_result


def run_cv(
    dataset: Dataset,
    config: TrainConfig,
    k: int = 5,
    *,
    lexicons=None,
    folds: Sequence[int] | None = None,
    run_dir=None,
    parallel: int = 1,
) -> CvResult:
    """Cross-validated training; each fold starts from the same seed schedule.

    ``folds`` restricts training to a subset of fold indices (single-fold mode
    uses ``folds=[0]``). With ``run_dir`` set, per-fold checkpoints, metrics
    and logs are written under ``<run_dir>/fold<i>/`` plus a top-level
    ``summary.json`` and ``config.json``. ``parallel`` > 1 trains folds as
    independent worker processes; each fold's random streams are keyed by its
    index, so the results match the sequential ones.
    """
    splits = stratified_kfold(
        dataset, k, config.seed, by_language=config.stratify_by_language
    )
    wanted = list(range(k)) if folds is None else sorted(folds)
    label_weights = compute_label_weights(dataset) if config.class_weighting else None

    run_dir_arg = None if run_dir is None else str(run_dir)
    if parallel > 1 and len(wanted) > 1:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=parallel, mp_context=ctx) as pool:
            futures = [
                pool.submit(
                    _fold_job,
                    dataset,
                    splits[index],
                    config.to_dict(),
                    lexicons,
                    label_weights,
                    run_dir_arg,
                )
                for index in wanted
            ]
            results = sorted(
                (future.result() for future in futures), key=lambda f: f.fold_index
            )
    else:
        results = [
            _fold_job(dataset, splits[index], config.to_dict(), lexicons, label_weights, run_dir_arg)
            for index in wanted
        ]

    mean_score = float(np.mean([f.report.weighted_f1 for f in results]))
    cv = CvResult(folds=results, splits=splits, mean_val_weighted_f1=mean_score)
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_json(run_dir / "config.json", config.to_dict())
        _write_json(run_dir / "summary.json", cv.summary(config))
    return cv


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_fold_artifacts(run_dir: Path, fold: FoldResult, log: list[str]) -> None:
    fold_dir = run_dir / f"fold{fold.fold_index}"
    fold_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        fold.model,
        fold_dir / "checkpoint.pt",
        extra={
            "fold_index": fold.fold_index,
            "best_epoch": fold.result.best_epoch,
            "label_weights": fold.result.label_weights.as_dict()
            if fold.result.label_weights
            else None,
        },
    )
    _write_json(
        fold_dir / "metrics.json",
        {
            "fold_index": fold.fold_index,
            "best_epoch": fold.result.best_epoch,
            "history": [record.to_dict() for record in fold.result.history],
            "report": fold.report.to_dict(),
        },
    )
    (fold_dir / "log.txt").write_text("\n".join(log) + "\n", encoding="utf-8")
