"""Lexicon-prefixed adversarial contrastive training for low-resource
multilingual sentiment classification."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    Example,
    FoldSplit,
    LabelWeights,
    Lexicon,
    LexiconEntry,
    POLARITIES,
    combine_multilingual,
    compute_label_weights,
    load_dataset,
    load_lexicon,
    save_dataset,
    stratified_kfold,
)
from .encoder import CompactTextEncoder, HashingTokenizer, PooledTextEncoder, TokenSequence
from .estimator import SaclSentimentClassifier
from .evaluation import (
    MetricsReport,
    ablation_grid,
    ablation_variants,
    build_report,
    confusion_matrix,
    emit_report,
    per_class_stats,
    weighted_f1,
    write_predictions,
    zero_shot_eval,
)
from .lexicon import PrefixSpec, build_prefix, compose_input, match_lexicon
from .model import SentimentModel, load_checkpoint, save_checkpoint
from .objective import (
    ClassifierHead,
    LossConfig,
    ce_loss,
    classifier_logits,
    fgm_perturbation,
    predict,
    sacl_loss,
    scl_loss,
    soft_scl_loss,
)
from .training import (
    EarlyStopper,
    TrainConfig,
    derive_seed,
    ensemble_predict,
    predict_examples,
    run_cv,
    train_fold,
    train_model,
    train_step,
)

__all__ = [
    "POLARITIES",
    "ClassifierHead",
    "CompactTextEncoder",
    "Dataset",
    "EarlyStopper",
    "Example",
    "FoldSplit",
    "HashingTokenizer",
    "LabelWeights",
    "Lexicon",
    "LexiconEntry",
    "LossConfig",
    "MetricsReport",
    "PooledTextEncoder",
    "PrefixSpec",
    "SaclSentimentClassifier",
    "SentimentModel",
    "TokenSequence",
    "TrainConfig",
    "ablation_grid",
    "ablation_variants",
    "build_prefix",
    "build_report",
    "ce_loss",
    "classifier_logits",
    "combine_multilingual",
    "compose_input",
    "compute_label_weights",
    "confusion_matrix",
    "derive_seed",
    "emit_report",
    "ensemble_predict",
    "fgm_perturbation",
    "load_checkpoint",
    "load_dataset",
    "load_lexicon",
    "match_lexicon",
    "per_class_stats",
    "predict",
    "predict_examples",
    "run_cv",
    "sacl_loss",
    "save_checkpoint",
    "save_dataset",
    "scl_loss",
    "soft_scl_loss",
    "stratified_kfold",
    "train_fold",
    "train_model",
    "train_step",
    "weighted_f1",
    "write_predictions",
    "zero_shot_eval",
]
