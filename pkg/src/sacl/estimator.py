"""Scikit-learn estimator facade over the training stack.

``SaclSentimentClassifier`` follows the usual conventions (constructor stores
hyperparameters untouched, ``fit`` returns self, fitted attributes carry a
trailing underscore), so it composes with pipelines, cloning and grid search.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .data import POLARITIES, Example
from .training import (
    TrainConfig,
    build_model_from_config,
    predict_logits,
    train_model,
)


def check_text_array(X, name: str = "X") -> list[str]:
    """Validate an array-like of non-empty strings."""
    texts = list(X)
    if not texts:
        raise ValueError(f"{name} is empty")
    for i, text in enumerate(texts):
        if not isinstance(text, str) or not text.strip():
            raise ValueError(f"{name}[{i}] must be a non-empty string, got {text!r}")
    return texts


def check_label_array(y, n: int) -> list[str]:
    labels = list(y)
    if len(labels) != n:
        raise ValueError(f"y has {len(labels)} entries for {n} texts")
    for i, label in enumerate(labels):
        if label not in POLARITIES:
            raise ValueError(f"y[{i}] = {label!r}; expected one of {POLARITIES}")
    return labels


def _as_examples(texts, labels, languages, prefix: str) -> list[Example]:
    if languages is None:
        languages = ["und"] * len(texts)
    elif isinstance(languages, str):
        languages = [languages] * len(texts)
    else:
        languages = list(languages)
        if len(languages) != len(texts):
            raise ValueError(f"languages has {len(languages)} entries for {len(texts)} texts")
    return [
        Example(id=f"{prefix}{i}", text=text, label=label, language=lang)
        for i, (text, label, lang) in enumerate(zip(texts, labels, languages))
    ]


class SaclSentimentClassifier(BaseEstimator, ClassifierMixin):
    """Three-way sentiment classifier trained with the composite contrastive
    plus adversarial objective and optional lexicon-prefixed inputs.

    Parameters mirror :class:`~sacl.training.TrainConfig`; ``lexicons`` maps
    language codes to :class:`~sacl.data.Lexicon` objects (or is one lexicon
    applied to every language).
    """

    def __init__(
        self,
        hidden_size=64,
        num_layers=2,
        num_heads=4,
        vocab_size=32768,
        epochs=10,
        patience=3,
        batch_size=128,
        learning_rate=1e-5,
        weight_decay=1e-2,
        dropout=0.2,
        max_token_length=250,
        trade_off_weight=0.1,
        temperature=0.1,
        adv_trade_off_weight=0.1,
        adv_temperature=0.1,
        perturbation_radius=5.0,
        perturbation_rate=1.0,
        reduction="sum",
        positives_from="gold",
        class_weighting=True,
        use_lexicon=True,
        max_prefix_tokens=64,
        stratify_by_language=False,
        seed=0,
        dtype="float32",
        lexicons=None,
    ):
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.vocab_size = vocab_size
        self.epochs = epochs
        self.patience = patience
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.max_token_length = max_token_length
        self.trade_off_weight = trade_off_weight
        self.temperature = temperature
        self.adv_trade_off_weight = adv_trade_off_weight
        self.adv_temperature = adv_temperature
        self.perturbation_radius = perturbation_radius
        self.perturbation_rate = perturbation_rate
        self.reduction = reduction
        self.positives_from = positives_from
        self.class_weighting = class_weighting
        self.use_lexicon = use_lexicon
        self.max_prefix_tokens = max_prefix_tokens
        self.stratify_by_language = stratify_by_language
        self.seed = seed
        self.dtype = dtype
        self.lexicons = lexicons

    def _config(self) -> TrainConfig:
        params = {
            key: value
            for key, value in self.get_params().items()
            if key != "lexicons"
        }
        return TrainConfig.from_dict(params)

    def fit(self, X, y, languages=None, eval_set=None):
        """Train on texts X with polarity labels y.

        ``eval_set`` is an optional ``(X_val, y_val)`` or
        ``(X_val, y_val, languages_val)`` tuple enabling early stopping on
        validation weighted-F1; without it the model trains a fixed number of
        epochs.
        """
        texts = check_text_array(X)
        labels = check_label_array(y, len(texts))
        train_examples = _as_examples(texts, labels, languages, "train-")

        eval_examples = None
        if eval_set is not None:
            X_val, y_val, *rest = eval_set
            val_texts = check_text_array(X_val, "eval_set[0]")
            val_labels = check_label_array(y_val, len(val_texts))
            eval_examples = _as_examples(
                val_texts, val_labels, rest[0] if rest else None, "val-"
            )

        config = self._config()
        model = build_model_from_config(config)
        result = train_model(
            model,
            train_examples,
            config,
            lexicons=self.lexicons,
            eval_examples=eval_examples,
        )
        self.model_ = model
        self.config_ = config
        self.classes_ = np.array(POLARITIES)
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.label_weights_ = result.label_weights
        self.train_languages_ = model.train_languages
        return self

    def _predict_logits(self, X, languages) -> np.ndarray:
        check_is_fitted(self, "model_")
        texts = check_text_array(X)
        examples = _as_examples(texts, ["neutral"] * len(texts), languages, "pred-")
        return predict_logits(self.model_, examples, self.config_, self.lexicons)

    def predict(self, X, languages=None) -> np.ndarray:
        """Predicted polarity per text; ties break toward the polarity order."""
        logits = self._predict_logits(X, languages)
        return self.classes_[logits.argmax(axis=1)]

    def predict_proba(self, X, languages=None) -> np.ndarray:
        """Softmax probabilities in the fixed polarity column order."""
        logits = self._predict_logits(X, languages)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)
