"""Synthetic corpora for desk-scale end-to-end runs.

Two generators:

* :func:`toy_corpus` — class-indicative tokens mixed with noise tokens across
  a few synthetic "languages"; any reasonable model should near-solve it.
* :func:`transfer_corpus` — a zero-shot setup where vocabularies are disjoint
  across languages and a planted lexicon is the only cross-language signal:
  without lexicon prefixes the target language is unlearnable, with them the
  shared prefix rendering transfers.
"""
from __future__ import annotations

import numpy as np

from .data import POLARITIES, Dataset, Example, Lexicon

_SHORT = {"positive": "pos", "negative": "neg", "neutral": "neu"}


def _vocab(language: str, kind: str, size: int) -> list[str]:
    return [f"{language}_{kind}_{j}" for j in range(size)]


def _balanced_labels(n: int, rng: np.random.Generator) -> list[str]:
    labels = [POLARITIES[i % 3] for i in range(n)]
    rng.shuffle(labels)
    return labels


def toy_corpus(
    n_train: int = 6000,
    n_test: int = 1500,
    languages: tuple[str, ...] = ("aaa", "bbb", "ccc"),
    seed: int = 0,
    tokens_per_text: int = 10,
    signal_rate: float = 0.3,
    n_indicator_words: int = 12,
    n_noise_words: int = 30,
) -> tuple[Dataset, Dataset]:
    """Balanced 3-class corpus of indicator+noise token strings."""
    rng = np.random.default_rng(seed)
    indicators = {
        (lang, label): _vocab(lang, _SHORT[label], n_indicator_words)
        for lang in languages
        for label in POLARITIES
    }
    noise = {lang: _vocab(lang, "nz", n_noise_words) for lang in languages}

    def make(n: int, tag: str) -> Dataset:
        labels = _balanced_labels(n, rng)
        examples = []
        for i, label in enumerate(labels):
            lang = languages[i % len(languages)]
            n_signal = max(1, rng.binomial(tokens_per_text, signal_rate))
            words = [
                str(rng.choice(indicators[(lang, label)])) for _ in range(n_signal)
            ] + [
                str(rng.choice(noise[lang])) for _ in range(tokens_per_text - n_signal)
            ]
            rng.shuffle(words)
            examples.append(
                Example(
                    id=f"{tag}-{lang}-{i:05d}",
                    text=" ".join(words),
                    label=label,
                    language=lang,
                )
            )
        return Dataset(examples)

    return make(n_train, "train"), make(n_test, "test")


def transfer_corpus(
    n_train_per_language: int = 600,
    n_test: int = 600,
    train_languages: tuple[str, ...] = ("aaa", "bbb"),
    target_language: str = "ccc",
    seed: int = 0,
    tokens_per_text: int = 10,
    n_lexicon_words: int = 12,
    n_noise_words: int = 30,
) -> tuple[Dataset, Dataset, dict[str, Lexicon]]:
    """Zero-shot corpus whose only cross-language signal is the lexicon.

    Every language has its own disjoint vocabulary. Positive/negative examples
    contain one to three words from that language's lexicon; neutral examples
    contain noise words only. Returns (train, target test, lexicons by
    language, target included).
    """
    rng = np.random.default_rng(seed)
    all_languages = (*train_languages, target_language)
    polar_words = {
        (lang, pol): _vocab(lang, _SHORT[pol], n_lexicon_words)
        for lang in all_languages
        for pol in ("positive", "negative")
    }
    noise = {lang: _vocab(lang, "nz", n_noise_words) for lang in all_languages}
    lexicons = {
        lang: Lexicon.from_pairs(
            [(w, "positive") for w in polar_words[(lang, "positive")]]
            + [(w, "negative") for w in polar_words[(lang, "negative")]],
            language=lang,
        )
        for lang in all_languages
    }

    def make(lang: str, n: int, tag: str) -> list[Example]:
        labels = _balanced_labels(n, rng)
        examples = []
        for i, label in enumerate(labels):
            if label == "neutral":
                words = [str(rng.choice(noise[lang])) for _ in range(tokens_per_text)]
            else:
                n_polar = int(rng.integers(1, 4))
                words = [
                    str(rng.choice(polar_words[(lang, label)])) for _ in range(n_polar)
                ] + [
                    str(rng.choice(noise[lang])) for _ in range(tokens_per_text - n_polar)
                ]
                rng.shuffle(words)
            examples.append(
                Example(
                    id=f"{tag}-{lang}-{i:05d}",
                    text=" ".join(words),
                    label=label,
                    language=lang,
                )
            )
        return examples

    train_examples = []
    for lang in train_languages:
        train_examples.extend(make(lang, n_train_per_language, "train"))
    test = Dataset(make(target_language, n_test, "test"))
    return Dataset(train_examples), test, lexicons
