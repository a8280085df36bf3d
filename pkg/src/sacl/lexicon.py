"""Lexicon matching inside tweets and composition of the prefixed encoder input.

A matched lexicon becomes a rendered prefix such as
``positive: good, great | negative: bad`` which is fed to the encoder as a
separate leading segment. An empty prefix degenerates to the plain,
unprefixed input, so disabling lexicons is exactly the same pipeline.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .data import LEXICON_POLARITIES, Lexicon

GROUP_SEPARATOR = " | "
PHRASE_SEPARATOR = ", "
DEFAULT_PREFIX_BUDGET = 64

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def segment_text(text: str) -> list[str]:
    """Split text into word and single-punctuation tokens (casing preserved)."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class PrefixSpec:
    """Polarity-grouped matched phrases plus the token budget they must fit."""

    groups: tuple[tuple[str, tuple[str, ...]], ...]
    max_prefix_tokens: int = DEFAULT_PREFIX_BUDGET

    def render(self) -> str:
        parts = [
            f"{polarity}: {PHRASE_SEPARATOR.join(phrases)}"
            for polarity, phrases in self.groups
            if phrases
        ]
        return GROUP_SEPARATOR.join(parts)


def match_lexicon(text: str, lexicon: Lexicon) -> list[tuple[str, str]]:
    """Find lexicon phrases in the text as (phrase, polarity) pairs in text order.

    Matching is case-insensitive and token-boundary aware; at each position the
    longest phrase wins and the scan resumes after it, so matches never overlap
    and shorter phrases inside a longer match are suppressed. The returned
    phrase is the lexicon's stored form, which keeps prefixes identical across
    text casings.
    """
    by_first: dict[str, list[tuple[tuple[str, ...], str, str]]] = {}
    for entry in lexicon:
        toks = tuple(t.lower() for t in segment_text(entry.phrase))
        if not toks:
            continue
        by_first.setdefault(toks[0], []).append((toks, entry.phrase, entry.polarity))
    for candidates in by_first.values():
        candidates.sort(key=lambda item: len(item[0]), reverse=True)

    tokens = [t.lower() for t in segment_text(text)]
    matches: list[tuple[str, str]] = []
    i = 0
    while i < len(tokens):
        advanced = False
        for toks, phrase, polarity in by_first.get(tokens[i], ()):
            if tuple(tokens[i : i + len(toks)]) == toks:
                matches.append((phrase, polarity))
                i += len(toks)
                advanced = True
                break
        if not advanced:
            i += 1
    return matches


def _prefix_token_count(groups) -> int:
    return len(segment_text(PrefixSpec(groups).render()))


def build_prefix(
    matches: list[tuple[str, str]], max_prefix_tokens: int = DEFAULT_PREFIX_BUDGET
) -> PrefixSpec:
    """Group matches by polarity (positive first) and enforce the token budget.

    Phrases are unique within a group, kept in first-occurrence order. When the
    rendered prefix exceeds the budget, whole phrases are dropped from the tail
    until it fits; truncation never cuts inside a phrase.
    """
    ordered: list[tuple[str, list[str]]] = []
    for polarity in LEXICON_POLARITIES:
        phrases: list[str] = []
        for phrase, pol in matches:
            if pol == polarity and phrase not in phrases:
                phrases.append(phrase)
        if phrases:
            ordered.append((polarity, phrases))

    def freeze(groups: list[tuple[str, list[str]]]):
        return tuple((pol, tuple(ph)) for pol, ph in groups if ph)

    while ordered and _prefix_token_count(freeze(ordered)) > max_prefix_tokens:
        ordered[-1][1].pop()
        if not ordered[-1][1]:
            ordered.pop()
    return PrefixSpec(freeze(ordered), max_prefix_tokens)


def parse_prefix(rendered: str, max_prefix_tokens: int = DEFAULT_PREFIX_BUDGET) -> PrefixSpec:
    """Inverse of :meth:`PrefixSpec.render` for re-applying budgets to rendered strings."""
    if not rendered:
        return PrefixSpec((), max_prefix_tokens)
    groups = []
    for part in rendered.split(GROUP_SEPARATOR):
        polarity, _, joined = part.partition(": ")
        if polarity not in LEXICON_POLARITIES or not joined:
            raise ValueError(f"not a rendered lexicon prefix: {rendered!r}")
        groups.append((polarity, tuple(joined.split(PHRASE_SEPARATOR))))
    return PrefixSpec(tuple(groups), max_prefix_tokens)


def compose_input(
    prefix: str, text: str, max_prefix_tokens: int | None = None
) -> list[str]:
    """Pair the rendered prefix with the tweet as encoder segments.

    Returns ``[prefix, text]``, or just ``[text]`` when the prefix is empty.
    If a token budget is given, an over-long prefix is re-truncated at a phrase
    boundary; the text segment is never touched here.
    """
    if max_prefix_tokens is not None and prefix:
        spec = parse_prefix(prefix, max_prefix_tokens)
        matches = [(ph, pol) for pol, phrases in spec.groups for ph in phrases]
        prefix = build_prefix(matches, max_prefix_tokens).render()
    return [prefix, text] if prefix else [text]


def prefixed_segments(
    text: str,
    lexicon: Lexicon | None,
    max_prefix_tokens: int = DEFAULT_PREFIX_BUDGET,
) -> list[str]:
    """Full pipeline for one tweet: match, build, compose. No lexicon -> plain text."""
    if lexicon is None:
        return [text]
    matches = match_lexicon(text, lexicon)
    return compose_input(build_prefix(matches, max_prefix_tokens).render(), text)
