"""Dataset and lexicon ingestion, multilingual combination, stratified folds, class weights.

File formats (both UTF-8, LF or CRLF):

* dataset TSV: mandatory header row, default columns ``ID<TAB>tweet<TAB>label``
  (remappable through a ``schema`` dict);
* lexicon TSV: headerless ``phrase<TAB>polarity`` rows, polarity restricted to
  positive/negative.
"""
from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

POLARITIES = ("positive", "negative", "neutral")
LEXICON_POLARITIES = ("positive", "negative")

DEFAULT_SCHEMA = {"id": "ID", "text": "tweet", "label": "label"}


@dataclass(frozen=True)
class Example:
    """One labeled tweet."""

    id: str
    text: str
    label: str
    language: str

    def __post_init__(self):
        if self.label not in POLARITIES:
            raise ValueError(f"unknown label {self.label!r}; expected one of {POLARITIES}")
        if not self.text.strip():
            raise ValueError(f"example {self.id!r} has empty text")
        if not self.id:
            raise ValueError("example id must be non-empty")
        if not self.language:
            raise ValueError(f"example {self.id!r} has empty language code")


@dataclass
class Dataset:
    """An ordered collection of examples with unique ids."""

    examples: list[Example] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise ValueError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)

    @property
    def languages(self) -> frozenset[str]:
        return frozenset(ex.language for ex in self.examples)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def by_id(self) -> dict[str, Example]:
        return {ex.id: ex for ex in self.examples}

    def label_counts(self) -> dict[str, int]:
        counts = Counter(ex.label for ex in self.examples)
        return {label: counts.get(label, 0) for label in POLARITIES}

    def subset(self, ids: Iterable[str]) -> "Dataset":
        """Examples with the given ids, in this dataset's order."""
        wanted = set(ids)
        missing = wanted - set(self.ids())
        if missing:
            raise KeyError(f"ids not in dataset: {sorted(missing)[:5]}")
        return Dataset([ex for ex in self.examples if ex.id in wanted])


@dataclass(frozen=True)
class LexiconEntry:
    phrase: str
    polarity: str

    def __post_init__(self):
        if not self.phrase.strip():
            raise ValueError("lexicon phrase must be non-empty")
        if self.polarity not in LEXICON_POLARITIES:
            raise ValueError(
                f"lexicon polarity must be one of {LEXICON_POLARITIES}, got {self.polarity!r}"
            )


@dataclass(frozen=True)
class Lexicon:
    language: str
    entries: tuple[LexiconEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(self.entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], language: str = "und") -> "Lexicon":
        return cls(language, _dedup_entries(LexiconEntry(p, pol) for p, pol in pairs))


@dataclass(frozen=True)
class FoldSplit:
    """One cross-validation fold; ids are stored sorted for stable serialization."""

    fold_index: int
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]

    def __post_init__(self):
        overlap = set(self.train_ids) & set(self.val_ids)
        if overlap:
            raise ValueError(f"train/val overlap in fold {self.fold_index}: {sorted(overlap)[:5]}")


@dataclass(frozen=True)
class LabelWeights:
    positive: float
    negative: float
    neutral: float

    def __post_init__(self):
        for label in POLARITIES:
            if getattr(self, label) <= 0:
                raise ValueError(f"weight for {label!r} must be positive")

    def as_dict(self) -> dict[str, float]:
        return {label: getattr(self, label) for label in POLARITIES}

    def as_list(self) -> list[float]:
        return [getattr(self, label) for label in POLARITIES]


def _read_rows(path: Path) -> list[list[str]]:
    text = path.read_text(encoding="utf-8")
    rows = []
    for line in text.splitlines():
        rows.append(line.split("\t"))
    return rows


def load_dataset(path, *, language: str, schema: Mapping[str, str] | None = None) -> Dataset:
    """Parse a tab-separated dataset file into a Dataset, preserving row order.

    ``schema`` maps the logical columns ``id``/``text``/``label`` onto header
    names; the defaults follow the common ``ID<TAB>tweet<TAB>label`` layout.
    Malformed rows, unknown labels, and duplicate ids are hard errors that
    name the offending row.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)
    rows = _read_rows(path)
    if not rows or rows == [[""]]:
        raise ValueError(f"{path}: empty file, expected a header row")
    header = rows[0]
    try:
        idx = {key: header.index(colmap[key]) for key in ("id", "text", "label")}
    except ValueError:
        raise ValueError(
            f"{path}: header {header!r} is missing one of the columns "
            f"{sorted(colmap.values())}"
        ) from None
    examples: list[Example] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if row == [""]:
            continue  # trailing blank line
        if len(row) != len(header):
            raise ValueError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
            )
        ex_id, text, label = row[idx["id"]], row[idx["text"]], row[idx["label"]]
        if label not in POLARITIES:
            raise ValueError(
                f"{path}:{lineno}: unknown label {label!r}; expected one of {POLARITIES}"
            )
        if ex_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate id {ex_id!r}")
        seen.add(ex_id)
        try:
            examples.append(Example(id=ex_id, text=text, label=label, language=language))
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: {err}") from None
    return Dataset(examples)


def save_dataset(dataset: Dataset, path, schema: Mapping[str, str] | None = None) -> None:
    """Write a Dataset back to the TSV layout accepted by :func:`load_dataset`."""
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)
    lines = ["\t".join([colmap["id"], colmap["text"], colmap["label"]])]
    for ex in dataset:
        for value in (ex.id, ex.text):
            if "\t" in value or "\n" in value or "\r" in value:
                raise ValueError(f"example {ex.id!r} contains a tab or newline; not TSV-safe")
        lines.append(f"{ex.id}\t{ex.text}\t{ex.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _dedup_entries(entries: Iterable[LexiconEntry]) -> tuple[LexiconEntry, ...]:
    by_phrase: dict[str, LexiconEntry] = {}
    for entry in entries:
        key = entry.phrase.lower()
        prior = by_phrase.get(key)
        if prior is None:
            by_phrase[key] = entry
        elif prior.polarity != entry.polarity:
            warnings.warn(
                f"lexicon phrase {entry.phrase!r} listed with conflicting polarities; "
                f"keeping {prior.polarity!r}",
                stacklevel=3,
            )
    return tuple(by_phrase.values())


def load_lexicon(path, language: str) -> Lexicon:
    """Parse a headerless ``phrase<TAB>polarity`` file, deduplicating case-insensitively."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"lexicon file not found: {path}")
    entries: list[LexiconEntry] = []
    for lineno, row in enumerate(_read_rows(path), start=1):
        if row == [""]:
            continue
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        phrase, polarity = row[0].strip(), row[1].strip()
        try:
            entries.append(LexiconEntry(phrase=phrase, polarity=polarity))
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: {err}") from None
    return Lexicon(language, _dedup_entries(entries))


def combine_multilingual(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate per-language datasets, preserving per-source order.

    Raw ids are kept when they are already pairwise disjoint (so combining a
    single dataset is the identity); otherwise every id is prefixed with its
    language code as ``<lang>:<id>``. A collision that survives prefixing is a
    hard error.
    """
    if not datasets:
        raise ValueError("need at least one dataset to combine")
    all_ids = [ex.id for ds in datasets for ex in ds]
    prefix = len(set(all_ids)) != len(all_ids)
    examples: list[Example] = []
    seen: set[str] = set()
    for ds in datasets:
        for ex in ds:
            new_id = f"{ex.language}:{ex.id}" if prefix else ex.id
            if new_id in seen:
                raise ValueError(f"id collision after language prefixing: {new_id!r}")
            seen.add(new_id)
            examples.append(
                ex if new_id == ex.id else Example(new_id, ex.text, ex.label, ex.language)
            )
    return Dataset(examples)


def _strata(dataset: Dataset, by_language: bool):
    keys: dict[tuple, list[str]] = {}
    for ex in dataset:
        key = (ex.language, ex.label) if by_language else (ex.label,)
        keys.setdefault(key, []).append(ex.id)
    # fixed iteration order: language alphabetical, label in polarity order
    def rank(key):
        label = key[-1]
        return key[:-1] + (POLARITIES.index(label),)

    return {key: keys[key] for key in sorted(keys, key=rank)}


def stratified_kfold(
    dataset: Dataset, k: int, seed: int, *, by_language: bool = False
) -> list[FoldSplit]:
    """Split a dataset into k stratified folds.

    Stratifies on the label (optionally jointly on language and label). The
    shuffle runs over ids sorted canonically, so reordering rows in the input
    file does not change the splits. Deterministic for fixed (ids, k, seed).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    strata = _strata(dataset, by_language)
    for key, ids in strata.items():
        if len(ids) < k:
            name = key[0] if len(key) == 1 else "/".join(key)
            raise ValueError(
                f"stratum {name!r} has only {len(ids)} examples; need at least k={k}"
            )
    rng = np.random.default_rng(seed)
    val_sets: list[set[str]] = [set() for _ in range(k)]
    for ids in strata.values():
        ordered = sorted(ids)
        perm = rng.permutation(len(ordered))
        shuffled = [ordered[i] for i in perm]
        for fold_index, chunk in enumerate(np.array_split(shuffled, k)):
            val_sets[fold_index].update(chunk.tolist())
    all_ids = set(dataset.ids())
    return [
        FoldSplit(
            fold_index=i,
            train_ids=tuple(sorted(all_ids - val)),
            val_ids=tuple(sorted(val)),
        )
        for i, val in enumerate(val_sets)
    ]


def compute_label_weights(dataset: Dataset) -> LabelWeights:
    """Inverse-frequency class weights w_c = N_total / (|Y| * N_c)."""
    counts = dataset.label_counts()
    missing = [label for label, n in counts.items() if n == 0]
    if missing:
        raise ValueError(f"cannot weight labels absent from the data: {missing}")
    total = len(dataset)
    return LabelWeights(
        **{label: total / (len(POLARITIES) * counts[label]) for label in POLARITIES}
    )
