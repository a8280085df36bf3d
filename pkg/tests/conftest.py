import pytest

from sacl.data import Dataset, Example


@pytest.fixture
def write_tsv(tmp_path):
    """Write a dataset TSV from (id, text, label) rows; returns the path."""

    def _write(rows, name="data.tsv", header="ID\ttweet\tlabel"):
        lines = [header] + [f"{i}\t{t}\t{l}" for i, t, l in rows]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture
def write_lexicon(tmp_path):
    def _write(rows, name="lexicon.tsv"):
        path = tmp_path / name
        path.write_text("".join(f"{p}\t{pol}\n" for p, pol in rows), encoding="utf-8")
        return path

    return _write


def make_dataset(spec, language="und", prefix="x"):
    """Build a Dataset from a list of labels (texts auto-generated) or
    (text, label) pairs."""
    examples = []
    for i, item in enumerate(spec):
        if isinstance(item, str):
            text, label = f"tok{i} filler", item
        else:
            text, label = item
        examples.append(Example(f"{prefix}{i:04d}", text, label, language))
    return Dataset(examples)
