import os
from pathlib import Path

import numpy as np
import pytest

from conftest import make_dataset
from sacl.data import (
    POLARITIES,
    Dataset,
    Example,
    combine_multilingual,
    compute_label_weights,
    load_dataset,
    load_lexicon,
    save_dataset,
    stratified_kfold,
)

ROWS = [("1", "good day", "positive"), ("2", "bad luck", "negative"), ("3", "plain text", "neutral")]


class TestLoadDataset:
    def test_parses_rows_in_order(self, write_tsv):
        ds = load_dataset(write_tsv(ROWS), language="hau")
        assert [ex.id for ex in ds] == ["1", "2", "3"]
        assert [ex.label for ex in ds] == ["positive", "negative", "neutral"]
        assert ds.languages == {"hau"}

    def test_unknown_label_names_row(self, write_tsv):
        path = write_tsv([("1", "hello", "positive"), ("2", "hmm", "mixed")])
        with pytest.raises(ValueError, match=r":3: unknown label 'mixed'"):
            load_dataset(path, language="hau")

    def test_duplicate_id_is_an_error(self, write_tsv):
        path = write_tsv([("1", "a b", "positive"), ("1", "c d", "negative")])
        with pytest.raises(ValueError, match="duplicate id '1'"):
            load_dataset(path, language="hau")

    def test_malformed_row_names_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("ID\ttweet\tlabel\n1\tonly two cols\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bad.tsv:2"):
            load_dataset(path, language="hau")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.tsv"):
            load_dataset(tmp_path / "nope.tsv", language="hau")

    def test_custom_schema(self, tmp_path):
        path = tmp_path / "alt.tsv"
        path.write_text("key\tsentiment\tbody\na\tpositive\thello there\n", encoding="utf-8")
        ds = load_dataset(
            path, language="ibo", schema={"id": "key", "text": "body", "label": "sentiment"}
        )
        assert ds.examples[0] == Example("a", "hello there", "positive", "ibo")

    def test_crlf_tolerated(self, tmp_path):
        path = tmp_path / "crlf.tsv"
        path.write_bytes(b"ID\ttweet\tlabel\r\n1\thi there\tpositive\r\n")
        assert len(load_dataset(path, language="hau")) == 1

    def test_empty_text_rejected(self, write_tsv):
        path = write_tsv([("1", "   ", "positive")])
        with pytest.raises(ValueError, match=":2"):
            load_dataset(path, language="hau")

    def test_round_trip(self, write_tsv, tmp_path):
        ds = load_dataset(write_tsv(ROWS), language="hau")
        out = tmp_path / "copy.tsv"
        save_dataset(ds, out)
        assert load_dataset(out, language="hau") == ds

    @pytest.mark.skipif(
        "SACL_AFRISENTI_DIR" not in os.environ,
        reason="needs user-supplied AfriSenti data (set SACL_AFRISENTI_DIR)",
    )
    def test_real_hausa_train_file_size(self):
        path = Path(os.environ["SACL_AFRISENTI_DIR"]) / "hau_train.tsv"
        assert len(load_dataset(path, language="hau")) == 14173


class TestLoadLexicon:
    def test_two_entries(self, write_lexicon):
        lex = load_lexicon(write_lexicon([("good", "positive"), ("bad", "negative")]), "hau")
        assert len(lex) == 2
        assert lex.language == "hau"

    def test_duplicates_collapse(self, write_lexicon):
        lex = load_lexicon(
            write_lexicon([("good", "positive"), ("good", "positive"), ("GOOD", "positive")]),
            "hau",
        )
        assert len(lex) == 1

    def test_neutral_polarity_rejected(self, write_lexicon):
        path = write_lexicon([("ok", "neutral")])
        with pytest.raises(ValueError, match="polarity"):
            load_lexicon(path, "hau")

    def test_conflicting_polarity_keeps_first_and_warns(self, write_lexicon):
        path = write_lexicon([("odd", "positive"), ("odd", "negative")])
        with pytest.warns(UserWarning, match="conflicting"):
            lex = load_lexicon(path, "hau")
        assert lex.entries[0].polarity == "positive"

    def test_multiword_phrases_kept_intact(self, write_lexicon):
        lex = load_lexicon(write_lexicon([("not good", "negative")]), "hau")
        assert lex.entries[0].phrase == "not good"


class TestCombineMultilingual:
    def test_concatenation_and_union(self):
        hau = make_dataset(["positive", "negative"], language="hau", prefix="h")
        ibo = make_dataset(["positive", "negative", "neutral"], language="ibo", prefix="i")
        combined = combine_multilingual([hau, ibo])
        assert len(combined) == 5
        assert combined.languages == {"hau", "ibo"}
        assert combined.ids()[:2] == hau.ids()

    def test_single_dataset_identity(self):
        ds = make_dataset(["positive", "negative"], language="hau")
        assert combine_multilingual([ds]) == ds

    def test_colliding_ids_get_language_prefixes(self):
        a = make_dataset(["positive"], language="hau", prefix="same")
        b = make_dataset(["negative"], language="ibo", prefix="same")
        combined = combine_multilingual([a, b])
        assert combined.ids() == ["hau:same0000", "ibo:same0000"]

    def test_collision_within_language_is_fatal(self):
        a = make_dataset(["positive"], language="hau", prefix="same")
        b = make_dataset(["negative"], language="hau", prefix="same")
        with pytest.raises(ValueError, match="collision"):
            combine_multilingual([a, b])

    def test_twelve_languages(self):
        sets = [
            make_dataset(["positive", "negative", "neutral"], language=f"l{i:02d}", prefix=f"p{i}-")
            for i in range(12)
        ]
        combined = combine_multilingual(sets)
        assert len(combined.languages) == 12
        assert len(combined) == sum(len(s) for s in sets)


class TestStratifiedKfold:
    def test_exact_divisibility(self):
        ds = make_dataset(["positive"] * 60 + ["negative"] * 40)
        folds = stratified_kfold(ds, 5, seed=7)
        by_id = ds.by_id()
        for fold in folds:
            labels = [by_id[i].label for i in fold.val_ids]
            assert labels.count("positive") == 12
            assert labels.count("negative") == 8

    def test_deterministic(self):
        ds = make_dataset(["positive"] * 30 + ["negative"] * 25 + ["neutral"] * 20)
        assert stratified_kfold(ds, 5, seed=3) == stratified_kfold(ds, 5, seed=3)

    def test_file_order_does_not_matter(self):
        labels = ["positive"] * 12 + ["negative"] * 13 + ["neutral"] * 11
        ds = make_dataset(labels)
        shuffled = Dataset(list(reversed(ds.examples)))
        assert stratified_kfold(ds, 4, seed=5) == stratified_kfold(shuffled, 4, seed=5)

    def test_uneven_counts_within_one_of_ideal(self):
        # 61/39 split at k=5: per-fold val counts must sit within +-1 of
        # 12.2 and 7.8; verified by brute-force counting over the folds
        ds = make_dataset(["positive"] * 61 + ["negative"] * 39)
        folds = stratified_kfold(ds, 5, seed=11)
        by_id = ds.by_id()
        for fold in folds:
            labels = [by_id[i].label for i in fold.val_ids]
            assert abs(labels.count("positive") - 61 / 5) < 1
            assert abs(labels.count("negative") - 39 / 5) < 1

    def test_partition_invariants(self):
        ds = make_dataset(["positive"] * 23 + ["negative"] * 17 + ["neutral"] * 19)
        folds = stratified_kfold(ds, 4, seed=0)
        everything = set(ds.ids())
        for fold in folds:
            train, val = set(fold.train_ids), set(fold.val_ids)
            assert train | val == everything
            assert not train & val
        # each id is validated on by exactly one fold
        all_val = [i for fold in folds for i in fold.val_ids]
        assert sorted(all_val) == sorted(everything)

    def test_small_category_is_named(self):
        ds = make_dataset(["positive"] * 10 + ["negative"] * 10 + ["neutral"] * 3)
        with pytest.raises(ValueError, match="neutral"):
            stratified_kfold(ds, 5, seed=0)

    def test_k_below_two_rejected(self):
        ds = make_dataset(["positive"] * 5 + ["negative"] * 5 + ["neutral"] * 5)
        with pytest.raises(ValueError, match="k must be"):
            stratified_kfold(ds, 1, seed=0)

    def test_joint_language_label_stratification(self):
        sets = [
            make_dataset(["positive"] * 10 + ["negative"] * 10, language=lang, prefix=lang)
            for lang in ("aaa", "bbb")
        ]
        ds = combine_multilingual(sets)
        folds = stratified_kfold(ds, 5, seed=1, by_language=True)
        by_id = ds.by_id()
        for fold in folds:
            pairs = [(by_id[i].language, by_id[i].label) for i in fold.val_ids]
            for lang in ("aaa", "bbb"):
                for label in ("positive", "negative"):
                    assert pairs.count((lang, label)) == 2


class TestLabelWeights:
    def test_inverse_frequency_formula(self):
        ds = make_dataset(["positive"] * 50 + ["negative"] * 30 + ["neutral"] * 20)
        w = compute_label_weights(ds)
        assert w.positive == pytest.approx(100 / 150)
        assert w.negative == pytest.approx(100 / 90)
        assert w.neutral == pytest.approx(100 / 60)

    def test_balanced_counts_give_unit_weights(self):
        ds = make_dataset(["positive"] * 30 + ["negative"] * 30 + ["neutral"] * 30)
        assert compute_label_weights(ds).as_list() == [1.0, 1.0, 1.0]

    def test_extreme_imbalance_cross_checked(self):
        ds = make_dataset(["positive"] + ["negative"] + ["neutral"] * 98)
        w = compute_label_weights(ds)
        # independent recomputation of N_total / (3 * N_c)
        for label, count in (("positive", 1), ("negative", 1), ("neutral", 98)):
            assert getattr(w, label) == pytest.approx(100 / (3 * count), rel=1e-12)
        assert w.neutral == pytest.approx(0.3401, abs=5e-5)

    def test_weight_normalization_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            counts = rng.integers(1, 200, size=3)
            labels = [l for label, n in zip(POLARITIES, counts) for l in [label] * int(n)]
            ds = make_dataset(labels)
            w = compute_label_weights(ds)
            total = sum(w.as_dict()[label] * int(n) for label, n in zip(POLARITIES, counts))
            assert total == pytest.approx(len(ds), rel=1e-12)

    def test_missing_category_is_fatal(self):
        ds = make_dataset(["positive"] * 5 + ["negative"] * 5)
        with pytest.raises(ValueError, match="neutral"):
            compute_label_weights(ds)
