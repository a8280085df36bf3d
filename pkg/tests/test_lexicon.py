import pytest

from oracles import match_all_spans
from sacl.data import Lexicon
from sacl.lexicon import (
    PrefixSpec,
    build_prefix,
    compose_input,
    match_lexicon,
    parse_prefix,
    prefixed_segments,
    segment_text,
)

SIMPLE = Lexicon.from_pairs([("good", "positive"), ("bad", "negative")])


class TestMatchLexicon:
    def test_basic_matches_in_text_order(self):
        assert match_lexicon("good day, bad luck", SIMPLE) == [
            ("good", "positive"),
            ("bad", "negative"),
        ]

    def test_no_hits(self):
        assert match_lexicon("nothing to see here", SIMPLE) == []

    def test_longest_match_wins_vs_oracle(self):
        lex = Lexicon.from_pairs([("not good", "negative"), ("good", "positive")])
        text = "not good enough"
        got = match_lexicon(text, lex)
        assert got == [("not good", "negative")]
        assert got == match_all_spans(text, [(e.phrase, e.polarity) for e in lex])

    def test_random_texts_match_exhaustive_oracle(self):
        import random

        rng = random.Random(7)
        words = ["alpha", "beta", "gamma", "delta", "eps"]
        pairs = [
            ("alpha", "positive"),
            ("alpha beta", "negative"),
            ("beta gamma delta", "positive"),
            ("delta", "negative"),
            ("gamma", "positive"),
        ]
        lex = Lexicon.from_pairs(pairs)
        for _ in range(200):
            text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 12)))
            assert match_lexicon(text, lex) == match_all_spans(text, pairs), text

    def test_case_insensitive_and_boundary_aware(self):
        assert match_lexicon("GOOD goodness", SIMPLE) == [("good", "positive")]

    def test_casing_of_text_does_not_change_output(self):
        text = "Good day, BAD luck"
        assert match_lexicon(text, SIMPLE) == match_lexicon(text.lower(), SIMPLE)

    def test_idempotent(self):
        text = "good bad good"
        assert match_lexicon(text, SIMPLE) == match_lexicon(text, SIMPLE)


class TestBuildPrefix:
    def test_two_groups(self):
        spec = build_prefix([("good", "positive"), ("bad", "negative")])
        assert spec.render() == "positive: good | negative: bad"

    def test_empty(self):
        assert build_prefix([]).render() == ""

    def test_single_group(self):
        spec = build_prefix([("great", "positive"), ("fine", "positive")])
        assert spec.render() == "positive: great, fine"

    def test_duplicates_within_group_collapse(self):
        spec = build_prefix([("good", "positive"), ("good", "positive")])
        assert spec.render() == "positive: good"

    def test_only_matched_polarities_appear(self):
        spec = build_prefix([("bad", "negative")])
        assert [polarity for polarity, _ in spec.groups] == ["negative"]

    def test_budget_truncates_whole_phrases_from_tail(self):
        matches = [(f"word{i}", "positive") for i in range(30)]
        spec = build_prefix(matches, max_prefix_tokens=10)
        rendered = spec.render()
        assert len(segment_text(rendered)) <= 10
        # kept phrases are an untouched head of the original list
        kept = rendered.removeprefix("positive: ").split(", ")
        assert kept == [f"word{i}" for i in range(len(kept))]

    def test_budget_respected_over_random_inputs(self):
        import random

        rng = random.Random(3)
        for _ in range(50):
            matches = [
                (f"w{rng.randint(0, 40)}", rng.choice(["positive", "negative"]))
                for _ in range(rng.randint(0, 40))
            ]
            spec = build_prefix(matches, max_prefix_tokens=16)
            assert len(segment_text(spec.render())) <= 16


class TestComposeInput:
    def test_two_segments(self):
        assert compose_input("positive: good", "good day") == ["positive: good", "good day"]

    def test_empty_prefix_is_identity(self):
        assert compose_input("", "hello") == ["hello"]

    def test_over_budget_prefix_truncated_at_phrase_boundary(self):
        prefix = build_prefix([(f"tok{i}", "positive") for i in range(40)], 200).render()
        segments = compose_input(prefix, "the text", max_prefix_tokens=12)
        assert segments[1] == "the text"
        assert len(segment_text(segments[0])) <= 12
        assert parse_prefix(segments[0], 12).groups  # still well-formed

    def test_render_parse_round_trip(self):
        spec = build_prefix(
            [("good", "positive"), ("not bad", "positive"), ("awful", "negative")]
        )
        assert parse_prefix(spec.render(), spec.max_prefix_tokens) == PrefixSpec(
            spec.groups, spec.max_prefix_tokens
        )


class TestPrefixedSegments:
    def test_full_pipeline(self):
        assert prefixed_segments("a good day", SIMPLE) == ["positive: good", "a good day"]

    def test_no_lexicon_equals_plain_text(self):
        assert prefixed_segments("a good day", None) == ["a good day"]

    def test_empty_lexicon_equals_no_lexicon(self):
        empty = Lexicon.from_pairs([])
        assert prefixed_segments("a good day", empty) == ["a good day"]
