import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixpath.kg import (
    BadRatios,
    KgError,
    MalformedLine,
    Relation,
    Triple,
    TripleStore,
    UnknownRelation,
    normalize_event,
    parse_kg_tsv,
    synth_kg,
)


def _store(*rows):
    return TripleStore.from_triples([Triple(h, r, t) for h, r, t in rows])


class TestRelations:
    def test_nine_relations_with_stable_codes(self):
        assert [r.name for r in Relation] == [
            "xIntent", "xNeed", "xAttr", "xReact", "xWant",
            "xEffect", "oReact", "oWant", "oEffect",
        ]
        assert [int(r) for r in Relation] == list(range(9))


class TestParse:
    def test_single_record(self):
        store = parse_kg_tsv(io.BytesIO(b"X puts trust in Y\txWant\tto develop a relationship\n"))
        assert len(store) == 1
        t = store.triples[0]
        assert t == Triple("x puts trust in y", Relation.xWant, "to develop a relationship")

    def test_empty_stream(self):
        assert len(parse_kg_tsv(io.BytesIO(b""))) == 0

    def test_none_tail_skipped_and_counted(self):
        store = parse_kg_tsv(io.StringIO("e\txWant\tnone\n"))
        assert len(store) == 0
        assert store.skipped_count == 1

    def test_none_tail_case_insensitive(self):
        store = parse_kg_tsv(io.StringIO("e\txWant\tNoNe\ne\txWant\t   \n"))
        assert len(store) == 0
        assert store.skipped_count == 2

    def test_wrong_field_count(self):
        with pytest.raises(MalformedLine) as err:
            parse_kg_tsv(io.StringIO("a\txWant\n"))
        assert err.value.line_no == 1

    def test_unknown_relation_reports_line_and_token(self):
        with pytest.raises(UnknownRelation) as err:
            parse_kg_tsv(io.StringIO("a\txWant\tb\nc\tbogus\td\n"))
        assert err.value.line_no == 2
        assert err.value.token == "bogus"

    def test_relation_strings_case_sensitive(self):
        with pytest.raises(UnknownRelation):
            parse_kg_tsv(io.StringIO("a\txwant\tb\n"))

    def test_empty_head_rejected(self):
        with pytest.raises(MalformedLine):
            parse_kg_tsv(io.StringIO("  \txWant\tb\n"))

    def test_normalization(self):
        assert normalize_event("  A   Big\tEVENT ") == "a big event"

    def test_roundtrip_tsv(self):
        store = synth_kg(3, (1, 3), seed=9)
        reparsed = parse_kg_tsv(io.StringIO(store.to_tsv_bytes().decode("utf-8")))
        assert reparsed == store


class TestOutputSets:
    def test_hand_grouping(self):
        store = _store(("a", Relation.xWant, "t1"), ("a", Relation.xWant, "t2"),
                       ("a", Relation.xAttr, "t3"))
        assert store.output_sets() == [
            ("a", Relation.xWant, ["t1", "t2"]),
            ("a", Relation.xAttr, ["t3"]),
        ]

    def test_empty_store(self):
        assert TripleStore.from_triples([]).output_sets() == []

    def test_duplicate_triple_deduplicated(self):
        store = _store(("a", Relation.xWant, "t1"), ("a", Relation.xWant, "t1"))
        assert store.output_sets() == [("a", Relation.xWant, ["t1"])]
        assert store.duplicate_count == 1

    def test_groups_reconstitute_store(self):
        store = synth_kg(5, (1, 4), seed=3)
        rebuilt = [
            Triple(h, r, t) for h, r, tails in store.output_sets() for t in tails
        ]
        assert TripleStore.from_triples(rebuilt) == store


class TestSplit:
    def _hundred_heads(self):
        triples = []
        for i in range(100):
            head = f"head number {i}"
            triples.append(Triple(head, Relation.xWant, f"tail a {i}"))
            triples.append(Triple(head, Relation.xNeed, f"tail b {i}"))
        return TripleStore.from_triples(triples)

    def test_split_sizes_by_head(self):
        store = self._hundred_heads()
        train, dev, test = store.split((0.8, 0.1, 0.1), seed=7)
        assert (len(train.heads()), len(dev.heads()), len(test.heads())) == (80, 10, 10)

    def test_all_in_train(self):
        store = self._hundred_heads()
        train, dev, test = store.split((1.0, 0.0, 0.0), seed=7)
        assert len(train) == len(store) and len(dev) == 0 and len(test) == 0

    def test_deterministic(self):
        store = self._hundred_heads()
        a = store.split((0.8, 0.1, 0.1), seed=11)
        b = store.split((0.8, 0.1, 0.1), seed=11)
        assert all(x == y for x, y in zip(a, b))

    def test_partition_of_heads(self):
        store = synth_kg(20, (1, 2), seed=0)
        train, dev, test = store.split((0.5, 0.25, 0.25), seed=13)
        sets = [set(s.heads()) for s in (train, dev, test)]
        assert sets[0] | sets[1] | sets[2] == set(store.heads())
        assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])

    def test_bad_ratios(self):
        store = self._hundred_heads()
        with pytest.raises(BadRatios):
            store.split((0.5, 0.4, 0.2), seed=0)
        with pytest.raises(BadRatios):
            store.split((-0.1, 0.6, 0.5), seed=0)


class TestSynth:
    def test_one_head_fixed_tails(self):
        store = synth_kg(1, (3, 3), seed=0)
        sets = store.output_sets()
        assert len(sets) == 9
        for _, _, tails in sets:
            assert len(tails) == 3
            assert len(set(tails)) == 3

    def test_fifty_heads_tail_range(self):
        store = synth_kg(50, (2, 4), seed=1)
        assert 900 <= len(store) <= 1800
        for _, _, tails in store.output_sets():
            assert 2 <= len(tails) <= 4

    def test_byte_identical_for_same_args(self):
        assert synth_kg(7, (1, 5), seed=4).to_tsv_bytes() == synth_kg(7, (1, 5), seed=4).to_tsv_bytes()

    def test_heads_distinct(self):
        store = synth_kg(300, (1, 1), seed=2)
        assert len(store.heads()) == 300

    def test_argument_validation(self):
        with pytest.raises(KgError):
            synth_kg(0, (1, 1), seed=0)
        with pytest.raises(KgError):
            synth_kg(1, (0, 2), seed=0)
        with pytest.raises(KgError):
            synth_kg(1, (4, 9), seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 50))
def test_roundtrip_property(n_heads, seed):
    store = synth_kg(n_heads, (1, 3), seed=seed)
    assert parse_kg_tsv(io.BytesIO(store.to_tsv_bytes())) == store
