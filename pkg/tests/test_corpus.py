import numpy as np
import pytest

from ouv_classifier import NUM_CLASSES
from ouv_classifier.corpus import (CRITERION_DEFINITIONS, ConfigurationError,
                                   SiteRecord, build_dataset, build_sd_set,
                                   parse_syndication, preprocess,
                                   read_samples, sample_from_json,
                                   sample_to_json, split_sentences,
                                   write_samples)

SYNDICATION_HEADER = "id_no,name_en,criteria_txt,justification_en,short_description_en\n"


def write_csv(tmp_path, rows):
    path = tmp_path / "syndication.csv"
    path.write_text(SYNDICATION_HEADER + "".join(rows), encoding="utf-8")
    return path


class TestSplitSentences:
    def test_one_split_per_terminator(self):
        assert split_sentences("A. B? C!") == ["A.", "B?", "C!"]

    def test_abbreviation_does_not_split(self):
        got = split_sentences("It cost approx. 5 units. Done.")
        assert got == ["It cost approx. 5 units.", "Done."]

    def test_empty_input(self):
        assert split_sentences("   ") == []

    def test_no_terminator_yields_one_sentence(self):
        assert split_sentences("no terminator here") == ["no terminator here"]

    def test_lowercase_continuation_does_not_split(self):
        got = split_sentences("Built in 1850 a.d. by masons. The end.")
        assert got == ["Built in 1850 a.d. by masons.", "The end."]

    # golden outputs of the rule set on a small fixture corpus
    GOLDEN = [
        ("One. Two. Three.", ["One.", "Two.", "Three."]),
        ("The site of St. Mary is old. It stands.",
         ["The site of St. Mary is old.", "It stands."]),
        ("Is it real? Yes! Certainly.",
         ["Is it real?", "Yes!", "Certainly."]),
        ("Trailing space after end. ", ["Trailing space after end."]),
        ("No. 5 was inscribed. Later came no. 6.",
         ["No. 5 was inscribed.", "Later came no. 6."]),
    ]

    @pytest.mark.parametrize("text,expected", GOLDEN)
    def test_golden(self, text, expected):
        assert split_sentences(text) == expected

    def test_non_whitespace_content_preserved(self):
        text = "First part. Second part! Third?"
        joined = "".join(split_sentences(text)).replace(" ", "")
        assert joined == text.replace(" ", "")


class TestPreprocess:
    def test_paper_sample(self):
        got = preprocess("The Counter Reformation of the late 16 th century")
        assert got == ["the", "counter", "reformation", "of", "the", "late",
                       "<num>", "th", "century"]

    def test_accent_fold_and_number(self):
        assert preprocess("Château 3") == ["chateau", "<num>"]

    GOLDEN = [
        ("Ürümqi's old town", ["urumqi", "'", "s", "old", "town"]),
        ("built in 1850, restored 1901",
         ["built", "in", "<num>", ",", "restored", "<num>"]),
        ("an area of 3.5 km", ["an", "area", "of", "<num>", "km"]),
        ("the 16th century", ["the", "<num>", "th", "century"]),
        ("São Tomé and Príncipe", ["sao", "tome", "and", "principe"]),
        ("A UNESCO site (inscribed 1980).",
         ["a", "unesco", "site", "(", "inscribed", "<num>", ")", "."]),
        ("covers 1,200 hectares", ["covers", "<num>", "hectares"]),
        ("façade; naïve décor", ["facade", ";", "naive", "decor"]),
    ]

    @pytest.mark.parametrize("text,expected", GOLDEN)
    def test_golden(self, text, expected):
        assert preprocess(text) == expected

    def test_idempotent(self):
        sentences = [
            "The Château was built in 1850, around 3.5 km of walls.",
            "São Paulo's 16th century façade (restored).",
        ]
        for s in sentences:
            once = preprocess(s)
            assert preprocess(" ".join(once)) == once

    def test_no_uppercase_or_stray_digits(self):
        tokens = preprocess("ABC 123 Déjà 4.5 X9Y")
        for tok in tokens:
            assert tok == tok.lower()
            if tok != "<num>":
                assert not any(ch.isdigit() for ch in tok)


class TestParseSyndication:
    def test_criteria_from_text(self, tmp_path):
        path = write_csv(tmp_path, [
            '394,"Venice and its Lagoon","(i)(ii)(iii)(iv)(v)(vi)",'
            '"Criterion (i): Art. Criterion (ii): Influence.","A lagoon city."\n',
        ])
        sites, errors = parse_syndication(path)
        assert errors == []
        assert len(sites) == 1
        assert sites[0].criteria == frozenset({1, 2, 3, 4, 5, 6})
        assert set(sites[0].justification) == {1, 2}

    def test_row_without_justification_usable_for_sd(self, tmp_path):
        path = write_csv(tmp_path, [
            '10,"Some Site","(vii)","","A short description only."\n',
        ])
        sites, errors = parse_syndication(path)
        assert errors == []
        assert sites[0].justification == {}
        assert sites[0].short_description
        assert build_sd_set(sites)  # usable only by the SD builder

    def test_three_handcrafted_rows(self, tmp_path):
        path = write_csv(tmp_path, [
            '1,"Alpha","(ii)(iv)","Criterion (ii): Interchange of values '
            'over time. Criterion (iv): Outstanding typology example.","Alpha desc."\n',
            '2,"Beta","(vii)","Criterion (vii): Natural beauty of the peaks.","Beta desc."\n',
            '3,"Gamma","(ix)(x)","Criterion (ix): Ecology. Criterion (x): Habitats.",""\n',
        ])
        sites, errors = parse_syndication(path)
        assert errors == []
        expected = [frozenset({2, 4}), frozenset({7}), frozenset({9, 10})]
        assert [s.criteria for s in sites] == expected
        assert [s.site_id for s in sites] == [1, 2, 3]

    def test_malformed_row_collected(self, tmp_path):
        path = write_csv(tmp_path, [
            ',"No id","(i)","Criterion (i): text.","desc"\n',
            '2,"Ok","(i)","Criterion (i): fine text here.","desc"\n',
        ])
        sites, errors = parse_syndication(path)
        assert len(sites) == 1
        assert len(errors) == 1
        assert "line 2" in errors[0]

    def test_missing_column_is_fatal(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id_no,name_en\n1,x\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            parse_syndication(path)


def long_paragraph(n_sentences, word="alpha"):
    sentence = " ".join([word] * 12).capitalize() + "."
    return " ".join([sentence] * n_sentences)


def make_justified_sites(n_sites=10, sentences_each=10):
    sites = []
    for i in range(1, n_sites + 1):
        k = (i % 10) + 1 if (i % 10) + 1 <= 10 else 1
        sites.append(SiteRecord(
            site_id=i, name=f"s{i}",
            justification={k: long_paragraph(sentences_each, f"word{i}")},
            short_description="", criteria=frozenset({k})))
    return sites


class TestBuildDataset:
    def test_exact_ratio_on_round_numbers(self):
        sites = make_justified_sites(10, 10)
        dataset = build_dataset(sites, seed=0)
        # 100 sentences split 80/10/10, then 10 definition sentences in train
        assert len(dataset.valid) == 10
        assert len(dataset.test) == 10
        assert len(dataset.train) == 80 + 10

    def test_determinism(self):
        sites = make_justified_sites(10, 10)
        a = build_dataset(sites, seed=42)
        b = build_dataset(sites, seed=42)
        for split in ("train", "valid", "test"):
            assert [s.tokens for s in a.split(split)] == \
                [s.tokens for s in b.split(split)]

    def test_seed_changes_assignment(self):
        sites = make_justified_sites(10, 10)
        a = build_dataset(sites, seed=1)
        b = build_dataset(sites, seed=2)
        assert [s.site_id for s in a.valid] != [s.site_id for s in b.valid]

    def test_split_proportions_within_one(self):
        sites = make_justified_sites(7, 9)  # 63 sentences
        dataset = build_dataset(sites, seed=3)
        n = 63
        assert abs(len(dataset.valid) - n // 10) <= 1
        assert abs(len(dataset.test) - n // 10) <= 1

    def test_sample_invariants(self):
        sites = make_justified_sites(10, 5)
        dataset = build_dataset(sites, seed=0)
        for split in ("train", "valid", "test"):
            for s in dataset.split(split):
                assert 8 <= s.length <= 64
                assert s.one_hot.sum() == 1
                assert s.one_hot[s.sentence_label - 1] == 1
                assert s.one_hot[NUM_CLASSES - 1] == 0
                assert s.parental[s.sentence_label - 1] == 1
                assert s.parental[NUM_CLASSES - 1] == 0.2
                assert not any(t != t.lower() for t in s.tokens)

    def test_definitions_appended_to_train(self):
        sites = make_justified_sites(10, 5)
        dataset = build_dataset(sites, seed=0)
        definition_samples = [s for s in dataset.train if s.site_id == 0]
        assert len(definition_samples) == 10
        assert sorted(s.sentence_label for s in definition_samples) == \
            list(range(1, 11))

    def test_length_filter(self):
        site = SiteRecord(site_id=99, name="x",
                          justification={1: "Too short. " + long_paragraph(3)},
                          short_description="", criteria=frozenset({1}))
        dataset = build_dataset(make_justified_sites(10, 5) + [site], seed=0)
        non_def = [s for s in dataset.train + dataset.valid + dataset.test
                   if s.site_id == 99]
        assert len(non_def) == 3  # "Too short." dropped

    def test_bad_definitions_rejected(self):
        sites = make_justified_sites(10, 5)
        with pytest.raises(ConfigurationError):
            build_dataset(sites, definitions={1: "only one"}, seed=0)


class TestBuildSdSet:
    def test_parental_only_labels(self):
        site = SiteRecord(site_id=9, name="x", justification={},
                          short_description="First sentence here. Second one. Third.",
                          criteria=frozenset({2, 4}))
        samples = build_sd_set([site])
        assert len(samples) == 3
        for s in samples:
            assert s.sentence_label is None
            assert s.one_hot is None
            assert s.parental[1] == 1 and s.parental[3] == 1
            assert s.parental[NUM_CLASSES - 1] == 0.2
            assert s.split == "sd"

    def test_empty_description_contributes_nothing(self):
        site = SiteRecord(site_id=9, name="x", justification={},
                          short_description="", criteria=frozenset({2}))
        assert build_sd_set([site]) == []

    def test_no_length_filter(self):
        site = SiteRecord(site_id=9, name="x", justification={},
                          short_description="Tiny.",
                          criteria=frozenset({1}))
        assert len(build_sd_set([site])) == 1


class TestJsonl:
    def test_round_trip(self, tmp_path):
        sites = make_justified_sites(5, 5)
        dataset = build_dataset(sites, seed=0)
        samples = dataset.train + build_sd_set([SiteRecord(
            site_id=1, name="", justification={},
            short_description="One sentence here.", criteria=frozenset({3}))])
        path = tmp_path / "samples.jsonl"
        write_samples(samples, path)
        loaded = read_samples(path)
        assert len(loaded) == len(samples)
        for a, b in zip(samples, loaded):
            assert a.tokens == b.tokens
            assert a.sentence_label == b.sentence_label
            assert a.split == b.split
            np.testing.assert_array_equal(a.parental, b.parental)
            if a.one_hot is None:
                assert b.one_hot is None
            else:
                np.testing.assert_array_equal(a.one_hot, b.one_hot)

    def test_deterministic_serialization(self):
        sites = make_justified_sites(3, 5)
        sample = build_dataset(sites, seed=0).train[0]
        assert sample_to_json(sample) == sample_to_json(sample)
        rebuilt = sample_from_json(sample_to_json(sample))
        assert sample_to_json(rebuilt) == sample_to_json(sample)


def test_definitions_cover_all_criteria():
    assert set(CRITERION_DEFINITIONS) == set(range(1, 11))
    for text in CRITERION_DEFINITIONS.values():
        assert len(preprocess(text)) >= 8
