import json
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashion_parser.corpus import (AnnotatedSentence, CorpusError, generate_corpus, load_corpus, load_lexicon,
                                   load_templates, nearest_heads, normalize_tokenize, parse_lexicon, parse_template,
                                   parse_templates, save_corpus, split_dataset)
from fashion_parser.tagsets import NER_TAGS, POS_TAGS, load_pos_tagset, pos_tagset
from oracles import is_projective_tree

SMALL_LEXICON = """
[brands]
red valentino
gucci
[colours]
red
black
[categories]
dress
bag
[attributes]
floral
[materials]
silk
[function:prepositions ADP]
from
[ambiguous]
red
"""


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(load_lexicon(), load_templates(), 2000, 3)


# ---------------------------------------------------------------- tokenizer

@pytest.mark.parametrize("text, expected", [
    ("I want red dresses", ["i", "want", "red", "dresses"]),
    ("", []),
    ("  Golden   Goose ", ["golden", "goose"]),
    ("Black, leather boots!", ["black", "leather", "boots"]),
    ("\t\n ", []),
    ("... !!", []),
    ("Off-White T-Shirt", ["off-white", "t-shirt"]),
])
def test_normalize_tokenize_examples(text, expected):
    assert normalize_tokenize(text) == expected


@given(st.text(max_size=60))
@settings(max_examples=300, deadline=None)
def test_tokenize_is_idempotent(text):
    tokens = normalize_tokenize(text)
    assert normalize_tokenize(" ".join(tokens)) == tokens
    for t in tokens:
        assert t and not any(c.isspace() for c in t)
        assert t == t.lower() or normalize_tokenize(t) == [t]


# ---------------------------------------------------------------- lexicon and tagsets

def test_bundled_lexicon_declares_the_ambiguous_forms():
    lex = load_lexicon()
    assert {"golden", "red"} <= lex.ambiguous
    assert ("golden", "goose") in lex.brands and ("red", "valentino") in lex.brands
    assert "golden" in lex.colours and "red" in lex.colours


def test_lexicon_rejects_undeclared_overlap():
    text = SMALL_LEXICON.replace("[ambiguous]\nred", "[ambiguous]\nblack")
    with pytest.raises(CorpusError, match="overlap"):
        parse_lexicon(text)


def test_lexicon_requires_an_ambiguous_set():
    with pytest.raises(CorpusError, match="ambiguous"):
        parse_lexicon(SMALL_LEXICON.replace("[ambiguous]\nred", ""))


def test_lexicon_unknown_section_is_an_error():
    with pytest.raises(CorpusError, match="unknown lexicon section"):
        parse_lexicon(SMALL_LEXICON + "\n[shoes]\nboot\n")


def test_pos_tagset_has_twenty_unique_labels():
    assert len(POS_TAGS) == 20
    for label in ("ADJ", "NOUN", "PROPN", "ADP", "VERB", "DET", "UNKNOWN"):
        assert label in POS_TAGS
    assert len(NER_TAGS) == 5


def test_pos_tagset_validation(tmp_path):
    with pytest.raises(ValueError):
        pos_tagset(list(POS_TAGS)[:19])
    with pytest.raises(ValueError):
        pos_tagset(list(POS_TAGS)[:19] + ["ADJ"])
    path = tmp_path / "tags.txt"
    path.write_text("\n".join(POS_TAGS) + "\n")
    assert list(load_pos_tagset(path)) == list(POS_TAGS)


# ---------------------------------------------------------------- templates and generation

def test_generator_example_from_red_valentino():
    lex = parse_lexicon(SMALL_LEXICON.replace("gucci\n", ""))
    lex.colours = ["red"]
    lex.categories = ["dress"]
    tmpl = parse_template("<COLOUR> <CATEGORY> from/ADP <BRAND>")
    (s,) = generate_corpus(lex, [tmpl], 1, 0)
    assert s.tokens == ["red", "dress", "from", "red", "valentino"]
    assert s.pos == ["ADJ", "NOUN", "ADP", "PROPN", "PROPN"]
    assert s.ner == ["COLOUR", "CATEGORY", "UNKNOWN", "BRAND", "BRAND"]
    assert s.head[1] == -1 and s.head[0] == 1
    assert is_projective_tree(s.head)


def test_red_dress_heads():
    lex = parse_lexicon(SMALL_LEXICON)
    lex.colours = ["red"]
    lex.categories = ["dress"]
    (s,) = generate_corpus(lex, [parse_template("<COLOUR> <CATEGORY>")], 1, 5)
    assert s.tokens == ["red", "dress"]
    assert s.head == [1, -1]
    assert s.op == ["LEFT_ARC", "SHIFT"]


def test_generation_is_deterministic():
    lex, tmpl = load_lexicon(), load_templates()
    a = [s.to_dict() for s in generate_corpus(lex, tmpl, 200, 11)]
    b = [s.to_dict() for s in generate_corpus(lex, tmpl, 200, 11)]
    c = [s.to_dict() for s in generate_corpus(lex, tmpl, 200, 12)]
    assert a == b
    assert a != c


def test_generate_returns_exactly_n(corpus):
    assert len(corpus) == 2000


def test_every_generated_sentence_is_valid(corpus):
    for s in corpus:
        s.validate()
        assert is_projective_tree(s.head)
        assert len({len(s.tokens), len(s.pos), len(s.head), len(s.op), len(s.ner)}) == 1


def test_ner_tags_follow_lexicon_slots(corpus):
    lex = load_lexicon()
    sections = {"COLOUR": set(lex.colours), "CATEGORY": set(lex.categories),
                "BRAND": {t for b in lex.brands for t in b}}
    for s in corpus:
        for tok, tag in zip(s.tokens, s.ner):
            if tag in sections:
                assert tok in sections[tag], (tok, tag)


def test_ambiguous_forms_carry_two_tags(corpus):
    lex = load_lexicon()
    ner, pos = defaultdict(set), defaultdict(set)
    for s in corpus:
        for tok, n, p in zip(s.tokens, s.ner, s.pos):
            ner[tok].add(n)
            pos[tok].add(p)
    for word in lex.ambiguous:
        assert len(ner[word]) >= 2, word
        assert len(pos[word]) >= 2, word


def test_query_templates_are_entity_dense():
    lex = load_lexicon()
    queries = [t for t in load_templates() if t.kind == "queries"]
    sents = generate_corpus(lex, queries, 3000, 0)
    tags = [t for s in sents for t in s.ner]
    assert sum(t != "UNKNOWN" for t in tags) / len(tags) >= 0.5


def test_template_role_missing_from_lexicon_is_named():
    lex = parse_lexicon(SMALL_LEXICON)
    tmpl = parse_template("<CATEGORY> with/ADP <FUNCTION:details>")
    with pytest.raises(CorpusError, match="FUNCTION:details"):
        generate_corpus(lex, [tmpl], 3, 0)


@pytest.mark.parametrize("line, message", [
    ("<COLOUR> <BRAND>", "CATEGORY"),
    ("<CATEGORY> <COLOUR>", "modifier"),
    ("<CATEGORY> <SHOE>", "unknown template role"),
    ("<CATEGORY> from", "cannot parse"),
])
def test_bad_templates(line, message):
    with pytest.raises(CorpusError, match=message):
        parse_template(line)


def test_template_file_errors_carry_line_numbers():
    with pytest.raises(CorpusError, match=":3:"):
        parse_templates("[queries]\n<CATEGORY>\n<COLOUR>\n")


def test_nearest_heads_rule():
    # white leather shoes from dolce gabbana
    pre = [True, True, False, False, True, False]
    assert nearest_heads(pre, 2) == [1, 2, -1, 2, 5, 3]


# ---------------------------------------------------------------- splitting

def test_split_sizes():
    items = list(range(10))
    train, test = split_dataset(items, 0.9, 0)
    assert (len(train), len(test)) == (9, 1)
    a, b = split_dataset([1, 2], 0.5, 3)
    assert len(a) == len(b) == 1


def test_split_is_a_partition_and_deterministic():
    items = list(range(101))
    train, test = split_dataset(items, 0.9, 4)
    assert len(train) == round(0.9 * 101)
    assert sorted(train + test) == items
    assert split_dataset(items, 0.9, 4) == (train, test)
    assert split_dataset(items, 0.9, 5) != (train, test)


@pytest.mark.parametrize("ratio", [0, 1, 1.5, -0.1])
def test_split_rejects_bad_ratio(ratio):
    with pytest.raises(ValueError):
        split_dataset([1, 2, 3], ratio, 0)


# ---------------------------------------------------------------- JSONL

def test_corpus_round_trip(tmp_path, corpus):
    path = tmp_path / "c.jsonl"
    save_corpus(corpus[:300], path)
    loaded = load_corpus(path)
    assert [s.to_dict() for s in loaded] == [s.to_dict() for s in corpus[:300]]


def _write(tmp_path, rows):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(r if isinstance(r, str) else json.dumps(r) for r in rows) + "\n")
    return path


GOOD = {"tokens": ["red", "dress"], "pos": ["ADJ", "NOUN"], "head": [1, -1], "op": ["LEFT_ARC", "SHIFT"],
        "ner": ["COLOUR", "CATEGORY"]}


def test_load_accepts_valid_two_token_tree(tmp_path):
    (s,) = load_corpus(_write(tmp_path, [GOOD]))
    assert isinstance(s, AnnotatedSentence)


def test_malformed_json_reports_line(tmp_path):
    with pytest.raises(CorpusError, match=":2:"):
        load_corpus(_write(tmp_path, [GOOD, "{not json"]))


def test_length_mismatch_is_rejected(tmp_path):
    bad = dict(GOOD, pos=["ADJ"])
    with pytest.raises(CorpusError, match="length invariant"):
        load_corpus(_write(tmp_path, [bad]))


def test_cycle_is_rejected(tmp_path):
    bad = dict(GOOD, head=[1, 0])
    with pytest.raises(CorpusError, match="tree invariant"):
        load_corpus(_write(tmp_path, [bad]))


def test_op_labels_must_match_heads(tmp_path):
    bad = dict(GOOD, op=["SHIFT", "SHIFT"])
    with pytest.raises(CorpusError, match="op invariant"):
        load_corpus(_write(tmp_path, [bad]))


def test_unknown_label_is_rejected(tmp_path):
    bad = dict(GOOD, ner=["COLOUR", "SHOE"])
    with pytest.raises(CorpusError, match="tagset invariant"):
        load_corpus(_write(tmp_path, [bad]))
