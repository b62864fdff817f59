import json
import random
from collections import Counter
from importlib import resources

import pytest

from tagrec.docmodel import (corpus_stats, page_stats, plain_text, read_manifest, validate_page,
                             write_document)
from tagrec.layout import parse_page, serialize_page
from tagrec.syngen import (GenConfig, LexiconError, assign_splits, generate_corpus, generate_page,
                           generate_pages, load_carriers, load_lexicons, template_slot_count)

SLOTS = 55  # labeled value slots in the shipped record template


def test_default_lexicons_cover_level_4(ont):
    lex = load_lexicons()
    assert sum(lex.covers(t.name) for t in ont.tags if t.level == 4) == 15


def test_missing_pool_named():
    doc = json.loads(resources.files("tagrec").joinpath("data/lexicons.json")
                     .read_text(encoding="utf-8"))
    del doc["occupation"]
    with pytest.raises(LexiconError, match="occupation"):
        load_lexicons(json.dumps(doc))


@pytest.mark.parametrize("value, message", [
    ([], "empty pool"), ({"min": 3, "max": 1}, "empty range"), (["a<B>"], "layout marker")])
def test_bad_pools(value, message):
    with pytest.raises(LexiconError, match=message):
        load_lexicons(json.dumps({"city": value}))


def test_day_range():
    lex = load_lexicons()
    rng = random.Random(0)
    days = {int(lex.sample("day", rng)[0]) for _ in range(2000)}
    assert min(days) >= 1 and max(days) <= 31 and len(days) == 31


def test_carriers():
    assert len(load_carriers()) >= 50
    with pytest.raises(LexiconError, match="empty"):
        load_carriers("\n\n")


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(c_prob=1.5)
    with pytest.raises(ValueError):
        GenConfig(records_min=3, records_max=2)


def test_deterministic():
    a = generate_page(GenConfig(seed=1), index=3)
    b = generate_page(GenConfig(seed=1), index=3)
    assert write_document(a) == write_document(b)
    assert write_document(generate_page(GenConfig(seed=2), index=3)) != write_document(a)


def test_label_probability_extremes():
    one = GenConfig(seed=8, records_min=1, records_max=1, label_prob=1.0)
    zero = GenConfig(seed=8, records_min=1, records_max=1, label_prob=0.0)
    assert template_slot_count() == SLOTS
    for i in range(20):
        assert page_stats(generate_page(one, index=i)).entities == SLOTS
        assert page_stats(generate_page(zero, index=i)).entities == 0


def test_pages_are_valid_and_round_trip():
    for page in generate_pages(GenConfig(seed=12), 30):
        assert validate_page(page) == []
        for scheme in (None, 4):
            back = parse_page(serialize_page(page, scheme), entity_scheme=scheme, page_id=page.id)
            assert plain_text(back) == plain_text(page)


def test_records_per_page_range():
    counts = Counter(len(p.records) for p in generate_pages(GenConfig(seed=3), 300))
    assert set(counts) == {1, 2, 3}


def test_c_block_fraction():
    pages = generate_pages(GenConfig(seed=0, c_prob=0.5), 1000)
    recs = [r for p in pages for r in p.records]
    frac = sum(1 for r in recs if r.c) / len(recs)
    assert 0.45 <= frac <= 0.55


def test_repeated_sentences():
    cfg = GenConfig(seed=4, repeat_prob=1.0, carriers_min=0, carriers_max=0, c_prob=0.0)
    sentences = {" ".join(s) for s in load_carriers()}
    for page in generate_pages(cfg, 10):
        body = " ".join(" ".join(w.text for w in r.b.words) for r in page.records)
        assert any(body.count(s) >= 2 for s in sentences)


def test_scale_matches_handwritten_acts():
    st = corpus_stats(generate_pages(GenConfig(seed=0), 200))
    assert 1300 <= st.avg_characters <= 1700
    assert 200 <= st.avg_words <= 280


class TestSplits:
    def test_ten_pages(self):
        assert Counter(assign_splits(10, 7)) == {"train": 8, "valid": 1, "test": 1}

    def test_one_page(self):
        assert assign_splits(1, 7) == ["train"]

    def test_proportions(self):
        c = Counter(assign_splits(1000, 3))
        assert c == {"train": 800, "valid": 100, "test": 100}


def test_generate_corpus(tmp_path):
    manifest = generate_corpus(GenConfig(seed=7), 10, tmp_path / "a")
    assert len(list((tmp_path / "a").glob("page_*.json"))) == 10
    assert Counter(e["split"] for e in manifest["pages"]) == {"train": 8, "valid": 1, "test": 1}
    assert read_manifest(tmp_path / "a")["meta"]["prng"]
    generate_corpus(GenConfig(seed=7), 10, tmp_path / "b", jobs=2)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_generate_corpus_single(tmp_path):
    manifest = generate_corpus(GenConfig(seed=7), 1, tmp_path)
    assert [e["split"] for e in manifest["pages"]] == ["train"]
    with pytest.raises(ValueError):
        generate_corpus(GenConfig(), 0, tmp_path)
