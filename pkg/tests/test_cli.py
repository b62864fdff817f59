import json

import pytest

from tagrec.cli import main
from tagrec.docmodel import Block, Page, RecordD, write_document, write_manifest
from tagrec.layout import serialize_page

from conftest import tok, words


def run(*argv):
    return main([str(a) for a in argv])


def read_tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert run("gen", "--n", 12, "--seed", 7, "--out", out) == 0
    return out


def fixture_corpus(tmp_path, hyp_label):
    """One-page corpus with three entities, plus a hypothesis labelling the last one as hyp_label."""
    ref = Page("act", (RecordD(Block("A", tuple(words("12", "Dupont"))), Block("B", tuple(words(
        ("Marie", ["wife", "first_name"]), ("Dupont", ["wife", "family_name"]), "âgée", "de",
        ("24", ["wife", "age"]))))),))
    hyp = Page("act", (RecordD(ref.records[0].a, Block("B", ref.records[0].b.words[:4] + tuple(
        words(("24", hyp_label))))),))
    (tmp_path / "ref").mkdir()
    (tmp_path / "ref" / "act.json").write_text(write_document(ref), encoding="utf-8")
    (tmp_path / "hyp").mkdir()
    (tmp_path / "hyp" / "act.txt").write_text(serialize_page(hyp, 3), encoding="utf-8")
    return tmp_path / "ref", tmp_path / "hyp"


def test_gen_is_deterministic(tmp_path):
    assert run("gen", "--n", 100, "--seed", 7, "--out", tmp_path / "a") == 0
    assert run("gen", "--n", 100, "--seed", 7, "--out", tmp_path / "b", "--jobs", 2) == 0
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")


def test_gen_rejects_zero_pages(tmp_path):
    with pytest.raises(SystemExit) as err:
        run("gen", "--n", 0, "--out", tmp_path)
    assert err.value.code == 2


def test_validate_generated(corpus, capsys):
    assert run("validate", "--in", corpus) == 0
    assert "12 pages, 0 problems" in capsys.readouterr().err


def test_validate_reports_problems(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"id": "bad", "records": []}', encoding="utf-8")
    assert run("validate", "--in", tmp_path) == 1
    assert "page has no records" in capsys.readouterr().out


def test_encode_scheme_5(corpus, tmp_path):
    assert run("encode", "--in", corpus, "--scheme", 5, "--out", tmp_path) == 0
    texts = [p.read_text(encoding="utf-8") for p in tmp_path.glob("*.txt")]
    assert len(texts) == 12
    assert any("<wife_father_first_name>" in t for t in texts)
    assert json.loads((tmp_path / "manifest.json").read_text())["meta"]["scheme"] == 5


def test_encode_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert run("encode", "--in", tmp_path / "empty", "--scheme", 1, "--out", tmp_path / "o") == 1
    assert "no pages found" in capsys.readouterr().err


def test_unknown_scheme_is_usage_error(corpus, tmp_path):
    with pytest.raises(SystemExit) as err:
        run("encode", "--in", corpus, "--scheme", 6, "--out", tmp_path)
    assert err.value.code == 2


@pytest.mark.parametrize("scheme", [1, 2, 3, 4, 5])
def test_decode_restores_corpus(corpus, tmp_path, scheme):
    assert run("encode", "--in", corpus, "--scheme", scheme, "--out", tmp_path / "lab") == 0
    assert run("decode", "--in", tmp_path / "lab", "--out", tmp_path / "dec") == 0
    assert read_tree(tmp_path / "dec") == read_tree(corpus)


def test_decode_malformed(tmp_path, capsys):
    lab = tmp_path / "lab"
    lab.mkdir()
    w = tok("wife")
    fn, age = tok("first_name"), tok("age")
    text = f"<D><A>1</A><B><{w}> <{fn}> Marie </{fn}> <{age}> 24 </{age}></B></D>"
    (lab / "p.txt").write_text(text, encoding="utf-8")
    assert run("decode", "--in", lab, "--scheme", 3, "--out", tmp_path / "s") == 1
    assert "at byte 14" in capsys.readouterr().err
    assert run("decode", "--in", lab, "--scheme", 3, "--policy", "lenient",
               "--out", tmp_path / "l") == 0
    sidecar = json.loads((tmp_path / "l" / "p.diagnostics.json").read_text(encoding="utf-8"))
    assert [d["message"] for d in sidecar["diagnostics"]] == [
        "unclosed marker wife applied to end of text"]
    assert (tmp_path / "l" / "p.json").exists()


def test_convert(corpus, tmp_path):
    run("encode", "--in", corpus, "--scheme", 3, "--out", tmp_path / "s3")
    run("encode", "--in", corpus, "--scheme", 4, "--out", tmp_path / "s4")
    assert run("convert", "--in", tmp_path / "s3", "--scheme", 4, "--out", tmp_path / "c") == 0
    assert read_tree(tmp_path / "c") == read_tree(tmp_path / "s4")


class TestEval:
    def test_perfect(self, corpus, tmp_path):
        run("encode", "--in", corpus, "--scheme", 2, "--out", tmp_path / "hyp")
        assert run("eval", "--ref", corpus, "--hyp", tmp_path / "hyp", "--out", tmp_path / "r") == 0
        rep = json.loads((tmp_path / "r" / "report.json").read_text())
        assert rep["entities"]["micro"]["f1"] == 1.0
        assert rep["cer"] == 0.0 and rep["wer"] == 0.0
        assert rep["iehhr"] == {"basic": 100.0, "complete": 100.0, "records": rep["iehhr"]["records"]}
        table = (tmp_path / "r" / "report.txt").read_text()
        assert "micro" in table and "IEHHR basic" in table

    def test_three_entity_fixture(self, tmp_path):
        ref, hyp = fixture_corpus(tmp_path, ["husband", "age"])
        assert run("eval", "--ref", ref, "--hyp", hyp, "--scheme", 3, "--out", tmp_path / "r") == 0
        micro = json.loads((tmp_path / "r" / "report.json").read_text())["entities"]["micro"]
        assert micro["f1"] == pytest.approx(2 / 3)
        assert micro["precision"] == pytest.approx(2 / 3) and micro["recall"] == pytest.approx(2 / 3)

    def test_zero_threshold(self, tmp_path):
        ref, hyp = fixture_corpus(tmp_path, ["wife", "age"])
        txt = (hyp / "act.txt").read_text(encoding="utf-8").replace("Marie", "Maria")
        (hyp / "act.txt").write_text(txt, encoding="utf-8")
        run("eval", "--ref", ref, "--hyp", hyp, "--scheme", 3, "--threshold", 0.0,
            "--out", tmp_path / "r0")
        run("eval", "--ref", ref, "--hyp", hyp, "--scheme", 3, "--out", tmp_path / "r3")
        tp0 = json.loads((tmp_path / "r0" / "report.json").read_text())["entities"]["micro"]["tp"]
        tp3 = json.loads((tmp_path / "r3" / "report.json").read_text())["entities"]["micro"]["tp"]
        assert (tp0, tp3) == (2, 3)

    def test_id_mismatch(self, corpus, tmp_path, capsys):
        run("encode", "--in", corpus, "--scheme", 1, "--out", tmp_path / "hyp")
        (tmp_path / "hyp" / "page_00000.txt").unlink()
        manifest = json.loads((tmp_path / "hyp" / "manifest.json").read_text())
        write_manifest(tmp_path / "hyp", manifest["pages"][1:], manifest["meta"])
        assert run("eval", "--ref", corpus, "--hyp", tmp_path / "hyp") == 1
        assert "page id mismatch" in capsys.readouterr().err

    def test_parallel_is_byte_identical(self, corpus, tmp_path):
        run("encode", "--in", corpus, "--scheme", 3, "--out", tmp_path / "hyp")
        for f in (tmp_path / "hyp").glob("*.txt"):
            f.write_text(f.read_text(encoding="utf-8").replace("e", "a", 3), encoding="utf-8")
        run("eval", "--ref", corpus, "--hyp", tmp_path / "hyp", "--out", tmp_path / "r1")
        run("eval", "--ref", corpus, "--hyp", tmp_path / "hyp", "--out", tmp_path / "r2",
            "--jobs", 3)
        assert read_tree(tmp_path / "r1") == read_tree(tmp_path / "r2")


def test_stats(corpus, tmp_path, capsys):
    assert run("stats", "--in", corpus) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["totals"]["pages"] == 12
    assert stats["tag_counts"]["wife"] > 0
    assert run("stats", "--in", corpus, "--out", tmp_path / "s.json", "--jobs", 2) == 0
    assert json.loads((tmp_path / "s.json").read_text()) == stats


def test_ontology_env(corpus, tmp_path, monkeypatch):
    from tagrec.ontology import default_ontology
    path = tmp_path / "ont.json"
    path.write_text(default_ontology().to_json(), encoding="utf-8")
    monkeypatch.setenv("TAGREC_ONTOLOGY", str(path))
    assert run("validate", "--in", corpus) == 0
    path.write_text("{", encoding="utf-8")
    assert run("validate", "--in", corpus) == 1
