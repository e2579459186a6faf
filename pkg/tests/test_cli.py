import json

import pytest

from fashion_parser.cli import run

TINY = {
    "embeddings": {"dim": 10, "epochs": 1},
    "pos": {"hidden": 5, "train": {"epochs": 1}},
    "dp": {"hidden": 4, "d_pos": 3, "train": {"epochs": 1}},
    "ner": {"hidden": 5, "d_pos": 3, "d_op": 2, "train": {"epochs": 1}},
}


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "tiny.json").write_text(json.dumps(TINY))
    assert run(["generate", "--n", "200", "--out", str(root / "c.jsonl")]) == 0
    assert run(["train-embeddings", "--corpus", str(root / "c.jsonl"), "--out", str(root / "e.txt"),
                "--dim", "10", "--epochs", "1"]) == 0
    stage = ["--corpus", root / "c.jsonl", "--embeddings", root / "e.txt", "--hidden", "4", "--epochs", "1"]
    stage = [str(a) for a in stage]
    assert run(["train-pos", *stage, "--out", str(root / "pos.model")]) == 0
    assert run(["train-dp", *stage, "--out", str(root / "dp.model")]) == 0
    assert run(["train-ner", *stage, "--out", str(root / "ner.model")]) == 0
    assert run(["train-all", "--n", "200", "--out", str(root / "bundle"), "--config", str(root / "tiny.json")]) == 0
    return root


def test_generate_is_reproducible(tmp_path, capsys):
    code, out, _ = call(capsys, "generate", "--n", 50, "--seed", 4, "--out", tmp_path / "a.jsonl")
    assert code == 0 and "50 sentences" in out
    call(capsys, "generate", "--n", 50, "--seed", 4, "--out", tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    lines = (tmp_path / "a.jsonl").read_text().splitlines()
    assert len(lines) == 50
    assert {"tokens", "pos", "op", "head", "ner"} <= set(json.loads(lines[0]))


def test_nearest_rows(work, capsys):
    code, out, _ = call(capsys, "nearest", "--embeddings", work / "e.txt", "--word", "dress", "--k", 4, "--json")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 4
    sims = [r["similarity"] for r in rows]
    assert sims == sorted(sims, reverse=True)
    assert "dress" not in [r["word"] for r in rows]


def test_nearest_unknown_word_is_a_domain_error(work, capsys):
    code, out, err = call(capsys, "nearest", "--embeddings", work / "e.txt", "--word", "qqqq")
    assert code == 1 and out == ""
    assert err.startswith("error:") and "qqqq" in err and len(err.strip().splitlines()) == 1


def test_stage_models_were_written(work, capsys):
    for name in ("pos", "dp", "ner"):
        assert (work / f"{name}.model").read_bytes().startswith(b"FPMODEL 1")


def test_train_summary_json(work, tmp_path, capsys):
    code, out, _ = call(capsys, "train-dp", "--corpus", work / "c.jsonl", "--embeddings", work / "e.txt",
                        "--hidden", 3, "--epochs", 2, "--no-pos", "--out", tmp_path / "d.model", "--json")
    assert code == 0
    payload = json.loads(out)
    assert [e["epoch"] for e in payload["epochs"]] == [1, 2]
    assert 0.0 <= payload["dev_accuracy"] <= 1.0


def test_config_overrides_flags(work, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"hidden": 2, "train": {"epochs": 1}}))
    code, out, _ = call(capsys, "train-pos", "--corpus", work / "c.jsonl", "--embeddings", work / "e.txt",
                        "--hidden", 9, "--epochs", 5, "--config", cfg, "--out", tmp_path / "p.model", "--json")
    assert code == 0
    assert len(json.loads(out)["epochs"]) == 1
    from fashion_parser.tagger import SequenceLabeler
    assert SequenceLabeler.load(tmp_path / "p.model").hidden == 2


def test_tag_command(work, capsys):
    code, out, _ = call(capsys, "tag", "--model", work / "pos.model", "--json", "Red Dress")
    rows = json.loads(out)
    assert code == 0 and [r["token"] for r in rows] == ["red", "dress"]
    assert all(0.0 <= r["confidence"] <= 1.0 for r in rows)


def test_recognize_with_model_files(work, capsys):
    code, out, _ = call(capsys, "recognize", "--model", work / "ner.model", "--pos-model", work / "pos.model",
                        "--dp-model", work / "dp.model", "black gucci bag")
    assert code == 0
    assert [line.split("\t")[0] for line in out.strip().splitlines()] == ["black", "gucci", "bag"]


def test_recognize_missing_upstream_model_fails_cleanly(work, capsys):
    code, _, err = call(capsys, "recognize", "--model", work / "ner.model", "black bag")
    assert code == 1 and "'pos' labels" in err


def test_recognize_with_bundle_variant(work, capsys):
    code, out, _ = call(capsys, "recognize", "--bundle", work / "bundle", "--features", "word", "--json", "red hat")
    assert code == 0 and len(json.loads(out)) == 2


def test_parse_json_and_text(work, capsys):
    code, out, _ = call(capsys, "parse", "--bundle", work / "bundle", "--json", "--trace",
                        "golden shoes golden goose")
    assert code == 0
    payload = json.loads(out)
    assert [t["surface"] for t in payload["tokens"]] == ["golden", "shoes", "golden", "goose"]
    assert payload["trace"][0]["op"] is None  # the initial configuration
    assert 2 <= len(payload["trace"]) <= 2 * 4 + 1
    code, out, _ = call(capsys, "parse", "--bundle", work / "bundle", "--deps", "golden shoes")
    rows = [line.split("\t") for line in out.strip().splitlines()]
    assert len(rows) == 2 and all(len(r) == 9 for r in rows)


def test_parse_empty_query(work, capsys):
    code, out, _ = call(capsys, "parse", "--bundle", work / "bundle", "--json", "")
    assert code == 0 and json.loads(out)["tokens"] == []


def test_eval_bundle_and_single_model(work, capsys):
    code, out, _ = call(capsys, "eval", "--bundle", work / "bundle", "--json")
    assert code == 0
    assert set(json.loads(out)) == {"POS/word", "DP/word+pos", "NER/word", "NER/word+pos", "NER/word+pos+dp"}
    code, out, _ = call(capsys, "eval", "--model", work / "dp.model", "--corpus", work / "c.jsonl")
    assert code == 0 and "uas" in out
    code, _, err = call(capsys, "eval", "--model", work / "dp.model")
    assert code == 1 and "--corpus" in err


def test_train_all_report_files(work):
    report = json.loads((work / "bundle" / "report.json").read_text())
    assert len(report["rows"]) == 5
    assert (work / "bundle" / "report.txt").read_text().startswith("Task")


def test_export_report(work, tmp_path, capsys):
    code, out, _ = call(capsys, "export-report", "--report", work / "bundle" / "report.json",
                        "--out", tmp_path / "r.json")
    assert code == 0
    assert (tmp_path / "r.txt").read_text() == (work / "bundle" / "report.txt").read_text()
    code, _, err = call(capsys, "export-report", "--out", tmp_path / "x.json")
    assert code == 1


def test_missing_file_is_a_domain_error(tmp_path, capsys):
    code, _, err = call(capsys, "tag", "--model", tmp_path / "nope.model", "red")
    assert code == 1 and err.startswith("error:")


def test_unknown_flag_exits_with_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["generate", "--bogus"])
    assert exc.value.code == 2


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("generate", "train-all", "parse", "export-report", "nearest"):
        assert name in out
