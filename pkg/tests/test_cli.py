"""Command-line stages over a generated fixture tree."""

import json

import pytest

from sympkit.cli import main
from sympkit.manifest import file_digest, write_manifest


@pytest.fixture(scope="module")
def fixture_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("tree")
    assert main(["synth-fixtures", "--out", str(root), "--seed", "0"]) == 0
    return root


def run(args: list[str]) -> int:
    return main(args)


def test_synth_fixtures_writes_expected_tree(fixture_tree):
    for name in ("kg.json", "posts.ndjson", "annotations.tsv", "users.ndjson",
                 "diagnosis_rule.json", "config.toml", "lexicons"):
        assert (fixture_tree / name).exists()
    manifest = json.loads(
        (fixture_tree / "manifest_synth-fixtures.json").read_text(encoding="utf-8")
    )
    assert manifest["stage"] == "synth-fixtures"
    assert manifest["seeds"] == {"world": 0}
    for entry in manifest["outputs"].values():
        assert len(entry["sha256"]) == 64


def test_pipeline_stages_in_order(fixture_tree, capsys):
    config = str(fixture_tree / "config.toml")
    out = fixture_tree / "out"

    assert run(["validate-kg", "--config", config]) == 0
    assert "graph ok" in capsys.readouterr().out
    assert (out / "kg_report.json").exists()

    assert run(["embed", "--config", config]) == 0
    assert (out / "embeddings.tsv").exists()

    assert run(["retrieve", "--config", config, "--disease", "d1"]) == 0
    assert (out / "candidates_d1.tsv").exists()
    assert run(["retrieve", "--config", config, "--disease", "d1",
                "--route", "keyword"]) == 0

    assert run(["dedup", "--config", config, "--disease", "d1"]) == 0
    assert (out / "retained_d1.tsv").exists()

    assert run(["label-users", "--config", config]) == 0
    assert (out / "users_labeled.ndjson").exists()

    assert run(["merge-annotations", "--config", config]) == 0
    gold = json.loads((out / "gold.json").read_text(encoding="utf-8"))
    assert gold
    agreement = json.loads((out / "agreement.json").read_text(encoding="utf-8"))
    assert agreement["n_annotators"] == 3

    assert run(["train-relevance", "--config", config]) == 0
    assert (out / "relevance_model.json").exists()
    assert (out / "splits.tsv").exists()

    assert run(["train-status", "--config", config]) == 0
    assert (out / "status_model.json").exists()

    assert run(["evaluate", "--config", config, "--suite", "relevance"]) == 0
    metrics = json.loads((out / "metrics_relevance.json").read_text(encoding="utf-8"))
    assert 0.0 <= metrics["macro_auc"] <= 1.0

    assert run(["evaluate", "--config", config, "--suite", "status"]) == 0
    assert (out / "metrics_status.json").exists()

    assert run(["train-mdd", "--config", config, "--disease", "d1"]) == 0
    assert (out / "mdd_d1.json").exists()

    assert run(["evaluate", "--config", config, "--suite", "mdd"]) == 0
    assert (out / "metrics_mdd.json").exists()

    assert run(["explain", "--config", config, "--disease", "d1",
                "--user", "u0000"]) == 0
    shown = capsys.readouterr().out
    assert "Typical Condition A symptoms:" in shown
    assert "✓" in shown or "✗" in shown

    assert run(["audit", "--config", config]) == 0
    assert (out / "audit_flags.json").exists()


def test_stage_order_is_enforced(tmp_path, capsys):
    assert main(["synth-fixtures", "--out", str(tmp_path), "--seed", "3"]) == 0
    capsys.readouterr()
    code = main(["train-status", "--config", str(tmp_path / "config.toml")])
    assert code == 2
    err = capsys.readouterr().err
    payload = json.loads(err)
    assert payload["error"] == "SchemaError"
    assert "merge-annotations" in payload["message"] or "train-relevance" in payload["message"]


def test_unknown_disease_fails_cleanly(fixture_tree, capsys):
    config = str(fixture_tree / "config.toml")
    code = main(["retrieve", "--config", config, "--disease", "d99"])
    assert code == 2
    payload = json.loads(capsys.readouterr().err)
    assert payload["error"] == "SchemaError"
    assert "d99" in payload["message"]


def test_manifests_hide_directory_layout(tmp_path):
    target = tmp_path / "data.txt"
    target.write_text("payload", encoding="utf-8")
    a = write_manifest(tmp_path / "m1.json", "stage", {"in": target}, {}, {"s": 1})
    nested = tmp_path / "sub" / "data.txt"
    nested.parent.mkdir()
    nested.write_text("payload", encoding="utf-8")
    b = write_manifest(tmp_path / "m2.json", "stage", {"in": nested}, {}, {"s": 1})
    assert a == b
    assert a["inputs"]["in"]["sha256"] == file_digest(target)
