import json
import subprocess
import sys

import pytest

from kasusprobe import cli, genset, metrics
from kasusprobe.cli import main


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def generated(tmp_path, capsys):
    ds = tmp_path / "ds.jsonl"
    sets = tmp_path / "sets.jsonl"
    code, out, err = run(
        ["generate", "--out-dataset", str(ds), "--out-sets", str(sets)], capsys
    )
    assert code == 0, err
    return ds, sets, out


def write_constant_scores(tmp_path, ds, value="-1.0"):
    scores = tmp_path / "scores.tsv"
    lines = [f"{json.loads(line)['id']}\t{value}" for line in ds.read_text().splitlines()]
    scores.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return scores


def test_generate_summary_and_files(generated):
    ds, sets, out = generated
    assert "templates: 3" in out
    assert "432 total / 108 acceptable / 324 unacceptable" in out
    assert len(ds.read_text().splitlines()) == 432
    assert len(sets.read_text().splitlines()) == 108
    dataset = genset.read_dataset(ds)
    assert len(dataset.records) == 432


def test_generate_single_template_counts(tmp_path, capsys):
    template = {
        "id": "only",
        "prefix": "Er wollte uns sagen, dass",
        "verb": "schreibt",
        "items": ["soldat", "offizier", "brief"],
    }
    tpath = tmp_path / "one.jsonl"
    tpath.write_text(json.dumps(template) + "\n", encoding="utf-8")
    code, out, _ = run(
        [
            "generate",
            "--templates",
            str(tpath),
            "--out-dataset",
            str(tmp_path / "d.jsonl"),
            "--out-sets",
            str(tmp_path / "s.jsonl"),
        ],
        capsys,
    )
    assert code == 0
    assert "144 total / 36 acceptable / 108 unacceptable" in out


def test_generate_is_deterministic(tmp_path, capsys):
    ds = tmp_path / "ds.jsonl"
    sets = tmp_path / "sets.jsonl"
    argv = ["generate", "--out-dataset", str(ds), "--out-sets", str(sets)]
    assert main(argv) == 0
    first = (ds.read_bytes(), sets.read_bytes())
    manifest_first = (ds.parent / (ds.name + ".manifest.json")).read_bytes()
    assert main(argv) == 0
    capsys.readouterr()
    assert (ds.read_bytes(), sets.read_bytes()) == first
    assert (ds.parent / (ds.name + ".manifest.json")).read_bytes() == manifest_first


def test_manifest_contents_have_no_timestamps(generated):
    ds, _, _ = generated
    manifest = json.loads((ds.parent / (ds.name + ".manifest.json")).read_text())
    assert manifest["tool"] == "kasusprobe"
    assert manifest["command"] == "generate"
    assert set(manifest["inputs"]) == {"lexicon", "templates"}
    assert manifest["dataset_sha256"] == cli.sha256_file(ds)
    assert not any("time" in key or "date" in key for key in manifest)


def test_env_var_paths(tmp_path, capsys, monkeypatch):
    template = {
        "id": "env",
        "prefix": "Er wollte uns sagen, dass",
        "verb": "schreibt",
        "items": ["soldat", "offizier", "brief"],
    }
    tpath = tmp_path / "tpl.jsonl"
    tpath.write_text(json.dumps(template) + "\n", encoding="utf-8")
    monkeypatch.setenv("KASUSPROBE_TEMPLATES", str(tpath))
    code, out, _ = run(
        [
            "generate",
            "--out-dataset",
            str(tmp_path / "d.jsonl"),
            "--out-sets",
            str(tmp_path / "s.jsonl"),
        ],
        capsys,
    )
    assert code == 0
    assert "templates: 1" in out


def test_train_score_evaluate_report_pipeline(tmp_path, capsys, generated):
    ds, _, _ = generated
    corpus = tmp_path / "corpus.txt"
    corpus.write_text(
        "\n".join(["der Soldat schreibt."] * 50 + ["dem Offizier gibt er es."] * 5) + "\n",
        encoding="utf-8",
    )
    model = tmp_path / "model.json"
    code, out, _ = run(
        ["train", "--corpus", str(corpus), "--order", "2", "--out-model", str(model)], capsys
    )
    assert code == 0
    assert "order=2" in out

    scores = tmp_path / "scores.tsv"
    code, out, _ = run(
        ["score", "--dataset", str(ds), "--model", str(model), "--out-scores", str(scores)],
        capsys,
    )
    assert code == 0
    assert "scored 432" in out

    per_set = tmp_path / "persets.jsonl"
    code, out, _ = run(
        ["evaluate", "--dataset", str(ds), "--scores", str(scores), "--out", str(per_set)],
        capsys,
    )
    assert code == 0
    assert "108 sets" in out

    code, out, _ = run(["report", "--per-set", str(per_set), "--dataset", str(ds)], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("| case_order |")
    assert "| NDA |" in out

    # Reported grand mean equals the mean of the per-set file.
    rows = [json.loads(line) for line in per_set.read_text().splitlines()]
    mean = sum(r["auc"] for r in rows) / len(rows)
    code, out, _ = run(
        ["report", "--per-set", str(per_set), "--format", "json"], capsys
    )
    payload = json.loads(out)
    assert payload["grand_mean"] == pytest.approx(mean, abs=1e-12)


def test_score_strip_punctuation_changes_output(tmp_path, capsys, generated):
    ds, _, _ = generated
    corpus = tmp_path / "c.txt"
    corpus.write_text("der Soldat schreibt .\n" * 5, encoding="utf-8")
    model = tmp_path / "m.json"
    assert main(["train", "--corpus", str(corpus), "--order", "2", "--out-model", str(model)]) == 0
    a = tmp_path / "a.tsv"
    b = tmp_path / "b.tsv"
    assert main(["score", "--dataset", str(ds), "--model", str(model), "--out-scores", str(a)]) == 0
    assert (
        main(
            [
                "score",
                "--dataset",
                str(ds),
                "--model",
                str(model),
                "--out-scores",
                str(b),
                "--strip-punctuation",
            ]
        )
        == 0
    )
    capsys.readouterr()
    assert a.read_text() != b.read_text()


def test_export_and_import_scores(tmp_path, capsys, generated):
    ds, _, _ = generated
    requests_file = tmp_path / "requests.tsv"
    code, out, _ = run(
        ["export-requests", "--dataset", str(ds), "--out-requests", str(requests_file)], capsys
    )
    assert code == 0
    lines = requests_file.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 432
    sid, text = lines[0].split("\t")
    assert sid.count(":") == 2 and text.endswith(".")

    answered = tmp_path / "answers.tsv"
    answered.write_text(
        "".join(f"{line.split(chr(9))[0]}\t-2.5\n" for line in lines), encoding="utf-8"
    )
    imported = tmp_path / "imported.tsv"
    code, out, _ = run(
        [
            "import-scores",
            "--dataset",
            str(ds),
            "--scores-in",
            str(answered),
            "--out-scores",
            str(imported),
        ],
        capsys,
    )
    assert code == 0
    assert "imported 432 scores" in out


def test_import_scores_rejects_unknown_and_partial(tmp_path, capsys, generated):
    ds, _, _ = generated
    bad = tmp_path / "bad.tsv"
    bad.write_text("not-a-real-id\t-1.0\n", encoding="utf-8")
    code, _, err = run(
        [
            "import-scores",
            "--dataset",
            str(ds),
            "--scores-in",
            str(bad),
            "--out-scores",
            str(tmp_path / "x.tsv"),
        ],
        capsys,
    )
    assert code == 2
    assert "unknown sentence id" in err

    partial = tmp_path / "partial.tsv"
    some_id = json.loads(ds.read_text().splitlines()[0])["id"]
    partial.write_text(f"{some_id}\t-1.0\n", encoding="utf-8")
    args = [
        "import-scores",
        "--dataset",
        str(ds),
        "--scores-in",
        str(partial),
        "--out-scores",
        str(tmp_path / "y.tsv"),
    ]
    code, _, err = run(args, capsys)
    assert code == 2 and "missing" in err
    code, out, _ = run(args + ["--allow-partial"], capsys)
    assert code == 0


def test_evaluate_reports_missing_ids(tmp_path, capsys, generated):
    ds, _, _ = generated
    scores = write_constant_scores(tmp_path, ds)
    truncated = tmp_path / "short.tsv"
    truncated.write_text(
        "".join(scores.read_text().splitlines(keepends=True)[:-1]), encoding="utf-8"
    )
    code, _, err = run(
        [
            "evaluate",
            "--dataset",
            str(ds),
            "--scores",
            str(truncated),
            "--out",
            str(tmp_path / "p.jsonl"),
        ],
        capsys,
    )
    assert code == 2
    assert "missing" in err


def test_report_refuses_mismatched_dataset(tmp_path, capsys, generated):
    ds, _, _ = generated
    scores = write_constant_scores(tmp_path, ds)
    per_set = tmp_path / "p.jsonl"
    assert (
        main(["evaluate", "--dataset", str(ds), "--scores", str(scores), "--out", str(per_set)])
        == 0
    )

    other_template = {
        "id": "other",
        "prefix": "Er wollte uns sagen, dass",
        "verb": "schreibt",
        "items": ["soldat", "offizier", "brief"],
    }
    tpath = tmp_path / "other.jsonl"
    tpath.write_text(json.dumps(other_template) + "\n", encoding="utf-8")
    other_ds = tmp_path / "other_ds.jsonl"
    assert (
        main(
            [
                "generate",
                "--templates",
                str(tpath),
                "--out-dataset",
                str(other_ds),
                "--out-sets",
                str(tmp_path / "other_sets.jsonl"),
            ]
        )
        == 0
    )
    capsys.readouterr()
    code, _, err = run(
        ["report", "--per-set", str(per_set), "--dataset", str(other_ds)], capsys
    )
    assert code == 2
    assert "different dataset" in err


def test_report_group_by_and_out_file(tmp_path, capsys, generated):
    ds, _, _ = generated
    scores = write_constant_scores(tmp_path, ds)
    per_set = tmp_path / "p.jsonl"
    assert (
        main(["evaluate", "--dataset", str(ds), "--scores", str(scores), "--out", str(per_set)])
        == 0
    )
    out_file = tmp_path / "table.csv"
    code, out, _ = run(
        [
            "report",
            "--per-set",
            str(per_set),
            "--group-by",
            "case_order",
            "--format",
            "csv",
            "--out",
            str(out_file),
        ],
        capsys,
    )
    assert code == 0
    assert out_file.read_text().startswith("case_order,mean_auc,avg")
    assert (tmp_path / "table.csv.manifest.json").exists()

    code, out, _ = run(
        ["report", "--per-set", str(per_set), "--constraints"], capsys
    )
    assert code == 0
    assert '"nomalign"' in out


def test_correlate_modes(tmp_path, capsys, generated):
    ds, _, _ = generated
    scores = write_constant_scores(tmp_path, ds)
    per_set = tmp_path / "p.jsonl"
    assert (
        main(["evaluate", "--dataset", str(ds), "--scores", str(scores), "--out", str(per_set)])
        == 0
    )
    capsys.readouterr()
    # Constant AUCs have zero variance; correlation must refuse.
    code, _, err = run(
        ["correlate", "--left", str(per_set), "--right", str(per_set)], capsys
    )
    assert code == 2
    assert "zero-variance" in err

    varied = tmp_path / "varied.jsonl"
    rows = [json.loads(line) for line in per_set.read_text().splitlines()]
    for i, row in enumerate(rows):
        row["auc"] = (i % 7) / 6
    varied.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8"
    )
    code, out, _ = run(
        ["correlate", "--left", str(varied), "--right", str(varied)], capsys
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["pearson"] == 1.0
    assert payload["n"] == 108

    code, out, _ = run(
        ["correlate", "--left", str(varied), "--right", str(varied), "--mode", "cells"],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["n"] == 36


def test_import_annotations_qc_and_normalize(tmp_path, capsys):
    records = []
    for sid, value in (("s1", 90), ("s2", 10)):
        records.append(metrics.AnnotationRecord("good", sid, value, ""))
    records.append(
        metrics.AnnotationRecord("good", "fa", 95, "", is_filler=True, filler_kind="acceptable")
    )
    records.append(
        metrics.AnnotationRecord("good", "fv", 5, "", is_filler=True, filler_kind="violation")
    )
    for sid, value in (("s1", 10), ("s2", 90)):
        records.append(metrics.AnnotationRecord("troll", sid, value, ""))
    records.append(
        metrics.AnnotationRecord("troll", "fa", 5, "", is_filler=True, filler_kind="acceptable")
    )
    records.append(
        metrics.AnnotationRecord("troll", "fv", 95, "", is_filler=True, filler_kind="violation")
    )
    ann_path = tmp_path / "ann.jsonl"
    metrics.write_annotations(records, ann_path)

    out_scores = tmp_path / "norm.tsv"
    code, out, _ = run(
        [
            "import-annotations",
            "--annotations",
            str(ann_path),
            "--out-scores",
            str(out_scores),
        ],
        capsys,
    )
    assert code == 0
    assert "retained 1 of 2" in out
    assert "troll" in out
    lines = dict(
        line.split("\t") for line in out_scores.read_text(encoding="utf-8").splitlines()
    )
    assert float(lines["s1"]) == pytest.approx(1.0)
    assert float(lines["s2"]) == pytest.approx(-1.0)

    code, out, _ = run(
        [
            "import-annotations",
            "--annotations",
            str(ann_path),
            "--out-scores",
            str(tmp_path / "noqc.tsv"),
            "--no-qc",
        ],
        capsys,
    )
    assert code == 0
    assert "retained" not in out


def test_missing_file_exits_cleanly(tmp_path, capsys):
    code, _, err = run(
        [
            "evaluate",
            "--dataset",
            str(tmp_path / "nope.jsonl"),
            "--scores",
            str(tmp_path / "nope.tsv"),
            "--out",
            str(tmp_path / "o.jsonl"),
        ],
        capsys,
    )
    assert code == 2
    assert "error" in err


def test_console_script_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "kasusprobe.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "kasusprobe" in result.stdout
