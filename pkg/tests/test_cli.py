import json

import pytest

from ouv_classifier.cli import main

HEADER = "id_no,name_en,criteria_txt,justification_en,short_description_en\n"
ROMANS = ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x"]

WORDS = ["ancient", "walls", "garden", "temple", "harbour", "quarter",
         "bridge", "palace", "valley", "terrace", "mosaic", "chapel"]


def sentence(site, criterion):
    a = WORDS[site % len(WORDS)]
    b = WORDS[(site + criterion) % len(WORDS)]
    return (f"The {a} {b} ensemble shows enduring testimony to living "
            f"traditions across many generations of builders.")


def write_corpus_csv(path, with_sd=True):
    rows = [HEADER]
    for site in range(1, 13):
        crits = [(site % 10) + 1, ((site + 3) % 10) + 1]
        crit_txt = "".join(f"({ROMANS[c - 1]})" for c in crits)
        just = " ".join(
            f"Criterion ({ROMANS[c - 1]}): {sentence(site, c)}"
            for c in crits)
        sd = (f"A renowned {WORDS[site % len(WORDS)]} site of great value."
              if with_sd else "")
        rows.append(f'{site},"Site {site}","{crit_txt}","{just}","{sd}"\n')
    path.write_text("".join(rows), encoding="utf-8")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    csv_path = root / "syndication.csv"
    write_corpus_csv(csv_path)
    data_dir = root / "data"
    assert main(["ingest", str(csv_path), "--out", str(data_dir)]) == 0
    prior_path = root / "prior.json"
    assert main(["prior", str(data_dir), "--out", str(prior_path)]) == 0
    config_path = root / "config.json"
    config_path.write_text(json.dumps({
        "baseline": "ngram",
        "grid": {"hidden": [16], "batch_size": [32]},
        "learning_rate": 0.01,
        "seeds": [0, 1],
        "alpha_grid": [0.0, 0.1],
        "variants": ["vanilla", "uniform", "prior"],
        "max_epochs": 2,
        "patience": 2,
        "min_df": 1,
        "dataset_dir": str(data_dir),
        "prior_path": str(prior_path),
        "output_dir": str(root / "runs"),
    }), encoding="utf-8")
    return {"root": root, "csv": csv_path, "data": data_dir,
            "prior": prior_path, "config": config_path,
            "runs": root / "runs"}


def test_ingest_outputs(workspace):
    for name in ("train", "valid", "test", "sd"):
        path = workspace["data"] / f"{name}.jsonl"
        assert path.exists()
        assert path.read_text().strip()
    assert (workspace["data"] / "sites.json").exists()


def test_prior_outputs(workspace):
    payload = json.loads(workspace["prior"].read_text())
    mu = payload["mu"]
    assert len(mu) == 10 and all(len(row) == 11 for row in mu)
    counts = payload["counts"]
    assert len(counts) == 10 and all(len(row) == 10 for row in counts)
    assert workspace["prior"].with_suffix(".csv").exists()


def test_train_and_evaluate(workspace, capsys):
    model_path = workspace["root"] / "single/model.json"
    assert main(["train", "--baseline", "ngram",
                 "--config", str(workspace["config"]),
                 "--out", str(model_path)]) == 0
    assert model_path.exists()
    assert model_path.with_name("model_featurizer.json").exists()
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model_path),
                 "--split", "valid", "--dataset",
                 str(workspace["data"])]) == 0
    report = json.loads(capsys.readouterr().out)
    assert 0.0 <= report["top1_accuracy"] <= 1.0
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model_path),
                 "--split", "sd", "--dataset", str(workspace["data"])]) == 0
    report = json.loads(capsys.readouterr().out)
    assert 0.0 <= report["topk_match"] <= 1.0


def test_sweep_then_final_then_report(workspace, capsys):
    assert main(["sweep", "--config", str(workspace["config"])]) == 0
    out = capsys.readouterr().out
    assert "chosen LS:" in out
    assert (workspace["runs"] / "step1_grid/log.json").exists()
    assert (workspace["runs"] / "step2_sweep/sweep.json").exists()

    assert main(["final", "--config", str(workspace["config"])]) == 0
    out = capsys.readouterr().out
    assert "no_ls:" in out and "ls:" in out
    assert (workspace["runs"] / "step3_final/final.json").exists()

    assert main(["report", str(workspace["runs"])]) == 0
    out = capsys.readouterr().out
    assert "chosen LS" in out
    assert (workspace["runs"] / "summary.json").exists()
    assert (workspace["runs"] / "curves.csv").exists()


def test_mine_cli(workspace, capsys):
    model_a = workspace["runs"] / "step3_final/model_no_ls.json"
    model_b = workspace["runs"] / "step3_final/model_ls.json"
    input_path = workspace["root"] / "mine_input.txt"
    input_path.write_text(
        "The ancient walls ensemble shows enduring testimony here.\n"
        "A renowned temple site of great value.\n", encoding="utf-8")
    out_path = workspace["root"] / "mined.json"
    assert main(["mine", "--models", str(model_a), str(model_b),
                 "--input", str(input_path),
                 "--confidence", "0", "--iou", "0",
                 "--out", str(out_path)]) == 0
    kept = json.loads(out_path.read_text())
    assert isinstance(kept, list)
    for entry in kept:
        assert entry["iou"] > 0.0
        assert len(entry["predictions_a"]) == 3


def test_final_without_sd_returns_2(workspace, tmp_path, capsys):
    csv_path = tmp_path / "no_sd.csv"
    write_corpus_csv(csv_path, with_sd=False)
    data_dir = tmp_path / "data"
    assert main(["ingest", str(csv_path), "--out", str(data_dir)]) == 0
    config_path = tmp_path / "config.json"
    base = json.loads(workspace["config"].read_text())
    base["dataset_dir"] = str(data_dir)
    base["output_dir"] = str(workspace["runs"])  # reuse step1/step2 artifacts
    config_path.write_text(json.dumps(base), encoding="utf-8")
    capsys.readouterr()
    assert main(["final", "--config", str(config_path)]) == 2
    assert "SD" in capsys.readouterr().err

    # an empty split is a fatal error for evaluate
    model_path = workspace["runs"] / "step3_final/model_no_ls.json"
    assert main(["evaluate", "--model", str(model_path),
                 "--split", "sd", "--dataset", str(data_dir)]) == 1


def test_report_missing_artifacts(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 1
    assert "missing artifacts" in capsys.readouterr().err


def test_ingest_missing_file(tmp_path):
    assert main(["ingest", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "out")]) == 1


def test_train_missing_config(tmp_path):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 1
