import json

import pytest

from shelfvib.cli import main

SMALL = {
    "geometry": {"locations": [[0.3, 0.3], [0.6, 0.3]]},
    "dataset": {"weights_g": [50, 300, 500], "samples_per_class": 10},
    "studies": {"seeds": 2, "class_sets_g": [[50, 500], [50, 300, 500]]},
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(root / "ds")]) == 0
    assert main(["featurize", "--config", str(cfg), "--dataset", str(root / "ds"), "--out", str(root / "f.kv")]) == 0
    assert main(["train", "--config", str(cfg), "--dataset", str(root / "f.kv"), "--out", str(root / "models")]) == 0
    return root, cfg


def test_simulate_writes_container(workspace):
    root, _ = workspace
    man = json.loads((root / "ds" / "manifest.json").read_text())
    assert len(man["entries"]) == 2 * 3 * 10 and man["master_seed"] == 4
    assert sorted(p.name for p in (root / "models").iterdir()) == ["L1.model", "L2.model"]


def test_change_identical_is_zero(workspace, capsys):
    root, cfg = workspace
    capsys.readouterr()
    rc = main(["change", "L1/300/7", "L1/300/7", "--config", str(cfg),
               "--dataset", str(root / "f.kv"), "--model", str(root / "models")])
    assert rc == 0
    assert float(capsys.readouterr().out) == 0.0


def test_change_sign(workspace, capsys):
    root, cfg = workspace
    capsys.readouterr()
    main(["change", "L2_w50_s005.wvb", "L2_w500_s005.wvb", "--dataset", str(root / "f.kv"),
          "--model", str(root / "models" / "L2.model")])
    up = float(capsys.readouterr().out)
    main(["change", "L2_w500_s005.wvb", "L2_w50_s005.wvb", "--dataset", str(root / "f.kv"),
          "--model", str(root / "models" / "L2.model")])
    down = float(capsys.readouterr().out)
    assert up == pytest.approx(450.0, abs=50.0) and down == -up


def test_predict_table(workspace, capsys):
    root, cfg = workspace
    capsys.readouterr()
    assert main(["predict", "--dataset", str(root / "f.kv"), "--model", str(root / "models"),
                 "--sample", "L1/500/3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t") == ["sample", "location", "true_g", "predicted_g"]
    assert abs(float(lines[1].split("\t")[3]) - 500.0) < 50


def test_predict_from_dataset_directory(workspace, capsys):
    root, cfg = workspace
    capsys.readouterr()
    assert main(["predict", "--config", str(cfg), "--dataset", str(root / "ds"),
                 "--model", str(root / "models"), "--sample", "L2_w300_s000.wvb"]) == 0
    assert "L2_w300_s000.wvb" in capsys.readouterr().out


def test_evaluate_is_byte_reproducible(workspace, capsys):
    root, cfg = workspace
    for out in ("e1", "e2"):
        assert main(["evaluate", "--config", str(cfg), "--study", "data-efficiency",
                     "--dataset", str(root / "ds"), "--out", str(root / out)]) == 0
    for name in ("results.tsv", "locations.tsv", "summary.kv"):
        assert (root / "e1" / name).read_bytes() == (root / "e2" / name).read_bytes()
    text = (root / "e1" / "results.tsv").read_text()
    assert {"span", "class-count", "fraction"} <= {line.split("\t")[0] for line in text.splitlines()[1:]}


def test_simulate_train_evaluate_reproducible(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**SMALL, "dataset": {"weights_g": [50, 300, 500], "samples_per_class": 4}}))
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["simulate", "--config", str(cfg), "--out", str(d / "ds")]) == 0
        assert main(["train", "--config", str(cfg), "--dataset", str(d / "ds"), "--out", str(d / "m")]) == 0
        assert main(["evaluate", "--config", str(cfg), "--study", "ablation", "--dataset", str(d / "ds"),
                     "--out", str(d / "e")]) == 0
        outs.append([(d / "m" / "L1.model").read_bytes(), (d / "e" / "results.tsv").read_bytes()])
    assert outs[0] == outs[1]


def test_errors_exit_nonzero(workspace, tmp_path, capsys):
    root, cfg = workspace
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"plate": {"D": 1}}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "unknown config key" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x")]) == 1
    assert main(["change", "L1/50/0", "L2/50/0", "--dataset", str(root / "f.kv"),
                 "--model", str(root / "models")]) == 1
    assert main(["change", "L1/50/0", "L1/75/0", "--dataset", str(root / "f.kv"),
                 "--model", str(root / "models")]) == 1
    assert main(["predict", "--dataset", str(root / "f.kv"), "--model", str(tmp_path / "nomodels")]) == 1
    assert main(["simulate", "--config", str(cfg), "--out", str(root / "ds")]) == 1  # not empty
    err = capsys.readouterr().err
    assert all(line.startswith("shelfvib: error:") for line in err.strip().splitlines())
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--study", "nope"])
    assert exc.value.code != 0
