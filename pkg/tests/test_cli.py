from __future__ import annotations

import json

import numpy as np
import pytest

from genco.cli import main
from genco.io import read_grids


def test_full_cli_flow(tmp_path):
    assert main(["synth-levels", "--out", str(tmp_path / "data"), "--n", "30", "--seed", "2"]) == 0
    manifest = tmp_path / "data" / "levels.manifest.json"
    cfg = {"regime": "baseline-postprocess", "n_eval": 40,
           "gan": {"epochs": 1, "baseline_epochs": 1, "hidden": [8]},
           "data": {"path": str(manifest)}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "run")]) == 0
    assert main(["generate", "--run", str(tmp_path / "run"), "--n", "6", "--seed", "1",
                 "--out", str(tmp_path / "s.jsonl")]) == 0
    assert read_grids(tmp_path / "s.jsonl")[0].shape == (6, 5, 5, 8)
    assert main(["evaluate", "--samples", str(tmp_path / "run" / "samples.jsonl"),
                 "--reference", str(manifest), "--k", "3", "--out", str(tmp_path / "r.json")]) == 0
    via_cli = json.loads((tmp_path / "r.json").read_text())
    assert via_cli["k"] == 3 and via_cli["n_fake"] == 40 and via_cli["feasible_fraction"] == 1.0
    assert main(["dump", "--samples", str(tmp_path / "s.jsonl"), "--out", str(tmp_path / "d.txt")]) == 0
    assert (tmp_path / "d.txt").read_text().startswith("; legend:")


def test_epochs_zero_logs_init_only(tmp_path):
    cfg = {"regime": "constrained-gan", "n_eval": 20, "gan": {"epochs": 0, "baseline_epochs": 0}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "run")]) == 0
    rows = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith("0,init,")


def test_evaluate_matches_direct_metrics(tmp_path, levels50):
    from genco.io import write_grids
    from genco.metrics import coverage, density, uniqueness

    write_grids(tmp_path / "ref.jsonl", levels50, "levels")
    write_grids(tmp_path / "s.jsonl", levels50[:20], "samples")
    assert main(["evaluate", "--samples", str(tmp_path / "s.jsonl"), "--reference", str(tmp_path / "ref.jsonl"),
                 "--out", str(tmp_path / "r.json")]) == 0
    r = json.loads((tmp_path / "r.json").read_text())
    assert r["density"] == density(levels50[:20].reshape(20, -1), levels50.reshape(50, -1), 5)
    assert r["coverage"] == coverage(levels50[:20].reshape(20, -1), levels50.reshape(50, -1), 5)
    assert r["unique_fraction"] == uniqueness(levels50[:20]) == 1.0
    assert r["feasible_fraction"] == 1.0


def test_evaluate_reference_against_itself(tmp_path, levels50):
    from genco.io import write_grids

    write_grids(tmp_path / "ref.jsonl", levels50, "levels")
    assert main(["evaluate", "--samples", str(tmp_path / "ref.jsonl"), "--reference", str(tmp_path / "ref.jsonl"),
                 "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["coverage"] == 1.0


def test_errors_give_nonzero_exit(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"regime": "constrained-gan", "typo": 1}))
    assert main(["train", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "r")]) == 1
    assert "unknown keys" in capsys.readouterr().err
    from genco.io import write_grids

    write_grids(tmp_path / "empty.jsonl", np.zeros((0, 5, 5, 8)), "samples")
    write_grids(tmp_path / "ref.jsonl", np.zeros((0, 5, 5, 8)), "levels")
    assert main(["evaluate", "--samples", str(tmp_path / "empty.jsonl"), "--reference",
                 str(tmp_path / "ref.jsonl")]) == 1


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("synth-levels", "synth-terrain", "train", "generate", "evaluate", "sweep-gamma", "dump"):
        assert cmd in out
