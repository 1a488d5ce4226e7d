"""End-to-end tests of the command-line pipeline (in-process)."""

import json
import os

import numpy as np
import pytest

from embedrl.cli import main
from embedrl.config import LearningSection
from embedrl.controller import init_policy_value
from embedrl.embedding import init_model
from embedrl.fileio import read_model, read_policy, read_trajectory, write_model


SMALL = {
    "system": {"n_fock": 3},
    "learning": {"d_er": 1, "n_measurements": 120, "max_epochs": 5, "seed": 5},
    "control": {"episodes": 4, "horizon": 6, "seed": 3},
}


def write_config(tmp_path, doc=SMALL, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_simulate_writes_record_sidecar_and_bloch(tmp_path):
    cfg = write_config(tmp_path)
    out = str(tmp_path / "traj.csv")
    assert main(["simulate", "--config", cfg, "--out", out]) == 0
    lines = open(out, encoding="utf-8").read().splitlines()
    assert lines[0] == "step,outcome,probability"
    assert len(lines) == 121
    meta = json.load(open(str(tmp_path / "traj.json"), encoding="utf-8"))
    assert meta["seed"] == LearningSection(seed=5).trajectory_seed
    assert os.path.exists(str(tmp_path / "traj.bloch.csv"))
    assert os.path.exists(str(tmp_path / "traj.bloch.png"))


def test_simulate_reruns_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    out_a = str(tmp_path / "a.csv")
    out_b = str(tmp_path / "b.csv")
    assert main(["simulate", "--config", cfg, "--out", out_a, "--no-figures"]) == 0
    assert main(["simulate", "--config", cfg, "--out", out_b, "--no-figures"]) == 0
    assert open(out_a, "rb").read() == open(out_b, "rb").read()


def test_simulate_zero_coupling_z_basis_outcomes_constant(tmp_path):
    doc = {
        "system": {"n_fock": 2, "modes": [{"omega": 1.0, "lam": 0.0}]},
        "learning": {"d_er": 1, "n_measurements": 50, "basis": "z", "seed": 1},
    }
    cfg = write_config(tmp_path, doc)
    out = str(tmp_path / "traj.csv")
    assert main(["simulate", "--config", cfg, "--out", out, "--no-figures"]) == 0
    traj, _ = read_trajectory(out)
    assert np.all(traj.outcomes == traj.outcomes[0])
    assert np.max(np.abs(traj.probabilities - 1.0)) < 1e-12


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"learning": {"typo_key": 1}})
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "--config", cfg, "--out", out]) == 2
    assert "typo_key" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", "x.csv"]) == 2


def test_learn_zero_epochs_writes_initialized_model(tmp_path):
    doc = dict(SMALL, learning=dict(SMALL["learning"], max_epochs=0))
    cfg = write_config(tmp_path, doc)
    traj_path = str(tmp_path / "traj.csv")
    model_path = str(tmp_path / "model.json")
    assert main(["simulate", "--config", cfg, "--out", traj_path, "--no-figures"]) == 0
    assert main(["learn", "--config", cfg, "--data", traj_path, "--out", model_path, "--no-figures"]) == 0
    learned = read_model(model_path)
    fresh = init_model(2, 1, 0.2, seed=LearningSection(seed=5).model_init_seed)
    assert np.array_equal(learned.h, fresh.h)
    curve_lines = open(str(tmp_path / "model.curve.csv"), encoding="utf-8").read().splitlines()
    assert curve_lines == ["epoch,log_geo_mean_p"]


def test_learn_rejects_dt_mismatch(tmp_path):
    cfg = write_config(tmp_path)
    traj_path = str(tmp_path / "traj.csv")
    assert main(["simulate", "--config", cfg, "--out", traj_path, "--no-figures"]) == 0
    doc = dict(SMALL, learning=dict(SMALL["learning"], dt=0.1))
    cfg2 = write_config(tmp_path, doc, name="config2.json")
    code = main(["learn", "--config", cfg2, "--data", traj_path, "--out", str(tmp_path / "m.json")])
    assert code == 2


def test_control_zero_episodes_writes_fresh_policy(tmp_path):
    doc = dict(SMALL, control=dict(SMALL["control"], episodes=0))
    cfg = write_config(tmp_path, doc)
    traj_path = str(tmp_path / "traj.csv")
    model_path = str(tmp_path / "model.json")
    policy_path = str(tmp_path / "policy.json")
    assert main(["simulate", "--config", cfg, "--out", traj_path, "--no-figures"]) == 0
    assert main(["learn", "--config", cfg, "--data", traj_path, "--out", model_path, "--no-figures"]) == 0
    assert main(["control", "--config", cfg, "--model", model_path, "--out", policy_path, "--no-figures"]) == 0
    saved = read_policy(policy_path)
    fresh = init_policy_value(2 * 4, 9, hidden=(64, 64), seed=3)
    for w0, w1 in zip(saved.policy.weights, fresh.policy.weights):
        assert np.array_equal(w0, w1)
    curve_lines = open(str(tmp_path / "policy.curve.csv"), encoding="utf-8").read().splitlines()
    assert curve_lines == ["episode,steps,return,final_F,final_D"]


def test_full_pipeline_and_evaluate_modes(tmp_path):
    cfg = write_config(tmp_path)
    traj_path = str(tmp_path / "traj.csv")
    model_path = str(tmp_path / "model.json")
    policy_path = str(tmp_path / "policy.json")
    assert main(["simulate", "--config", cfg, "--out", traj_path, "--no-figures"]) == 0
    assert main(["learn", "--config", cfg, "--data", traj_path, "--out", model_path, "--no-figures"]) == 0
    assert main(["control", "--config", cfg, "--model", model_path, "--out", policy_path, "--no-figures"]) == 0
    curve_lines = open(str(tmp_path / "policy.curve.csv"), encoding="utf-8").read().splitlines()
    assert len(curve_lines) == 1 + 4

    for mode in ("model", "true"):
        out = str(tmp_path / f"eval_{mode}.csv")
        code = main([
            "evaluate", "--config", cfg, "--model", model_path, "--policy", policy_path,
            "--mode", mode, "--out", out, "--no-figures",
        ])
        assert code == 0
        lines = open(out, encoding="utf-8").read().splitlines()
        assert lines[0] == "episode,steps,return,final_F,final_D"
        assert len(lines) == 2
        steps_lines = open(str(tmp_path / f"eval_{mode}.steps.csv"), encoding="utf-8").read().splitlines()
        assert steps_lines[0] == "step,Bx,F,D,r"

    assert main([
        "evaluate", "--config", cfg, "--model", model_path, "--policy", policy_path,
        "--out", str(tmp_path / "eval3.csv"), "--episodes", "3", "--no-figures",
    ]) == 0
    lines = open(str(tmp_path / "eval3.csv"), encoding="utf-8").read().splitlines()
    assert len(lines) == 4
    body = [l.split(",", 1)[1] for l in lines[1:]]
    assert body[0] == body[1] == body[2]


def test_evaluate_jobs_fanout_matches_serial(tmp_path):
    cfg = write_config(tmp_path)
    traj_path = str(tmp_path / "traj.csv")
    model_path = str(tmp_path / "model.json")
    policy_path = str(tmp_path / "policy.json")
    assert main(["simulate", "--config", cfg, "--out", traj_path, "--no-figures"]) == 0
    assert main(["learn", "--config", cfg, "--data", traj_path, "--out", model_path, "--no-figures"]) == 0
    assert main(["control", "--config", cfg, "--model", model_path, "--out", policy_path, "--no-figures"]) == 0
    serial = str(tmp_path / "serial.csv")
    fanned = str(tmp_path / "fanned.csv")
    base = ["evaluate", "--config", cfg, "--model", model_path, "--policy", policy_path,
            "--episodes", "2", "--no-figures"]
    assert main(base + ["--out", serial]) == 0
    assert main(base + ["--out", fanned, "--jobs", "2"]) == 0
    assert open(serial, "rb").read() == open(fanned, "rb").read()


def test_control_numerical_failure_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path)
    model = init_model(2, 1, 0.2, seed=0)
    swap = np.zeros((4, 4))
    for i, j in ((0, 0), (1, 2), (2, 1), (3, 3)):
        swap[i, j] = 1.0
    model.h = (np.pi / (2 * 0.2)) * swap.astype(complex)
    model_path = str(tmp_path / "model.json")
    write_model(model_path, model)
    code = main(["control", "--config", cfg, "--model", model_path, "--out", str(tmp_path / "p.json")])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_figures_rendered_by_default(tmp_path):
    doc = dict(SMALL, learning=dict(SMALL["learning"], n_measurements=30, max_epochs=2))
    cfg = write_config(tmp_path, doc)
    traj_path = str(tmp_path / "traj.csv")
    model_path = str(tmp_path / "model.json")
    assert main(["simulate", "--config", cfg, "--out", traj_path]) == 0
    assert main(["learn", "--config", cfg, "--data", traj_path, "--out", model_path]) == 0
    assert os.path.exists(str(tmp_path / "traj.bloch.png"))
    assert os.path.exists(str(tmp_path / "model.curve.png"))
