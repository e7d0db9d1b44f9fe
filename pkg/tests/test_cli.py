"""End-to-end tests for the command line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from plm.cli import cli_main
from plm.io import load_csv, read_table_csv, write_dataset_csv
from plm.selfcheck import random_recipe
from plm.simulate import SCMRecipe, simulate_scm


@pytest.fixture(autouse=True)
def _no_ambient_seed(monkeypatch):
    monkeypatch.delenv("PLM_SEED", raising=False)


def _data_csv(tmp_path, seed=1, n=250, name="data.csv"):
    data = simulate_scm(random_recipe("b", seed=seed, n=n))
    return write_dataset_csv(data, tmp_path / name)


def _table_argv(data_path, out, **extra):
    argv = ["table", "--data", str(data_path), "--outcome", "Y",
            "--treatment", "D", "--placebo", "P",
            "--role", "placebo_outcome", "--edge-d-to-p",
            "--reps", "80", "--seed", "3", "--out", str(out)]
    for flag, value in extra.items():
        argv.append(flag)
        if value is not None:
            argv.append(str(value))
    return argv


def test_table_flag_form(tmp_path, capsys):
    data_path = _data_csv(tmp_path)
    out = tmp_path / "table.csv"
    assert cli_main(_table_argv(data_path, out)) == 0
    assert str(out) in capsys.readouterr().out
    table = read_table_csv(out)
    labels = [row.label for row in table.rows]
    assert labels[:3] == ["SOO", "Standard DID", "k=1 DID"]
    assert all(label == "Grid" for label in labels[3:])


def test_table_config_form_and_worker_invariance(tmp_path):
    _data_csv(tmp_path)
    (tmp_path / "out").mkdir()
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "data_path": "data.csv",
        "outcome": "Y", "treatment": "D", "placebo": "P",
        "role": "placebo_outcome",
        "edges": {"d_to_p": True},
        "k": [-2.0, 2.0],
        "grid": 3,
        "bootstrap": {"reps": 80, "seed": 11},
        "outputs": {"table": "out/table.csv"},
    }), encoding="utf-8")
    out = tmp_path / "out" / "table.csv"
    assert cli_main(["table", "--config", str(config)]) == 0
    first = out.read_bytes()
    assert cli_main(["table", "--config", str(config)]) == 0
    assert out.read_bytes() == first
    assert cli_main(["table", "--config", str(config),
                     "--workers", "3"]) == 0
    assert out.read_bytes() == first


def test_config_clashes_with_flags(tmp_path, capsys):
    data_path = _data_csv(tmp_path)
    config = tmp_path / "run.json"
    config.write_text("{}", encoding="utf-8")
    code = cli_main(["table", "--config", str(config),
                     "--data", str(data_path)])
    assert code == 2
    assert "--data" in capsys.readouterr().err


def test_flag_form_missing_pieces(tmp_path, capsys):
    data_path = _data_csv(tmp_path)
    code = cli_main(["table", "--data", str(data_path), "--outcome", "Y"])
    assert code == 2
    err = capsys.readouterr().err
    assert "--treatment" in err and "--out" in err


def test_unknown_role_rejected_by_parser(tmp_path, capsys):
    data_path = _data_csv(tmp_path)
    code = cli_main(_table_argv(data_path, tmp_path / "t.csv")[:-4]
                    + ["--role", "nonsense"])
    assert code == 2
    capsys.readouterr()


def test_bad_data_cell_exits_three(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("D,P,Y\n0,1,2\n1,NA,3\n", encoding="utf-8")
    code = cli_main(["table", "--data", str(bad), "--outcome", "Y",
                     "--treatment", "D", "--placebo", "P",
                     "--role", "placebo_outcome",
                     "--out", str(tmp_path / "t.csv")])
    assert code == 3
    assert "row 3" in capsys.readouterr().err


def test_degenerate_placebo_exits_four(tmp_path, capsys):
    rows = ["D,P,Y"]
    rng = np.random.default_rng(0)
    for _ in range(40):
        d = rng.integers(0, 2)
        rows.append(f"{d},1.0,{d + rng.normal():.6f}")
    path = tmp_path / "flat.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    code = cli_main(["table", "--data", str(path), "--outcome", "Y",
                     "--treatment", "D", "--placebo", "P",
                     "--role", "placebo_outcome", "--reps", "50",
                     "--out", str(tmp_path / "t.csv")])
    assert code == 4
    assert "degenerac" in capsys.readouterr().err


def test_contour_config_writes_csv_json_svg(tmp_path, capsys):
    _data_csv(tmp_path)
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "data_path": "data.csv",
        "outcome": "Y", "treatment": "D", "placebo": "P",
        "role": "placebo_outcome",
        "edges": {"d_to_p": True},
        "direct": [-1.0, 1.0],
        "grid": 15,
        "outputs": {"contour": "surface.csv", "svg": "surface.svg"},
    }), encoding="utf-8")
    assert cli_main(["contour", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    assert (tmp_path / "surface.csv").is_file()
    assert (tmp_path / "surface.json").is_file()
    assert (tmp_path / "surface.svg").is_file()
    assert out.count("\n") == 3
    payload = json.loads((tmp_path / "surface.json").read_text("utf-8"))
    assert payload["zero_contour"]
    # A table run against the same config has no table output configured.
    assert cli_main(["table", "--config", str(config)]) == 2


def test_line_multiple_fixed_positions(tmp_path, capsys):
    data_path = _data_csv(tmp_path)
    out = tmp_path / "line.csv"
    code = cli_main(["line", "--data", str(data_path), "--outcome", "Y",
                     "--treatment", "D", "--placebo", "P",
                     "--role", "placebo_outcome", "--edge-d-to-p",
                     "--direct", "-1", "1", "--grid", "9",
                     "--reps", "60", "--vary", "k", "--at", "0.25", "0.75",
                     "--out", str(out), "--svg", str(tmp_path / "line.svg")])
    assert code == 0
    assert (tmp_path / "line_1.csv").is_file()
    assert (tmp_path / "line_2.csv").is_file()
    svg = (tmp_path / "line.svg").read_text(encoding="utf-8")
    assert svg.count("<polyline") == 2
    capsys.readouterr()


def test_env_seed_override(tmp_path, monkeypatch, capsys):
    data_path = _data_csv(tmp_path)
    out = tmp_path / "t.csv"
    assert cli_main(_table_argv(data_path, out)) == 0
    seed3 = out.read_bytes()
    monkeypatch.setenv("PLM_SEED", "99")
    assert cli_main(_table_argv(data_path, out)) == 0
    env99 = out.read_bytes()
    assert env99 != seed3
    monkeypatch.delenv("PLM_SEED")
    argv = _table_argv(data_path, out)
    argv[argv.index("--seed") + 1] = "99"
    assert cli_main(argv) == 0
    assert out.read_bytes() == env99
    monkeypatch.setenv("PLM_SEED", "not-a-seed")
    assert cli_main(_table_argv(data_path, out)) == 2
    assert "PLM_SEED" in capsys.readouterr().err


def test_did_json_hand_example(tmp_path, capsys):
    path = tmp_path / "panel.csv"
    path.write_text(
        "G,Y,N\n1,10,5\n1,14,7\n0,6,4\n0,8,6\n", encoding="utf-8"
    )
    argv = ["did", "--data", str(path), "--outcome", "Y",
            "--placebo", "N", "--group", "G"]
    assert cli_main(argv) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dim_Y"] == 5.0
    assert payload["dim_N"] == 1.0
    assert set(payload["att_at_m"]) == {"0", "0.5", "1", "1.5"}
    assert payload["att_at_m"]["0"] == 5.0
    assert payload["att_at_m"]["1"] == 4.0
    assert payload["att_at_m"]["1.5"] == 3.5
    assert payload["trends"] == {
        "trend_treated": 6.0, "trend_control": 2.0,
        "bias_Y_minus_bias_N": 4.0,
    }
    assert payload["w_for_m_1"] == 1.0

    out = tmp_path / "did.json"
    assert cli_main(argv + ["--att-n", "1", "--out", str(out)]) == 0
    capsys.readouterr()
    with_effect = json.loads(out.read_text(encoding="utf-8"))
    assert with_effect["att_at_m"]["1"] == 5.0
    assert with_effect["w_for_m_1"] == 0.5


def test_semiparam_json(tmp_path, capsys):
    argv = ["semiparam", "--theta-s-y", "2", "--theta-s-n", "1",
            "--theta-l-n", "0", "--k", "4", "--s2-y", "9", "--s2-n", "4"]
    assert cli_main(argv) == 0
    assert json.loads(capsys.readouterr().out) == {"estimate": -1.0}
    assert cli_main(argv + ["--sign-m", "-1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"estimate": 5.0}
    assert cli_main(["semiparam", "--theta-s-y", "2", "--theta-s-n", "1",
                     "--k", "-1"]) == 2
    capsys.readouterr()


def test_simulate_reproduces_recipe(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code = cli_main(["simulate", "--case", "a", "--n", "50", "--seed", "4",
                     "--coef", "z->y=0.7", "--noise-sd", "y=0.5",
                     "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    loaded = load_csv(out)
    expected = simulate_scm(SCMRecipe(
        n=50, graph_case="a", coefficients={"z->y": 0.7},
        noise_sd={"y": 0.5}, seed=4,
    ))
    assert loaded.names == expected.names
    assert np.array_equal(loaded.matrix(loaded.names),
                          expected.matrix(expected.names))


def test_simulate_rejects_bad_recipe(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    assert cli_main(["simulate", "--case", "a", "--n", "20",
                     "--coef", "q->r=1", "--out", str(out)]) == 2
    assert cli_main(["simulate", "--case", "a", "--n", "20",
                     "--coef", "z->y", "--out", str(out)]) == 2
    capsys.readouterr()


def test_verify_reports_and_passes(capsys):
    assert cli_main(["verify", "--seed", "7", "--draws", "2"]) == 0
    out = capsys.readouterr().out
    assert "single-placebo recovery" in out
    assert "double-placebo recovery" in out
    assert "bias factorization" in out
    assert "all checks passed" in out


def test_help_and_missing_subcommand(capsys):
    assert cli_main(["--help"]) == 0
    assert cli_main([]) == 2
    capsys.readouterr()


def test_installed_entry_point():
    proc = subprocess.run(
        ["plm", "verify", "--draws", "1"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "all checks passed" in proc.stdout


def test_module_invocation():
    proc = subprocess.run(
        [sys.executable, "-m", "plm.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "table" in proc.stdout
