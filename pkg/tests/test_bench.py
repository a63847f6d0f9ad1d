"""Data ingestion, experiment orchestration, result emission and the CLI."""

import json
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from dpsco import bench
from dpsco.bench import (ExperimentConfig, LibsvmFormatError, align_dims,
                         delta_rule, emit, epsilon_rule, make_problem,
                         parse_algo_id, parse_libsvm, prepare_ijcnn1,
                         read_table_csv, run_experiment)
from dpsco.cli import main as cli_main
from dpsco.core import LabeledDataset


# --------------------------------------------------------------- libsvm input

def test_parse_libsvm_basic(tmp_path):
    p = tmp_path / "small"
    p.write_text("1 1:0.5 3:0.25\n-1 2:1.0\n\n1 1:-0.5\n")
    ds = parse_libsvm(p)
    assert (ds.n, ds.d) == (3, 3)
    np.testing.assert_allclose(ds.features[0], [0.5, 0.0, 0.25])
    np.testing.assert_allclose(ds.features[1], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(ds.labels, [1.0, -1.0, 1.0])
    assert ds.meta["row_scale"] == 1.0  # all rows already inside unit ball


def test_parse_libsvm_global_scaling(tmp_path):
    p = tmp_path / "big"
    p.write_text("0 1:3.0 2:4.0\n0 1:1.0\n")
    ds = parse_libsvm(p)
    # one global factor (1/5) applied to every row, recorded in meta
    assert ds.meta["row_scale"] == pytest.approx(0.2)
    np.testing.assert_allclose(ds.features[0], [0.6, 0.8])
    np.testing.assert_allclose(ds.features[1], [0.2, 0.0])
    assert np.max(np.linalg.norm(ds.features, axis=1)) <= 1.0 + 1e-12


def test_parse_libsvm_malformed_line_reports_lineno(tmp_path):
    p = tmp_path / "bad"
    p.write_text("1 1:0.5\n1 nonsense\n")
    with pytest.raises(LibsvmFormatError, match="line 2"):
        parse_libsvm(p)
    p.write_text("1 0:0.5\n")
    with pytest.raises(LibsvmFormatError, match="line 1"):
        parse_libsvm(p)


def test_parse_libsvm_empty_file(tmp_path):
    p = tmp_path / "empty"
    p.write_text("\n\n")
    with pytest.raises(LibsvmFormatError, match="empty"):
        parse_libsvm(p)


def test_align_dims_pads_narrower_side():
    a = LabeledDataset(np.ones((2, 3)), np.zeros(2))
    b = LabeledDataset(np.ones((2, 5)), np.zeros(2))
    a2, b2 = align_dims(a, b)
    assert a2.d == b2.d == 5
    np.testing.assert_array_equal(a2.features[:, 3:], np.zeros((2, 2)))


def test_prepare_ijcnn1_moves_rows():
    train = LabeledDataset(np.zeros((35_000, 2)), np.zeros(35_000))
    test = LabeledDataset(np.ones((91_701, 2)), np.ones(91_701))
    tr, te = prepare_ijcnn1(train, test, seed=0)
    assert tr.n == 115_000
    assert te.n == 11_701
    short = LabeledDataset(np.zeros((30_000, 2)), np.zeros(30_000))
    with pytest.warns(UserWarning, match="differ from the published"):
        tr2, _ = prepare_ijcnn1(short, test, seed=0)
    assert tr2.n == 110_000
    small = LabeledDataset(np.ones((10, 2)), np.ones(10))
    with pytest.raises(ValueError):
        prepare_ijcnn1(train, small, seed=0)


# ------------------------------------------------------------------- problems

def test_make_problem_constants():
    p = make_problem("linreg_l1", d=5, B=1.0)
    assert p.model.kind == "squared_linear"
    assert p.model.lipschitz == pytest.approx(4.0)  # 2 (B + label bound)
    assert p.fset.kind == "l1_ball"

    q = make_problem("logreg_l2", d=5, B=2.0, reg_weight=0.001)
    assert q.model.lipschitz == pytest.approx(1.002)
    assert q.model.smoothness == pytest.approx(0.251)
    assert q.model.strong_convexity == pytest.approx(0.001)
    assert q.fset.kind == "l2_ball"

    r = make_problem("synthetic_tnc", d=5, theta=2.5)
    assert r.model.kind == "tnc_hard_instance"

    with pytest.raises(ValueError):
        make_problem("nope", d=5)


def test_privacy_rules():
    assert delta_rule(10_000) == pytest.approx(10_000 ** -1.1)
    d = delta_rule(10_000)
    assert epsilon_rule(d) == pytest.approx(4.0 * math.sqrt(math.log(1 / d)))


def test_parse_algo_id():
    assert parse_algo_id("phased_sgd") == ("phased_sgd", None)
    assert parse_algo_id("iterated_phased_sgd:1.5") == \
        ("iterated_phased_sgd", 1.5)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("synthetic_tnc", ["phased_sgd"], "n", [200, 100])
    with pytest.raises(ValueError):
        ExperimentConfig("synthetic_tnc", ["phased_sgd"], "m", [100])
    with pytest.raises(ValueError):
        ExperimentConfig("synthetic_tnc", ["phased_sgd"], "n", [100], seeds=0)


# ------------------------------------------------------------- orchestration

def _tiny_config(**over):
    base = dict(problem="synthetic_tnc", algorithms=["phased_sgd"],
                sweep_kind="n", sweep_values=[512], seeds=2, master_seed=1,
                timing=False)
    base.update(over)
    return ExperimentConfig(**base)


def test_run_experiment_shape_and_determinism():
    t1 = run_experiment(_tiny_config())
    t2 = run_experiment(_tiny_config())
    assert len(t1.rows) == 1
    assert t1.n_failed_cells == 0
    assert len(t1.rows[0].per_seed_errors) == 2
    assert t1.rows[0].per_seed_errors == t2.rows[0].per_seed_errors


def test_run_experiment_epsilon_sweep():
    t = run_experiment(_tiny_config(sweep_kind="epsilon",
                                    sweep_values=[1.0, 2.0], fixed_n=512,
                                    algorithms=["phased_sgd", "psa"]))
    assert len(t.rows) == 4
    assert {r.algorithm for r in t.rows} == {"phased_sgd", "psa"}


def test_master_seed_changes_results():
    a = run_experiment(_tiny_config(master_seed=1))
    b = run_experiment(_tiny_config(master_seed=2))
    assert a.rows[0].per_seed_errors != b.rows[0].per_seed_errors


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("DPSCO_SEED", "2")
    via_env = run_experiment(_tiny_config(master_seed=1))
    monkeypatch.delenv("DPSCO_SEED")
    direct = run_experiment(_tiny_config(master_seed=2))
    assert via_env.rows[0].per_seed_errors == direct.rows[0].per_seed_errors


def test_thread_pool_matches_serial(monkeypatch):
    serial = run_experiment(_tiny_config(seeds=3))
    monkeypatch.setenv("DPSCO_THREADS", "3")
    threaded = run_experiment(_tiny_config(seeds=3))
    assert serial.rows[0].per_seed_errors == threaded.rows[0].per_seed_errors


def test_failed_cells_become_nan():
    # epoch_dp_sgd needs a strongly convex model; on the synthetic TNC
    # problem every cell fails and is recorded as NaN instead of crashing
    bad = _tiny_config(algorithms=["epoch_dp_sgd"])
    table = run_experiment(bad)
    assert table.n_failed_cells == 2
    assert math.isnan(table.rows[0].mean_test_error)


# ------------------------------------------------------------------ emission

def test_csv_round_trip_bit_exact(tmp_path):
    table = run_experiment(_tiny_config())
    path = tmp_path / "out.csv"
    emit(table, "csv", path)
    back = read_table_csv(path)
    assert back.rows[0].per_seed_errors == table.rows[0].per_seed_errors
    assert back.rows[0].mean_test_error == table.rows[0].mean_test_error
    header = path.read_text().splitlines()[0]
    assert header.startswith(
        "sweep_value,algorithm,mean_test_error,std_test_error,n_seeds,"
        "wall_time_s")


def test_json_emission(tmp_path):
    table = run_experiment(_tiny_config())
    path = tmp_path / "out.json"
    emit(table, "json", path)
    payload = json.loads(path.read_text())
    assert payload["config"]["problem"] == "synthetic_tnc"
    assert payload["n_failed_cells"] == 0
    assert len(payload["rows"]) == 1
    with pytest.raises(ValueError):
        emit(table, "yaml", tmp_path / "out.yaml")


# ----------------------------------------------------------------------- CLI

def test_cli_schedule():
    runner = CliRunner()
    res = runner.invoke(cli_main, ["schedule", "--algo", "phased_sgd",
                                   "--n", "1024"])
    assert res.exit_code == 0
    assert "512" in res.output
    assert "stage" in res.output


def test_cli_bench_synthetic(tmp_path):
    out = tmp_path / "res.csv"
    runner = CliRunner()
    res = runner.invoke(cli_main, [
        "bench", "--problem", "synthetic_tnc", "--algos", "phased_sgd",
        "--sweep", "n=512", "--seeds", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert out.exists()
    assert "wrote 1 rows" in res.output


def test_cli_run_config(tmp_path):
    cfg = {"problem": "synthetic_tnc", "algorithms": ["phased_sgd"],
           "sweep_kind": "n", "sweep_values": [512], "seeds": 2,
           "timing": False, "output_path": str(tmp_path / "res.csv")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    runner = CliRunner()
    res = runner.invoke(cli_main, ["run", "--config", str(cfg_path)])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "res.csv").exists()


def test_cli_bench_rejects_bad_sweep():
    runner = CliRunner()
    res = runner.invoke(cli_main, [
        "bench", "--problem", "synthetic_tnc", "--algos", "phased_sgd",
        "--sweep", "k=512"])
    assert res.exit_code != 0
