"""Data ingestion, experiment orchestration and result emission.

Sweep cells are independent: each owns its RNG (derived from the master
seed and the cell coordinates, so results do not depend on execution
order) and its dataset view.  Output files are written once at the end.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import algorithms, geometry
from .core import (LabeledDataset, LossModel, RunRecord, approx_budget,
                   empirical_risk, logistic_model, squared_linear_model,
                   tnc_model)

DEFAULT_SEEDS = 20
DEFAULT_FIXED_N = 10_000
DEFAULT_REG = 0.001
IJCNN1_MOVE = 80_000


class LibsvmFormatError(ValueError):
    pass


def parse_libsvm(path) -> LabeledDataset:
    """Parse sparse ``label idx:val ...`` lines into a dense dataset.

    Indices are 1-based; d is the largest index seen.  Rows are then scaled
    by a single global factor so every row has l2 norm <= 1; the factor is
    recorded in ``meta['row_scale']``.
    """
    rows = []
    labels = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = []
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError("index must be >= 1")
                    entries.append((idx, float(val_s)))
            except ValueError as exc:
                raise LibsvmFormatError(
                    f"{path}: malformed line {lineno}: {exc}") from exc
            rows.append(entries)
            labels.append(label)
            if entries:
                max_idx = max(max_idx, max(i for i, _ in entries))
    if not rows:
        raise LibsvmFormatError(f"{path}: empty file")
    d = max(max_idx, 1)
    X = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for idx, val in entries:
            X[r, idx - 1] = val
    norms = np.linalg.norm(X, axis=1)
    max_norm = float(norms.max())
    scale = 1.0 / max_norm if max_norm > 1.0 else 1.0
    X *= scale
    return LabeledDataset(X, np.array(labels),
                          meta={"row_scale": scale, "source": str(path)})


def align_dims(train: LabeledDataset, test: LabeledDataset):
    """Zero-pad the narrower of a train/test pair to a common dimension."""
    d = max(train.d, test.d)

    def pad(ds):
        if ds.d == d:
            return ds
        X = np.zeros((ds.n, d))
        X[:, :ds.d] = ds.features
        return LabeledDataset(X, ds.labels, meta=dict(ds.meta))

    return pad(train), pad(test)


def prepare_ijcnn1(train: LabeledDataset, test: LabeledDataset, seed: int):
    """Move a seeded uniform sample of 80k test rows into the training set."""
    import warnings

    if test.n < IJCNN1_MOVE:
        raise ValueError(f"test set has {test.n} rows < {IJCNN1_MOVE}")
    rng = np.random.default_rng(seed)
    moved = rng.choice(test.n, size=IJCNN1_MOVE, replace=False)
    keep = np.setdiff1d(np.arange(test.n), moved)
    train2 = LabeledDataset(
        np.vstack([train.features, test.features[moved]]),
        np.concatenate([train.labels, test.labels[moved]]),
        meta=dict(train.meta))
    test2 = LabeledDataset(test.features[keep], test.labels[keep],
                           meta=dict(test.meta))
    if (train2.n, test2.n) != (115_000, 11_701):
        warnings.warn(
            f"ijcnn1 sizes {train2.n}/{test2.n} differ from the published "
            "115000/11701 split")
    return train2, test2


@dataclass(frozen=True)
class Problem:
    name: str
    model: LossModel
    fset: geometry.FeasibleSet


def make_problem(name: str, d: int, *, B: float = 1.0,
                 reg_weight: float = DEFAULT_REG, theta: float = 2.0,
                 label_bound: float = 1.0) -> Problem:
    """Loss model + feasible set with constants derived from the ||x|| <= 1
    row normalization."""
    if name in ("linreg_l1", "linreg_l1ball"):
        L = 2.0 * (B + label_bound)
        return Problem("linreg_l1ball",
                       squared_linear_model(lipschitz=L, smoothness=2.0),
                       geometry.L1Ball(radius=B))
    if name in ("logreg_l2", "logreg_l2ball"):
        L = 1.0 + reg_weight * B
        beta = 0.25 + reg_weight
        return Problem("logreg_l2ball",
                       logistic_model(L, beta, reg_weight),
                       geometry.L2Ball(center=np.zeros(d), radius=B))
    if name == "synthetic_tnc":
        beta = max(1.0, theta - 1.0)
        return Problem("synthetic_tnc", tnc_model(theta, 2.0, beta),
                       geometry.L2Ball(center=np.zeros(d), radius=1.0))
    raise ValueError(f"unknown problem {name!r}")


def synthetic_tnc_data(n: int, d: int, rng: np.random.Generator):
    """Hard-instance samples on the +-1/sqrt(d) hypercube corners."""
    X = rng.choice([-1.0, 1.0], size=(n, d)) / math.sqrt(d)
    return LabeledDataset(X, np.zeros(n))


@dataclass
class ExperimentConfig:
    problem: str
    algorithms: list
    sweep_kind: str                  # "n" | "epsilon"
    sweep_values: list
    seeds: int = DEFAULT_SEEDS
    fixed_n: int = DEFAULT_FIXED_N
    master_seed: int = 0
    train_path: str | None = None
    test_path: str | None = None
    ijcnn1_merge: bool = False
    B: float = 1.0
    reg_weight: float = DEFAULT_REG
    theta: float = 2.0
    synthetic_d: int = 10
    output_path: str | None = None
    threads: int = 1
    # wall-clock timing is inherently nondeterministic; disable it when
    # byte-identical output across runs is required
    timing: bool = True

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("seed count must be >= 1")
        vals = list(self.sweep_values)
        if any(v <= 0 for v in vals) or vals != sorted(vals):
            raise ValueError("sweep values must be positive and sorted")
        if self.sweep_kind not in ("n", "epsilon"):
            raise ValueError("sweep kind must be 'n' or 'epsilon'")


def delta_rule(n: int) -> float:
    return n ** (-1.1)


def epsilon_rule(delta: float) -> float:
    """The fixed ratio eps / (2 sqrt(ln(1/delta))) = 2 used in n-sweeps."""
    return 4.0 * math.sqrt(math.log(1.0 / delta))


@dataclass
class ResultRow:
    sweep_value: float
    algorithm: str
    mean_test_error: float
    std_test_error: float
    per_seed_errors: list
    wall_time_s: float
    failed: int = 0


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    n_failed_cells: int = 0


def parse_algo_id(algo_id: str):
    """Split ids like ``iterated_phased_sgd:1.5`` into (name, param)."""
    if ":" in algo_id:
        name, param = algo_id.split(":", 1)
        return name, float(param)
    return algo_id, None


def run_algorithm(algo_id: str, data: LabeledDataset, problem: Problem,
                  budget, rng, record: RunRecord,
                  eval_data: LabeledDataset | None = None) -> np.ndarray:
    name, param = parse_algo_id(algo_id)
    model, fset = problem.model, problem.fset
    w0 = geometry.project(fset, np.zeros(data.d))
    if name == "phased_sgd":
        return algorithms.phased_sgd(data, model, fset, w0, None, budget,
                                     rng, record=record)
    if name == "phased_erm":
        return algorithms.phased_erm(data, model, fset, w0, None, budget,
                                     rng, record=record)
    if name == "phased_sgd_sc":
        gamma = param if param is not None else float(data.n)
        return algorithms.phased_sgd_sc(data, model, fset, w0, gamma,
                                        budget, rng, record=record)
    if name == "psa":
        return algorithms.psa(data, model, fset, w0, None, budget, rng,
                              record=record)
    if name == "psa2":
        theta = param if param is not None else 2.0
        lam = model.strong_convexity if model.strong_convexity > 0 else 1.0
        _, selected = algorithms.psa2(data, model, fset, w0, None, theta,
                                      lam, budget, rng, record=record,
                                      eval_data=eval_data)
        return selected
    if name == "iterated_phased_sgd":
        theta_bar = param if param is not None else 2.0
        return algorithms.iterated_phased_sgd(data, model, fset, w0,
                                              theta_bar, None, budget, rng,
                                              record=record)
    if name == "epoch_dp_sgd":
        n1 = int(param) if param is not None else max(1, data.n // 16)
        beta = model.smoothness
        eta1 = 1.0 / (4.0 * beta) if beta > 0 and math.isfinite(beta) else 0.1
        return algorithms.epoch_dp_sgd(data, model, fset, eta1, n1, w0,
                                       budget, rng, record=record)
    if name == "faster_dpsgd_sc":
        tau = param if param is not None else 1.1
        return algorithms.faster_dpsgd_sc(data, model, fset, w0, tau,
                                          budget, rng, record=record)
    raise ValueError(f"unknown algorithm {algo_id!r}")


def _load_data(config: ExperimentConfig):
    if config.problem == "synthetic_tnc":
        rng = np.random.default_rng(
            np.random.SeedSequence([config.master_seed, 0xDA7A]))
        pool_n = (max(config.sweep_values) if config.sweep_kind == "n"
                  else config.fixed_n)
        train = synthetic_tnc_data(int(pool_n), config.synthetic_d, rng)
        test = synthetic_tnc_data(5000, config.synthetic_d, rng)
        return train, test
    if config.train_path is None or config.test_path is None:
        raise ValueError("real-data problems need train_path and test_path")
    train = parse_libsvm(config.train_path)
    test = parse_libsvm(config.test_path)
    train, test = align_dims(train, test)
    if config.ijcnn1_merge:
        train, test = prepare_ijcnn1(train, test, config.master_seed)
    return train, test


def _run_cell(config, problem, train, test, algo_id, vi, value, si):
    """One (sweep value, algorithm, seed) cell; returns the test error."""
    if config.sweep_kind == "n":
        n = int(value)
        delta = delta_rule(n)
        eps = epsilon_rule(delta)
    else:
        n = config.fixed_n
        delta = delta_rule(n)
        eps = float(value)
    budget = approx_budget(eps, delta)
    seq = np.random.SeedSequence([config.master_seed, vi, si])
    rng = np.random.default_rng(seq)
    if n > train.n:
        raise ValueError(f"sweep n={n} exceeds the {train.n} training rows")
    idx = rng.choice(train.n, size=n, replace=False)
    sub = LabeledDataset(train.features[idx], train.labels[idx],
                         meta=dict(train.meta))
    record = RunRecord(seed=si)
    w = run_algorithm(algo_id, sub, problem, budget, rng, record,
                      eval_data=test)
    record.final_point = w
    if not algorithms.audit_ledger_disjoint(record):
        raise RuntimeError("ledger audit failed: overlapping segments")
    if not algorithms.audit_noise_scales(record):
        raise RuntimeError("noise-scale audit failed")
    return empirical_risk(problem.model, np.asarray(w, dtype=float), test)


def run_experiment(config: ExperimentConfig) -> ResultTable:
    env_seed = os.environ.get("DPSCO_SEED")
    if env_seed is not None:
        config.master_seed = int(env_seed)
    env_threads = os.environ.get("DPSCO_THREADS")
    threads = int(env_threads) if env_threads else config.threads

    train, test = _load_data(config)
    problem = make_problem(config.problem, train.d, B=config.B,
                           reg_weight=config.reg_weight, theta=config.theta)

    cells = [(vi, value, algo, si)
             for vi, value in enumerate(config.sweep_values)
             for algo in config.algorithms
             for si in range(config.seeds)]

    def work(cell):
        vi, value, algo, si = cell
        t0 = time.perf_counter()
        try:
            err = _run_cell(config, problem, train, test, algo, vi, value,
                            si)
            failure = None
        except Exception as exc:  # recorded as a failed cell, run continues
            err, failure = math.nan, str(exc)
        dt = time.perf_counter() - t0 if config.timing else 0.0
        return cell, err, dt, failure

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(c) for c in cells]

    by_key = {}
    for (vi, value, algo, si), err, dt, failure in outcomes:
        by_key.setdefault((vi, value, algo), []).append((si, err, dt,
                                                         failure))
    table = ResultTable(config={
        "problem": config.problem, "algorithms": list(config.algorithms),
        "sweep_kind": config.sweep_kind,
        "sweep_values": list(config.sweep_values),
        "seeds": config.seeds, "fixed_n": config.fixed_n,
        "master_seed": config.master_seed, "B": config.B,
        "reg_weight": config.reg_weight, "theta": config.theta,
        "row_scale": train.meta.get("row_scale", 1.0),
    })
    for (vi, value, algo), cell_results in sorted(by_key.items(),
                                                  key=lambda kv: kv[0][:2]):
        cell_results.sort()
        errors = [e for _, e, _, _ in cell_results]
        failed = sum(1 for _, _, _, f in cell_results if f is not None)
        table.n_failed_cells += failed
        ok = [e for e in errors if not math.isnan(e)]
        table.rows.append(ResultRow(
            sweep_value=float(value), algorithm=algo,
            mean_test_error=float(np.mean(ok)) if ok else math.nan,
            std_test_error=float(np.std(ok)) if ok else math.nan,
            per_seed_errors=errors,
            wall_time_s=sum(dt for _, _, dt, _ in cell_results),
            failed=failed))
    return table


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit(table: ResultTable, fmt: str, path) -> None:
    """Write the table as CSV or JSON (17 significant digits throughout)."""
    if fmt == "csv":
        n_seeds = len(table.rows[0].per_seed_errors) if table.rows else 0
        header = ["sweep_value", "algorithm", "mean_test_error",
                  "std_test_error", "n_seeds", "wall_time_s"]
        header += [f"seed_{i}" for i in range(n_seeds)]
        lines = [",".join(header)]
        for row in table.rows:
            cells = [_fmt(row.sweep_value), row.algorithm,
                     _fmt(row.mean_test_error), _fmt(row.std_test_error),
                     str(len(row.per_seed_errors)), _fmt(row.wall_time_s)]
            cells += [_fmt(e) for e in row.per_seed_errors]
            lines.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        payload = {
            "config": table.config,
            "n_failed_cells": table.n_failed_cells,
            "rows": [asdict(r) for r in table.rows],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_table_csv(path) -> ResultTable:
    """Inverse of emit(..., 'csv'): values round-trip bit-exact."""
    table = ResultTable()
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = line.strip().split(",")
            if not cells or cells == [""]:
                continue
            n_seeds = int(cells[4])
            table.rows.append(ResultRow(
                sweep_value=float(cells[0]), algorithm=cells[1],
                mean_test_error=float(cells[2]),
                std_test_error=float(cells[3]),
                per_seed_errors=[float(c) for c in cells[6:6 + n_seeds]],
                wall_time_s=float(cells[5])))
    return table
