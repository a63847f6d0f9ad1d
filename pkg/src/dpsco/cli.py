"""Command line surface: run / bench / verify / schedule."""

from __future__ import annotations

import json
import math
import os
import sys

import click

from . import bench, schedules
from .core import approx_budget, pure_budget


@click.group()
def main():
    """Differentially private stochastic convex optimization toolkit."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True),
              help="JSON file mirroring ExperimentConfig")
def run(config_path):
    """Run an experiment described by a config file."""
    with open(config_path) as fh:
        cfg = json.load(fh)
    config = bench.ExperimentConfig(**cfg)
    table = bench.run_experiment(config)
    _emit_table(table, config.output_path or "results.csv")
    if table.n_failed_cells:
        click.echo(f"{table.n_failed_cells} cell(s) failed", err=True)
        sys.exit(1)


@main.command("bench")
@click.option("--problem", required=True,
              help="linreg_l1 | logreg_l2 | synthetic_tnc")
@click.option("--dataset", default=None,
              help="dataset name; resolves to <data-dir>/<name> and "
                   "<data-dir>/<name>.t")
@click.option("--data-dir", default="data", show_default=True)
@click.option("--train", "train_path", default=None,
              type=click.Path(exists=True))
@click.option("--test", "test_path", default=None,
              type=click.Path(exists=True))
@click.option("--algos", required=True,
              help="comma list, e.g. phased_sgd,iterated_phased_sgd:1.5")
@click.option("--sweep", required=True,
              help="n=1000,2000,... or epsilon=0.5,1,...")
@click.option("--seeds", default=bench.DEFAULT_SEEDS, show_default=True)
@click.option("--seed", "master_seed", default=0, show_default=True)
@click.option("--b", "B", default=1.0, show_default=True,
              help="constraint radius")
@click.option("--reg", default=bench.DEFAULT_REG, show_default=True)
@click.option("--theta", default=2.0, show_default=True)
@click.option("--out", "output_path", default="results.csv",
              show_default=True)
def bench_cmd(problem, dataset, data_dir, train_path, test_path, algos,
              sweep, seeds, master_seed, B, reg, theta, output_path):
    """Run a sweep and write a result table."""
    if dataset and not train_path:
        train_path = os.path.join(data_dir, dataset)
        test_path = os.path.join(data_dir, dataset + ".t")
    kind, _, values = sweep.partition("=")
    if kind not in ("n", "epsilon") or not values:
        raise click.BadParameter("sweep must look like n=1000,2000")
    sweep_values = [float(v) for v in values.split(",")]
    config = bench.ExperimentConfig(
        problem=problem, algorithms=algos.split(","), sweep_kind=kind,
        sweep_values=sweep_values, seeds=seeds, master_seed=master_seed,
        train_path=train_path, test_path=test_path, B=B, reg_weight=reg,
        theta=theta, output_path=output_path,
        ijcnn1_merge=bool(dataset and dataset.startswith("ijcnn1")))
    table = bench.run_experiment(config)
    _emit_table(table, output_path)
    if table.n_failed_cells:
        click.echo(f"{table.n_failed_cells} cell(s) failed", err=True)
        sys.exit(1)


def _emit_table(table, path):
    fmt = "json" if str(path).endswith(".json") else "csv"
    bench.emit(table, fmt, path)
    click.echo(f"wrote {len(table.rows)} rows to {path}")


@main.command()
def verify():
    """Run the oracle cross-check and property suites."""
    from . import verify as verify_mod

    ok = verify_mod.run_all(echo=click.echo)
    sys.exit(0 if ok else 1)


@main.command()
@click.option("--algo", required=True)
@click.option("--n", required=True, type=int)
@click.option("--eta", default=1.0, show_default=True)
@click.option("--theta-bar", default=2.0, show_default=True)
@click.option("--n1", default=1, show_default=True)
@click.option("--d", default=1, show_default=True)
@click.option("--theta", default=2.0, show_default=True)
@click.option("--lam", default=1.0, show_default=True)
@click.option("--lipschitz", "L", default=1.0, show_default=True)
@click.option("--epsilon", default=1.0, show_default=True)
@click.option("--delta", default=0.0, show_default=True,
              help="0 selects pure DP")
def schedule(algo, n, eta, theta_bar, n1, d, theta, lam, L, epsilon, delta):
    """Print the stage table of a driver for inspection."""
    budget = pure_budget(epsilon) if delta == 0 else \
        approx_budget(epsilon, delta)
    sched = schedules.build(algo, n, eta=eta, theta_bar=theta_bar, n1=n1,
                            d=d, theta=theta, lam=lam, L=L, budget=budget)
    click.echo(f"algorithm: {sched.algo}")
    for key, val in sched.extra.items():
        click.echo(f"{key}: {val}")
    click.echo(f"total samples: {sched.total_samples} / {n}")
    header = "stage  size"
    if sched.stepsizes:
        header += "        stepsize"
    click.echo(header)
    for i, size in enumerate(sched.stage_sizes, start=1):
        line = f"{i:>5}  {size:>10}"
        if sched.stepsizes:
            line += f"  {sched.stepsizes[i - 1]:.6g}"
        click.echo(line)


if __name__ == "__main__":
    main()
