"""Command-line interface.

Subcommands:
  train         fit the embedding model on a dataset and save a checkpoint
  run           execute an experiment config (agents x seeds)
  ablate-sigma  sweep the kernel bandwidth over an experiment's kernel agent
  couple        run the correlated-arm embedding study and emit CSVs

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import os
import sys
import traceback
from dataclasses import replace

import click
import numpy as np

from .configio import (
    ConfigError,
    _check_keys,
    load_experiment_config,
    load_yaml,
    parse_training,
)
from .coupling import CouplingStudyConfig, run_coupling_study
from .data import load_tabular_csv
from .envs import CoupledArmSpec, coupled_episodes
from .harness import run_experiment, summary_stats
from .mlp import init_mlp
from .persistence import save_model
from .seeding import stream_rng, stream_seed
from .training import train

_DATASET_KEYS = {"kind", "path", "n_rows", "correlations", "concentration",
                 "episodes", "samples_per_episode"}
_MODEL_KEYS = {"hidden_layers", "embedding_dim"}
_COUPLING_KEYS = {"correlations", "concentration", "episodes",
                  "samples_per_episode", "n_seeds", "hidden_layers",
                  "embedding_dim"}


def _load_train_inputs(data, seed: int, path):
    """Materialize (inputs, rewards, intervals, input_dim) from the
    config's dataset section."""
    if "dataset" not in data:
        raise ConfigError(f"{path}: missing 'dataset'")
    ds = data["dataset"]
    _check_keys(ds, _DATASET_KEYS, "dataset")
    kind = ds.get("kind")
    if kind == "csv":
        if "path" not in ds:
            raise ConfigError("dataset: csv kind needs 'path'")
        features, labels = load_tabular_csv(ds["path"])
        n = int(ds.get("n_rows", features.shape[0]))
        rng = stream_rng(seed, "train-cli-logging")
        n_classes = int(labels.max()) + 1
        arms = rng.integers(0, n_classes, size=n)
        rewards = (arms == labels[:n]).astype(np.float64)
        inputs = np.hstack([features[:n], np.eye(n_classes)[arms]])
        intervals = np.zeros(n, dtype=np.int64)
        return inputs, rewards, intervals
    if kind == "coupled":
        spec = CoupledArmSpec(
            correlations=tuple(ds.get("correlations",
                                      (-1.0, -0.6, -0.2, 0.2, 0.6, 1.0))),
            concentration=float(ds.get("concentration", 50.0)),
            episodes=int(ds.get("episodes", 200)),
            samples_per_episode=int(ds.get("samples_per_episode", 100)),
        )
        dataset = coupled_episodes(spec, stream_rng(seed, "train-cli-env"))
        return dataset.inputs, dataset.rewards, dataset.intervals
    raise ConfigError(f"dataset: unknown kind {kind!r} (csv or coupled)")


@click.group()
def cli():
    """Kernel-regression Thompson-sampling bandit toolkit."""


@cli.command(name="train")
@click.option("--config", "config_path", required=True,
              help="YAML file with 'dataset', 'training' and 'model' sections.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              help="Output path for the model checkpoint.")
def train_cmd(config_path, seed, out_path):
    """Fit the embedding model from a dataset and save it."""
    data = load_yaml(config_path)
    _check_keys(data, {"dataset", "training", "model"}, config_path)
    inputs, rewards, intervals = _load_train_inputs(data, seed, config_path)
    model_cfg = data.get("model") or {}
    _check_keys(model_cfg, _MODEL_KEYS, "model")
    hidden = tuple(model_cfg.get("hidden_layers", (32,)))
    emb_dim = int(model_cfg.get("embedding_dim", 4))
    tcfg = parse_training(data.get("training"))
    tcfg = replace(tcfg, seed=stream_seed(seed, "train-cli"),
                   time_intervals=int(intervals.max()) + 1)
    init = init_mlp([inputs.shape[1], *hidden, emb_dim],
                    stream_rng(seed, "train-cli-init"))
    params, trace = train(inputs, rewards, intervals, tcfg, init)
    save_model(params, out_path)
    click.echo(f"trained {len(trace)} epochs, "
               f"final loss {trace[-1]:.6f}" if trace else "no epochs run")
    click.echo(f"model saved to {out_path}")


@cli.command()
@click.option("--config", "config_path", required=True,
              help="Experiment YAML (environment, agents, seeds, horizon).")
@click.option("--seed", type=int, default=None,
              help="Override the config's seed list with a single seed.")
@click.option("--out", "out_dir", default=None,
              help="Override the config's output directory.")
def run(config_path, seed, out_dir):
    """Run an experiment and write per-step and summary CSV metrics."""
    config = load_experiment_config(config_path)
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if out_dir is not None:
        config = replace(config, output_dir=out_dir)
    logs = run_experiment(config)
    for name in sorted(logs):
        mean, half = summary_stats(logs[name].final_regrets())
        click.echo(f"{name}: final regret {mean:.3f} +- {half:.3f}")
    click.echo(f"metrics written to {config.output_dir}")


@cli.command(name="ablate-sigma")
@click.option("--config", "config_path", required=True,
              help="Experiment YAML plus a top-level 'sigmas' list.")
@click.option("--seed", type=int, default=None,
              help="Override the config's seed list with a single seed.")
@click.option("--out", "out_dir", default=None,
              help="Override the config's output directory.")
def ablate_sigma(config_path, seed, out_dir):
    """Sweep the RBF bandwidth of every kernel agent in the config."""
    data = load_yaml(config_path)
    sigmas = data.pop("sigmas", None)
    if not sigmas:
        raise ConfigError(f"{config_path}: ablate-sigma needs a 'sigmas' list")
    import tempfile

    import yaml as _yaml

    with tempfile.NamedTemporaryFile("w", suffix=".yaml", delete=False) as fh:
        _yaml.safe_dump(data, fh)
        base_path = fh.name
    try:
        config = load_experiment_config(base_path)
    finally:
        os.unlink(base_path)
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if out_dir is not None:
        config = replace(config, output_dir=out_dir)
    if not any(a.kind == "kernel_ts" for a in config.agents):
        raise ConfigError(f"{config_path}: no kernel_ts agent to ablate")
    os.makedirs(config.output_dir, exist_ok=True)
    rows = []
    for sigma_val in sigmas:
        sigma_val = float(sigma_val)
        agents = tuple(
            replace(a, sigma=sigma_val, name=f"{a.name}_sigma{sigma_val:g}")
            if a.kind == "kernel_ts" else a
            for a in config.agents)
        sub = replace(config, agents=agents,
                      output_dir=os.path.join(config.output_dir,
                                              f"sigma_{sigma_val:g}"))
        logs = run_experiment(sub)
        for name, log in sorted(logs.items()):
            if name.startswith(tuple(a.name for a in config.agents
                                     if a.kind == "kernel_ts")):
                mean, half = summary_stats(log.final_regrets())
                rows.append((sigma_val, mean, half))
                click.echo(f"sigma={sigma_val:g}: regret {mean:.3f} +- {half:.3f}")
    path = os.path.join(config.output_dir, "sigma_summary.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sigma,mean_final_regret,half_width_1.96\n")
        for sigma_val, mean, half in rows:
            fh.write(f"{sigma_val!r},{mean!r},{half!r}\n")
    click.echo(f"summary written to {path}")


@cli.command()
@click.option("--config", "config_path", default=None,
              help="Optional YAML with 'coupling' and 'training' sections.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default="coupling_out", show_default=True)
def couple(config_path, seed, out_dir):
    """Correlated-arm study; writes rho-vs-distance and raw embedding CSVs."""
    study = CouplingStudyConfig()
    if config_path is not None:
        data = load_yaml(config_path)
        _check_keys(data, {"coupling", "training"}, config_path)
        coupling_cfg = data.get("coupling") or {}
        _check_keys(coupling_cfg, _COUPLING_KEYS, "coupling")
        spec = CoupledArmSpec(
            correlations=tuple(coupling_cfg.get(
                "correlations", study.spec.correlations)),
            concentration=float(coupling_cfg.get(
                "concentration", study.spec.concentration)),
            episodes=int(coupling_cfg.get("episodes", study.spec.episodes)),
            samples_per_episode=int(coupling_cfg.get(
                "samples_per_episode", study.spec.samples_per_episode)),
        )
        training = (parse_training(data["training"])
                    if data.get("training") else study.training)
        study = CouplingStudyConfig(
            spec=spec,
            hidden_layers=tuple(coupling_cfg.get("hidden_layers",
                                                 study.hidden_layers)),
            embedding_dim=int(coupling_cfg.get("embedding_dim",
                                               study.embedding_dim)),
            n_seeds=int(coupling_cfg.get("n_seeds", study.n_seeds)),
            training=training,
        )
    results = run_coupling_study(study, base_seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    dist_path = os.path.join(out_dir, "coupling.csv")
    with open(dist_path, "w", encoding="utf-8") as fh:
        fh.write("seed,arm,rho,distance_to_anchor,seed_spearman\n")
        for res in results:
            for i, (rho, dist) in enumerate(zip(res.correlations,
                                                res.distances), start=1):
                fh.write(f"{res.seed},{i},{rho!r},{dist!r},{res.spearman!r}\n")
    emb_path = os.path.join(out_dir, "embeddings.csv")
    with open(emb_path, "w", encoding="utf-8") as fh:
        dim = results[0].embeddings.shape[1]
        cols = ",".join(f"dim{j}" for j in range(dim))
        fh.write(f"seed,arm,{cols}\n")
        for res in results:
            for i, emb in enumerate(res.embeddings):
                vals = ",".join(repr(float(v)) for v in emb)
                fh.write(f"{res.seed},{i},{vals}\n")
    mean_spearman = float(np.mean([r.spearman for r in results]))
    click.echo(f"mean spearman(rho, distance) = {mean_spearman:.3f}")
    click.echo(f"wrote {dist_path} and {emb_path}")


def main(argv=None) -> int:
    """Dispatch returning an exit code instead of raising SystemExit."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except Exception:
        traceback.print_exc()
        return 2


def entry():  # console-script hook
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
