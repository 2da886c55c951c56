"""YAML experiment configuration with fail-fast validation.

Unknown keys are errors so a typo cannot silently change an experiment.
The schema is documented in the README; see configs/ for working examples.
"""

from __future__ import annotations

import os

import yaml

from .agents import EvictionPolicy
from .harness import AgentSpec, EnvironmentSpec, ExperimentConfig
from .training import TrainingConfig

__all__ = ["ConfigError", "load_experiment_config", "load_training_config",
           "load_yaml"]


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


_TOP_KEYS = {"environment", "agents", "seeds", "horizon", "output_dir",
             "training", "relative_regret", "save_stores", "save_models"}
_ENV_KEYS = {"kind", "base_rates", "drift", "warm_start", "csv_path",
             "synthetic", "n_train", "n_eval", "updates_per_eval"}
_DRIFT_KEYS = {"boosted", "phases"}
_PHASE_KEYS = {"start", "stop", "p", "q"}
_AGENT_KEYS = {"name", "kind", "sigma", "truncation_radius", "eviction",
               "use_importance_weights", "hidden_layers", "embedding_dim",
               "alpha", "v", "epsilon"}
_EVICTION_KEYS = {"period", "fraction", "exact"}
_TRAINING_KEYS = {"epochs", "batch_size", "learning_rate", "lr_decay",
                  "lambda_ece", "ece_bins", "ref_fraction", "sample_fraction",
                  "time_intervals", "sigma", "seed", "validation_fraction",
                  "model_selection", "differentiate_weights"}
_SYNTH_KEYS = {"n_classes", "dim", "priors", "spread", "scale"}


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def load_yaml(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _parse_eviction(raw, where) -> EvictionPolicy:
    if raw is None:
        return EvictionPolicy()
    _check_keys(raw, _EVICTION_KEYS, where)
    try:
        return EvictionPolicy(period=int(raw.get("period", 0)),
                              fraction=float(raw.get("fraction", 0.0)),
                              exact=bool(raw.get("exact", False)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_environment(raw) -> EnvironmentSpec:
    _check_keys(raw, _ENV_KEYS, "environment")
    if "kind" not in raw:
        raise ConfigError("environment: missing 'kind'")
    drift_phases = ()
    if raw.get("drift") is not None:
        drift = raw["drift"]
        _check_keys(drift, _DRIFT_KEYS, "environment.drift")
        boosted = int(drift.get("boosted", 0))
        phases = []
        for i, ph in enumerate(drift.get("phases", [])):
            _check_keys(ph, _PHASE_KEYS, f"environment.drift.phases[{i}]")
            phases.append((int(ph["start"]), int(ph["stop"]), boosted,
                           float(ph.get("p", 0.0)), float(ph.get("q", 0.0))))
        drift_phases = tuple(phases)
    synthetic = raw.get("synthetic") or {}
    _check_keys(synthetic, _SYNTH_KEYS, "environment.synthetic")
    if "priors" in synthetic:
        synthetic = dict(synthetic, priors=tuple(synthetic["priors"]))
    try:
        return EnvironmentSpec(
            kind=raw["kind"],
            base_rates=tuple(raw.get("base_rates", ())),
            drift_phases=drift_phases,
            warm_start=int(raw.get("warm_start", 0)),
            csv_path=raw.get("csv_path"),
            synthetic=synthetic,
            n_train=int(raw.get("n_train", 4000)),
            n_eval=int(raw.get("n_eval", 1000)),
            updates_per_eval=int(raw.get("updates_per_eval", 4)),
        )
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}") from None


def _parse_agent(raw, i) -> AgentSpec:
    where = f"agents[{i}]"
    _check_keys(raw, _AGENT_KEYS, where)
    for key in ("name", "kind"):
        if key not in raw:
            raise ConfigError(f"{where}: missing '{key}'")
    trunc = raw.get("truncation_radius")
    try:
        return AgentSpec(
            name=str(raw["name"]),
            kind=str(raw["kind"]),
            sigma=float(raw.get("sigma", 1.0)),
            truncation_radius=None if trunc is None else float(trunc),
            eviction=_parse_eviction(raw.get("eviction"), f"{where}.eviction"),
            use_importance_weights=bool(raw.get("use_importance_weights", True)),
            hidden_layers=tuple(raw.get("hidden_layers", (32,))),
            embedding_dim=int(raw.get("embedding_dim", 4)),
            alpha=float(raw.get("alpha", 1.96)),
            v=float(raw.get("v", 0.5)),
            epsilon=float(raw.get("epsilon", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_training(raw, where="training") -> TrainingConfig:
    if raw is None:
        return TrainingConfig()
    _check_keys(raw, _TRAINING_KEYS, where)
    try:
        return TrainingConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_experiment_config(path) -> ExperimentConfig:
    data = load_yaml(path)
    _check_keys(data, _TOP_KEYS, path)
    for key in ("environment", "agents", "seeds", "horizon", "output_dir"):
        if key not in data:
            raise ConfigError(f"{path}: missing '{key}'")
    if not isinstance(data["agents"], list):
        raise ConfigError(f"{path}: 'agents' must be a list")
    try:
        return ExperimentConfig(
            environment=_parse_environment(data["environment"]),
            agents=tuple(_parse_agent(a, i) for i, a in enumerate(data["agents"])),
            seeds=tuple(int(s) for s in data["seeds"]),
            horizon=int(data["horizon"]),
            output_dir=str(data["output_dir"]),
            training=parse_training(data.get("training")),
            relative_regret=bool(data.get("relative_regret", False)),
            save_stores=bool(data.get("save_stores", False)),
            save_models=bool(data.get("save_models", True)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def load_training_config(path) -> TrainingConfig:
    data = load_yaml(path)
    return parse_training(data.get("training"), where=f"{path}: training")
