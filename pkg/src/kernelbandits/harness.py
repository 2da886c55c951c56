"""Experiment execution over (agent x environment x seeds) with regret
accounting and CSV metrics export.

Regret is the cumulative gap between the best valid arm's expected reward
and the chosen arm's, using environment-known means for synthetic
environments and label-indicator gaps for tabular ones. Per-step rows and
per-seed summaries are written as CSV; runs are bit-reproducible for a
fixed config and seed list.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .agents import (
    EpsilonGreedyAgent,
    EvictionPolicy,
    KernelTSAgent,
    LinTSAgent,
    LinUCBAgent,
    OracleAgent,
    UniformAgent,
)
from .data import make_separable_task, task_from_csv
from .envs import BernoulliArmsEnv, DriftPhase, DriftSchedule, TabularEnv
from .kernels import KernelConfig
from .mlp import init_mlp
from .persistence import save_model, save_store
from .seeding import stream_rng, stream_seed
from .training import TrainingConfig, train

__all__ = ["AgentSpec", "EnvironmentSpec", "ExperimentConfig", "RegretLog",
           "cumulative_regret", "run_experiment", "emit_metrics",
           "summary_stats"]

STEP_HEADER = "step,seed,arm,reward,mu_chosen,mu_best,cum_regret"


@dataclass(frozen=True)
class AgentSpec:
    """Agent kind plus its hyperparameters.

    kinds: kernel_ts, linucb, lints, epsilon_greedy, uniform, oracle.
    ``sigma``/``truncation_radius``/``eviction``/``use_importance_weights``/
    ``hidden_layers``/``embedding_dim`` apply to kernel_ts; ``alpha`` to
    linucb; ``v`` to lints; ``epsilon`` to epsilon_greedy.
    """

    name: str
    kind: str
    sigma: float = 1.0
    truncation_radius: float | None = None
    eviction: EvictionPolicy = EvictionPolicy()
    use_importance_weights: bool = True
    hidden_layers: tuple = (32,)
    embedding_dim: int = 4
    alpha: float = 1.96
    v: float = 0.5
    epsilon: float = 0.1

    def __post_init__(self):
        kinds = ("kernel_ts", "linucb", "lints", "epsilon_greedy", "uniform",
                 "oracle")
        if self.kind not in kinds:
            raise ValueError(f"unknown agent kind {self.kind!r}")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Environment kind plus parameters.

    kind "bernoulli": ``base_rates`` and optional ``drift_phases`` (list of
    (start, stop, boosted, p, q) tuples); ``warm_start`` logged rows.
    kind "tabular": either ``csv_path`` or ``synthetic`` generator settings,
    with ``n_train``/``n_eval`` splits and ``updates_per_eval``.
    """

    kind: str
    base_rates: tuple = ()
    drift_phases: tuple = ()
    warm_start: int = 0
    csv_path: str | None = None
    synthetic: dict = field(default_factory=dict)
    n_train: int = 4000
    n_eval: int = 1000
    updates_per_eval: int = 4

    def __post_init__(self):
        if self.kind not in ("bernoulli", "tabular"):
            raise ValueError(f"unknown environment kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSpec
    agents: tuple
    seeds: tuple
    horizon: int
    output_dir: str
    training: TrainingConfig = TrainingConfig()
    relative_regret: bool = False
    save_stores: bool = False
    save_models: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.agents:
            raise ValueError("need at least one agent")
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ValueError("agent names must be unique")


@dataclass
class RegretLog:
    """Per-(eval-)step regret records for one agent across all seeds."""

    agent: str
    steps: np.ndarray
    seeds: np.ndarray
    arms: np.ndarray
    rewards: np.ndarray
    mu_chosen: np.ndarray
    mu_best: np.ndarray
    cum_regret: np.ndarray

    def final_regrets(self) -> dict:
        """Seed -> final cumulative regret."""
        out = {}
        for seed in np.unique(self.seeds):
            sel = self.seeds == seed
            out[int(seed)] = float(self.cum_regret[sel][-1])
        return out


def cumulative_regret(gaps) -> np.ndarray:
    """Prefix sums of the per-step regret gaps."""
    return np.cumsum(np.asarray(gaps, dtype=np.float64))


def _build_environment(spec: EnvironmentSpec, rng: np.random.Generator):
    if spec.kind == "bernoulli":
        schedule = None
        if spec.drift_phases:
            schedule = DriftSchedule([DriftPhase(*ph) for ph in spec.drift_phases])
        return BernoulliArmsEnv(spec.base_rates, schedule)
    if spec.csv_path is not None:
        task = task_from_csv(spec.csv_path, spec.n_train, spec.n_eval, rng)
    else:
        task = make_separable_task(rng, n_train=spec.n_train,
                                   n_test=spec.n_eval, **spec.synthetic)
    return TabularEnv(task, updates_per_eval=spec.updates_per_eval)


def _build_agent(spec: AgentSpec, env, seed: int, training: TrainingConfig,
                 warm_data):
    rng = stream_rng(seed, f"agent:{spec.name}")
    dim = env.context_dim + env.arm_dim
    if spec.kind == "kernel_ts":
        layers = [dim, *spec.hidden_layers, spec.embedding_dim]
        init = init_mlp(layers, stream_rng(seed, f"init:{spec.name}"))
        tcfg = replace(training, sigma=spec.sigma,
                       seed=stream_seed(seed, f"training:{spec.name}"))
        if warm_data is not None and len(warm_data):
            phi, _ = train(warm_data.inputs, warm_data.rewards,
                           warm_data.intervals, tcfg, init)
        else:
            phi = init
        agent = KernelTSAgent(
            phi, KernelConfig(spec.sigma, spec.truncation_radius), rng,
            eviction=spec.eviction,
            use_importance_weights=spec.use_importance_weights)
    elif spec.kind == "linucb":
        agent = LinUCBAgent(dim, rng, alpha=spec.alpha)
    elif spec.kind == "lints":
        agent = LinTSAgent(dim, rng, v=spec.v)
    elif spec.kind == "epsilon_greedy":
        agent = EpsilonGreedyAgent(rng, epsilon=spec.epsilon)
    elif spec.kind == "uniform":
        agent = UniformAgent(rng)
    else:
        agent = OracleAgent(rng)
    if warm_data is not None and len(warm_data):
        agent.warm_start(warm_data)
    return agent


def _run_one(env_spec: EnvironmentSpec, agent_spec: AgentSpec, seed: int,
             horizon: int, training: TrainingConfig):
    env = _build_environment(env_spec, stream_rng(seed, "env"))
    warm_data = None
    if env_spec.kind == "tabular":
        warm_data = env.logged_dataset(env_spec.n_train,
                                       stream_rng(seed, "warmstart"))
        step_iter = env.steps(horizon, stream_rng(seed, "env-steps"))
    else:
        if env_spec.warm_start:
            warm_data = env.logged_dataset(env_spec.warm_start,
                                           stream_rng(seed, "warmstart"))
        step_iter = env.steps(horizon, stream_rng(seed, "env-steps"))
    agent = _build_agent(agent_spec, env, seed, training, warm_data)
    reward_rng = stream_rng(seed, "rewards")

    rows = []
    gap_sum = 0.0
    eval_t = 0
    for step in step_iter:
        if isinstance(agent, OracleAgent):
            agent.set_step_mu(step.mu)
        sel = agent.select(step.context, step.arms)
        reward = env.realize(step, sel.index, reward_rng)
        agent.observe(reward)
        if step.is_eval:
            gap = float(step.mu.max() - step.mu[sel.index])
            gap_sum += gap
            rows.append((eval_t, seed, sel.index, reward,
                         float(step.mu[sel.index]), float(step.mu.max()),
                         gap_sum))
            eval_t += 1
    return rows, agent


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute every (agent, seed) pair; returns agent name -> RegretLog
    and writes metrics (plus model/store checkpoints) to the output dir."""
    os.makedirs(config.output_dir, exist_ok=True)
    logs = {}
    for agent_spec in config.agents:
        all_rows = []
        for seed in config.seeds:
            rows, agent = _run_one(config.environment, agent_spec, seed,
                                   config.horizon, config.training)
            all_rows.extend(rows)
            if agent_spec.kind == "kernel_ts":
                if config.save_models:
                    save_model(agent.phi, os.path.join(
                        config.output_dir,
                        f"model_{agent_spec.name}_seed{seed}.bin"))
                if config.save_stores:
                    save_store(agent.store, os.path.join(
                        config.output_dir,
                        f"store_{agent_spec.name}_seed{seed}.bin"))
        arr = np.array(all_rows, dtype=np.float64).reshape(len(all_rows), 7)
        logs[agent_spec.name] = RegretLog(
            agent=agent_spec.name,
            steps=arr[:, 0].astype(np.int64),
            seeds=arr[:, 1].astype(np.int64),
            arms=arr[:, 2].astype(np.int64),
            rewards=arr[:, 3],
            mu_chosen=arr[:, 4],
            mu_best=arr[:, 5],
            cum_regret=arr[:, 6],
        )
        emit_metrics(logs[agent_spec.name], config.output_dir)
    if config.relative_regret:
        _emit_relative(logs, config.output_dir)
    return logs


def summary_stats(finals: dict) -> tuple:
    """(mean, 1.96-sigma half-width) of the per-seed final regrets."""
    vals = np.array(list(finals.values()), dtype=np.float64)
    mean = float(vals.mean())
    if vals.size < 2:
        return mean, 0.0
    half = 1.96 * vals.std(ddof=1) / np.sqrt(vals.size)
    return mean, float(half)


def emit_metrics(log: RegretLog, out_dir):
    """Write steps_<agent>.csv (one row per eval step) and
    summary_<agent>.csv (per-seed finals plus mean and half-width)."""
    os.makedirs(out_dir, exist_ok=True)
    step_path = os.path.join(out_dir, f"steps_{log.agent}.csv")
    with open(step_path, "w", encoding="utf-8") as fh:
        fh.write(STEP_HEADER + "\n")
        for i in range(log.steps.size):
            fh.write(f"{log.steps[i]},{log.seeds[i]},{log.arms[i]},"
                     f"{log.rewards[i]!r},{log.mu_chosen[i]!r},"
                     f"{log.mu_best[i]!r},{log.cum_regret[i]!r}\n")
    finals = log.final_regrets()
    mean, half = summary_stats(finals)
    summary_path = os.path.join(out_dir, f"summary_{log.agent}.csv")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("seed,final_cum_regret\n")
        for seed in sorted(finals):
            fh.write(f"{seed},{finals[seed]!r}\n")
        fh.write(f"mean,{mean!r}\n")
        fh.write(f"half_width_1.96,{half!r}\n")
    return step_path, summary_path


def _emit_relative(logs: dict, out_dir):
    """Per-step mean cumulative regret minus the best agent's, per agent."""
    names = sorted(logs)
    per_agent = {}
    for name in names:
        log = logs[name]
        steps = np.unique(log.steps)
        means = np.array([log.cum_regret[log.steps == s].mean() for s in steps])
        per_agent[name] = (steps, means)
    horizon = min(v[0].size for v in per_agent.values())
    stack = np.stack([per_agent[n][1][:horizon] for n in names])
    best = stack.min(axis=0)
    path = os.path.join(out_dir, "relative_regret.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step," + ",".join(names) + "\n")
        for i in range(horizon):
            rel = stack[:, i] - best[i]
            fh.write(str(int(per_agent[names[0]][0][i])) + ","
                     + ",".join(repr(float(x)) for x in rel) + "\n")
    return path
