"""Contextual Bernoulli bandits with kernel regression on a learned
embedding space: importance-weighted estimates, Beta-posterior Thompson
sampling, online updates with eviction, baselines, environments, and a
reproducible experiment harness."""

from .agents import (
    EpsilonGreedyAgent,
    EvictionPolicy,
    KernelTSAgent,
    LinTSAgent,
    LinUCBAgent,
    OracleAgent,
    Selection,
    UniformAgent,
)
from .data import BanditDataset, TabularTask, load_tabular_csv, make_separable_task
from .envs import (
    BernoulliArmsEnv,
    CoupledArmSpec,
    DriftPhase,
    DriftSchedule,
    TabularEnv,
    coupled_episodes,
    coupling_rho,
    js_divergence_bernoulli,
    sample_correlated_mu,
)
from .harness import (
    AgentSpec,
    EnvironmentSpec,
    ExperimentConfig,
    RegretLog,
    cumulative_regret,
    emit_metrics,
    run_experiment,
)
from .kernels import KernelConfig, rbf
from .mlp import MLPParams, init_mlp, mlp_forward
from .persistence import (
    ChecksumError,
    PersistenceError,
    TruncatedFileError,
    VersionError,
    load_model,
    load_store,
    save_model,
    save_store,
)
from .posterior import BetaParams, beta_params, kernel_mass, thompson_draw
from .store import NoSupportError, ReferenceStore
from .training import TrainingConfig, TrainingDiverged, train

__version__ = "0.1.0"
