"""Synthetic and dataset-backed bandit environments.

Three environment families:

* coupled-arm generator: an anchor arm's Bernoulli mean is drawn uniformly
  each episode and the other arms' means are drawn correlated with it, so
  the correlation structure persists across episodes. Produces offline
  datasets for embedding-training studies, not an interactive bandit.
* Bernoulli-arms environment: fixed one-hot arms with known per-arm base
  rates, optionally perturbed by a scheduled drift that boosts one category
  (zero rewards flip to one with probability p) and diminishes the others
  (one rewards flip to zero with probability q).
* tabular environment: a classification dataset streamed in the
  4-updates-then-1-evaluation pattern; reward is the indicator of picking
  the true label, inputs are never standardized, and evaluation rows come
  from a disjoint test split.

All environments draw exclusively from generators handed in by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import BanditDataset, TabularTask

__all__ = ["CoupledArmSpec", "sample_correlated_mu", "coupled_episodes",
           "DriftPhase", "DriftSchedule", "BernoulliArmsEnv", "TabularEnv",
           "EnvStep", "js_divergence_bernoulli", "coupling_rho",
           "interval_means"]


# -- coupled arms -------------------------------------------------------------


@dataclass(frozen=True)
class CoupledArmSpec:
    """Generator settings for the correlated-arm study.

    ``correlations`` are the non-anchor arms' correlations with the anchor;
    ``concentration`` (>= 1) shrinks the variance of the correlated means.
    """

    correlations: tuple = (-1.0, -0.6, -0.2, 0.2, 0.6, 1.0)
    concentration: float = 50.0
    episodes: int = 200
    samples_per_episode: int = 100

    def __post_init__(self):
        if any(abs(r) > 1.0 for r in self.correlations):
            raise ValueError("correlations must lie in [-1, 1]")
        if self.concentration < 1.0:
            raise ValueError("concentration must be >= 1")

    @property
    def n_arms(self) -> int:
        return len(self.correlations) + 1


def sample_correlated_mu(mu0: float, rho: float, c: float,
                         rng: np.random.Generator) -> float:
    """Draw a mean correlated with the anchor mean ``mu0``.

    The draw is Beta(2c(rho(mu0-1/2)+1/2), 2c(rho(1/2-mu0)+1/2)), whose
    expectation is rho(mu0-1/2)+1/2: equal to mu0 at rho=1 and mirrored at
    rho=-1.
    """
    a = 2.0 * c * (rho * (mu0 - 0.5) + 0.5)
    b = 2.0 * c * (rho * (0.5 - mu0) + 0.5)
    return float(rng.beta(a, b))


def coupled_episodes(spec: CoupledArmSpec, rng: np.random.Generator) -> BanditDataset:
    """Simulate the episodic coupled-arm process into a training dataset.

    Per episode the anchor mean is Uniform(0,1), the other means are drawn
    correlated with it, and ``samples_per_episode`` uniformly-chosen arms
    are pulled for Bernoulli rewards. Rows carry the episode index as their
    time-interval label; contexts are empty (the study is non-contextual).
    """
    k = spec.n_arms
    rows_arm, rows_reward, rows_interval = [], [], []
    for t in range(spec.episodes):
        mu = np.empty(k)
        mu[0] = rng.uniform()
        for i, rho in enumerate(spec.correlations, start=1):
            mu[i] = sample_correlated_mu(mu[0], rho, spec.concentration, rng)
        arms = rng.integers(0, k, size=spec.samples_per_episode)
        rewards = (rng.uniform(size=spec.samples_per_episode) < mu[arms])
        rows_arm.append(arms)
        rows_reward.append(rewards)
        rows_interval.append(np.full(spec.samples_per_episode, t))
    arms = np.concatenate(rows_arm)
    one_hot = np.eye(k)[arms]
    return BanditDataset(
        contexts=np.zeros((arms.size, 0)),
        arms=one_hot,
        rewards=np.concatenate(rows_reward).astype(np.float64),
        intervals=np.concatenate(rows_interval).astype(np.int64),
    )


# -- environment step protocol ------------------------------------------------


@dataclass
class EnvStep:
    """One interaction round: valid arms, their true expected rewards (used
    for regret accounting and the oracle agent), and whether regret counts."""

    t: int
    context: np.ndarray
    arms: np.ndarray          # (k, d_arm)
    mu: np.ndarray            # (k,) expected reward of each valid arm
    is_eval: bool = True


# -- Bernoulli arms with scheduled drift ---------------------------------------


@dataclass(frozen=True)
class DriftPhase:
    """Half-open step range [start, stop) with flip probabilities.

    Within the phase, the boosted category's zero rewards flip to one with
    probability ``p`` and every other category's one rewards flip to zero
    with probability ``q``.
    """

    start: int
    stop: int
    boosted: int
    p: float
    q: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("flip probabilities must lie in [0, 1]")
        if self.stop <= self.start:
            raise ValueError("empty phase range")


class DriftSchedule:
    """Ordered, contiguous, non-overlapping drift phases."""

    def __init__(self, phases):
        phases = list(phases)
        for a, b in zip(phases, phases[1:]):
            if b.start != a.stop:
                raise ValueError("phases must be contiguous and ordered")
        self.phases = phases

    def phase_at(self, step: int) -> DriftPhase:
        for ph in self.phases:
            if ph.start <= step < ph.stop:
                return ph
        raise ValueError(f"step {step} outside schedule coverage")

    @property
    def horizon(self) -> int:
        return self.phases[-1].stop if self.phases else 0

    @staticmethod
    def stepped(probabilities, steps_per_phase: int, boosted: int,
                start: int = 0) -> "DriftSchedule":
        """Equal-length phases with p = q stepping through ``probabilities``."""
        phases = []
        at = start
        for pr in probabilities:
            phases.append(DriftPhase(at, at + steps_per_phase, boosted, pr, pr))
            at += steps_per_phase
        return DriftSchedule(phases)


def effective_rate(mu: float, boosted: bool, p: float, q: float) -> float:
    """Post-drift Bernoulli mean: mu + (1-mu)p when boosted, else mu(1-q)."""
    return mu + (1.0 - mu) * p if boosted else mu * (1.0 - q)


def apply_drift(reward: float, boosted: bool, p: float, q: float,
                rng: np.random.Generator) -> float:
    """Flip a realized 0/1 reward per the phase probabilities."""
    if boosted and reward == 0.0 and p > 0.0:
        if rng.uniform() < p:
            return 1.0
    elif not boosted and reward == 1.0 and q > 0.0:
        if rng.uniform() < q:
            return 0.0
    return reward


class BernoulliArmsEnv:
    """Fixed one-hot arms with per-arm base rates and optional drift.

    Contexts are empty vectors; the drift schedule (when present) must
    cover every step of the horizon.
    """

    def __init__(self, base_rates, schedule: DriftSchedule | None = None):
        self.base_rates = np.asarray(base_rates, dtype=np.float64)
        if np.any((self.base_rates < 0) | (self.base_rates > 1)):
            raise ValueError("base rates must lie in [0, 1]")
        self.schedule = schedule
        self.k = self.base_rates.size

    context_dim = 0

    @property
    def arm_dim(self) -> int:
        return self.k

    def _mu_at(self, t: int) -> np.ndarray:
        if self.schedule is None:
            return self.base_rates.copy()
        ph = self.schedule.phase_at(t)
        boosted = np.arange(self.k) == ph.boosted
        return np.where(boosted,
                        self.base_rates + (1.0 - self.base_rates) * ph.p,
                        self.base_rates * (1.0 - ph.q))

    def steps(self, horizon: int, rng: np.random.Generator):
        arms = np.eye(self.k)
        for t in range(horizon):
            yield EnvStep(t=t, context=np.zeros(0), arms=arms,
                          mu=self._mu_at(t))

    def realize(self, step: EnvStep, arm_index: int,
                rng: np.random.Generator) -> float:
        base = float(rng.uniform() < self.base_rates[arm_index])
        if self.schedule is None:
            return base
        ph = self.schedule.phase_at(step.t)
        return apply_drift(base, arm_index == ph.boosted, ph.p, ph.q, rng)

    def logged_dataset(self, n: int, rng: np.random.Generator) -> BanditDataset:
        """Uniform-policy pre-drift history for warm starts (interval 0)."""
        arms = rng.integers(0, self.k, size=n)
        rewards = (rng.uniform(size=n) < self.base_rates[arms]).astype(np.float64)
        return BanditDataset(contexts=np.zeros((n, 0)),
                             arms=np.eye(self.k)[arms],
                             rewards=rewards,
                             intervals=np.zeros(n, dtype=np.int64))


# -- tabular classification environment ----------------------------------------


class TabularEnv:
    """Classification stream in the 4-updates : 1-evaluation pattern.

    Update rows come from the train split, evaluation rows from the test
    split; regret is only counted on evaluation rows (which agents also
    learn from). True expected reward is the label indicator.
    """

    def __init__(self, task: TabularTask, updates_per_eval: int = 4):
        self.task = task
        self.updates_per_eval = updates_per_eval

    @property
    def context_dim(self) -> int:
        return self.task.contexts.shape[1]

    @property
    def arm_dim(self) -> int:
        return self.task.n_classes

    def steps(self, n_eval: int, rng: np.random.Generator):
        """The interleaved stream yielding exactly ``n_eval`` eval rows."""
        need_train = n_eval * self.updates_per_eval
        if need_train > self.task.train_idx.size or n_eval > self.task.test_idx.size:
            raise ValueError("split exhausted: not enough rows for the stream")
        arms = self.task.arm_vectors
        t = 0
        for e in range(n_eval):
            for u in range(self.updates_per_eval):
                row = self.task.train_idx[e * self.updates_per_eval + u]
                yield self._step(t, row, arms, is_eval=False)
                t += 1
            yield self._step(t, self.task.test_idx[e], arms, is_eval=True)
            t += 1

    def _step(self, t, row, arms, is_eval):
        label = self.task.labels[row]
        mu = np.zeros(self.task.n_classes)
        mu[label] = 1.0
        return EnvStep(t=t, context=self.task.contexts[row].astype(np.float64),
                       arms=arms, mu=mu, is_eval=is_eval)

    def realize(self, step: EnvStep, arm_index: int,
                rng: np.random.Generator) -> float:
        return float(step.mu[arm_index])

    def logged_dataset(self, n: int, rng: np.random.Generator) -> BanditDataset:
        """Uniform-policy labelled history drawn from the train split."""
        if n > self.task.train_idx.size:
            raise ValueError("not enough training rows for the warm start")
        rows = self.task.train_idx[:n]
        arms = rng.integers(0, self.task.n_classes, size=n)
        rewards = (arms == self.task.labels[rows]).astype(np.float64)
        return BanditDataset(
            contexts=self.task.contexts[rows].astype(np.float64),
            arms=np.eye(self.task.n_classes)[arms],
            rewards=rewards,
            intervals=np.zeros(n, dtype=np.int64),
        )


# -- coupling metric ------------------------------------------------------------


def _kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q) in bits."""
    total = 0.0
    if p > 0.0:
        total += p * np.log2(p / q)
    if p < 1.0:
        total += (1.0 - p) * np.log2((1.0 - p) / (1.0 - q))
    return total


def js_divergence_bernoulli(p: float, q: float) -> float:
    """Jensen-Shannon divergence between two Bernoullis, base 2 (in [0, 1])."""
    m = 0.5 * (p + q)
    if p == q:
        return 0.0
    return 0.5 * _kl_bernoulli(p, m) + 0.5 * _kl_bernoulli(q, m)


def coupling_rho(p_means, q_means) -> float:
    """Degree of coupling between two arms' per-interval reward means.

    One minus the time-averaged Jensen-Shannon divergence between the two
    Bernoulli sequences; 1 means perfectly coupled, 0 maximally opposed.
    """
    p_means = np.asarray(p_means, dtype=np.float64)
    q_means = np.asarray(q_means, dtype=np.float64)
    if p_means.shape != q_means.shape or p_means.ndim != 1 or p_means.size == 0:
        raise ValueError("need two equal-length non-empty mean sequences")
    if np.any((p_means < 0) | (p_means > 1) | (q_means < 0) | (q_means > 1)):
        raise ValueError("means must lie in [0, 1]")
    js = [js_divergence_bernoulli(p, q) for p, q in zip(p_means, q_means)]
    return float(1.0 - np.mean(js))


def interval_means(rewards, intervals, n_intervals: int) -> np.ndarray:
    """Per-interval empirical Bernoulli means with add-one smoothing.

    Smoothing ((k+1)/(n+2)) keeps empty or degenerate intervals away from
    the {0, 1} endpoints where KL terms blow up.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    intervals = np.asarray(intervals, dtype=np.int64)
    out = np.empty(n_intervals)
    for t in range(n_intervals):
        sel = intervals == t
        out[t] = (rewards[sel].sum() + 1.0) / (sel.sum() + 2.0)
    return out
