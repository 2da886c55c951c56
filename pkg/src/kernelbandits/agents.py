"""Bandit agents: the kernel Thompson sampler and the baselines.

Every agent follows the same protocol: ``warm_start(dataset)`` absorbs a
logged history, ``select(context, arms)`` returns a Selection whose index
is the chosen arm, and ``observe(reward)`` consumes the reward for the most
recent selection. Ties break toward the lowest arm index everywhere so a
fixed seed pins the whole action sequence.

One agent instance is single-threaded within an episode; run independent
seeded instances for parallel episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BanditDataset
from .kernels import KernelConfig
from .mlp import MLPParams, mlp_forward
from .posterior import BetaParams, beta_params_from_kvec, thompson_draw
from .store import DEFAULT_CHECKPOINT_INTERVAL, ReferenceStore

__all__ = ["Selection", "EvictionPolicy", "KernelTSAgent", "LinUCBAgent",
           "LinTSAgent", "EpsilonGreedyAgent", "UniformAgent", "OracleAgent"]


@dataclass
class Selection:
    """Chosen arm plus per-arm scores; kernel agents also expose the
    candidate embeddings so the chosen one can be stored on observe."""

    index: int
    scores: np.ndarray | None = None
    embeddings: np.ndarray | None = None


@dataclass(frozen=True)
class EvictionPolicy:
    """Periodic random forgetting: every ``period`` observations each
    stored sample is dropped independently with probability ``fraction``
    (or exactly round(fraction * n) samples when ``exact``)."""

    period: int = 0
    fraction: float = 0.0
    exact: bool = False

    def __post_init__(self):
        if self.period < 0:
            raise ValueError("period must be >= 0")
        if not (0.0 <= self.fraction < 1.0):
            raise ValueError("fraction must lie in [0, 1)")

    @property
    def enabled(self) -> bool:
        return self.period > 0 and self.fraction > 0.0


class KernelTSAgent:
    """Thompson sampling on Beta posteriors built by kernel regression over
    an embedded reference store.

    Each candidate (context, arm) pair is embedded, scored by one Beta draw
    whose mean is the importance-weighted kernel estimate and whose
    concentration is the local kernel mass, and the winning embedding is
    appended to the store with its kernel vector reused from scoring time
    (the O(n) update). Optional periodic eviction keeps stale evidence from
    dominating under reward drift. ``use_importance_weights=False`` turns
    the estimator into plain kernel regression (ablation).
    """

    def __init__(self, phi: MLPParams, kernel_config: KernelConfig,
                 rng: np.random.Generator,
                 eviction: EvictionPolicy = EvictionPolicy(),
                 use_importance_weights: bool = True,
                 checkpoint_interval: int | None = DEFAULT_CHECKPOINT_INTERVAL):
        self.phi = phi
        self.kernel_config = kernel_config
        self.rng = rng
        self.eviction = eviction
        self.use_importance_weights = use_importance_weights
        dim = phi.weights[-1].shape[0]
        self.store = ReferenceStore(dim, kernel_config,
                                    checkpoint_interval=checkpoint_interval)
        self.step_counter = 0
        self._pending = None

    def warm_start(self, dataset: BanditDataset):
        """Embed a logged history and bulk-load it as the initial store."""
        if not len(dataset):
            return
        emb = mlp_forward(self.phi, dataset.inputs)
        self.store = ReferenceStore.from_samples(
            emb, dataset.rewards, self.kernel_config,
            time_labels=dataset.intervals,
            checkpoint_interval=self.store.checkpoint_interval)

    def posterior(self, context, arm) -> BetaParams:
        emb = mlp_forward(self.phi, np.concatenate([context, arm]))
        kvec = self.store.kernel_vector(emb)
        return beta_params_from_kvec(kvec, self.store,
                                     self.use_importance_weights)

    def select(self, context, arms) -> Selection:
        context = np.asarray(context, dtype=np.float64)
        arms = np.asarray(arms, dtype=np.float64)
        k = arms.shape[0]
        inputs = np.hstack([np.broadcast_to(context, (k, context.size)), arms])
        embeddings = np.atleast_2d(mlp_forward(self.phi, inputs))
        draws = np.empty(k)
        kvecs = []
        for i in range(k):  # fixed arm order keeps the draw stream aligned
            kvec = self.store.kernel_vector(embeddings[i])
            kvecs.append(kvec)
            params = beta_params_from_kvec(kvec, self.store,
                                           self.use_importance_weights)
            draws[i] = thompson_draw(params, self.rng)
        index = int(np.argmax(draws))
        self._pending = (embeddings[index],
                         kvecs[index],
                         self.store.time_labels is not None)
        return Selection(index=index, scores=draws, embeddings=embeddings)

    def observe(self, reward: float):
        if self._pending is None:
            raise RuntimeError("observe() without a pending selection")
        embedding, kvec, labelled = self._pending
        self._pending = None
        if kvec.shape[0] != len(self.store):
            # store mutated since select (e.g. checkpoint eviction elsewhere)
            kvec = self.store.kernel_vector(embedding)
        self.store.append(embedding, reward, kvec=kvec,
                          time_label=self.step_counter if labelled else 0)
        self.step_counter += 1
        if self.eviction.enabled and self.step_counter % self.eviction.period == 0:
            self._evict()

    def _evict(self):
        n = len(self.store)
        if n == 0:
            return
        if self.eviction.exact:
            k = int(round(self.eviction.fraction * n))
            drop = self.rng.choice(n, size=k, replace=False) if k else []
        else:
            drop = np.flatnonzero(self.rng.uniform(size=n) < self.eviction.fraction)
        if len(drop):
            self.store.remove(drop)


class _LinearModel:
    """Ridge-regularized least squares over concatenated (context, arm)
    features, solved through a Cholesky factorization each query."""

    def __init__(self, dim: int, ridge: float = 1.0):
        self.a = ridge * np.eye(dim)
        self.b = np.zeros(dim)
        self._chol = None

    def update(self, x: np.ndarray, reward: float):
        self.a += np.outer(x, x)
        self.b += reward * x
        self._chol = None

    def bulk_update(self, xs: np.ndarray, rewards: np.ndarray):
        self.a += xs.T @ xs
        self.b += xs.T @ rewards
        self._chol = None

    def chol(self) -> np.ndarray:
        if self._chol is None:
            self._chol = np.linalg.cholesky(self.a)
        return self._chol

    def theta(self) -> np.ndarray:
        l = self.chol()
        return np.linalg.solve(l.T, np.linalg.solve(l, self.b))

    def mahalanobis(self, xs: np.ndarray) -> np.ndarray:
        """x^T A^-1 x for each row, via triangular solves."""
        y = np.linalg.solve(self.chol(), xs.T)
        return np.sum(y * y, axis=0)


def _features(context, arms) -> np.ndarray:
    context = np.asarray(context, dtype=np.float64)
    arms = np.asarray(arms, dtype=np.float64)
    k = arms.shape[0]
    return np.hstack([np.broadcast_to(context, (k, context.size)), arms])


class LinUCBAgent:
    """Upper-confidence linear bandit on hybrid (context, arm) features."""

    def __init__(self, dim: int, rng: np.random.Generator, alpha: float = 1.96,
                 ridge: float = 1.0):
        self.model = _LinearModel(dim, ridge)
        self.alpha = alpha
        self.rng = rng
        self._pending = None

    def warm_start(self, dataset: BanditDataset):
        if len(dataset):
            self.model.bulk_update(dataset.inputs, dataset.rewards)

    def scores(self, context, arms) -> np.ndarray:
        xs = _features(context, arms)
        return xs @ self.model.theta() + self.alpha * np.sqrt(
            self.model.mahalanobis(xs))

    def select(self, context, arms) -> Selection:
        xs = _features(context, arms)
        scores = self.scores(context, arms)
        index = int(np.argmax(scores))
        self._pending = xs[index]
        return Selection(index=index, scores=scores)

    def observe(self, reward: float):
        if self._pending is None:
            raise RuntimeError("observe() without a pending selection")
        self.model.update(self._pending, reward)
        self._pending = None


class LinTSAgent:
    """Linear Thompson sampling: one Gaussian parameter draw per round with
    covariance v^2 A^-1 around the ridge estimate."""

    def __init__(self, dim: int, rng: np.random.Generator, v: float = 0.5,
                 ridge: float = 1.0):
        self.model = _LinearModel(dim, ridge)
        self.v = v
        self.rng = rng
        self._pending = None

    def warm_start(self, dataset: BanditDataset):
        if len(dataset):
            self.model.bulk_update(dataset.inputs, dataset.rewards)

    def select(self, context, arms) -> Selection:
        xs = _features(context, arms)
        z = self.rng.standard_normal(xs.shape[1])
        # L^-T z has covariance A^-1 when A = L L^T
        theta = self.model.theta() + self.v * np.linalg.solve(
            self.model.chol().T, z)
        scores = xs @ theta
        index = int(np.argmax(scores))
        self._pending = xs[index]
        return Selection(index=index, scores=scores)

    def observe(self, reward: float):
        if self._pending is None:
            raise RuntimeError("observe() without a pending selection")
        self.model.update(self._pending, reward)
        self._pending = None


class EpsilonGreedyAgent:
    """Context-free per-arm empirical means keyed by arm identity; only
    meaningful for environments with a fixed discrete arm set."""

    def __init__(self, rng: np.random.Generator, epsilon: float = 0.1):
        if not (0.0 <= epsilon <= 1.0):
            raise ValueError("epsilon must lie in [0, 1]")
        self.rng = rng
        self.epsilon = epsilon
        self.counts: dict = {}
        self.sums: dict = {}
        self._pending = None

    def warm_start(self, dataset: BanditDataset):
        for arm, reward in zip(dataset.arms, dataset.rewards):
            key = arm.tobytes()
            self.counts[key] = self.counts.get(key, 0) + 1
            self.sums[key] = self.sums.get(key, 0.0) + reward

    def _mean(self, key) -> float:
        n = self.counts.get(key, 0)
        return self.sums.get(key, 0.0) / n if n else 0.0

    def select(self, context, arms) -> Selection:
        arms = np.asarray(arms, dtype=np.float64)
        means = np.array([self._mean(a.tobytes()) for a in arms])
        if self.rng.uniform() < self.epsilon:
            index = int(self.rng.integers(arms.shape[0]))
        else:
            index = int(np.argmax(means))
        self._pending = arms[index].tobytes()
        return Selection(index=index, scores=means)

    def observe(self, reward: float):
        if self._pending is None:
            raise RuntimeError("observe() without a pending selection")
        key = self._pending
        self.counts[key] = self.counts.get(key, 0) + 1
        self.sums[key] = self.sums.get(key, 0.0) + reward
        self._pending = None


class UniformAgent:
    """Uniformly random play; the no-learning control."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def warm_start(self, dataset: BanditDataset):
        pass

    def select(self, context, arms) -> Selection:
        return Selection(index=int(self.rng.integers(len(arms))))

    def observe(self, reward: float):
        pass


class OracleAgent:
    """Plays the true best arm; needs environments that expose expected
    rewards through the step (harness plumbing for regret sanity checks)."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.mu = None

    def warm_start(self, dataset: BanditDataset):
        pass

    def set_step_mu(self, mu: np.ndarray):
        self.mu = np.asarray(mu)

    def select(self, context, arms) -> Selection:
        if self.mu is None:
            raise RuntimeError("oracle agent needs the step's expected rewards")
        return Selection(index=int(np.argmax(self.mu)), scores=self.mu)

    def observe(self, reward: float):
        pass
