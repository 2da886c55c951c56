"""Reference store: embedded samples, rewards, and incremental kernel-mass
accumulators.

The store keeps, for every stored sample i, the accumulator

    g_i = sum_j kappa(s_i, s_j)      (self term included, so g_i >= 1)

whose reciprocal w_i = 1/g_i is the sample's importance weight in (0, 1].
Appending a new sample reuses its kernel vector against the current store,
so the whole update is O(n) instead of the naive O(n^2); removals subtract
the departing samples' kernel contributions in O(n * k). Floating-point
drift from long append/remove sequences is bounded by periodic full
recomputation (``recompute``), scheduled every ``checkpoint_interval``
mutations.

Concurrency contract: reads (kernel_vector, nwkr, iwkr) never mutate and may
run concurrently; append/remove/recompute require exclusive access.
"""

from __future__ import annotations

import numpy as np

from .kernels import KernelConfig, accumulator_sums, rbf_matrix, rbf_vector

__all__ = ["ReferenceStore", "NoSupportError"]

DEFAULT_CHECKPOINT_INTERVAL = 10_000


class NoSupportError(ValueError):
    """Raised when an estimate has zero kernel mass (empty or fully
    truncated neighbourhood); callers fall back per their own policy."""


class ReferenceStore:
    """Growable set of (embedding, reward) samples with O(n) weight updates.

    Arrays are pre-allocated with capacity doubling so appends stay
    amortized O(n) in the kernel work, not the memory churn.
    """

    def __init__(self, dim: int, kernel_config: KernelConfig,
                 checkpoint_interval: int | None = DEFAULT_CHECKPOINT_INTERVAL,
                 track_time_labels: bool = False):
        if dim < 0:
            raise ValueError("dim must be non-negative")
        self.dim = int(dim)
        self.kernel_config = kernel_config
        self.checkpoint_interval = checkpoint_interval
        self._n = 0
        cap = 64
        self._emb = np.empty((cap, self.dim), dtype=np.float64)
        self._rewards = np.empty(cap, dtype=np.float64)
        self._acc = np.empty(cap, dtype=np.float64)
        self._labels = np.empty(cap, dtype=np.int64) if track_time_labels else None
        self._mutations_since_checkpoint = 0

    @classmethod
    def from_samples(cls, embeddings, rewards, kernel_config: KernelConfig,
                     time_labels=None,
                     checkpoint_interval: int | None = DEFAULT_CHECKPOINT_INTERVAL):
        """Bulk-construct a store and run the O(n^2) accumulator pass once."""
        embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
        rewards = np.asarray(rewards, dtype=np.float64)
        n, dim = embeddings.shape
        if rewards.shape != (n,):
            raise ValueError("embeddings and rewards must share length")
        if time_labels is not None and len(time_labels) != n:
            raise ValueError("time_labels must share length with embeddings")
        store = cls(dim, kernel_config, checkpoint_interval=checkpoint_interval,
                    track_time_labels=time_labels is not None)
        store._reserve(n)
        store._emb[:n] = embeddings
        store._rewards[:n] = rewards
        if time_labels is not None:
            store._labels[:n] = np.asarray(time_labels, dtype=np.int64)
        store._n = n
        store._acc[:n] = accumulator_sums(store._emb[:n], kernel_config) if n else 0.0
        return store

    # -- views ------------------------------------------------------------

    def __len__(self) -> int:
        return self._n

    @property
    def embeddings(self) -> np.ndarray:
        return self._emb[: self._n]

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[: self._n]

    @property
    def accumulators(self) -> np.ndarray:
        """Kernel-mass sums g_i; importance weight of sample i is 1/g_i."""
        return self._acc[: self._n]

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self._acc[: self._n]

    @property
    def time_labels(self) -> np.ndarray | None:
        return None if self._labels is None else self._labels[: self._n]

    # -- mutations ---------------------------------------------------------

    def _reserve(self, n: int):
        cap = self._emb.shape[0]
        if n <= cap:
            return
        while cap < n:
            cap *= 2
        self._emb = np.concatenate(
            [self._emb, np.empty((cap - self._emb.shape[0], self.dim))], axis=0
        )
        self._rewards = np.concatenate(
            [self._rewards, np.empty(cap - self._rewards.shape[0])]
        )
        self._acc = np.concatenate([self._acc, np.empty(cap - self._acc.shape[0])])
        if self._labels is not None:
            self._labels = np.concatenate(
                [self._labels, np.empty(cap - self._labels.shape[0], dtype=np.int64)]
            )

    def kernel_vector(self, query) -> np.ndarray:
        """Kernel values of ``query`` against every stored sample.

        The result can be handed back to ``append`` so the O(n) similarity
        pass done at scoring time is not repeated at update time.
        """
        if self._n == 0:
            query = np.asarray(query, dtype=np.float64)
            if query.shape != (self.dim,):
                raise ValueError(f"dimension mismatch: {query.shape} vs ({self.dim},)")
            return np.empty(0, dtype=np.float64)
        return rbf_vector(query, self.embeddings, self.kernel_config)

    def append(self, embedding, reward: float, kvec=None, time_label: int = 0):
        """Append one sample, updating every accumulator in O(n).

        ``kvec`` must be ``kernel_vector(embedding)`` over the store as it
        was before this call; pass None to have it computed here.
        """
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: {embedding.shape} vs ({self.dim},)")
        if kvec is None:
            kvec = self.kernel_vector(embedding)
        else:
            kvec = np.asarray(kvec, dtype=np.float64)
            if kvec.shape != (self._n,):
                raise ValueError(f"kvec length {kvec.shape[0]} != store size {self._n}")
        n = self._n
        self._reserve(n + 1)
        self._acc[:n] += kvec
        self._emb[n] = embedding
        self._rewards[n] = float(reward)
        self._acc[n] = 1.0 + kvec.sum()
        if self._labels is not None:
            self._labels[n] = int(time_label)
        self._n = n + 1
        self._note_mutation()

    def remove(self, indices):
        """Remove samples by index, subtracting their kernel mass from the
        survivors in O(n * k). Indices must be distinct and in range."""
        indices = np.asarray(indices, dtype=np.int64).ravel()
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self._n:
            raise IndexError(f"index out of range for store of size {self._n}")
        if np.unique(indices).size != indices.size:
            raise ValueError("indices must be distinct")
        keep = np.ones(self._n, dtype=bool)
        keep[indices] = False
        removed_emb = self._emb[:self._n][~keep]
        kept_emb = self._emb[:self._n][keep]
        new_n = kept_emb.shape[0]
        if new_n:
            mass = rbf_matrix(kept_emb, removed_emb, self.kernel_config).sum(axis=1)
            new_acc = self._acc[:self._n][keep] - mass
        else:
            new_acc = np.empty(0)
        self._emb[:new_n] = kept_emb
        self._rewards[:new_n] = self._rewards[:self._n][keep]
        self._acc[:new_n] = new_acc
        if self._labels is not None:
            self._labels[:new_n] = self._labels[:self._n][keep]
        self._n = new_n
        self._note_mutation()

    def recompute(self):
        """Replace all accumulators with a fresh O(n^2) computation.

        Run periodically to cancel incremental floating-point drift; the
        store schedules this automatically every ``checkpoint_interval``
        mutations.
        """
        if self._n:
            self._acc[: self._n] = accumulator_sums(
                self._emb[: self._n], self.kernel_config
            )
        self._mutations_since_checkpoint = 0

    def _note_mutation(self):
        self._mutations_since_checkpoint += 1
        if (
            self.checkpoint_interval
            and self._mutations_since_checkpoint >= self.checkpoint_interval
        ):
            self.recompute()

    # -- estimators ---------------------------------------------------------

    def _masked(self, kvec: np.ndarray, mask):
        if mask is None:
            return kvec, self.rewards, self.weights
        mask = np.asarray(mask)
        return kvec[mask], self.rewards[mask], self.weights[mask]

    def nwkr(self, query, mask=None) -> float:
        """Kernel-weighted mean reward at ``query`` (no importance weights)."""
        kvec, rewards, _ = self._masked(self.kernel_vector(query), mask)
        denom = kvec.sum()
        if kvec.size == 0 or denom <= 0.0:
            raise NoSupportError("no kernel mass at query")
        return float((kvec * rewards).sum() / denom)

    def iwkr(self, query, mask=None) -> float:
        """Importance-weighted kernel mean reward at ``query``.

        Down-weights samples from densely sampled neighbourhoods so the
        estimate tracks the reward function rather than the sampling
        distribution.
        """
        kvec, rewards, weights = self._masked(self.kernel_vector(query), mask)
        kw = kvec * weights
        denom = kw.sum()
        if kvec.size == 0 or denom <= 0.0:
            raise NoSupportError("no kernel mass at query")
        return float((kw * rewards).sum() / denom)

    def estimate_from_kvec(self, kvec: np.ndarray, use_importance_weights: bool = True):
        """(mean estimate, kernel mass) from a precomputed kernel vector.

        Raises NoSupportError on zero mass, mirroring iwkr/nwkr.
        """
        eta = float(kvec.sum())
        w = kvec * self.weights if use_importance_weights else kvec
        denom = w.sum()
        if kvec.size == 0 or denom <= 0.0:
            raise NoSupportError("no kernel mass at query")
        return float((w * self.rewards).sum() / denom), eta
