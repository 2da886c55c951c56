"""Self-supervised training of the embedding model.

Each epoch draws a subsample of the historical dataset and splits it into a
reference part and a query part. References are embedded and given
importance weights; each query is embedded and its reward predicted by the
importance-weighted kernel estimate over references from the *same time
interval*, so rewards from other drift regimes never average in. The
prediction feeds a BCE + lambda * ECE objective whose gradient flows back
through the kernel weights into both the query and reference embeddings,
and from there into the network parameters.

Importance weights are recomputed from fresh embeddings every batch but
treated as constants inside the gradient step (stop-gradient); set
``differentiate_weights=True`` to backpropagate through them as well.

Reference rows with identical inputs share an embedding, so the pipeline
groups duplicates and works on unique rows: per-(row, interval) reward and
count tables replace per-sample sums. This is exact (duplicate samples of
one input contribute count * kernel) and turns one-hot arm datasets from
O(n^2) into O(k^2) per batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .mlp import MLPParams, backward, forward_cached, zeros_like

__all__ = ["TrainingConfig", "TrainingDiverged", "iwkr_forward_batch",
           "loss_and_grad", "train"]

# weighted kernel mass below this is treated as numerically unsupported
_MASS_FLOOR = 1e-290
# kernel values below exp(-46) ~ 1.1e-20 are dropped to exact zero: they are
# invisible next to the self term at float64 and skipping the exp avoids
# libm's slow under/overflow paths on spread-out embeddings
_EXP_CUTOFF = -46.0


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of the embedding training loop.

    ``ref_fraction`` of each epoch's subsample becomes the reference set,
    the remainder the query set. ``time_intervals`` is the number of
    interval labels present in the dataset (T); interval labels must lie in
    [0, T). ``model_selection`` is "final" (keep the last epoch's weights)
    or "best_val" (keep the epoch with the lowest validation loss;
    requires ``validation_fraction`` > 0).
    """

    epochs: int = 4
    batch_size: int = 16
    learning_rate: float = 1e-3
    lr_decay: float = 0.99
    lambda_ece: float = 5.0
    ece_bins: int = 5
    ref_fraction: float = 0.2
    sample_fraction: float = 0.5
    time_intervals: int = 1
    sigma: float = 1.0
    seed: int = 0
    validation_fraction: float = 0.0
    model_selection: str = "final"
    differentiate_weights: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.ece_bins < 1:
            raise ValueError("ece_bins must be >= 1")
        if not (0.0 < self.ref_fraction < 1.0):
            raise ValueError("ref_fraction must be in (0, 1)")
        if not (0.0 < self.sample_fraction <= 1.0):
            raise ValueError("sample_fraction must be in (0, 1]")
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.model_selection not in ("final", "best_val"):
            raise ValueError("model_selection must be 'final' or 'best_val'")
        if self.model_selection == "best_val" and self.validation_fraction == 0.0:
            raise ValueError("best_val selection needs validation_fraction > 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the loss trace seen so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _kernel_matrix(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    expnt = sq / (-2.0 * sigma**2)
    out = np.zeros_like(expnt)
    live = expnt > _EXP_CUTOFF
    out[live] = np.exp(expnt[live])
    return out


@dataclass
class _RefBatch:
    """Reference batch grouped by unique input row.

    ``r_table``/``n_table`` hold per-(unique row, interval) reward sums and
    counts; ``w`` are the unique rows' importance weights with all
    duplicates folded in through ``counts``.
    """

    x_unique: np.ndarray      # (u, d_in)
    s_unique: np.ndarray      # (u, d_emb)
    cache: tuple
    counts: np.ndarray        # (u,)
    g: np.ndarray             # (u,) kernel-mass sums over all m samples
    w: np.ndarray             # (u,) importance weights 1/g
    kmat: np.ndarray          # (u, u) unique-row kernel matrix
    interval_ids: np.ndarray  # sorted distinct interval labels
    r_table: np.ndarray       # (u, t) reward sums
    n_table: np.ndarray       # (u, t) sample counts
    mean_reward: float


def _prepare_refs(params, ref_inputs, ref_rewards, ref_intervals, sigma,
                  ref_weights=None) -> _RefBatch:
    xr = np.asarray(ref_inputs, dtype=np.float64)
    rr = np.asarray(ref_rewards, dtype=np.float64)
    ir = np.asarray(ref_intervals)
    if xr.shape[0] == 0:
        raise ValueError("reference batch is empty")
    x_unique, first, inverse = np.unique(xr, axis=0, return_index=True,
                                         return_inverse=True)
    u = x_unique.shape[0]
    counts = np.bincount(inverse, minlength=u).astype(np.float64)
    s_unique, cache = forward_cached(params, x_unique)
    kmat = _kernel_matrix(s_unique, s_unique, sigma)
    np.fill_diagonal(kmat, 1.0)
    g = kmat @ counts
    if ref_weights is None:
        w = 1.0 / g
    else:
        w = np.asarray(ref_weights, dtype=np.float64)[first]
    interval_ids, t_inverse = np.unique(ir, return_inverse=True)
    r_table = np.zeros((u, interval_ids.size))
    n_table = np.zeros((u, interval_ids.size))
    np.add.at(r_table, (inverse, t_inverse), rr)
    np.add.at(n_table, (inverse, t_inverse), 1.0)
    return _RefBatch(x_unique=x_unique, s_unique=s_unique, cache=cache,
                     counts=counts, g=g, w=w, kmat=kmat,
                     interval_ids=interval_ids, r_table=r_table,
                     n_table=n_table, mean_reward=float(rr.mean()))


def _query_tables(refs: _RefBatch, query_intervals):
    """Per-query (reward-sum, count) columns plus an interval-present mask."""
    iq = np.asarray(query_intervals)
    pos = np.searchsorted(refs.interval_ids, iq)
    pos_c = np.clip(pos, 0, refs.interval_ids.size - 1)
    present = refs.interval_ids[pos_c] == iq
    r_cols = refs.r_table[:, pos_c].T   # (b, u)
    n_cols = refs.n_table[:, pos_c].T
    return r_cols, n_cols, present


def _predict(s_q, refs: _RefBatch, query_intervals, sigma):
    """Masked IWKR predictions plus the intermediates the backward pass
    needs. Queries whose interval has no references, or whose weighted
    kernel mass underflows, fall back to the reference batch's mean reward
    and are excluded from the gradient."""
    r_cols, n_cols, present = _query_tables(refs, query_intervals)
    kq = _kernel_matrix(s_q, refs.s_unique, sigma)
    kw = kq * refs.w[None, :]
    numer = (kw * r_cols).sum(axis=1)
    denom = (kw * n_cols).sum(axis=1)
    supported = present & (denom > _MASS_FLOOR)
    p = np.where(supported, numer / np.where(supported, denom, 1.0),
                 refs.mean_reward)
    return p, supported, kq, denom, r_cols, n_cols


def iwkr_forward_batch(params: MLPParams, query_inputs, query_intervals,
                       ref_inputs, ref_rewards, ref_intervals,
                       config: TrainingConfig, ref_weights=None) -> np.ndarray:
    """Predicted mean rewards for a query batch against a reference batch.

    ``ref_weights`` (one weight per reference row) overrides the importance
    weights with fixed values; by default they are recomputed from the
    current embeddings. Passing the weights of a reference parameter point
    makes this the exact function the stop-gradient backward pass
    differentiates.
    """
    refs = _prepare_refs(params, ref_inputs, ref_rewards, ref_intervals,
                         config.sigma, ref_weights)
    s_q, _ = forward_cached(params, np.asarray(query_inputs, dtype=np.float64))
    p, _, _, _, _, _ = _predict(s_q, refs, query_intervals, config.sigma)
    return p


def loss_and_grad(params: MLPParams, query_inputs, query_rewards,
                  query_intervals, ref_inputs, ref_rewards, ref_intervals,
                  config: TrainingConfig):
    """Batch loss (mean BCE + lambda * ECE) and its parameter gradient.

    The chain rule runs loss -> predictions -> kernel weights -> query and
    reference embeddings -> network parameters. Raises TrainingDiverged on
    a non-finite loss.
    """
    xq = np.asarray(query_inputs, dtype=np.float64)
    rq = np.asarray(query_rewards, dtype=np.float64)
    sigma = config.sigma
    refs = _prepare_refs(params, ref_inputs, ref_rewards, ref_intervals, sigma)
    s_q, cache_q = forward_cached(params, xq)
    p, supported, kq, denom, r_cols, n_cols = _predict(
        s_q, refs, query_intervals, sigma)

    loss = losses.bce_loss(p, rq)
    if config.lambda_ece:
        loss += config.lambda_ece * losses.ece_loss(losses.clip_probs(p), rq,
                                                    config.ece_bins)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite batch loss {loss}", trace=[])

    dp = losses.bce_grad(p, rq)
    if config.lambda_ece:
        dp = dp + config.lambda_ece * losses.ece_grad(losses.clip_probs(p), rq,
                                                      config.ece_bins)
    dp = dp * supported  # fallback predictions are constants

    # d p_k / d kappa_ka = w_a (R[a, t_k] - p_k N[a, t_k]) / denom_k
    safe_denom = np.where(supported, denom, 1.0)
    scale = (dp / safe_denom)[:, None]
    resid = r_cols - p[:, None] * n_cols
    c = scale * refs.w[None, :] * resid * kq  # dL/dkappa * kappa
    inv_sig2 = 1.0 / sigma**2
    # d kappa_ka / d q_k = kappa (s_a - q_k) / sigma^2, mirrored for s_a
    d_sq = (c @ refs.s_unique - c.sum(axis=1)[:, None] * s_q) * inv_sig2
    d_su = (c.T @ s_q - c.sum(axis=0)[:, None] * refs.s_unique) * inv_sig2

    if config.differentiate_weights:
        # d p_k / d w_a = kappa_ka (R - p N) / denom_k ; w_a = 1 / g_a
        dw = (scale * kq * resid).sum(axis=0)
        dg = -dw / refs.g**2
        # g_a = sum_b counts_b kappa_ab
        e = refs.kmat * (dg[:, None] * refs.counts[None, :]
                         + dg[None, :] * refs.counts[:, None])
        np.fill_diagonal(e, 0.0)  # self term is constant
        d_su = d_su + (e @ refs.s_unique
                       - e.sum(axis=1)[:, None] * refs.s_unique) * inv_sig2

    grads = zeros_like(params)
    for cache, grad_out in ((cache_q, d_sq), (refs.cache, d_su)):
        part = backward(params, cache, grad_out)
        for gw, pw in zip(grads.weights, part.weights):
            gw += pw
        for gb, pb in zip(grads.biases, part.biases):
            gb += pb
    return float(loss), grads


@dataclass
class _AdamState:
    m: MLPParams
    v: MLPParams
    t: int = 0


def _adam_step(params, grads, state, lr, b1=0.9, b2=0.999, eps=1e-8):
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for w, g, m, v in zip(params.weights + params.biases,
                          grads.weights + grads.biases,
                          state.m.weights + state.m.biases,
                          state.v.weights + state.v.biases):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def train(inputs, rewards, intervals, config: TrainingConfig, init: MLPParams):
    """Fit the embedding model; returns (params, per-epoch mean loss trace).

    Per epoch: subsample ``sample_fraction`` of the data, split off
    ``ref_fraction`` as references, and run Adam over mini-batches of the
    remaining queries with a per-epoch exponential learning-rate decay.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    intervals = np.asarray(intervals, dtype=np.int64)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(config.seed)
    params = init.copy()
    state = _AdamState(zeros_like(params), zeros_like(params))
    trace: list[float] = []

    pool = np.arange(n)
    val_idx = np.empty(0, dtype=np.int64)
    if config.validation_fraction > 0.0:
        perm = rng.permutation(n)
        n_val = max(1, int(round(config.validation_fraction * n)))
        val_idx, pool = perm[:n_val], perm[n_val:]
        if pool.size < 2:
            raise ValueError("dataset too small for the validation split")

    best_params, best_val = params.copy(), np.inf
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay**epoch
        n_sub = max(2, int(round(config.sample_fraction * pool.size)))
        sub = rng.choice(pool, size=min(n_sub, pool.size), replace=False)
        n_ref = min(max(1, int(round(config.ref_fraction * sub.size))),
                    sub.size - 1)
        ref_idx, query_idx = sub[:n_ref], sub[n_ref:]
        rng.shuffle(query_idx)

        batch_losses = []
        for start in range(0, query_idx.size, config.batch_size):
            batch = query_idx[start:start + config.batch_size]
            try:
                loss, grads = loss_and_grad(
                    params, inputs[batch], rewards[batch], intervals[batch],
                    inputs[ref_idx], rewards[ref_idx], intervals[ref_idx],
                    config)
            except TrainingDiverged as exc:
                raise TrainingDiverged(str(exc), trace) from None
            batch_losses.append(loss)
            _adam_step(params, grads, state, lr)
        trace.append(float(np.mean(batch_losses)) if batch_losses else np.nan)

        if val_idx.size:
            val_p = iwkr_forward_batch(params, inputs[val_idx], intervals[val_idx],
                                       inputs[ref_idx], rewards[ref_idx],
                                       intervals[ref_idx], config)
            val_loss = losses.bce_loss(val_p, rewards[val_idx])
            if config.lambda_ece:
                val_loss += config.lambda_ece * losses.ece_loss(
                    losses.clip_probs(val_p), rewards[val_idx], config.ece_bins)
            if val_loss < best_val:
                best_val, best_params = val_loss, params.copy()

    if config.model_selection == "best_val" and np.isfinite(best_val):
        return best_params, trace
    return params, trace
