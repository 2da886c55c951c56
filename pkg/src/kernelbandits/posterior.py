"""Per-query Beta posteriors over the mean reward.

The posterior at a query embedding s is Beta(alpha, beta) with

    alpha = eta(s) * mu_hat(s),      beta = eta(s) * (1 - mu_hat(s))

where eta(s) is the total kernel mass of the query against the store and
mu_hat is the importance-weighted kernel estimate. The mean is therefore
exactly mu_hat, while alpha + beta = eta keeps the "effective pull count"
of the neighbourhood: more local data means a more peaked posterior and
less exploration.

Degenerate cases are clamped rather than left undefined: when all local
rewards agree one parameter would be 0 (Beta(x, 0) is undefined), so both
parameters are floored at ``EPS_CLAMP``; when the query has essentially no
kernel mass the uniform Beta(1, 1) prior is returned, which is maximally
explorative for unseen regions. The clamp distorts the posterior mean by at
most EPS_CLAMP / eta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import NoSupportError, ReferenceStore

__all__ = ["BetaParams", "EPS_CLAMP", "ETA_MIN", "kernel_mass", "beta_params",
           "beta_params_from_kvec", "thompson_draw"]

EPS_CLAMP = 1e-6
ETA_MIN = 1e-8


@dataclass(frozen=True)
class BetaParams:
    """Beta(alpha, beta) with the query's kernel mass kept for inspection."""

    alpha: float
    beta: float
    eta: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))


def kernel_mass(query, store: ReferenceStore, mask=None) -> float:
    """Total kernel similarity of ``query`` to the (masked) store; 0 when empty."""
    kvec = store.kernel_vector(query)
    if mask is not None:
        kvec = kvec[np.asarray(mask)]
    return float(kvec.sum())


def beta_params(query, store: ReferenceStore, mask=None,
                use_importance_weights: bool = True) -> BetaParams:
    """Posterior parameters at ``query``; Beta(1, 1) when mass < ETA_MIN."""
    kvec = store.kernel_vector(query)
    if mask is not None:
        sel = np.asarray(mask)
        kvec = kvec[sel]
        rewards = store.rewards[sel]
        weights = store.weights[sel]
    else:
        rewards = store.rewards
        weights = store.weights
    return _params_from_parts(kvec, rewards, weights, use_importance_weights)


def beta_params_from_kvec(kvec: np.ndarray, store: ReferenceStore,
                          use_importance_weights: bool = True) -> BetaParams:
    """Same as ``beta_params`` but reusing a precomputed kernel vector."""
    return _params_from_parts(kvec, store.rewards, store.weights,
                              use_importance_weights)


def _params_from_parts(kvec, rewards, weights, use_importance_weights):
    eta = float(kvec.sum())
    if eta < ETA_MIN:
        return BetaParams(alpha=1.0, beta=1.0, eta=0.0)
    kw = kvec * weights if use_importance_weights else kvec
    denom = kw.sum()
    if denom <= 0.0:
        # kernel mass above threshold but weighted mass underflowed
        return BetaParams(alpha=1.0, beta=1.0, eta=0.0)
    mu = float((kw * rewards).sum() / denom)
    alpha = max(eta * mu, EPS_CLAMP)
    beta = max(eta * (1.0 - mu), EPS_CLAMP)
    return BetaParams(alpha=alpha, beta=beta, eta=eta)


def thompson_draw(params: BetaParams, rng: np.random.Generator) -> float:
    """One sample from the posterior; deterministic given the generator state."""
    return float(rng.beta(params.alpha, params.beta))
