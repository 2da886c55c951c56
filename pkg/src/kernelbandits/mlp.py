"""Plain-numpy multilayer perceptron with Softplus hidden activations.

The embedding model maps a concatenated (context, arm) vector to a point in
the learned similarity space. Hidden layers use Softplus, the output layer
is linear. Forward and backward passes are hand-rolled so the training
pipeline can push gradients through the kernel estimator without an
autodiff dependency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MLPParams", "init_mlp", "softplus", "sigmoid", "mlp_forward",
           "forward_cached", "backward", "zeros_like", "flatten_params",
           "unflatten_params"]


@dataclass
class MLPParams:
    """Layer weights (out, in) and biases (out,), input side first."""

    weights: list
    biases: list

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


def init_mlp(layer_sizes, rng: np.random.Generator) -> MLPParams:
    """Kaiming-style fan-in Gaussian weights, zero biases.

    ``layer_sizes`` runs [input_dim, hidden..., output_dim]; a two-entry
    list gives a single linear layer with no hidden activation.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) computed without overflow for large |x|."""
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))),
                    np.log1p(np.exp(np.minimum(x, 0.0))))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mlp_forward(params: MLPParams, x) -> np.ndarray:
    """Embed a single vector (d_in,) or a batch (n, d_in)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"input dim {h.shape[1]} != layer dim {params.weights[0].shape[1]}"
        )
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i != last:
            h = softplus(h)
    return h[0] if single else h


def forward_cached(params: MLPParams, x: np.ndarray):
    """Batch forward pass keeping layer inputs and pre-activations for backprop."""
    h = np.asarray(x, dtype=np.float64)
    inputs, preacts = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        preacts.append(z)
        h = softplus(z) if i != last else z
    return h, (inputs, preacts)


def backward(params: MLPParams, cache, grad_out: np.ndarray) -> MLPParams:
    """Accumulate parameter gradients from d(loss)/d(output) of a batch."""
    inputs, preacts = cache
    g_w = [np.zeros_like(w) for w in params.weights]
    g_b = [np.zeros_like(b) for b in params.biases]
    delta = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(params.weights) - 1, -1, -1):
        if i != len(params.weights) - 1:
            delta = delta * sigmoid(preacts[i])
        g_w[i] = delta.T @ inputs[i]
        g_b[i] = delta.sum(axis=0)
        if i:
            delta = delta @ params.weights[i]
    return MLPParams(g_w, g_b)


def zeros_like(params: MLPParams) -> MLPParams:
    return MLPParams([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases])


def flatten_params(params: MLPParams) -> np.ndarray:
    """Concatenate all parameters into one vector (used by gradient checks)."""
    return np.concatenate(
        [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
    )


def unflatten_params(vec: np.ndarray, template: MLPParams) -> MLPParams:
    weights, biases = [], []
    k = 0
    for w in template.weights:
        weights.append(vec[k:k + w.size].reshape(w.shape).copy())
        k += w.size
    for b in template.biases:
        biases.append(vec[k:k + b.size].reshape(b.shape).copy())
        k += b.size
    return MLPParams(weights, biases)
