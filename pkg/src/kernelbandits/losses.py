"""Binary cross entropy and expected calibration error.

ECE bins predictions into equal-width bins over [0, 1] and averages the
per-bin |confidence - accuracy| gap weighted by bin occupancy. The bin
assignment is hard; its gradient treats membership as constant and flows
only through the mean-confidence term (straight-through), which is what
makes the calibration penalty usable as a training loss.
"""

from __future__ import annotations

import numpy as np

__all__ = ["PROB_CLIP", "clip_probs", "bce_loss", "bce_grad", "ece_loss",
           "ece_grad"]

PROB_CLIP = 1e-7


def clip_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def bce_loss(p_hat, r) -> float:
    """-(r log p + (1-r) log(1-p)), elementwise mean over arrays."""
    p = clip_probs(np.asarray(p_hat, dtype=np.float64))
    r = np.asarray(r, dtype=np.float64)
    return float(np.mean(-(r * np.log(p) + (1.0 - r) * np.log1p(-p))))


def bce_grad(p_hat, r) -> np.ndarray:
    """d(mean BCE)/d(p_hat); zero where the probability clip is active."""
    p_raw = np.atleast_1d(np.asarray(p_hat, dtype=np.float64))
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    p = clip_probs(p_raw)
    g = -(r / p - (1.0 - r) / (1.0 - p)) / p_raw.size
    g[(p_raw < PROB_CLIP) | (p_raw > 1.0 - PROB_CLIP)] = 0.0
    return g


def _bin_index(p: np.ndarray, bins: int) -> np.ndarray:
    idx = np.floor(p * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def ece_loss(p_hats, rs, bins: int) -> float:
    p = np.asarray(p_hats, dtype=np.float64)
    r = np.asarray(rs, dtype=np.float64)
    if p.size == 0:
        raise ValueError("ECE of an empty batch is undefined")
    if p.shape != r.shape:
        raise ValueError("p_hats and rs must share length")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    idx = _bin_index(p, bins)
    ece = 0.0
    for b in range(bins):
        in_bin = idx == b
        n_b = int(in_bin.sum())
        if n_b == 0:
            continue
        gap = abs(p[in_bin].mean() - r[in_bin].mean())
        ece += (n_b / p.size) * gap
    return float(ece)


def ece_grad(p_hats, rs, bins: int) -> np.ndarray:
    """d(ECE)/d(p_hat) with bin membership frozen.

    Within bin b the loss contributes (n_b/N) |mean(p) - mean(r)|, so each
    member's gradient is sign(gap) / N.
    """
    p = np.asarray(p_hats, dtype=np.float64)
    r = np.asarray(rs, dtype=np.float64)
    idx = _bin_index(p, bins)
    g = np.zeros_like(p)
    for b in range(bins):
        in_bin = idx == b
        if not in_bin.any():
            continue
        g[in_bin] = np.sign(p[in_bin].mean() - r[in_bin].mean()) / p.size
    return g
