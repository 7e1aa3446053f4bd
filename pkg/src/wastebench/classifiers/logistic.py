"""Multinomial logistic regression trained by full-batch gradient descent.

The objective is the focal loss

    L = -alpha * (1 - p_t)^gamma * ln(p_t)

averaged over samples, with p_t the softmax probability of the true class
clamped to >= 1e-12, plus an L2 penalty on the weights (not the bias).
Cross-entropy is the gamma=0, alpha=1 special case and runs through the very
same code path, so the two losses coincide exactly, iteration by iteration.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

P_CLAMP = 1e-12
ARMIJO_C = 1e-4
MAX_HALVINGS = 60


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def focal_loss_terms(p_t: np.ndarray, gamma: float, alpha: float) -> np.ndarray:
    """Per-sample focal loss values for an array of true-class probabilities."""
    p = np.clip(p_t, P_CLAMP, 1.0)
    return -alpha * np.power(1.0 - p, gamma) * np.log(p)


def _forward(w, b, x, y, gamma, alpha, l2):
    """Softmax probabilities and the penalized mean focal loss."""
    n = x.shape[0]
    p = softmax(x @ w.T + b)
    p_t = p[np.arange(n), y]
    loss = focal_loss_terms(p_t, gamma, alpha).mean() + 0.5 * l2 * float((w * w).sum())
    return p, p_t, loss


def _gradient(p, p_t, w, x, onehot, gamma, alpha, l2):
    n = x.shape[0]
    pc = np.clip(p_t, P_CLAMP, 1.0 - P_CLAMP)
    if gamma == 0.0:
        g_scalar = np.full(n, -alpha)
    else:
        one_m = 1.0 - pc
        # d/dz of -alpha (1-p)^gamma ln p, factored per sample
        g_scalar = alpha * gamma * pc * np.power(one_m, gamma - 1.0) * np.log(pc) - alpha * np.power(one_m, gamma)
    dz = (g_scalar[:, None] * (onehot - p)) / n
    gw = dz.T @ x + l2 * w
    gb = dz.sum(axis=0)
    return gw, gb


def fit(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    gamma, alpha, l2 = float(spec["gamma"]), float(spec["alpha"]), float(spec["l2"])
    max_iter, tol = int(spec["max_iter"]), float(spec["tol"])
    n, d = x.shape
    w = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    losses = []
    step = 1.0
    converged = False
    it = 0
    p, p_t, loss = _forward(w, b, x, y, gamma, alpha, l2)
    for it in range(1, max_iter + 1):
        losses.append(loss)
        gw, gb = _gradient(p, p_t, w, x, onehot, gamma, alpha, l2)
        gnorm = max(np.abs(gw).max(), np.abs(gb).max())
        if gnorm < tol:
            converged = True
            break
        gsq = float((gw * gw).sum() + (gb * gb).sum())
        t = min(step * 2.0, 1.0e6)  # warm-start from the previous accepted step
        accepted = False
        for _ in range(MAX_HALVINGS):
            w2, b2 = w - t * gw, b - t * gb
            p2, p_t2, loss2 = _forward(w2, b2, x, y, gamma, alpha, l2)
            if loss2 <= loss - ARMIJO_C * t * gsq:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # no descent step representable; gradient is numerically flat
        w, b, step = w2, b2, t
        p, p_t, loss = p2, p_t2, loss2
    return {
        "weights": w,
        "bias": b,
        "n_iter": it,
        "converged": bool(converged),
        "losses": np.asarray(losses),
    }


def score(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    return softmax(x @ np.asarray(params["weights"]).T + np.asarray(params["bias"]))
