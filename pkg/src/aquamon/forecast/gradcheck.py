"""Finite-difference validation of the hand-written backpropagation."""

from __future__ import annotations

import numpy as np

from .network import PARAM_NAMES, CnnModel, loss_and_grads


def gradient_check(model: CnnModel, window: np.ndarray, target: np.ndarray,
                   epsilon: float = 1e-5, n_params: int = 60,
                   seed: int = 0, sign_flip: bool = False) -> float:
    """Max relative discrepancy between analytic and central-difference
    gradients of the MSE loss, over a random parameter subsample.

    ``sign_flip`` corrupts the analytic gradient on purpose so the test
    harness can prove this check actually catches broken backprop.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    x = np.asarray(window, dtype=float)[None, :, :]
    t = np.asarray(target, dtype=float)[None, :]

    _, grads = loss_and_grads(model, x, t)
    if sign_flip:
        grads = {name: -g for name, g in grads.items()}

    slots = [(name, idx) for name in PARAM_NAMES
             for idx in range(model.weights[name].size)]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(slots), size=min(max(n_params, 50), len(slots)), replace=False)

    worst = 0.0
    for slot in chosen:
        name, idx = slots[slot]
        w = model.weights[name]
        flat = w.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + epsilon
        loss_plus, _ = loss_and_grads(model, x, t)
        flat[idx] = orig - epsilon
        loss_minus, _ = loss_and_grads(model, x, t)
        flat[idx] = orig
        g_fd = (loss_plus - loss_minus) / (2 * epsilon)
        g_an = grads[name].reshape(-1)[idx]
        denom = max(1e-8, abs(g_an) + abs(g_fd))
        worst = max(worst, abs(g_an - g_fd) / denom)
    return worst
