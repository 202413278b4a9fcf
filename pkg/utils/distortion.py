"""
Fitting multiplicative/additive distortion constants to paired distance samples.
"""
from typing import Tuple

import numpy as np

SNAP = 1e-9


def _snap(value: float, target: float) -> float:
    return target if abs(value - target) <= SNAP * max(1.0, abs(target)) else value


def fit_two_sided(source: np.ndarray, target: np.ndarray) -> Tuple[float, float]:
    """
    Smallest alpha >= 1, then smallest epsilon >= 0, with
    source / alpha - epsilon <= target <= alpha * source + epsilon on every pair.

    alpha is driven to the largest ratio between positive pairs, which is where
    a bisection on alpha with epsilon pinned at zero converges; pairs where one
    side vanishes are absorbed by epsilon.

    Args:
        source (np.ndarray): Distances in the approximating space
        target (np.ndarray): Distances of the images, same shape

    Returns:
        Tuple[float, float]: (alpha, epsilon)
    """
    s = np.asarray(source, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    positive = (s > 0) & (t > 0)
    alpha = 1.0
    if positive.any():
        alpha = max(1.0, float(np.max(t[positive] / s[positive])), float(np.max(s[positive] / t[positive])))
    alpha = _snap(alpha, 1.0)

    epsilon = 0.0
    if s.size:
        epsilon = max(0.0, float(np.max(t - alpha * s)), float(np.max(s / alpha - t)))
    return alpha, _snap(epsilon, 0.0)


def fit_one_sided(source: np.ndarray, target: np.ndarray) -> Tuple[float, float]:
    """
    Smallest beta >= 1, then gamma >= 0, with target <= beta * source + gamma on every pair.
    """
    s = np.asarray(source, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    positive = (s > 0) & (t > 0)
    beta = 1.0
    if positive.any():
        beta = max(1.0, float(np.max(t[positive] / s[positive])))
    beta = _snap(beta, 1.0)

    gamma = 0.0
    if s.size:
        gamma = max(0.0, float(np.max(t - beta * s)))
    return beta, _snap(gamma, 0.0)
