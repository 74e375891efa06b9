"""Entropic risk of Monte Carlo cost samples and the induced weights.

For sensitivity sigma > 0 the risk of costs J_1..J_M is
(1/sigma) log mean(exp(sigma J)), evaluated with a max shift for
overflow safety. sigma = 0 is handled exactly as the plain mean, and the
induced sample weights degenerate to uniform. Larger sigma moves both
the risk and the weights toward the worst samples.
"""

from __future__ import annotations

import numpy as np


def _check_sigma(sigma: float) -> float:
    if not np.isfinite(sigma) or sigma < 0.0:
        raise ValueError("sigma must be finite and nonnegative")
    return float(sigma)


def _as_cost_rows(costs) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(costs, dtype=float))
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise ValueError("costs must be a nonempty vector or a matrix of row vectors")
    if not np.all(np.isfinite(rows)):
        raise ValueError("costs contain non-finite entries")
    return rows


def entropic_risk_rows(costs, sigma: float) -> np.ndarray:
    """Entropic risk of each row of a (C, M) cost matrix."""
    sigma = _check_sigma(sigma)
    rows = _as_cost_rows(costs)
    if sigma == 0.0:
        return np.mean(rows, axis=1)
    shift = np.max(rows, axis=1)
    scaled = np.exp(sigma * (rows - shift[:, None]))
    return shift + np.log(np.mean(scaled, axis=1)) / sigma


def entropic_risk(costs, sigma: float) -> float:
    """Entropic risk of one cost sample vector.

    Exactly the sample mean at sigma = 0; increases with sigma toward the
    sample maximum. Translation equivariant: risk(J + c) = risk(J) + c.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 1:
        raise ValueError(f"costs must be a vector, got shape {costs.shape}")
    return float(entropic_risk_rows(costs[None, :], sigma)[0])


def entropic_risk_quadratic(costs, sigma: float) -> float:
    """Small-sigma expansion of the entropic risk: mean + sigma/2 * variance.

    Uses the population variance of the sample, matching the expansion of
    the exact risk in sigma around zero.
    """
    sigma = _check_sigma(sigma)
    costs = _as_cost_rows(costs)[0]
    return float(np.mean(costs) + 0.5 * sigma * np.var(costs))


def risk_weights(costs, sigma: float) -> np.ndarray:
    """Normalized exponential weights exp(sigma J_j) / sum_k exp(sigma J_k).

    Computed after subtracting the sample maximum, so adding a constant
    to all costs cannot change the result when the shifted values are
    representable exactly. sigma = 0 returns the uniform weights 1/M.
    """
    sigma = _check_sigma(sigma)
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError(f"costs must be a nonempty vector, got shape {costs.shape}")
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs contain non-finite entries")
    if sigma == 0.0:
        return np.full(costs.shape[0], 1.0 / costs.shape[0])
    scaled = np.exp(sigma * (costs - np.max(costs)))
    return scaled / np.sum(scaled)


def weighted_adjoint(weights: np.ndarray, adjoints: np.ndarray) -> np.ndarray:
    """Weighted average of per-sample adjoint trajectories.

    ``adjoints`` has the sample axis first; the reduction contracts it in
    a fixed order so equal inputs give bitwise-equal outputs.
    """
    weights = np.asarray(weights, dtype=float)
    adjoints = np.asarray(adjoints, dtype=float)
    if weights.ndim != 1 or weights.shape[0] != adjoints.shape[0]:
        raise ValueError("one weight per adjoint sample is required")
    return np.einsum("m,m...->...", weights, adjoints)
