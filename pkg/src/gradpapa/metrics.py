"""Accuracy and feasibility metrics for estimated factors."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import DegenerateInputError
from .model import abundance_maps


@dataclass(frozen=True)
class MseReport:
    value: float
    # matching[r] is the column of the estimate paired with truth column r
    matching: tuple


def _normalized_columns(M, name):
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise DegenerateInputError(f"{name} has an all-zero column")
    return M / norms


def pairwise_cost(est, truth):
    """``cost[r, s] = || truth_r/|truth_r| - est_s/|est_s| ||^2``."""
    E = _normalized_columns(est, "estimate")
    T = _normalized_columns(truth, "truth")
    if E.shape != T.shape:
        raise ValueError(f"shape mismatch: {E.shape} vs {T.shape}")
    # |a - b|^2 = 2 - 2 a.b for unit vectors; clip rounding below zero
    return np.maximum(2.0 - 2.0 * (T.T @ E), 0.0)


def mse_factor(est, truth):
    """Permutation-matched MSE between normalized columns.

    ``min_pi (1/R) sum_r || t_r/|t_r| - e_pi(r)/|e_pi(r)| ||^2``, solved
    exactly as a linear assignment problem. For abundances pass ``S.T``.
    """
    cost = pairwise_cost(est, truth)
    rows, cols = linear_sum_assignment(cost)
    R = cost.shape[0]
    return MseReport(value=float(cost[rows, cols].sum() / R), matching=tuple(int(c) for c in cols))


def sto_feasibility(S, p=1e-5):
    """Percentage of pixels whose abundances sum to one within ``p``."""
    if not p > 0:
        raise ValueError("p must be positive")
    S = np.asarray(S, dtype=np.float64)
    ok = np.abs(S.sum(axis=0) - 1.0) <= p
    return 100.0 * float(np.count_nonzero(ok)) / S.shape[1]


def lr_feasibility(S, rank, image_shape):
    """Mean share (in percent) of singular-value mass held by the top ``rank`` values.

    An all-zero map counts as 100%.
    """
    I, J = image_shape
    if not 1 <= rank <= min(I, J):
        raise ValueError(f"rank {rank} outside [1, {min(I, J)}]")
    s = np.linalg.svd(abundance_maps(S, image_shape), compute_uv=False)
    total = s.sum(axis=1)
    top = s[:, :rank].sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    ratio = np.where(total > 0, top / safe, 1.0)
    return 100.0 * float(ratio.mean())


@dataclass(frozen=True)
class FeasibilityReport:
    sto_percent: float
    lr_energy_percent: float


def feasibility_report(S, rank, image_shape, p=1e-5):
    return FeasibilityReport(
        sto_percent=sto_feasibility(S, p),
        lr_energy_percent=lr_feasibility(S, rank, image_shape),
    )
