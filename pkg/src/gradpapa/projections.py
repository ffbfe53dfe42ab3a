"""Euclidean projections and the alternating-projection feasibility solver."""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .model import abundance_maps, maps_to_rows


def _simplex_columns(V, z):
    # Sort-and-threshold on every column of V at once.
    n = V.shape[0]
    U = -np.sort(-V, axis=0)
    css = np.cumsum(U, axis=0) - z
    ind = np.arange(1, n + 1, dtype=np.float64)[:, None]
    cond = U - css / ind > 0
    # cond is True on a prefix of each column; rho is its length (always >= 1)
    rho = np.count_nonzero(cond, axis=0)
    tau = css[rho - 1, np.arange(V.shape[1])] / rho
    return np.maximum(V - tau, 0.0)


def project_simplex(v, z=1.0):
    """Project ``v`` onto ``{x >= 0, sum(x) = z}``.

    Sorts ``v`` in decreasing order, finds the largest ``rho`` with
    ``v_(rho) - (sum_{i<=rho} v_(i) - z)/rho > 0`` and thresholds at that
    level. ``O(n log n)``.
    """
    if not z > 0:
        raise ValueError(f"simplex radius must be positive, got {z}")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("project_simplex expects a vector")
    return _simplex_columns(v[:, None], z)[:, 0]


def project_columns_simplex(M, z=1.0):
    """Project every column of ``M`` onto the probability simplex (radius ``z``)."""
    if not z > 0:
        raise ValueError(f"simplex radius must be positive, got {z}")
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("project_columns_simplex expects a matrix")
    return _simplex_columns(M, z)


def _svd(M):
    try:
        return np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc


def project_rank(M, rank):
    """Best rank-``rank`` approximation (truncated SVD).

    Works on a single matrix or on a stack of shape ``(R, I, J)``.
    """
    M = np.asarray(M, dtype=np.float64)
    if not 1 <= rank <= min(M.shape[-2:]):
        raise ValueError(f"rank {rank} outside [1, {min(M.shape[-2:])}]")
    U, s, Vt = _svd(M)
    return (U[..., :rank] * s[..., None, :rank]) @ Vt[..., :rank, :]


def project_nuclear_ball(M, radius):
    """Project onto ``{X : ||X||_* <= radius}``.

    Matrices inside the ball are returned unchanged; otherwise the singular
    values are projected onto the simplex of radius ``radius``. Accepts a
    single matrix or a stack of shape ``(R, I, J)``.
    """
    if not radius > 0:
        raise ValueError(f"nuclear radius must be positive, got {radius}")
    M = np.asarray(M, dtype=np.float64)
    stack = M if M.ndim == 3 else M[None]
    U, s, Vt = _svd(stack)
    outside = s.sum(axis=1) > radius
    out = stack.copy()
    if np.any(outside):
        s_new = _simplex_columns(s[outside].T, radius).T
        out[outside] = (U[outside] * s_new[:, None, :]) @ Vt[outside]
    return out if M.ndim == 3 else out[0]


@dataclass(frozen=True)
class ExactRank:
    """Each abundance map has rank at most ``rank``."""

    rank: int

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError("rank must be a positive integer")

    def project(self, maps):
        return project_rank(maps, self.rank)


@dataclass(frozen=True)
class NuclearBall:
    """Each abundance map has nuclear norm at most ``radius``."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def project(self, maps):
        return project_nuclear_ball(maps, self.radius)


@dataclass(frozen=True)
class ApResult:
    projected: np.ndarray
    iterations: int
    last_relative_change: float


def project_feasible_set(W0, mode, image_shape, max_ap_iters=50, ap_tol=1e-3):
    """Alternate between the low-rank map set and the column simplex.

    Each iteration projects every abundance map onto the set described by
    ``mode`` and then every pixel column onto the probability simplex. The
    loop stops once the relative change of the iterate drops below
    ``ap_tol`` or after ``max_ap_iters`` iterations. The result always ends
    on the simplex step, so sum-to-one and nonnegativity hold exactly while
    the low-rank structure holds approximately.
    """
    if not ap_tol > 0:
        raise ValueError("ap_tol must be positive")
    if max_ap_iters < 1:
        raise ValueError("max_ap_iters must be at least 1")
    W = np.array(W0, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise NumericalError("non-finite entries in the point to project")

    change = np.inf
    k = 0
    while k < max_ap_iters:
        k += 1
        F = maps_to_rows(mode.project(abundance_maps(W, image_shape)))
        W_next = _simplex_columns(F, 1.0)
        if not np.all(np.isfinite(W_next)):
            raise NumericalError(f"non-finite entries in AP iteration {k}")
        norm = np.linalg.norm(W)
        diff = np.linalg.norm(W_next - W)
        change = diff / norm if norm > 0 else diff
        W = W_next
        if change < ap_tol:
            break
    return ApResult(projected=W, iterations=k, last_relative_change=float(change))
