"""Starting points: SPA endmembers, least-squares abundances, random draws."""

import numpy as np

from .exceptions import DegenerateInputError
from .projections import project_feasible_set

RNG_NAME = "numpy.random.PCG64"


def make_rng(seed):
    """Seeded generator used everywhere in the package (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def spa_indices(Y, n_endmembers):
    """Column indices picked by the successive projection algorithm.

    At every step the residual column with the largest l2 norm is chosen
    (ties go to the smallest index) and all columns are projected onto the
    orthogonal complement of it.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if n_endmembers > Y.shape[1]:
        raise ValueError("more endmembers requested than pixels")
    resid = Y.copy()
    norms = np.einsum("ij,ij->j", resid, resid)
    scale = norms.max()
    if scale == 0:
        raise DegenerateInputError("all pixels are zero")
    picked = []
    for _ in range(n_endmembers):
        j = int(np.argmax(norms))
        if norms[j] <= 1e-24 * scale:
            raise DegenerateInputError(
                f"residual vanished after {len(picked)} of {n_endmembers} picks"
            )
        picked.append(j)
        u = resid[:, j] / np.sqrt(norms[j])
        resid -= np.outer(u, u @ resid)
        norms = np.einsum("ij,ij->j", resid, resid)
        norms[picked] = 0.0
    return picked


def spa_endmembers(Y, n_endmembers):
    """Endmember estimate ``K x R``: the original columns of ``Y`` chosen by SPA."""
    Y = np.asarray(Y, dtype=np.float64)
    return Y[:, spa_indices(Y, n_endmembers)].copy()


def init_abundances(Y, C0, mode, image_shape, max_ap_iters=50, ap_tol=1e-3):
    """Least-squares abundances for ``C0``, then projected onto the feasible set.

    Falls back to uniform abundances ``1/R`` when ``C0`` is rank deficient.
    """
    Y = np.asarray(Y, dtype=np.float64)
    C0 = np.asarray(C0, dtype=np.float64)
    R = C0.shape[1]
    if np.linalg.matrix_rank(C0) < R:
        S = np.full((R, Y.shape[1]), 1.0 / R)
    else:
        S = np.linalg.lstsq(C0, Y, rcond=None)[0]
    return project_feasible_set(S, mode, image_shape, max_ap_iters, ap_tol).projected


def random_init(n_bands, n_endmembers, image_shape, mode, seed,
                max_ap_iters=50, ap_tol=1e-3):
    """Gaussian starting point: ``C0 = max(G1, 0)``, ``S0`` = feasible projection of ``G2``."""
    rng = make_rng(seed)
    I, J = image_shape
    C0 = np.maximum(rng.standard_normal((n_bands, n_endmembers)), 0.0)
    G2 = rng.standard_normal((n_endmembers, I * J))
    S0 = project_feasible_set(G2, mode, image_shape, max_ap_iters, ap_tol).projected
    return C0, S0
