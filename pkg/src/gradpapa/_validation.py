"""Input checks shared by the estimator and the CLI."""

import numpy as np
from sklearn.utils.validation import check_array

from .model import cube_to_matrix


def check_cube(X, image_shape=None):
    """Return ``(Y, image_shape)`` with ``Y`` the ``K x IJ`` matrix.

    ``X`` is either an ``(I, J, K)`` cube or an ``(IJ, K)`` pixel matrix
    whose rows follow the column-major pixel order; the latter needs
    ``image_shape``.
    """
    X = np.asarray(X)
    if X.ndim == 3:
        X = check_array(X, allow_nd=True, dtype=np.float64)
        if image_shape is not None and tuple(image_shape) != X.shape[:2]:
            raise ValueError(
                f"image_shape {tuple(image_shape)} does not match cube {X.shape}"
            )
        return cube_to_matrix(X), X.shape[:2]
    X = check_array(X, dtype=np.float64)
    if image_shape is None:
        raise ValueError("a 2-D pixel matrix needs image_shape=(I, J)")
    I, J = (int(v) for v in image_shape)
    if I * J != X.shape[0]:
        raise ValueError(f"{X.shape[0]} pixels cannot form a {I}x{J} image")
    return np.ascontiguousarray(X.T), (I, J)


def check_theta(theta, n_endmembers):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 0:
        theta = np.full(n_endmembers, float(theta))
    if theta.shape != (n_endmembers,):
        raise ValueError(f"theta must be a scalar or have length {n_endmembers}")
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite and nonnegative")
    return theta


def check_endmembers(C, n_bands, n_endmembers):
    C = check_array(C, dtype=np.float64)
    if C.shape != (n_bands, n_endmembers):
        raise ValueError(f"endmembers must be {n_bands}x{n_endmembers}, got {C.shape}")
    return C


def check_abundances(S, n_endmembers, n_pixels):
    S = check_array(S, dtype=np.float64)
    if S.shape != (n_endmembers, n_pixels):
        raise ValueError(f"abundances must be {n_endmembers}x{n_pixels}, got {S.shape}")
    return S
