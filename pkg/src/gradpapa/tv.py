"""Smoothed l_q total variation on abundance maps.

Differences are circular along both spatial axes and applied matrix-free.
``diff_h`` acts along ``j`` (image columns) and ``diff_v`` along ``i``
(image rows). For a map ``X`` of shape ``(I, J)``::

    diff_h(X)[i, j] = X[i, j] - X[i, (j + 1) % J]
    diff_v(X)[i, j] = X[i, j] - X[(i + 1) % I, j]

All functions also accept a stack of maps with shape ``(R, I, J)``.
"""

import numpy as np

# Spectral norm of the circulant difference operator: its eigenvalues are
# 1 - exp(2*pi*i*k/n), whose modulus never exceeds 2.
DIFF_OPERATOR_NORM = 2.0


def diff_h(X):
    X = np.asarray(X, dtype=np.float64)
    return X - np.roll(X, -1, axis=-1)


def diff_v(X):
    X = np.asarray(X, dtype=np.float64)
    return X - np.roll(X, -1, axis=-2)


def diff_h_adjoint(D):
    """Adjoint of :func:`diff_h`: ``D[i, j] - D[i, j - 1]`` (circular)."""
    D = np.asarray(D, dtype=np.float64)
    return D - np.roll(D, 1, axis=-1)


def diff_v_adjoint(D):
    """Adjoint of :func:`diff_v`: ``D[i, j] - D[i - 1, j]`` (circular)."""
    D = np.asarray(D, dtype=np.float64)
    return D - np.roll(D, 1, axis=-2)


def _check_q_eps(q, eps):
    if not 0 < q:
        raise ValueError(f"q must be positive, got {q}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def phi_value(X, q=0.5, eps=1e-3):
    """Smoothed TV value ``sum (d**2 + eps)**(q/2)`` over both difference images.

    For a stack of maps the per-map values are returned as an array.
    """
    _check_q_eps(q, eps)
    X = np.asarray(X, dtype=np.float64)
    dh = diff_h(X)
    dv = diff_v(X)
    val = (dh**2 + eps) ** (q / 2) + (dv**2 + eps) ** (q / 2)
    return val.sum(axis=(-2, -1))


def majorizer_weights(D, q=0.5, eps=1e-3):
    """Diagonal weights ``(d**2 + eps)**((q - 2)/2)`` of the quadratic majorizer.

    The ``q/2`` factor of the majorizer is left out; :func:`tv_gradient`
    applies a single factor ``q`` to the assembled gradient instead.
    """
    _check_q_eps(q, eps)
    D = np.asarray(D, dtype=np.float64)
    return (D**2 + eps) ** ((q - 2) / 2)


def _as_maps(S, shape):
    I, J = shape
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != I * J:
        raise ValueError(f"expected an R x {I * J} matrix, got shape {S.shape}")
    # row r holds vec(S_r) with pixel index i + j*I
    return S.reshape(S.shape[0], J, I).transpose(0, 2, 1)


def _as_rows(maps):
    R, I, J = maps.shape
    return maps.transpose(0, 2, 1).reshape(R, I * J)


def _theta_vector(theta, R):
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), (R,))
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    return theta


def tv_value(S, theta, shape, q=0.5, eps=1e-3):
    """Weighted regularizer ``sum_r theta_r * phi(S_r)`` for an R x IJ matrix."""
    maps = _as_maps(S, shape)
    theta = _theta_vector(theta, maps.shape[0])
    return float(np.dot(theta, phi_value(maps, q, eps)))


def tv_gradient(S, theta, shape, q=0.5, eps=1e-3):
    """Gradient of ``sum_r theta_r * phi(S_r)`` with respect to ``S``.

    Parameters
    ----------
    S : ndarray of shape (R, I*J)
        Abundance matrix, row ``r`` is the column-major vectorized map.
    theta : float or array of shape (R,)
        Nonnegative per-endmember weights.
    shape : tuple (I, J)
        Spatial size of the maps.
    q, eps : float
        Exponent and smoothing of the l_q penalty.

    Returns
    -------
    ndarray of shape (R, I*J)
    """
    maps = _as_maps(S, shape)
    theta = _theta_vector(theta, maps.shape[0])
    grad = np.zeros_like(maps)
    active = theta > 0
    if np.any(active):
        X = maps[active]
        dh = diff_h(X)
        dv = diff_v(X)
        g = diff_h_adjoint(majorizer_weights(dh, q, eps) * dh)
        g += diff_v_adjoint(majorizer_weights(dv, q, eps) * dv)
        grad[active] = q * theta[active, None, None] * g
    return _as_rows(grad)


def tv_lipschitz_term(S, theta, shape, q=0.5, eps=1e-3):
    """Upper bound on the TV part of the Lipschitz constant of the S-gradient.

    Uses ``||H^T W H|| <= ||H||**2 * max(W)`` with ``||H|| = 2``, and the
    largest weight over all maps, separately for both directions.
    """
    maps = _as_maps(S, shape)
    theta = _theta_vector(theta, maps.shape[0])
    theta_max = float(theta.max()) if theta.size else 0.0
    if theta_max == 0.0:
        return 0.0
    wh = majorizer_weights(diff_h(maps), q, eps).max()
    wv = majorizer_weights(diff_v(maps), q, eps).max()
    return q * theta_max * DIFF_OPERATOR_NORM**2 * (wh + wv)
