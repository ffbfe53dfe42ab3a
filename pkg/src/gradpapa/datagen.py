"""Synthetic LL1 cubes with known factors."""

import math

import numpy as np

from .exceptions import DegenerateInputError, InvalidDimsError
from .initialization import make_rng
from .model import synthesize
from .projections import ExactRank, project_feasible_set


def generate_synthetic(I, J, K, L, R, seed, max_ap_iters=50, ap_tol=1e-3):
    """Draw ground truth ``(C, S, Y)``.

    ``C`` is a thresholded standard Gaussian ``K x R`` matrix; ``S`` is a
    standard Gaussian ``R x IJ`` matrix pushed through the alternating
    projection onto rank-``L`` maps and the column simplex; ``Y = C S``.
    """
    if L > min(I, J):
        raise InvalidDimsError(f"L={L} exceeds min(I, J)={min(I, J)}")
    rng = make_rng(seed)
    E1 = rng.standard_normal((K, R))
    E2 = rng.standard_normal((R, I * J))
    C = np.maximum(E1, 0.0)
    S = project_feasible_set(E2, ExactRank(L), (I, J), max_ap_iters, ap_tol).projected
    return C, S, synthesize(C, S)


def add_noise(Y, snr_db, seed):
    """Add white Gaussian noise at the requested SNR (dB).

    The noise variance is ``||Y||_F^2 / (Y.size * 10**(snr_db/10))``.
    ``snr_db=None`` or ``inf`` returns ``Y`` unchanged.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if snr_db is None or math.isinf(snr_db):
        return Y.copy()
    power = float(np.vdot(Y, Y))
    if power == 0:
        raise DegenerateInputError("cannot set an SNR for an all-zero cube")
    sigma = math.sqrt(power / (Y.size * 10.0 ** (snr_db / 10.0)))
    return Y + sigma * make_rng(seed).standard_normal(Y.shape)


def realized_snr(Y, Y_noisy):
    N = np.asarray(Y_noisy) - np.asarray(Y)
    return 10.0 * math.log10(float(np.vdot(Y, Y)) / float(np.vdot(N, N)))
