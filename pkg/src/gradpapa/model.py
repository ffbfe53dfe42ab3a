"""Data model of the LL1 / linear mixture model.

Conventions used throughout the package:

* A hyperspectral cube is stored as an ``(I, J, K)`` array.
* Its matricization ``Y`` is ``K x IJ`` with pixel index ``l = i + j*I``
  (column-major over the spatial image).
* Endmembers ``C`` are ``K x R``; abundances ``S`` are ``R x IJ`` and row
  ``r`` is the vectorized ``I x J`` abundance map ``S_r``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, InvalidDimsError
from .tv import tv_value


@dataclass(frozen=True)
class HsiCube:
    """Observed hyperspectral cube of shape ``(I, J, K)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"cube must be 3-dimensional, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("cube contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def image_shape(self):
        return self.data.shape[:2]

    @property
    def matrix(self):
        """The ``K x IJ`` matricized view."""
        return cube_to_matrix(self.data)

    @classmethod
    def from_matrix(cls, Y, image_shape):
        return cls(matrix_to_cube(Y, image_shape))


def cube_to_matrix(cube):
    I, J, K = cube.shape
    return np.asarray(cube, dtype=np.float64).reshape(I * J, K, order="F").T


def matrix_to_cube(Y, image_shape):
    I, J = image_shape
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != I * J:
        raise ValueError(f"matrix of shape {Y.shape} does not match image {I}x{J}")
    return Y.T.reshape(I, J, Y.shape[0], order="F")


@dataclass(frozen=True)
class ModelDims:
    """Problem sizes: image ``I x J``, ``K`` bands, map rank ``L``, ``R`` endmembers.

    ``nuclear_radius`` is the nuclear-norm bound used by the convex variant.
    """

    I: int
    J: int
    K: int
    L: int
    R: int
    nuclear_radius: float | None = None

    def __post_init__(self):
        for name in ("I", "J", "K", "L", "R"):
            if int(getattr(self, name)) < 1:
                raise InvalidDimsError(f"{name} must be a positive integer")
        if self.L > min(self.I, self.J):
            raise InvalidDimsError(
                f"L={self.L} exceeds min(I, J)={min(self.I, self.J)}"
            )
        if self.nuclear_radius is not None and not self.nuclear_radius > 0:
            raise InvalidDimsError("nuclear_radius must be positive")

    @property
    def image_shape(self):
        return (self.I, self.J)


def matricize_map(S, r, image_shape):
    """Return abundance map ``r`` (0-based) of ``S`` as an ``I x J`` matrix."""
    I, J = image_shape
    S = np.asarray(S)
    if not 0 <= r < S.shape[0]:
        raise IndexError(f"map index {r} out of range for R={S.shape[0]}")
    return S[r].reshape((I, J), order="F")


def tensorize_map(M):
    """Inverse of :func:`matricize_map`: column-major vectorization."""
    return np.asarray(M).reshape(-1, order="F")


def abundance_maps(S, image_shape):
    """All maps as an ``(R, I, J)`` array (a view when possible)."""
    I, J = image_shape
    S = np.asarray(S)
    return S.reshape(S.shape[0], J, I).transpose(0, 2, 1)


def maps_to_rows(maps):
    R, I, J = maps.shape
    return np.asarray(maps).transpose(0, 2, 1).reshape(R, I * J)


def synthesize(C, S, image_shape=None):
    """Mix endmembers and abundances: returns ``C @ S``.

    If ``image_shape`` is given the result is wrapped as an :class:`HsiCube`.
    """
    C = np.asarray(C, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if C.ndim != 2 or S.ndim != 2 or C.shape[1] != S.shape[0]:
        raise ValueError(f"shape mismatch: C {C.shape}, S {S.shape}")
    Y = C @ S
    if image_shape is None:
        return Y
    return HsiCube.from_matrix(Y, image_shape)


def data_fit(Y, C, S):
    """``0.5 * ||Y - C S||_F^2``."""
    resid = np.asarray(Y, dtype=np.float64) - np.asarray(C) @ np.asarray(S)
    return 0.5 * float(np.vdot(resid, resid))


def objective(Y, C, S, theta, image_shape, q=0.5, eps=1e-3):
    """Regularized fitting cost ``0.5||Y - CS||^2 + sum_r theta_r phi(S_r)``."""
    Y = np.asarray(Y, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if Y.shape != (C.shape[0], S.shape[1]) or C.shape[1] != S.shape[0]:
        raise ValueError(f"shape mismatch: Y {Y.shape}, C {C.shape}, S {S.shape}")
    value = data_fit(Y, C, S)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta != 0):
        value += tv_value(S, theta, image_shape, q, eps)
    return value


def relative_fit(Y, C, S):
    """``||Y - CS||_F / ||Y||_F``."""
    Y = np.asarray(Y, dtype=np.float64)
    ny = np.linalg.norm(Y)
    if ny == 0:
        raise DegenerateInputError("relative fit undefined for an all-zero cube")
    return float(np.linalg.norm(Y - np.asarray(C) @ np.asarray(S)) / ny)


@dataclass(frozen=True)
class IdentifiabilityReport:
    satisfied: bool
    # IJ - L^2 R
    size_margin: int
    # min(I//L, R) + min(J//L, R) + min(K, R) - (2R + 2)
    kruskal_margin: int


def check_identifiability(dims):
    """Evaluate the generic-uniqueness condition for a rank-(L, L, 1) model.

    The condition is sufficient, not necessary: a negative report does not
    prevent solving.
    """
    if not isinstance(dims, ModelDims):
        dims = ModelDims(*dims)
    I, J, K, L, R = dims.I, dims.J, dims.K, dims.L, dims.R
    size_margin = I * J - L * L * R
    kruskal_margin = min(I // L, R) + min(J // L, R) + min(K, R) - (2 * R + 2)
    return IdentifiabilityReport(
        satisfied=size_margin >= 0 and kruskal_margin >= 0,
        size_margin=size_margin,
        kruskal_margin=kruskal_margin,
    )
