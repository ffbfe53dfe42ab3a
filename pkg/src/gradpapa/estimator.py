"""scikit-learn style front end for GradPAPA unmixing."""

import numbers
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_abundances, check_cube, check_endmembers, check_theta
from .initialization import init_abundances, random_init, spa_endmembers
from .model import ModelDims, check_identifiability
from .projections import ExactRank, NuclearBall, project_feasible_set
from .solver import SolverConfig, run, solve_abundances


def max_identifiable_rank(I, J, K, R):
    """Largest map rank ``L`` for which the uniqueness condition holds, or ``None``."""
    for L in range(min(I, J), 0, -1):
        if check_identifiability(ModelDims(I, J, K, L, R)).satisfied:
            return L
    return None


class GradPAPA(TransformerMixin, BaseEstimator):
    """Hyperspectral unmixing by structured rank-(L, L, 1) tensor decomposition.

    The cube is factored as ``Y = C S`` with nonnegative endmembers ``C``,
    abundances ``S`` whose pixel columns lie on the probability simplex,
    and abundance maps constrained to low rank (``constraint="lr"``) or to a
    nuclear-norm ball (``constraint="nn"``). An optional smoothed l_q total
    variation penalty acts on the maps.

    Following the scikit-learn convention for matrix factorizations, a
    sample is a pixel and a feature is a band: ``X`` has shape
    ``(I*J, K)`` (pixels in column-major image order) and ``transform``
    returns the ``(I*J, R)`` abundances. A 3-D cube ``(I, J, K)`` is also
    accepted, in which case ``image_shape`` is inferred.

    Parameters
    ----------
    n_endmembers : int
        Number of materials ``R``.
    constraint : {"lr", "nn"}
        Exact rank bound or nuclear-norm ball on each abundance map.
    rank : int, optional
        Map rank ``L``. Defaults to the largest value satisfying the
        uniqueness condition for the data size. In "nn" mode it is only
        used for diagnostics.
    nuclear_radius : float, optional
        Nuclear-norm radius; defaults to ``1.5 * max(I, J, K)``.
    theta : float or array of shape (n_endmembers,)
        TV weights; 0 disables the penalty.
    q, eps : float
        Exponent and smoothing of the TV penalty.
    init : {"spa", "random"}
        Starting point when none is passed to :meth:`fit`.
    max_iter, tol : int, float
        Outer iteration cap and relative objective-change tolerance.
    ap_max_iter, ap_tol : int, float
        Limits of the inner alternating projection.
    extrapolation : bool
        Use Nesterov extrapolation.
    image_shape : tuple (I, J), optional
        Needed when ``X`` is a 2-D pixel matrix.
    random_state : int, optional
        Seed for ``init="random"``.

    Attributes
    ----------
    endmembers_ : ndarray of shape (K, R)
    abundances_ : ndarray of shape (R, I*J)
    components_ : ndarray of shape (R, K)
        ``endmembers_.T``.
    trace_ : RunTrace
    n_iter_ : int
    image_shape_ : tuple
    rank_ : int or None
    nuclear_radius_ : float or None
    identifiability_ : IdentifiabilityReport or None
    """

    def __init__(
        self,
        n_endmembers=5,
        *,
        constraint="lr",
        rank=None,
        nuclear_radius=None,
        theta=0.0,
        q=0.5,
        eps=1e-3,
        init="spa",
        max_iter=1200,
        tol=1e-5,
        ap_max_iter=50,
        ap_tol=1e-3,
        extrapolation=True,
        image_shape=None,
        random_state=None,
    ):
        self.n_endmembers = n_endmembers
        self.constraint = constraint
        self.rank = rank
        self.nuclear_radius = nuclear_radius
        self.theta = theta
        self.q = q
        self.eps = eps
        self.init = init
        self.max_iter = max_iter
        self.tol = tol
        self.ap_max_iter = ap_max_iter
        self.ap_tol = ap_tol
        self.extrapolation = extrapolation
        self.image_shape = image_shape
        self.random_state = random_state

    def _resolve(self, Y, image_shape):
        R = self.n_endmembers
        if not isinstance(R, numbers.Integral) or R < 1:
            raise ValueError(f"n_endmembers must be a positive integer, got {R}")
        K = Y.shape[0]
        I, J = image_shape
        rank = self.rank
        if rank is None:
            rank = max_identifiable_rank(I, J, K, R)
            if rank is None and self.constraint == "lr":
                warnings.warn("no map rank satisfies the uniqueness condition; using L=1")
                rank = 1
        if self.constraint == "lr":
            mode = ExactRank(int(rank))
            radius = None
        elif self.constraint == "nn":
            radius = self.nuclear_radius
            if radius is None:
                radius = 1.5 * max(I, J, K)
            mode = NuclearBall(float(radius))
        else:
            raise ValueError(f"constraint must be 'lr' or 'nn', got {self.constraint!r}")

        self.identifiability_ = None
        if rank is not None:
            self.identifiability_ = check_identifiability(ModelDims(I, J, K, int(rank), R))
            if not self.identifiability_.satisfied:
                warnings.warn(
                    f"rank L={rank} does not meet the sufficient uniqueness "
                    "condition; the factors may not be identifiable"
                )
        config = SolverConfig(
            mode=mode,
            theta=tuple(check_theta(self.theta, R)),
            q=self.q,
            eps=self.eps,
            max_iters=self.max_iter,
            obj_tol=self.tol,
            max_ap_iters=self.ap_max_iter,
            ap_tol=self.ap_tol,
            extrapolation=self.extrapolation,
            seed=self.random_state,
            report_rank=None if rank is None else int(rank),
        )
        return config, rank, radius

    def fit(self, X, y=None, init_endmembers=None, init_abundances=None):
        """Factor ``X``.

        ``init_endmembers`` (K x R) and ``init_abundances`` (R x IJ) override
        the ``init`` strategy; abundances are projected onto the feasible
        set before the run starts.
        """
        self._fit(X, init_endmembers, init_abundances)
        return self

    def fit_transform(self, X, y=None, init_endmembers=None, init_abundances=None):
        self._fit(X, init_endmembers, init_abundances)
        return self.abundances_.T.copy()

    def _fit(self, X, C0, S0):
        Y, image_shape = check_cube(X, self.image_shape)
        config, rank, radius = self._resolve(Y, image_shape)
        K, N = Y.shape
        R = self.n_endmembers
        mode = config.mode
        ap_args = (config.max_ap_iters, config.ap_tol)

        if C0 is not None:
            C0 = check_endmembers(C0, K, R)
            if S0 is None:
                S0 = init_abundances(Y, C0, mode, image_shape, *ap_args)
            else:
                S0 = check_abundances(S0, R, N)
                S0 = project_feasible_set(S0, mode, image_shape, *ap_args).projected
        elif S0 is not None:
            raise ValueError("init_abundances requires init_endmembers")
        elif self.init == "spa":
            C0 = spa_endmembers(Y, R)
            S0 = init_abundances(Y, C0, mode, image_shape, *ap_args)
        elif self.init == "random":
            C0, S0 = random_init(K, R, image_shape, mode, self.random_state, *ap_args)
        else:
            raise ValueError(f"init must be 'spa' or 'random', got {self.init!r}")

        C, S, trace = run(Y, C0, S0, config, image_shape)
        self.endmembers_ = C
        self.abundances_ = S
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.image_shape_ = tuple(image_shape)
        self.rank_ = None if rank is None else int(rank)
        self.nuclear_radius_ = radius
        self.n_features_in_ = K
        self._config = config
        return self

    @property
    def components_(self):
        check_is_fitted(self, "endmembers_")
        return self.endmembers_.T

    def transform(self, X):
        """Abundances of new pixels with the fitted endmembers held fixed.

        Returns an ``(I*J, R)`` array.
        """
        check_is_fitted(self, "endmembers_")
        image_shape = self.image_shape_ if np.ndim(X) == 2 else None
        Y, image_shape = check_cube(X, image_shape)
        if Y.shape[0] != self.n_features_in_:
            raise ValueError(
                f"X has {Y.shape[0]} bands, the model was fitted with {self.n_features_in_}"
            )
        config = self._config
        S0 = init_abundances(
            Y, self.endmembers_, config.mode, image_shape, config.max_ap_iters, config.ap_tol
        )
        S, _ = solve_abundances(Y, self.endmembers_, S0, config, image_shape)
        return S.T

    def inverse_transform(self, W):
        """Reconstruct pixels ``(I*J, K)`` from abundances ``(I*J, R)``."""
        check_is_fitted(self, "endmembers_")
        return np.asarray(W, dtype=np.float64) @ self.components_
