"""Alternating gradient projection with extrapolation (GradPAPA).

One outer iteration performs a projected gradient step on the endmembers
``C`` (projection onto the nonnegative orthant) and then one on the
abundances ``S`` (projection onto the simplex / low-rank intersection via
alternating projections). Both steps are taken from Nesterov-extrapolated
points, with step sizes set from current Lipschitz estimates.
"""

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import NumericalError
from .model import abundance_maps, data_fit, objective
from .projections import ExactRank, NuclearBall, project_feasible_set
from .tv import tv_gradient, tv_lipschitz_term

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "iter",
    "time_s",
    "objective",
    "rel_fit",
    "alpha",
    "beta",
    "ap_iters",
    "sto_violation_max",
    "lr_energy_avg",
    "delta_c",
    "delta_s",
)


@dataclass
class SolverConfig:
    """Settings of a GradPAPA run.

    ``theta`` may be a scalar (shared by all endmembers) or a length-R
    sequence. Defaults follow the synthetic experiments: ``q=0.5``,
    ``eps=1e-3``, relative objective tolerance ``1e-5``, 1200 iterations,
    AP stopped at relative change ``1e-3``.
    """

    mode: ExactRank | NuclearBall
    theta: float | tuple = 0.0
    q: float = 0.5
    eps: float = 1e-3
    max_iters: int = 1200
    obj_tol: float = 1e-5
    max_ap_iters: int = 50
    ap_tol: float = 1e-3
    extrapolation: bool = True
    step_floor: float = 1e-12
    seed: int | None = None
    # rank used for the low-rank energy diagnostic when mode is NuclearBall
    report_rank: int | None = None

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        for name in ("eps", "ap_tol", "step_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # obj_tol = 0 disables the objective-change stopping test
        if not self.obj_tol >= 0:
            raise ValueError("obj_tol must be nonnegative")
        if self.max_iters < 1 or self.max_ap_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if np.any(np.asarray(self.theta, dtype=np.float64) < 0):
            raise ValueError("theta must be nonnegative")


@dataclass
class ExtrapolationState:
    """Nesterov sequence ``gamma_{t+1} = (1 + sqrt(1 + 4 gamma_t^2)) / 2``."""

    gamma: float = 1.0
    mu: float = 0.0


def nesterov_step(state):
    """Advance the sequence; returns ``(mu, new_state)``.

    ``mu = (gamma_t - 1) / gamma_{t+1}``, so the first weight is 0.
    """
    gamma_next = (1.0 + math.sqrt(1.0 + 4.0 * state.gamma**2)) / 2.0
    mu = (state.gamma - 1.0) / gamma_next
    return mu, ExtrapolationState(gamma=gamma_next, mu=mu)


def _power_iteration(G, rtol=1e-6, max_iter=10000):
    # Largest eigenvalue of a small symmetric PSD matrix.
    n = G.shape[0]
    v = np.ones(n) / math.sqrt(n)
    w = G @ v
    if not np.any(w):
        # ones can be in the null space; restart from the heaviest column
        j = int(np.argmax(np.linalg.norm(G, axis=0)))
        v = G[:, j]
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v = v / nv
        w = G @ v
    lam = float(v @ w)
    for _ in range(max_iter):
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        w = G @ v
        lam_next = float(v @ w)
        if abs(lam_next - lam) <= rtol * 1e-4 * abs(lam_next):
            return lam_next
        lam = lam_next
    return lam


def spectral_norm_sq(M):
    """``sigma_max(M)**2`` via power iteration on the small Gram matrix."""
    M = np.asarray(M, dtype=np.float64)
    G = M @ M.T if M.shape[0] <= M.shape[1] else M.T @ M
    return _power_iteration(G)


def grad_C(Y, C, S):
    """Gradient of ``0.5||Y - CS||^2`` in ``C``: ``C (S S^T) - Y S^T``."""
    S = np.asarray(S, dtype=np.float64)
    return np.asarray(C) @ (S @ S.T) - np.asarray(Y) @ S.T


def grad_S(Y, C, S, theta, image_shape, q=0.5, eps=1e-3):
    """Gradient of the full objective in ``S``: ``(C^T C) S - C^T Y + TV term``."""
    C = np.asarray(C, dtype=np.float64)
    g = (C.T @ C) @ S - C.T @ np.asarray(Y)
    if np.any(np.asarray(theta) != 0):
        g += tv_gradient(S, theta, image_shape, q, eps)
    return g


def step_size_C(S, step_floor=1e-12):
    return 1.0 / max(spectral_norm_sq(S), step_floor)


def step_size_S(C_next, S, theta, image_shape, q=0.5, eps=1e-3, step_floor=1e-12):
    lip = spectral_norm_sq(C_next) + tv_lipschitz_term(S, theta, image_shape, q, eps)
    return 1.0 / max(lip, step_floor)


def update_C(Y, C, C_prev, S, mu1, step_floor=1e-12):
    """One extrapolated projected gradient step on the endmembers.

    Returns ``(C_next, alpha)``.
    """
    C_ex = C + mu1 * (C - C_prev) if mu1 else C
    alpha = step_size_C(S, step_floor)
    C_next = np.maximum(C_ex - alpha * grad_C(Y, C_ex, S), 0.0)
    return C_next, alpha


def update_S(Y, C_next, S, S_prev, mu2, config, image_shape):
    """One extrapolated projected gradient step on the abundances.

    Returns ``(S_next, ap_result, beta)``.
    """
    S_ex = S + mu2 * (S - S_prev) if mu2 else S
    theta, q, eps = config.theta, config.q, config.eps
    beta = step_size_S(C_next, S_ex, theta, image_shape, q, eps, config.step_floor)
    W0 = S_ex - beta * grad_S(Y, C_next, S_ex, theta, image_shape, q, eps)
    ap = project_feasible_set(
        W0, config.mode, image_shape, config.max_ap_iters, config.ap_tol
    )
    return ap.projected, ap, beta


@dataclass
class TraceRecord:
    iter: int
    time_s: float
    objective: float
    rel_fit: float
    alpha: float
    beta: float
    ap_iters: int
    sto_violation_max: float
    lr_energy_avg: float
    delta_c: float
    delta_s: float


@dataclass
class RunTrace:
    """Per-iteration diagnostics of a run.

    ``initial_objective`` is the cost at the starting point;
    ``termination`` is ``"converged"``, ``"max_iters"`` or ``"numerical"``.
    """

    records: list = field(default_factory=list)
    initial_objective: float = math.nan
    termination: str = ""
    rng: str = "numpy.random.PCG64"

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def objectives(self):
        return self.column("objective")

    @property
    def iterate_gap(self):
        """Running minimum of ``||dC||_F + ||dS||_F`` (stationarity proxy)."""
        if not self.records:
            return np.array([])
        return np.minimum.accumulate(self.column("delta_c") + self.column("delta_s"))

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            row = asdict(rec)
            writer.writerow([_fmt(row[c]) for c in TRACE_COLUMNS])


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _diagnostic_rank(config):
    if isinstance(config.mode, ExactRank):
        return config.mode.rank
    return config.report_rank


def _low_rank_energy(S, image_shape, rank):
    if rank is None:
        return math.nan
    s = np.linalg.svd(abundance_maps(S, image_shape), compute_uv=False)
    total = s.sum(axis=1)
    top = s[:, :rank].sum(axis=1)
    ratio = np.where(total > 0, top / np.where(total > 0, total, 1.0), 1.0)
    return 100.0 * float(ratio.mean())


def _objective_floor(Y):
    # objective values below this are round-off of the data term
    return np.finfo(np.float64).eps * 0.5 * float(np.vdot(Y, Y))


def _relative_change(old, new, floor):
    denom = max(old, floor)
    return abs(old - new) / denom if denom > 0 else abs(old - new)


def run(Y, C0, S0, config, image_shape, callback=None):
    """Run GradPAPA from ``(C0, S0)``.

    Parameters
    ----------
    Y : ndarray of shape (K, I*J)
        Matricized cube.
    C0 : ndarray of shape (K, R)
    S0 : ndarray of shape (R, I*J)
        Starting point; should already be feasible.
    config : SolverConfig
    image_shape : tuple (I, J)
    callback : callable, optional
        Called as ``callback(t, C, S, record)`` after each iteration.

    Returns
    -------
    C, S : ndarray
        Last projected iterates.
    trace : RunTrace

    Raises
    ------
    NumericalError
        If the objective becomes non-finite; the partial trace is attached.
    """
    Y = np.asarray(Y, dtype=np.float64)
    C = np.array(C0, dtype=np.float64)
    S = np.array(S0, dtype=np.float64)
    K, N = Y.shape
    R = C.shape[1]
    if C.shape[0] != K or S.shape != (R, N):
        raise ValueError(f"shape mismatch: Y {Y.shape}, C {C.shape}, S {S.shape}")
    if image_shape[0] * image_shape[1] != N:
        raise ValueError(f"image shape {image_shape} does not match {N} pixels")

    theta, q, eps = config.theta, config.q, config.eps
    y_norm = math.sqrt(2.0 * data_fit(Y, np.zeros((K, 1)), np.zeros((1, N))))
    obj_floor = _objective_floor(Y)
    trace = RunTrace()
    obj = objective(Y, C, S, theta, image_shape, q, eps)
    trace.initial_objective = obj

    diag_rank = _diagnostic_rank(config)
    C_prev, S_prev = C, S
    state_c, state_s = ExtrapolationState(), ExtrapolationState()
    start = time.perf_counter()
    for t in range(config.max_iters):
        if config.extrapolation:
            mu1, state_c = nesterov_step(state_c)
            mu2, state_s = nesterov_step(state_s)
        else:
            mu1 = mu2 = 0.0

        with np.errstate(invalid="ignore", over="ignore"):
            C_next, alpha = update_C(Y, C, C_prev, S, mu1, config.step_floor)
            try:
                S_next, ap, beta = update_S(Y, C_next, S, S_prev, mu2, config, image_shape)
            except NumericalError as exc:
                trace.termination = "numerical"
                raise NumericalError(f"iteration {t + 1}: {exc}", trace) from exc

        obj_next = objective(Y, C_next, S_next, theta, image_shape, q, eps)
        fit = math.sqrt(2.0 * data_fit(Y, C_next, S_next))
        rec = TraceRecord(
            iter=t + 1,
            time_s=time.perf_counter() - start,
            objective=obj_next,
            rel_fit=fit / y_norm if y_norm > 0 else math.nan,
            alpha=alpha,
            beta=beta,
            ap_iters=ap.iterations,
            sto_violation_max=float(np.max(np.abs(S_next.sum(axis=0) - 1.0))),
            lr_energy_avg=_low_rank_energy(S_next, image_shape, diag_rank),
            delta_c=float(np.linalg.norm(C_next - C)),
            delta_s=float(np.linalg.norm(S_next - S)),
        )
        trace.records.append(rec)
        if not math.isfinite(obj_next):
            trace.termination = "numerical"
            raise NumericalError(f"objective became non-finite at iteration {t + 1}", trace)

        C_prev, S_prev = C, S
        C, S = C_next, S_next
        if callback is not None:
            callback(t, C, S, rec)

        rel_change = _relative_change(obj, obj_next, obj_floor)
        obj = obj_next
        if rel_change < config.obj_tol:
            trace.termination = "converged"
            break
    else:
        trace.termination = "max_iters"
    logger.debug("stopped after %d iterations (%s)", len(trace), trace.termination)
    return C, S, trace


def solve_abundances(Y, C, S0, config, image_shape):
    """Projected gradient on ``S`` alone with ``C`` held fixed.

    Same step rule, extrapolation and stopping test as :func:`run`.
    Returns ``(S, n_iter)``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    S = np.array(S0, dtype=np.float64)
    S_prev = S
    state = ExtrapolationState()
    obj_floor = _objective_floor(Y)
    obj = objective(Y, C, S, config.theta, image_shape, config.q, config.eps)
    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        mu = 0.0
        if config.extrapolation:
            mu, state = nesterov_step(state)
        S_next, _, _ = update_S(Y, C, S, S_prev, mu, config, image_shape)
        obj_next = objective(Y, C, S_next, config.theta, image_shape, config.q, config.eps)
        if not math.isfinite(obj_next):
            raise NumericalError(f"objective became non-finite at iteration {n_iter}")
        S_prev, S = S, S_next
        rel_change = _relative_change(obj, obj_next, obj_floor)
        obj = obj_next
        if rel_change < config.obj_tol:
            break
    return S, n_iter
