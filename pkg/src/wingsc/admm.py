"""ADMM for wing-constrained sparse coding and its weighted variant.

The problem solved is

    min_x  f(z) + lam * ||alpha||_1   s.t.  z = W (A x - y),  alpha = x

with ``W = diag(w)``. In ``wcsc`` mode ``W = I`` and ``f`` is the wing
penalty of ``||z||_1``; in ``wwcsc`` mode the weights are relearned from
the raw residual after every iteration. The ``src_lasso`` mode swaps the
wing penalty for ``0.5 * ||z||_2^2``, giving the ordinary LASSO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .wing import (
    DegenerateThresholdError,
    WeightParams,
    WeightState,
    WingParams,
    compute_weights,
    residual_threshold,
    soft_threshold,
    wing_penalty,
)

MODES = ("src_lasso", "wcsc", "wwcsc")


class NumericalFailureError(ArithmeticError):
    """Raised when the x-step system cannot be factorized."""


@dataclass(frozen=True)
class AdmmConfig:
    """Solver settings.

    ``weight`` must be set for ``wwcsc`` mode; when ``mode`` is not given
    to :func:`solve` its presence selects ``wwcsc`` and its absence
    ``wcsc``. The wing width ``omega`` doubles as the branch width of the
    z-step.

    The penalties default to 100 so that the initial z-step threshold
    ``omega / (rho1 * epsilon)`` is 0.05, the residual scale of images with
    pixel values in [0, 1]. Unit penalties leave it at 5 and the weighted
    iteration fails to settle within ``max_iter``.
    """

    lam: float = 1e-2
    rho1: float = 100.0
    rho2: float = 100.0
    max_iter: int = 500
    tol: float = 1e-4
    wing: WingParams = field(default_factory=WingParams)
    weight: Optional[WeightParams] = None

    def __post_init__(self):
        for name in ("lam", "rho1", "rho2", "tol"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass
class SolverState:
    x: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    weights: WeightState
    # raw residual A x - y from the latest weight update
    residual: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, m: int, n: int) -> "SolverState":
        return cls(
            x=np.zeros(n),
            z=np.zeros(m),
            alpha=np.zeros(n),
            u1=np.zeros(m),
            u2=np.zeros(n),
            weights=WeightState.uniform(m),
        )


@dataclass
class SolveResult:
    x_hat: np.ndarray
    iterations: int
    relative_change_trace: list
    objective_trace: list
    final_weights: np.ndarray
    terminated: str
    linsolve_residuals: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.terminated == "converged"


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")


def _x_system(A, w, cfg):
    """Normal matrix ``rho1 A^T W^2 A + rho2 I`` for the x-step."""
    B = A * w[:, None]
    M = cfg.rho1 * (B.T @ B)
    M.flat[:: M.shape[0] + 1] += cfg.rho2
    return M


def _x_rhs(state, A, y, cfg):
    w = state.weights.weights
    return cfg.rho1 * (A.T @ (w * (w * y + state.z - state.u1))) + cfg.rho2 * (
        state.alpha + state.u2
    )


def _factor(M):
    if not np.all(np.isfinite(M)):
        raise NumericalFailureError("x-step system has non-finite entries")
    try:
        return scipy.linalg.cho_factor(M, lower=False, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"x-step factorization failed: {exc}") from exc


def update_x(state: SolverState, A, y, cfg: AdmmConfig, factor=None) -> np.ndarray:
    """Exact minimizer of the x-subproblem.

    Solves ``(rho1 A^T W^2 A + rho2 I) x = rho1 A^T W (W y + z - u1) + rho2 (alpha + u2)``
    by Cholesky. A precomputed ``factor`` (from ``scipy.linalg.cho_factor``)
    may be passed when the weights have not changed.
    """
    if factor is None:
        factor = _factor(_x_system(A, state.weights.weights, cfg))
    return scipy.linalg.cho_solve(factor, _x_rhs(state, A, y, cfg), check_finite=False)


def update_z(state: SolverState, A, y, cfg: AdmmConfig, mode: str = "wcsc") -> np.ndarray:
    """z-step: soft thresholding of ``v = W (A x - y) + u1``.

    The threshold is ``omega / (rho1 (epsilon + ||z_prev||_1))`` while
    ``||z_prev||_1 < omega`` and ``1 / rho1`` otherwise. In ``src_lasso``
    mode the step is the quadratic prox ``v * rho1 / (1 + rho1)``.
    """
    w = state.weights.weights
    v = w * (A @ state.x - y) + state.u1
    if mode == "src_lasso":
        return v * (cfg.rho1 / (1.0 + cfg.rho1))
    znorm = np.abs(state.z).sum()
    omega, eps = cfg.wing.omega, cfg.wing.epsilon
    if znorm < omega:
        k = omega / (cfg.rho1 * (eps + znorm))
    else:
        k = 1.0 / cfg.rho1
    return soft_threshold(v, k)


def update_alpha(state: SolverState, cfg: AdmmConfig) -> np.ndarray:
    return soft_threshold(state.x - state.u2, cfg.lam / cfg.rho2)


def update_duals(state: SolverState, A, y):
    """Scaled dual ascent; returns the new ``(u1, u2)``."""
    w = state.weights.weights
    u1 = state.u1 + w * (A @ state.x - y) - state.z
    u2 = state.u2 + state.alpha - state.x
    return u1, u2


def objective_value(A, y, x, cfg: AdmmConfig, mode: str = "wcsc", weights=None) -> float:
    """Objective at ``z = W (A x - y)``, ``alpha = x``.

    ``0.5 ||z||^2`` for ``src_lasso``, the wing penalty otherwise; plus
    ``lam * ||x||_1``. ``weights`` defaults to all ones.
    """
    _check_mode(mode)
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape != (y.size, x.size):
        raise ValueError(
            f"dimension mismatch: A {A.shape}, y ({y.size},), x ({x.size},)"
        )
    r = A @ x - y
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != r.shape:
            raise ValueError(f"weights have shape {weights.shape}, expected {r.shape}")
        r = weights * r
    if mode == "src_lasso":
        fid = 0.5 * float(r @ r)
    else:
        fid = wing_penalty(r, cfg.wing)
    return fid + cfg.lam * float(np.abs(x).sum())


def _relearn_weights(state, A, y, params: WeightParams):
    e = A @ state.x - y
    state.residual = e
    delta = residual_threshold(e, params.tau)
    try:
        return compute_weights(e, delta, params.q)
    except DegenerateThresholdError:
        return WeightState(weights=np.ones_like(e), delta=0.0)


def solve(
    A,
    y,
    cfg: AdmmConfig = AdmmConfig(),
    mode: Optional[str] = None,
    callback: Optional[Callable[[int, SolverState], None]] = None,
    linsolve_check: bool = False,
) -> SolveResult:
    """Run the ADMM iteration until the relative change in x drops below ``cfg.tol``.

    Parameters
    ----------
    A : (m, n) array_like
        Dictionary.
    y : (m,) array_like
        Test signal.
    cfg : AdmmConfig
        Solver settings.
    mode : {'src_lasso', 'wcsc', 'wwcsc'}, optional
        Defaults to ``'wwcsc'`` if ``cfg.weight`` is set, else ``'wcsc'``.
    callback : callable, optional
        Called as ``callback(k, state)`` after iteration ``k`` (1-based),
        once the weights have been relearned.
    linsolve_check : bool
        Record the relative residual of every x-step linear solve in
        ``SolveResult.linsolve_residuals``.

    Returns
    -------
    SolveResult
    """
    if mode is None:
        mode = "wwcsc" if cfg.weight is not None else "wcsc"
    _check_mode(mode)
    if mode == "wwcsc" and cfg.weight is None:
        raise ValueError("wwcsc mode requires cfg.weight")
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape[1] < 1 or A.shape[0] < 1:
        raise ValueError(f"A must be a nonempty 2-d matrix, got shape {A.shape}")
    if y.ndim != 1 or y.size != A.shape[0]:
        raise ValueError(f"y has shape {y.shape}, expected ({A.shape[0]},)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ValueError("A and y must be finite")

    m, n = A.shape
    state = SolverState.initial(m, n)
    factor = None
    rel_trace, obj_trace, lin_trace = [], [], []
    terminated = "max_iter_reached"

    for k in range(1, cfg.max_iter + 1):
        if factor is None or mode == "wwcsc":
            M = _x_system(A, state.weights.weights, cfg)
            factor = _factor(M)
        x_prev = state.x
        if linsolve_check:
            rhs = _x_rhs(state, A, y, cfg)
        state.x = update_x(state, A, y, cfg, factor=factor)
        if not np.all(np.isfinite(state.x)):
            raise NumericalFailureError(f"non-finite iterate at iteration {k}")
        if linsolve_check:
            lin_trace.append(
                float(np.linalg.norm(M @ state.x - rhs) / max(np.linalg.norm(rhs), 1e-300))
            )
        state.z = update_z(state, A, y, cfg, mode)
        state.alpha = update_alpha(state, cfg)
        state.u1, state.u2 = update_duals(state, A, y)
        if mode == "wwcsc":
            state.weights = _relearn_weights(state, A, y, cfg.weight)

        obj_trace.append(
            objective_value(
                A, y, state.x, cfg, mode,
                state.weights.weights if mode == "wwcsc" else None,
            )
        )
        px = np.linalg.norm(x_prev)
        rel = np.linalg.norm(state.x - x_prev) / px if px > 0 else math.inf
        rel_trace.append(float(rel))
        if callback is not None:
            callback(k, state)
        if rel < cfg.tol:
            terminated = "converged"
            break

    return SolveResult(
        x_hat=state.x.copy(),
        iterations=len(rel_trace),
        relative_change_trace=rel_trace,
        objective_trace=obj_trace,
        final_weights=state.weights.weights.copy(),
        terminated=terminated,
        linsolve_residuals=lin_trace,
    )
