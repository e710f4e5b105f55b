"""Wing loss, soft thresholding and the sigmoid pixel-weight rule.

These are the scalar/vector building blocks shared by the ADMM solver and
the classifier. Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class DegenerateThresholdError(ValueError):
    """Raised when the residual threshold is zero and weights are undefined."""


@dataclass(frozen=True)
class WingParams:
    """Width and curvature of the wing loss.

    Parameters
    ----------
    omega : float
        Half-width of the logarithmic region, must be positive.
    epsilon : float
        Curvature of the logarithmic region, must be positive.
    """

    omega: float = 10.0
    epsilon: float = 2.0

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")

    @property
    def c_const(self) -> float:
        """Offset that joins the logarithmic and linear branches at ``omega``."""
        return self.omega - self.omega * math.log1p(self.omega / self.epsilon)


@dataclass(frozen=True)
class WeightParams:
    """Sigmoid steepness ``q`` and quantile fraction ``tau`` for pixel weights."""

    q: float = 1.0
    tau: float = 0.8

    def __post_init__(self):
        if not (self.q > 0 and math.isfinite(self.q)):
            raise ValueError(f"q must be positive and finite, got {self.q}")
        if not (0 < self.tau <= 1):
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")


@dataclass
class WeightState:
    weights: np.ndarray
    delta: float

    @classmethod
    def uniform(cls, m: int) -> "WeightState":
        return cls(weights=np.ones(m), delta=0.0)


def wing_loss(r, params: WingParams):
    """Elementwise wing loss.

    ``omega * log(1 + |r|/epsilon)`` inside ``|r| < omega`` and
    ``|r| - C`` outside, where ``C`` is ``params.c_const``.
    Scalars in, scalar out; arrays are handled elementwise.
    """
    a = np.abs(np.asarray(r, dtype=float))
    out = np.where(
        a < params.omega,
        params.omega * np.log1p(a / params.epsilon),
        a - params.c_const,
    )
    if out.ndim == 0:
        return float(out)
    return out


def wing_penalty(z, params: WingParams) -> float:
    """Wing loss applied to the l1 norm of ``z``."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("wing_penalty requires a nonempty vector")
    return wing_loss(np.abs(z).sum(), params)


def soft_threshold(a, k):
    """Proximal operator of ``k * |.|``, applied elementwise.

    Parameters
    ----------
    a : float or array_like
        Input value(s).
    k : float
        Nonnegative threshold.

    Returns
    -------
    float or ndarray
        ``sign(a) * max(|a| - k, 0)`` with the shape of ``a``.
    """
    if k < 0:
        raise ValueError(f"threshold must be nonnegative, got {k}")
    arr = np.asarray(a, dtype=float)
    out = np.sign(arr) * np.maximum(np.abs(arr) - k, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def quantile_rank(tau: float, m: int) -> int:
    """1-based rank ``max(1, floor(tau*m))``.

    A tolerance of 1e-9 absorbs products like ``0.29 * 100`` that land a
    hair below an integer in binary floating point.
    """
    return max(1, math.floor(tau * m + 1e-9))


def residual_threshold(e, tau: float) -> float:
    """Return the k-th smallest squared residual with ``k = max(1, floor(tau*m))``."""
    e = np.asarray(e, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("residual vector is empty")
    if not (0 < tau <= 1):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    k = quantile_rank(tau, e.size)
    psi = e * e
    return float(np.partition(psi, k - 1)[k - 1])


def compute_weights(e, delta: float, q: float) -> WeightState:
    """Sigmoid weights ``1 / (1 + exp(-q (delta - e_i^2) / delta))``.

    Raises
    ------
    DegenerateThresholdError
        If ``delta`` is zero, in which case the caller should fall back
        to uniform weights.
    """
    if delta == 0:
        raise DegenerateThresholdError("residual threshold is zero")
    if delta < 0 or not math.isfinite(delta):
        raise ValueError(f"delta must be positive and finite, got {delta}")
    e = np.asarray(e, dtype=float).ravel()
    # expit only ever exponentiates a nonpositive argument
    w = expit(q * (delta - e * e) / delta)
    return WeightState(weights=w, delta=float(delta))
