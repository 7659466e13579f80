"""Reference implementations of classic momentum methods, written in their own
textbook form so they can serve as independent oracles for GM2."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import (InadmissibleParametersError, InvalidPresetError, NumericalFailureError,
                     StepIndexError)
from .gm2 import Gm2Params, Gm2State


@dataclass
class TwoPointState:
    """current/previous iterate plus a method-specific auxiliary slot."""
    current: np.ndarray
    previous: np.ndarray
    auxiliary: Optional[Any] = None
    k: int = 0


def _finite(arr, k):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailureError(k)
    return arr


# -- Nesterov, strongly convex regime -------------------------------------------

def nag_sc_momentum(mu: float, s: float) -> float:
    r = math.sqrt(mu * s)
    return (1.0 - r) / (1.0 + r)


def nag_sc_init(x0) -> TwoPointState:
    """x_0 = x_{-1} = y_0 = x0. ``auxiliary`` holds the extrapolated point y_k."""
    x0 = np.asarray(x0, dtype=float)
    return TwoPointState(x0, x0.copy(), x0.copy(), 0)


def nag_sc_step(f, s: float, state: TwoPointState) -> TwoPointState:
    if f.mu <= 0:
        raise InvalidPresetError("strongly convex NAG needs mu > 0")
    beta = nag_sc_momentum(f.mu, s)
    y = state.auxiliary
    x1 = _finite(y - s * f.gradient(y), state.k + 1)
    y1 = x1 + beta * (x1 - state.current)
    return TwoPointState(x1, state.current, y1, state.k + 1)


# -- Nesterov, convex regime ------------------------------------------------------

def nag_cvx_init(f, s: float, x1) -> TwoPointState:
    """State at k = 1 started from v_0 = x_1.

    The velocity carried into the first step is v_1 = v_0 - s grad f(x_1), the
    k = 0 velocity update, which keeps the Lyapunov bookkeeping exact from k = 0.
    ``auxiliary`` holds v_k.
    """
    x1 = np.asarray(x1, dtype=float)
    return TwoPointState(x1, x1.copy(), x1 - s * f.gradient(x1), 1)


def nag_cvx_step(f, s: float, state: TwoPointState) -> TwoPointState:
    k = state.k
    if k < 1:
        raise StepIndexError("convex NAG step needs k >= 1")
    x, v = state.current, state.auxiliary
    x1 = (x + (2.0 / k) * v - s * f.gradient(x)) / (1.0 + 2.0 / k)
    g1 = _finite(f.gradient(x1), k + 1)
    v1 = v - (s * k / 2.0) * g1 - s * g1
    return TwoPointState(_finite(x1, k + 1), x, v1, k + 1)


# -- Triple momentum ----------------------------------------------------------------

@dataclass(frozen=True)
class TmCoefficients:
    rho: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    kappa: float

    @classmethod
    def from_objective(cls, f):
        return tm_coefficients(f.mu, f.L)

    def check(self, L: float, rtol: float = 1e-14):
        """Recompute every coefficient from kappa and L; raise on mismatch."""
        ref = tm_coefficients(L / self.kappa, L)
        for name in ("rho", "alpha", "beta", "gamma", "delta"):
            a, b = getattr(self, name), getattr(ref, name)
            if abs(a - b) > rtol * max(1.0, abs(b)):
                raise InadmissibleParametersError(name, f"{name}={a} but recomputation gives {b}")


def tm_coefficients(mu: float, L: float) -> TmCoefficients:
    if not (0 < mu <= L):
        raise InvalidPresetError("triple momentum needs 0 < mu <= L")
    kappa = L / mu
    rho = 1.0 - math.sqrt(1.0 / kappa)
    return TmCoefficients(rho=rho, alpha=(1.0 + rho) / L, beta=rho ** 2 / (2.0 - rho),
                          gamma=rho ** 2 / ((1.0 + rho) * (2.0 - rho)),
                          delta=rho ** 2 / (1.0 - rho ** 2), kappa=kappa)


def tm_init(eps0, eps_prev=None) -> TwoPointState:
    eps0 = np.asarray(eps0, dtype=float)
    prev = eps0.copy() if eps_prev is None else np.asarray(eps_prev, dtype=float)
    return TwoPointState(eps0, prev, None, 0)


def tm_outputs(coeffs: TmCoefficients, state: TwoPointState):
    """(y_k, x_k) read off the (eps_k, eps_{k-1}) pair."""
    e, ep = state.current, state.previous
    return (1 + coeffs.gamma) * e - coeffs.gamma * ep, (1 + coeffs.delta) * e - coeffs.delta * ep


def tm_step(f, coeffs: TmCoefficients, state: TwoPointState) -> TwoPointState:
    y, _ = tm_outputs(coeffs, state)
    e_next = (1 + coeffs.beta) * state.current - coeffs.beta * state.previous - coeffs.alpha * f.gradient(y)
    return TwoPointState(_finite(e_next, state.k + 1), state.current, None, state.k + 1)


def tm_gm2_start(f, coeffs: TmCoefficients, state: TwoPointState) -> Gm2State:
    """GM2 state that tracks the given triple-momentum state.

    Eliminating eps shows GM2 x_k follows the gradient point y_k and GM2 v_k
    follows the next output point x_{k+1}.
    """
    y, _ = tm_outputs(coeffs, state)
    _, x_next = tm_outputs(coeffs, tm_step(f, coeffs, state))
    return Gm2State(y, x_next, 0)


# -- Quasi-hyperbolic momentum -------------------------------------------------------

@dataclass(frozen=True)
class QhmParams:
    a: float
    b: float
    s: float

    def __post_init__(self):
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise InadmissibleParametersError("0 <= a, b <= 1")
        if not self.s > 0:
            raise InadmissibleParametersError("s > 0")


def qhm_init(x0, g0=None) -> TwoPointState:
    """``auxiliary`` is the momentum buffer g_k (zero unless given)."""
    x0 = np.asarray(x0, dtype=float)
    buf = np.zeros_like(x0) if g0 is None else np.asarray(g0, dtype=float)
    return TwoPointState(x0, x0.copy(), buf, 0)


def qhm_step(f, params: QhmParams, state: TwoPointState) -> TwoPointState:
    x = state.current
    g = f.gradient(x)
    buf = params.b * state.auxiliary + g
    x1 = x - params.s * (1.0 - params.a) * g - params.s * params.a * buf
    return TwoPointState(_finite(x1, state.k + 1), x, buf, state.k + 1)


def qhm_params_map(a: float, f, s: float):
    """GM2 parameters reproducing QHM with weight ``a``; returns (params, b)."""
    if not (0 < a <= 0.25):
        raise InadmissibleParametersError("0 < a <= 1/4")
    if s > 4.0 / (3.0 * f.L) * (1 + 1e-12):
        raise InadmissibleParametersError("s <= 4/(3L)")
    q = math.sqrt(a * f.mu)
    rs = math.sqrt(s)
    if q * rs > 0.5:
        raise InadmissibleParametersError("q sqrt(s) <= 1/2")
    params = Gm2Params(m=(1.0 - a) * rs, n=q, p=a / q + rs, q=q)
    bad = params.discrete_violations(f, s)
    if bad:
        raise InadmissibleParametersError(bad[0])
    return params, (1.0 - q * rs) / (1.0 + q * rs)


def qhm_aligned_buffer(f, params: Gm2Params, a: float, b: float, s: float, x0):
    """Initial QHM buffer whose first step matches GM2 started from initial_v(x0)."""
    rs = math.sqrt(s)
    c = (2.0 * (1.0 - a) / (1.0 + params.q * rs) - 1.0) / (a * b)
    return c * f.gradient(np.asarray(x0, dtype=float))


# -- Rate matching ------------------------------------------------------------------

def rate_matching_init(x0) -> TwoPointState:
    """k = 0 with z_{-1} = x_0 in ``auxiliary``."""
    x0 = np.asarray(x0, dtype=float)
    return TwoPointState(x0, x0.copy(), x0.copy(), 0)


def rate_matching_step(f, s: float, state: TwoPointState, variant: str = "original",
                       grad_at: str = "y") -> TwoPointState:
    """One rate-matching step. ``grad_at='x'`` swaps grad f(y_k) for grad f(x_k)."""
    k = state.k
    x = state.current
    gx = f.gradient(x)
    y = x - s * gx
    if variant == "original":
        c = s * k / 2.0
    elif variant == "perturbed":
        c = s * (k + 2) / 2.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    g = gx if grad_at == "x" else f.gradient(y)
    z = state.auxiliary - c * g
    x1 = (2.0 / (k + 2)) * z + (k / (k + 2.0)) * y
    return TwoPointState(_finite(x1, k + 1), x, z, k + 1)


# -- H-NAG -------------------------------------------------------------------------

def hnag_check(gamma: float, alpha: float, beta: float, f, s: float) -> Gm2Params:
    """GM2 row for H-NAG with gamma = mu (1 - alpha) and alpha >= 1/sqrt(kappa)."""
    mu, L = f.mu, f.L
    if mu <= 0:
        raise InadmissibleParametersError("mu > 0")
    if alpha < math.sqrt(mu / L) * (1 - 1e-12):
        raise InadmissibleParametersError("alpha >= sqrt(1/kappa)")
    if abs(gamma - mu * (1.0 - alpha)) > 1e-12 * max(mu, abs(gamma)):
        raise InadmissibleParametersError("gamma = mu (1 - alpha)")
    if beta < 0:
        raise InadmissibleParametersError("beta >= 0")
    denom = gamma + mu * alpha
    return Gm2Params(m=beta, n=1.0, p=1.0 / denom, q=mu / denom)
