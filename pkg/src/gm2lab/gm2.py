"""The GM2 iteration: semi-implicit Euler steps of the (m, n, p, q) momentum flow.

    x+ = (x - m*sqrt(s)*g(x) + n*sqrt(s)*v) / (1 + n*sqrt(s))
    v+ = v - p*sqrt(s)*g(x+) - q*sqrt(s)*(v - x+)

Also holds the explicit-Euler variant, the map between the two, the
equivalent one-line recursion and the preset registry.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (InadmissibleParametersError, InitializationUndefinedError,
                     InvalidPresetError, NumericalFailureError)


@dataclass(frozen=True)
class Gm2Params:
    m: float
    n: float
    p: float
    q: float

    def __post_init__(self):
        for name in ("m", "n", "p", "q"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val < 0:
                raise InadmissibleParametersError(f"{name} >= 0", f"{name} must be finite and non-negative, got {val}")
            object.__setattr__(self, name, val)

    def as_tuple(self):
        return (self.m, self.n, self.p, self.q)

    def discrete_violations(self, f, s: float, rtol: float = 1e-12):
        """Names of the discrete-contraction hypotheses that fail for (f, s).

        Hypotheses: n = q, p > 0, q/p <= mu, 0 <= n p s <= m sqrt(s) <= 1/L,
        0 <= q sqrt(s) < 1. A relative slack ``rtol`` absorbs round-off on
        equality boundaries.
        """
        rs = math.sqrt(s)
        out = []
        if abs(self.n - self.q) > rtol * max(self.n, self.q, 1e-300):
            out.append("n = q")
        if not self.p > 0:
            out.append("p > 0")
            return out
        if self.q / self.p > f.mu * (1 + rtol):
            out.append("q/p <= mu")
        if self.n * self.p * s > self.m * rs * (1 + rtol):
            out.append("n p s <= m sqrt(s)")
        if self.m * rs * f.L > 1 + rtol:
            out.append("m sqrt(s) <= 1/L")
        if not self.q * rs < 1:
            out.append("q sqrt(s) < 1")
        return out

    def discrete_admissible(self, f, s: float) -> bool:
        return not self.discrete_violations(f, s)


@dataclass
class Gm2State:
    x: np.ndarray
    v: np.ndarray
    k: int = 0


def _check_finite(arr, k):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailureError(k)


def gm2_step(params: Gm2Params, s: float, f, state: Gm2State) -> Gm2State:
    rs = math.sqrt(s)
    m, n, p, q = params.as_tuple()
    x, v = state.x, state.v
    g = f.gradient(x)
    _check_finite(g, state.k)
    x1 = (x - m * rs * g + n * rs * v) / (1.0 + n * rs)
    g1 = f.gradient(x1)
    _check_finite(g1, state.k + 1)
    v1 = v - p * rs * g1 - q * rs * (v - x1)
    _check_finite(v1, state.k + 1)
    return Gm2State(x1, v1, state.k + 1)


def ee_step(params: Gm2Params, s: float, f, state: Gm2State) -> Gm2State:
    """Explicit Euler: both updates use the gradient at the current x."""
    rs = math.sqrt(s)
    m, n, p, q = params.as_tuple()
    x, v = state.x, state.v
    g = f.gradient(x)
    _check_finite(g, state.k)
    x1 = x - m * rs * g - n * rs * (x - v)
    v1 = v - p * rs * g - q * rs * (v - x)
    _check_finite(x1, state.k + 1)
    _check_finite(v1, state.k + 1)
    return Gm2State(x1, v1, state.k + 1)


def ee_params_from_sie(sie: Gm2Params, s: float) -> Gm2Params:
    """Explicit-Euler parameters whose one-line recursion equals that of ``sie``."""
    rs = math.sqrt(s)
    m, n, p, q = sie.as_tuple()
    d = 1.0 + n * rs
    return Gm2Params(m=(m + n * p * rs) / d, n=(n - q * n * rs) / d, p=p, q=q)


def initial_v(x0, params: Gm2Params, f):
    """v0 = x0 - (m/n) grad f(x0); makes x1 - x0 proportional to grad f(x0)."""
    if params.n == 0:
        raise InitializationUndefinedError("n = 0: supply v0 explicitly")
    x0 = np.asarray(x0, dtype=float)
    return x0 - (params.m / params.n) * f.gradient(x0)


def ee_initial_v(x0, sie: Gm2Params, s: float, f):
    """Starting velocity for an explicit-Euler run with ``ee_params_from_sie(sie, s)``.

    Chosen so the first explicit step lands on the same x1 as ``gm2_step`` from
    ``(x0, initial_v(x0, sie, f))``; from there the one-line recursions coincide.
    """
    rs = math.sqrt(s)
    m, n, p, q = sie.as_tuple()
    if n == 0:
        raise InitializationUndefinedError("n = 0: supply v0 explicitly")
    if q * rs == 1:
        raise InitializationUndefinedError("q sqrt(s) = 1 leaves the explicit velocity undetermined")
    x0 = np.asarray(x0, dtype=float)
    c = (m - n * p * rs) / (n * (1.0 - q * rs))
    return x0 - c * f.gradient(x0)


def gm2_one_line_coeffs(params: Gm2Params, s: float):
    """(c_mom, c_grad, c_gradprev) of
    x+ = x + c_mom (x - x_prev) - c_grad g(x) + c_gradprev g(x_prev)."""
    rs = math.sqrt(s)
    m, n, p, q = params.as_tuple()
    d = 1.0 + n * rs
    return (1.0 - q * rs) / d, (m * rs + n * p * s) / d, m * rs * (1.0 - q * rs) / d


def one_line_step(coeffs, f, x, x_prev):
    c_mom, c_grad, c_prev = coeffs
    return x + c_mom * (x - x_prev) - c_grad * f.gradient(x) + c_prev * f.gradient(x_prev)


def gm2_trajectory(params: Gm2Params, s: float, f, x0, v0=None, steps: int = 100,
                   step=gm2_step):
    """Run ``steps`` iterations; returns arrays X, V of shape (steps+1, d)."""
    x0 = np.asarray(x0, dtype=float)
    v0 = initial_v(x0, params, f) if v0 is None else np.asarray(v0, dtype=float)
    X = np.empty((steps + 1,) + x0.shape)
    V = np.empty_like(X)
    state = Gm2State(x0, v0, 0)
    X[0], V[0] = x0, v0
    for k in range(steps):
        state = step(params, s, f, state)
        X[k + 1], V[k + 1] = state.x, state.v
    return X, V


class Method(str, enum.Enum):
    GD = "GD"
    POLYAK = "Polyak"
    HB = "HB"
    NAG = "NAG"
    TM = "TM"
    QHM = "QHM"
    HNAG = "HNAG"


def _as_method(method) -> Method:
    if isinstance(method, Method):
        return method
    for m in Method:
        if str(method).lower() in (m.value.lower(), m.name.lower()):
            return m
    raise InvalidPresetError(f"unknown preset {method!r}")


def preset(method, f, s: float, extra=None) -> Gm2Params:
    """Parameter row reproducing a classic method inside GM2.

    ``extra`` is ``a`` for QHM and ``(gamma, alpha, beta)`` for HNAG.
    """
    method = _as_method(method)
    rs = math.sqrt(s)
    mu, L = f.mu, f.L
    if method is Method.GD:
        return Gm2Params(m=1.0, n=0.0, p=0.0, q=0.0)
    if mu <= 0:
        raise InvalidPresetError(f"{method.value} preset needs mu > 0")
    rmu = math.sqrt(mu)
    if method is Method.POLYAK:
        return Gm2Params(m=0.0, n=rmu, p=1.0 / rmu, q=rmu)
    if method is Method.NAG:
        return Gm2Params(m=rs, n=rmu, p=1.0 / rmu, q=rmu)
    if method is Method.HB:
        alpha = (1.0 - math.sqrt(mu * s)) / (1.0 + math.sqrt(mu * s))
        n = (1.0 - alpha) / (rs * (1.0 + alpha))
        return Gm2Params(m=0.0, n=n, p=1.0 / n + rs, q=n)
    if method is Method.TM:
        if mu >= L:
            raise InvalidPresetError("TM preset needs mu < L")
        if abs(s * L - 1.0) > 1e-12:
            warnings.warn("the TM row reproduces the triple momentum method only at s = 1/L",
                          stacklevel=2)
        rL = math.sqrt(L)
        return Gm2Params(m=1.0 / rL, n=2.0 * math.sqrt(mu * L) / (rL - rmu), p=1.0 / rmu, q=rmu)
    from . import classic
    if method is Method.QHM:
        if extra is None:
            raise InvalidPresetError("QHM preset needs extra=a")
        a = float(np.ravel([extra])[0])
        return classic.qhm_params_map(a, f, s)[0]
    if method is Method.HNAG:
        if extra is None or len(extra) != 3:
            raise InvalidPresetError("HNAG preset needs extra=(gamma, alpha, beta)")
        return classic.hnag_check(*extra, f, s)
    raise InvalidPresetError(f"unknown preset {method!r}")
