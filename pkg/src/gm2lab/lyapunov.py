"""Lyapunov functions for the momentum flows and iterations, plus decay checks.

Evaluators accept a single state or arrays of states stacked on leading axes;
components then come back as arrays and ``value`` sums them elementwise.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import MissingOptimumError, SingularTimeError


@dataclass
class LyapunovValue:
    components: Dict[str, object]
    violations: Tuple[str, ...] = ()

    @property
    def value(self):
        total = 0.0
        for v in self.components.values():
            total = total + v
        return total

    def __float__(self):
        return float(self.value)


@dataclass
class DecayReport:
    passed: bool
    worst_ratio: float
    worst_index: int
    fitted_rate: float
    theoretical_rate: float
    floor_hits: int = 0
    notes: str = ""


def _need_optimum(f):
    if f.x_star is None or f.f_star is None:
        raise MissingOptimumError("Lyapunov functions need x_star and f_star")


def _sq(a):
    a = np.asarray(a, dtype=float)
    return np.sum(a * a, axis=-1)


def _warn(violations, name):
    if violations:
        warnings.warn(f"{name}: hypotheses violated: {', '.join(violations)}", stacklevel=3)


def lyap_cont_a(params, f, state) -> LyapunovValue:
    """f(X) - f* + q/(2p) ||V - x*||^2."""
    _need_optimum(f)
    if not params.p > 0:
        raise ValueError("p must be positive")
    return LyapunovValue({
        "f_gap": f.f_gap(state.primary),
        "velocity": params.q / (2.0 * params.p) * _sq(state.secondary - f.x_star),
    })


def cont_b_violations(params, mu):
    m, n, p, q = params.as_tuple()
    out = []
    if n > 2 * q * (1 + 1e-12):
        out.append("n <= 2q")
    if q > p * mu * (1 + 1e-12):
        out.append("q <= p mu")
    if m > 2 * p * (1 + 1e-12):
        out.append("m <= 2p")
    return tuple(out)


def lyap_cont_b(params, f, state) -> LyapunovValue:
    """f(X) - f* - (n-q)/(2p) ||X - x*||^2 + n/(2p) ||V - x*||^2."""
    _need_optimum(f)
    m, n, p, q = params.as_tuple()
    bad = cont_b_violations(params, f.mu)
    _warn(bad, "lyap_cont_b")
    return LyapunovValue({
        "f_gap": f.f_gap(state.primary),
        "position": -(n - q) / (2.0 * p) * _sq(state.primary - f.x_star),
        "velocity": n / (2.0 * p) * _sq(state.secondary - f.x_star),
    }, bad)


def hrode_violations(alpha, beta_dot, C, s, mu, variant):
    ea = math.exp(alpha)
    out = []
    if variant == "a":
        if beta_dot < 0:
            out.append("beta_dot >= 0")
        if beta_dot > ea * (1 + 1e-12):
            out.append("beta_dot <= e^alpha")
        if ea > mu / C * (1 + 1e-12):
            out.append("e^alpha <= mu/C")
    else:
        if ea > 2 * beta_dot * (1 + 1e-12):
            out.append("e^alpha <= 2 beta_dot")
        if beta_dot > mu / C * (1 + 1e-12):
            out.append("beta_dot <= mu/C")
        if C * math.sqrt(s) > 2 * (1 + 1e-12):
            out.append("C sqrt(s) <= 2")
    return tuple(out)


def lyap_hrode(alpha, beta_dot, C, s, f, X, dX, variant="a", gamma_weight=1.0) -> LyapunovValue:
    """Energy of the strongly convex HR-ODE with constant alpha.

    variant a: w ((C e^a / 2) ||X - x* + e^-a (dX + sqrt(s) g)||^2 + f - f*)
    variant b: adds -C (e^a - beta_dot)/2 ||X - x*||^2 inside the bracket.
    ``gamma_weight`` is the caller-supplied time weight w.
    """
    _need_optimum(f)
    if variant not in ("a", "b"):
        raise ValueError(f"unknown variant {variant!r}")
    bad = hrode_violations(alpha, beta_dot, C, s, f.mu, variant)
    _warn(bad, "lyap_hrode")
    ea = math.exp(alpha)
    X = np.asarray(X, dtype=float)
    R = X - f.x_star + (np.asarray(dX, dtype=float) + math.sqrt(s) * f.gradient(X)) / ea
    comps = {"f_gap": gamma_weight * f.f_gap(X), "mixed": gamma_weight * C * ea / 2.0 * _sq(R)}
    if variant == "b":
        comps["position"] = -gamma_weight * C * (ea - beta_dot) / 2.0 * _sq(X - f.x_star)
    return LyapunovValue(comps, bad)


def convex_weight(params, t, variant="laborde"):
    """Weight on f - f*: e^beta (laborde) or e^beta + sqrt(s) e^(-2 alpha) beta_dot (shi)."""
    w = params.q(t) / params.n(t)
    if variant == "shi":
        w = w + math.sqrt(params.s) * params.beta_dot(t) / params.n(t) ** 2
    elif variant != "laborde":
        raise ValueError(f"unknown variant {variant!r}")
    return w


def lyap_flow_convex(f, params, X, dX, t, variant="laborde") -> LyapunovValue:
    _need_optimum(f)
    if t < params.t0 * (1 - 1e-12):
        raise SingularTimeError(f"t = {t} is before t0 = {params.t0}")
    X = np.asarray(X, dtype=float)
    e_neg_a = 1.0 / params.n(t)
    R = X + e_neg_a * np.asarray(dX, dtype=float) - f.x_star + math.sqrt(params.s) * e_neg_a * f.gradient(X)
    return LyapunovValue({"mixed": 0.5 * _sq(R), "f_gap": convex_weight(params, t, variant) * f.f_gap(X)})


def lyap_disc_sc(params, s, f, state) -> LyapunovValue:
    """f(x) - f* + n/(2p) ||v - x*||^2 - (n p s / 2) ||g(x)||^2."""
    _need_optimum(f)
    m, n, p, q = params.as_tuple()
    x = np.asarray(state.x, dtype=float)
    return LyapunovValue({
        "f_gap": f.f_gap(x),
        "velocity": n / (2.0 * p) * _sq(np.asarray(state.v, dtype=float) - f.x_star),
        "grad": -(n * p * s / 2.0) * _sq(f.gradient(x)),
    })


def lyap_disc_cvx(s, f, x_k, x_k1, k) -> LyapunovValue:
    """s(k+2)k/4 (f(x_k) - f*) + 1/2 ||x_{k+1} - x* + (k/2)(x_{k+1} - x_k) + (ks/2) g(x_k)||^2."""
    _need_optimum(f)
    if np.any(np.asarray(k) < 0):
        raise ValueError("k must be non-negative")
    x_k = np.asarray(x_k, dtype=float)
    x_k1 = np.asarray(x_k1, dtype=float)
    k = np.asarray(k, dtype=float)
    kk = k[..., None] if k.ndim else k
    R = x_k1 - f.x_star + (kk / 2.0) * (x_k1 - x_k) + (kk * s / 2.0) * f.gradient(x_k)
    return LyapunovValue({"f_gap": s * (k + 2.0) * k / 4.0 * f.f_gap(x_k), "mixed": 0.5 * _sq(R)})


def resolution_floor(f, params=None, s: float = 0.0, ulps: float = 4.0) -> float:
    """Smallest Lyapunov value that double precision can resolve near x*.

    Iterates cannot settle closer to x* than a few ulps of its coordinates, so
    a quadratic-type energy bottoms out near
    1/2 (L + n/p + n p s L^2) d (ulps * spacing(max|x*|, 1))^2.
    """
    _need_optimum(f)
    scale = max(1.0, float(np.max(np.abs(f.x_star))))
    h = ulps * float(np.spacing(scale))
    curv = f.L
    if params is not None and params.p > 0:
        curv += params.n / params.p + params.n * params.p * s * f.L ** 2
    return 0.5 * curv * f.dim * h * h


def convex_resolution_floor(f, k, mixed, ulps: float = 8.0):
    """Change in the convex NAG energy eps(k) caused by rounding the newest iterate.

    eps(k) depends on the newest iterate only through R = x_{k+1} - x* +
    (k/2)(x_{k+1} - x_k) + ..., with coefficient c = 1 + k/2, so an error of
    h in that iterate moves eps(k) by at most c h ||R|| + (c h)^2 / 2.
    ``mixed`` is the 1/2 ||R||^2 component of eps(k).
    """
    _need_optimum(f)
    scale = max(1.0, float(np.max(np.abs(f.x_star))))
    h = ulps * float(np.spacing(scale)) * math.sqrt(f.dim)
    c = 1.0 + np.asarray(k, dtype=float) / 2.0
    r = np.sqrt(2.0 * np.maximum(np.asarray(mixed, dtype=float), 0.0))
    return c * h * r + 0.5 * (c * h) ** 2


def fit_log_slope(t, y):
    """Least-squares slope of log(y) against t over the second half of the window.

    Non-positive samples carry no log and are dropped.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = t >= t[0] + 0.5 * (t[-1] - t[0])
    keep &= y > 0
    if keep.sum() < 2:
        return math.nan
    A = np.vstack([t[keep], np.ones(keep.sum())]).T
    return float(np.linalg.lstsq(A, np.log(y[keep]), rcond=None)[0][0])


def _as_values(series):
    if isinstance(series, LyapunovValue):
        return np.asarray(series.value, dtype=float).ravel()
    if isinstance(series, np.ndarray):
        return series.astype(float).ravel()
    return np.array([float(getattr(e, "value", e)) for e in series], dtype=float)


def certify_decay(series: Sequence, ratio_or_rate: float, mode: str = "geometric", tol: float = 1e-12,
                  times=None, atol: float = 0.0) -> DecayReport:
    """Check a Lyapunov series against a contraction factor or exponential rate.

    geometric:   eps[k+1] <= ratio * eps[k] + tol * |eps[k]| (+ atol)
    exponential: eps(t) <= eps(t0) exp(-rate (t - t0)) (1 + tol) (+ atol)

    ``fitted_rate`` is the fitted per-step factor in geometric mode and the
    fitted decay exponent in exponential mode.

    ``atol`` is an absolute resolution floor; steps that pass only because of
    it are counted in ``floor_hits``.
    """
    vals = _as_values(series)
    if vals.size < 2:
        raise ValueError("need at least two values")
    if not np.all(np.isfinite(vals)):
        raise ValueError("series contains non-finite values")
    if mode == "geometric":
        prev, nxt = vals[:-1], vals[1:]
        bound = ratio_or_rate * prev + tol * np.abs(prev)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(prev != 0, nxt / prev, np.where(nxt <= 0, 0.0, np.inf))
        ok_strict = nxt <= bound
        ok = nxt <= bound + atol
        # fitted per-step factor, comparable with the ratio
        slope = fit_log_slope(np.arange(vals.size, dtype=float), vals)
        fitted = math.exp(slope) if math.isfinite(slope) else math.nan
        theoretical = ratio_or_rate
    elif mode == "exponential":
        if times is None:
            raise ValueError("exponential mode needs times")
        ts = np.asarray(times, dtype=float)
        env = vals[0] * np.exp(-ratio_or_rate * (ts - ts[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(env > 0, vals / env, 0.0)[1:]
        ok_strict = vals[1:] <= env[1:] * (1.0 + tol)
        ok = vals[1:] <= env[1:] * (1.0 + tol) + atol
        slope = fit_log_slope(ts, vals)
        fitted = -slope
        theoretical = ratio_or_rate
    else:
        raise ValueError(f"unknown mode {mode!r}")
    worst = int(np.argmax(ratios)) if ratios.size else 0
    return DecayReport(passed=bool(np.all(ok)), worst_ratio=float(ratios[worst]) if ratios.size else 0.0,
                       worst_index=worst,
                       fitted_rate=float(fitted), theoretical_rate=float(theoretical),
                       floor_hits=int(np.sum(ok & ~ok_strict)))
