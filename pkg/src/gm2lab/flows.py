"""Continuous-time momentum flows and a fixed-step RK4 integrator.

Vector fields act on a packed array ``z`` of shape ``(2, ..., d)`` where
``z[0]`` is the primary variable (X, Q or Y) and ``z[1]`` the secondary one
(V, J or W). Leading batch axes let several parameter rows integrate in one
pass, which matters on long horizons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .classic import tm_coefficients
from .errors import (InadmissibleParametersError, IntegrationDivergedError,
                     InternalConsistencyError, SingularTimeError)
from .gm2 import Gm2Params

M_BAND_UPPER = 1.3661


@dataclass
class FlowState:
    primary: np.ndarray
    secondary: np.ndarray
    t: float = 0.0

    def packed(self):
        return np.stack((np.asarray(self.primary, dtype=float),
                         np.asarray(self.secondary, dtype=float)))

    @classmethod
    def from_packed(cls, z, t=0.0):
        return cls(z[0], z[1], t)


@dataclass(frozen=True)
class ConvexFlowParams:
    """n(t) = p_exp / t and q(t) = C p_exp t^(p_exp - 1)."""
    p_exp: float = 2.0
    C: float = 0.25
    s: float = 0.0
    t0: float = 1.0

    def __post_init__(self):
        if self.p_exp < 2:
            raise InadmissibleParametersError("p_exp >= 2")
        if not self.C > 0:
            raise InadmissibleParametersError("C > 0")
        if self.s < 0:
            raise InadmissibleParametersError("s >= 0")
        if not self.t0 > 0:
            raise InadmissibleParametersError("t0 > 0")

    def n(self, t):
        return self.p_exp / t

    def q(self, t):
        return self.C * self.p_exp * t ** (self.p_exp - 1)

    def alpha(self, t):
        return math.log(self.n(t))

    def beta(self, t):
        return math.log(self.q(t) / self.n(t))

    def beta_dot(self, t):
        return self.p_exp / t


@dataclass(frozen=True)
class TmHrParams:
    M: float
    alpha: float
    gamma: float
    xi: float = 2.0 / 3.0
    s: float = 0.0

    def gm2_params(self) -> Gm2Params:
        """GM2 coefficients that reduce the flow to the triple-momentum HR-ODE."""
        rM, ra = math.sqrt(self.M), math.sqrt(self.alpha)
        g = 1.0 + math.sqrt(self.M * self.alpha)
        return Gm2Params(m=self.gamma * ra * g, n=(2.0 - self.xi) * rM,
                         p=(1.0 - self.xi * self.gamma * math.sqrt(self.M * self.alpha)) * g / ((2.0 - self.xi) * rM),
                         q=self.xi * rM)

    @property
    def rate(self):
        return (2.0 - self.xi) * math.sqrt(self.M)


def m_constant(mu: float, L: float) -> float:
    c = tm_coefficients(mu, L)
    M = ((1.0 - c.beta) / (math.sqrt(c.alpha) * (1.0 + c.beta))) ** 2
    if not (mu * (1 - 1e-12) <= M <= M_BAND_UPPER * mu):
        raise InternalConsistencyError(f"M = {M} outside [mu, {M_BAND_UPPER} mu] for mu={mu}, L={L}")
    return M


def tm_hr_params(mu: float, L: float, xi: float = 2.0 / 3.0, s: float = 0.0) -> TmHrParams:
    c = tm_coefficients(mu, L)
    return TmHrParams(M=m_constant(mu, L), alpha=c.alpha, gamma=c.gamma, xi=xi, s=s)


# -- vector fields ---------------------------------------------------------------

def _coefficients(params: Union[Gm2Params, Sequence[Gm2Params]]):
    if isinstance(params, Gm2Params):
        return params.as_tuple()
    arr = np.array([p.as_tuple() for p in params], dtype=float)
    return tuple(arr[:, i, None] for i in range(4))


def gm2_field(params, f) -> Callable:
    """Packed vector field of dX = -m g(X) - n (X - V), dV = -p g(X) - q (V - X).

    ``params`` may be a list of Gm2Params; the state then carries a batch axis
    of the same length in front of the dimension axis.
    """
    m, n, p, q = _coefficients(params)

    def field(t, z):
        X, V = z[0], z[1]
        g = f.gradient(X)
        D = X - V
        return np.stack((-m * g - n * D, -p * g + q * D))

    return field


def gm2_rhs(params, f, state: FlowState) -> FlowState:
    d = gm2_field(params, f)(state.t, state.packed())
    return FlowState(d[0], d[1], state.t)


def phase_field_nag(f, s: float, mu: float) -> Callable:
    """dQ = J, dJ = -(2 sqrt(mu) + sqrt(s) H(Q)) J - (1 + sqrt(mu s)) g(Q)."""
    damp = 2.0 * math.sqrt(mu)
    rs = math.sqrt(s)
    gain = 1.0 + math.sqrt(mu * s)

    def field(t, z):
        Q, J = z[0], z[1]
        return np.stack((J, -damp * J - rs * f.hvp(Q, J) - gain * f.gradient(Q)))

    return field


def phase_rhs_nag(f, s: float, mu: float, state: FlowState) -> FlowState:
    d = phase_field_nag(f, s, mu)(state.t, state.packed())
    return FlowState(d[0], d[1], state.t)


def hr_tm_field(f, params: TmHrParams) -> Callable:
    """dY = W, dW = -2 sqrt(M) W - gamma (1 + sqrt(M alpha)) sqrt(alpha) H(Y) W - (1 + sqrt(M alpha)) g(Y)."""
    g_gain = 1.0 + math.sqrt(params.M * params.alpha)
    damp = 2.0 * math.sqrt(params.M)
    h_gain = params.gamma * g_gain * math.sqrt(params.alpha)

    def field(t, z):
        Y, W = z[0], z[1]
        return np.stack((W, -damp * W - h_gain * f.hvp(Y, W) - g_gain * f.gradient(Y)))

    return field


def hr_tm_rhs(f, params: TmHrParams, state: FlowState) -> FlowState:
    d = hr_tm_field(f, params)(state.t, state.packed())
    return FlowState(d[0], d[1], state.t)


def convex_flow_field(f, params: ConvexFlowParams, variant: str = "shi") -> Callable:
    """Time-varying flows with n(t) = p/t, q(t) = C p t^(p-1).

    dX = n (V - X) - sqrt(s) g(X)
    dV = -q g(X) - sqrt(s) k(t) g(X)

    k(t) = (q' n - n' q) / (n^2 q) for the "shi" variant, which is identically 1
    on the power-law family; the "laborde" variant has k = 0.
    """
    if variant not in ("shi", "laborde"):
        raise ValueError(f"unknown variant {variant!r}")
    rs = math.sqrt(params.s)
    extra = rs if variant == "shi" else 0.0
    t_min = params.t0 * (1 - 1e-12)

    def field(t, z):
        if t < t_min:
            raise SingularTimeError(f"t = {t} is before t0 = {params.t0}")
        X, V = z[0], z[1]
        g = f.gradient(X)
        return np.stack((params.n(t) * (V - X) - rs * g, -(params.q(t) + extra) * g))

    return field


def convex_flow_rhs(f, params: ConvexFlowParams, state: FlowState, variant: str = "shi") -> FlowState:
    d = convex_flow_field(f, params, variant)(state.t, state.packed())
    return FlowState(d[0], d[1], state.t)


def shi_correction(params: ConvexFlowParams, t: float) -> float:
    """(q' n - n' q) / (n^2 q) evaluated from the closed forms of n and q."""
    p, C = params.p_exp, params.C
    n, q = params.n(t), params.q(t)
    n_dot = -p / t ** 2
    q_dot = C * p * (p - 1) * t ** (p - 2)
    return (q_dot * n - n_dot * q) / (n * n * q)


# -- integration -----------------------------------------------------------------

@dataclass
class FlowTrajectory:
    """Recorded times ``t`` (T,) and packed states ``z`` (T, 2, ..., d)."""
    t: np.ndarray
    z: np.ndarray
    stride: int
    dt: float

    @property
    def primary(self):
        return self.z[:, 0]

    @property
    def secondary(self):
        return self.z[:, 1]

    def state(self, i) -> FlowState:
        return FlowState(self.z[i, 0], self.z[i, 1], float(self.t[i]))


def default_dt(s: float) -> float:
    return min(math.sqrt(s) / 10.0, 1e-2) if s > 0 else 1e-2


def rk4_solve(field: Callable, state0: FlowState, t_end: float, dt: float,
              record_stride: int = 1) -> FlowTrajectory:
    """Classical fixed-step fourth-order Runge-Kutta.

    The step is shrunk slightly if needed so that a whole number of steps lands
    exactly on ``t_end``.
    """
    t0 = float(state0.t)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    n_steps = max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))
    h = (t_end - t0) / n_steps
    z = state0.packed()
    n_rec = n_steps // record_stride + 1 + (1 if n_steps % record_stride else 0)
    Z = np.empty((n_rec,) + z.shape)
    T = np.empty(n_rec)
    Z[0], T[0] = z, t0
    r = 1
    last_good = t0
    half, sixth = 0.5 * h, h / 6.0
    for i in range(n_steps):
        t = t0 + i * h
        k1 = field(t, z)
        k2 = field(t + half, z + half * k1)
        k3 = field(t + half, z + half * k2)
        k4 = field(t + h, z + h * k3)
        z = z + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        step = i + 1
        if step % record_stride == 0 or step == n_steps:
            if not np.all(np.isfinite(z)):
                raise IntegrationDivergedError(step, last_good)
            last_good = t0 + step * h
            Z[r], T[r] = z, last_good
            r += 1
    return FlowTrajectory(T[:r], Z[:r], record_stride, h)


def rk4_integrate(field: Callable, state0: FlowState, t_end: float, dt: float, f=None,
                  record_stride: int = 1, lyap=None):
    """Integrate and return telemetry records (one per recorded step).

    ``lyap`` optionally maps a FlowState to a Lyapunov value or LyapunovValue.
    Without an objective ``f`` the raw FlowTrajectory is returned instead.
    """
    traj = rk4_solve(field, state0, t_end, dt, record_stride)
    if f is None:
        return traj
    from .records import records_from_flow
    return records_from_flow(traj, f, lyap)
