"""Smooth strongly convex test objectives with known mu, L and minimizer.

Every method evaluates along the last axis, so ``x`` may carry leading batch
dimensions: ``value`` returns shape ``x.shape[:-1]`` and ``gradient`` returns
``x.shape``.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

from .errors import DimensionError, InvalidObjectiveError, MissingOptimumError

_EPS = np.finfo(float).eps


def _sigmoid_parts(z):
    """Return (sigma(-z), sigma(z)*sigma(-z)) evaluated without overflow."""
    sig_neg = expit(-z)
    return sig_neg, sig_neg * expit(z)


def _softplus_diff(z0, dz, sig_z0):
    """softplus(z0 + dz) - softplus(z0) with relative accuracy for small dz.

    Uses log((1+e^z)/(1+e^z0)) = log1p(sigma(z0) * expm1(dz)) for small
    offsets and the direct difference otherwise. Passing the offset dz rather
    than z keeps it free of the rounding in z itself.
    """
    near = np.abs(dz) <= 1.0
    w = sig_z0 * np.expm1(np.where(near, dz, 0.0))
    close = np.log1p(w)
    far = log_expit(-z0) - log_expit(-(z0 + dz))
    return np.where(near, close, far)


class Objective:
    """Base class. Subclasses implement ``value`` and ``gradient``."""

    has_analytic_hvp = False

    def __init__(self, dim: int, mu: float, L: float,
                 x_star: Optional[np.ndarray] = None, f_star: Optional[float] = None):
        if dim < 1:
            raise InvalidObjectiveError("dimension must be positive")
        if not (0.0 <= mu <= L) or not L > 0:
            raise InvalidObjectiveError(f"need 0 <= mu <= L and L > 0, got mu={mu}, L={L}")
        self.dim = int(dim)
        self.mu = float(mu)
        self.L = float(L)
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.f_star = None if f_star is None else float(f_star)

    @property
    def capabilities(self):
        return frozenset({"value", "gradient", "hessian_vector_product"})

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hvp(self, x, v):
        """Hessian-vector product by central differences of the gradient."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        scale = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        u = v / safe
        h = math.sqrt(_EPS) * (1.0 + np.linalg.norm(x, axis=-1, keepdims=True))
        out = (self.gradient(x + h * u) - self.gradient(x - h * u)) / (2.0 * h)
        return np.where(scale > 0, out * scale, 0.0)

    def f_gap(self, x):
        if self.f_star is None:
            raise MissingOptimumError("objective has no known f_star")
        return self.value(x) - self.f_star

    def dist(self, x):
        if self.x_star is None:
            raise MissingOptimumError("objective has no known x_star")
        return np.linalg.norm(np.asarray(x, dtype=float) - self.x_star, axis=-1)

    def check_dim(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DimensionError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x


class Quadratic(Objective):
    """f(x) = 0.5 * sum(a_i x_i^2)."""

    has_analytic_hvp = True

    def __init__(self, diag):
        diag = np.asarray(diag, dtype=float).ravel()
        if diag.size == 0:
            raise InvalidObjectiveError("empty diagonal")
        if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise InvalidObjectiveError("diagonal entries must be positive and finite")
        self.diag = diag
        self.sorted_diag = np.sort(diag)
        super().__init__(diag.size, float(diag.min()), float(diag.max()),
                         x_star=np.zeros(diag.size), f_star=0.0)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(self.diag * x * x, axis=-1)

    def gradient(self, x):
        return self.diag * np.asarray(x, dtype=float)

    def hvp(self, x, v):
        return self.diag * np.asarray(v, dtype=float)

    def f_gap(self, x):
        return self.value(x)


class Logistic1D(Objective):
    """f(x) = 4(L - mu) log(1 + exp(-x)) + mu x^2 / 2 on the real line."""

    has_analytic_hvp = True

    def __init__(self, L: float, mu: float):
        if not (0 < mu < L):
            raise InvalidObjectiveError(f"need 0 < mu < L, got mu={mu}, L={L}")
        self.c = 4.0 * (L - mu)
        super().__init__(1, mu, L)
        xs = self._solve_minimizer()
        self.x_star = np.array([xs])
        self.f_star = float(self.value(self.x_star))
        self._sig_neg_star = float(_sigmoid_parts(xs)[0])

    def _grad_scalar(self, x):
        return float(self.gradient(np.array([x]))[0])

    def _solve_minimizer(self):
        # gradient descent with step 1/L, then Newton to the last ulp
        x = 0.0
        for _ in range(10_000_000):
            g = self._grad_scalar(x)
            if abs(g) <= 1e-12:
                break
            x -= g / self.L
        for _ in range(50):
            g = self._grad_scalar(x)
            h = float(self.hvp(np.array([x]), np.array([1.0]))[0])
            x_new = x - g / h
            if x_new == x:
                break
            x = x_new
        best = x
        for cand in (np.nextafter(x, -np.inf), np.nextafter(x, np.inf)):
            if abs(self._grad_scalar(cand)) < abs(self._grad_scalar(best)):
                best = float(cand)
        return best

    def value(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return -self.c * log_expit(x) + 0.5 * self.mu * x * x

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return -self.c * expit(-x) + self.mu * x

    def hessian(self, x):
        _, ss = _sigmoid_parts(np.asarray(x, dtype=float))
        return self.c * ss + self.mu

    def hvp(self, x, v):
        return self.hessian(x) * np.asarray(v, dtype=float)

    def f_gap(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        xs = self.x_star[0]
        d = x - xs
        return (self.c * _softplus_diff(-xs, -d, self._sig_neg_star)
                + 0.5 * self.mu * d * (x + xs))


class RegularizedLogistic(Objective):
    """f(x) = mean(log(1 + exp(-y_i <a_i, x>))) + mu/2 ||x||^2."""

    has_analytic_hvp = True

    def __init__(self, features, labels, mu: float):
        A = np.atleast_2d(np.asarray(features, dtype=float))
        y = np.asarray(labels, dtype=float).ravel()
        if A.shape[0] < 1:
            raise InvalidObjectiveError("need at least one sample")
        if A.shape[0] != y.size:
            raise DimensionError(f"{A.shape[0]} feature rows but {y.size} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidObjectiveError("labels must be -1 or +1")
        if not mu > 0:
            raise InvalidObjectiveError("mu must be positive")
        self.A = A
        self.y = y
        self.n_samples = A.shape[0]
        self._M = A * y[:, None]  # rows y_i a_i
        spec = float(np.linalg.norm(A, 2)) if A.any() else 0.0
        super().__init__(A.shape[1], mu, mu + spec ** 2 / (4.0 * self.n_samples))
        self.x_star = self._solve_minimizer()
        self._z_star = self._M @ self.x_star
        self._sig_neg_z_star = _sigmoid_parts(self._z_star)[0]
        self.f_star = float(self.value(self.x_star))

    def _margins(self, x):
        return np.asarray(x, dtype=float) @ self._M.T

    def value(self, x):
        x = np.asarray(x, dtype=float)
        z = self._margins(x)
        return -np.mean(log_expit(z), axis=-1) + 0.5 * self.mu * np.sum(x * x, axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        sig_neg, _ = _sigmoid_parts(self._margins(x))
        return -(sig_neg @ self._M) / self.n_samples + self.mu * x

    def hvp(self, x, v):
        _, ss = _sigmoid_parts(self._margins(x))
        Mv = np.asarray(v, dtype=float) @ self._M.T
        return ((ss * Mv) @ self._M) / self.n_samples + self.mu * np.asarray(v, dtype=float)

    def _hessian(self, x):
        _, ss = _sigmoid_parts(self._M @ x)
        return (self._M.T * ss) @ self._M / self.n_samples + self.mu * np.eye(self.dim)

    def _solve_minimizer(self):
        x = np.zeros(self.dim)
        for _ in range(10_000_000):
            g = self.gradient(x)
            if np.linalg.norm(g) <= 1e-12:
                break
            x = x - g / self.L
        # a few Newton refinements take the residual down to round-off
        best, best_g = x, np.linalg.norm(self.gradient(x))
        for _ in range(5):
            x = x - np.linalg.solve(self._hessian(x), self.gradient(x))
            gn = np.linalg.norm(self.gradient(x))
            if gn < best_g:
                best, best_g = x, gn
        return best

    def f_gap(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.x_star
        dz = d @ self._M.T
        loss = np.mean(_softplus_diff(-self._z_star, -dz, self._sig_neg_z_star), axis=-1)
        return loss + 0.5 * self.mu * np.sum(d * (x + self.x_star), axis=-1)


def make_quadratic(diag) -> Quadratic:
    return Quadratic(diag)


def make_logistic_1d(L: float, mu: float) -> Logistic1D:
    return Logistic1D(L, mu)


def make_reg_logistic(features, labels, mu: float) -> RegularizedLogistic:
    return RegularizedLogistic(features, labels, mu)


def random_reg_logistic(n_samples=1000, dim=10, mu=1e-3, seed=0) -> RegularizedLogistic:
    """Standard-normal features and uniform +-1 labels drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_samples, dim))
    y = rng.choice([-1.0, 1.0], size=n_samples)
    return RegularizedLogistic(A, y, mu)


def load_reg_logistic_csv(path, mu: float, header: bool = False) -> RegularizedLogistic:
    """Rows are samples: feature columns followed by a +-1 label column."""
    data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    if data.shape[1] < 2:
        raise DimensionError("CSV needs at least one feature column and a label column")
    return RegularizedLogistic(data[:, :-1], data[:, -1], mu)
