"""Experiment harness: parse a key = value config, build the objective and
method, run it, record telemetry and optionally verify a guarantee."""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import classic, flows, gm2, lyapunov, objectives, spectral
from .errors import ConfigError, Gm2Error, InadmissibleParametersError
from .records import CSV_HEADER, TrajectoryRecord, build_records

DISCRETE_METHODS = ("gm2", "ee", "nag_sc", "nag_cvx", "tm", "qhm", "rate_matching")
FLOW_METHODS = ("gm2_ode", "phase_nag", "hr_tm", "convex_flow")
OBJECTIVES = ("quadratic", "logistic1d", "reg_logistic")
VERIFY_KINDS = ("none", "lyapunov", "gap_bound", "rate", "gradient_norm", "spectral", "iqc")

_FLOAT_KEYS = {"s", "L", "mu", "m", "n", "p", "q", "a", "gamma", "alpha", "beta", "t_end", "dt",
               "tol", "rate", "lam", "p_exp", "C", "t0", "xi"}
_INT_KEYS = {"iterations", "stride", "seed", "n_samples", "dim", "burn_in"}
_VECTOR_KEYS = {"diag", "x0"}
_TEXT_KEYS = {"objective", "method", "preset", "verify", "variant", "data", "header", "v0",
              "metric", "map_from_sie", "init", "qhm_buffer", "sequence"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _VECTOR_KEYS | _TEXT_KEYS


@dataclass
class ExperimentConfig:
    values: Dict[str, object] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)
    source: str = "<config>"

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required key '{key}'", line=None, field=key)
        return self.values[key]

    def fail(self, key, message):
        raise ConfigError(message, line=self.lines.get(key), field=key)

    @property
    def seed(self) -> int:
        return int(self.values.get("seed", 0))

    @property
    def stride(self) -> int:
        return int(self.values.get("stride", 1))


def _parse_value(key, raw, lineno):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _VECTOR_KEYS:
            return np.array([float(t) for t in raw.replace(";", ",").split(",") if t.strip()])
        return raw.strip()
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for '{key}'", line=lineno, field=key) from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig(source=source)
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key '{key}'", line=lineno, field=key)
        if key in cfg.values:
            raise ConfigError(f"duplicate key '{key}'", line=lineno, field=key)
        cfg.values[key] = _parse_value(key, raw, lineno)
        cfg.lines[key] = lineno
    _validate(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="path") from None
    return parse_config(text, source=path)


def _validate(cfg: ExperimentConfig):
    obj = cfg.get("objective")
    if obj is not None and obj not in OBJECTIVES:
        cfg.fail("objective", f"objective must be one of {OBJECTIVES}")
    method = cfg.get("method")
    if method is not None and method not in DISCRETE_METHODS + FLOW_METHODS:
        cfg.fail("method", f"method must be one of {DISCRETE_METHODS + FLOW_METHODS}")
    if cfg.get("verify", "none") not in VERIFY_KINDS:
        cfg.fail("verify", f"verify must be one of {VERIFY_KINDS}")
    for key in ("s", "dt", "t_end", "L"):
        if key in cfg.values and not cfg.values[key] > 0:
            cfg.fail(key, f"'{key}' must be positive")
    for key in ("iterations", "stride"):
        if key in cfg.values and cfg.values[key] < 1:
            cfg.fail(key, f"'{key}' must be >= 1")
    if cfg.get("preset") is not None:
        try:
            gm2._as_method(cfg.get("preset"))
        except Gm2Error as exc:
            cfg.fail("preset", str(exc))


# -- construction ------------------------------------------------------------------

def build_objective(cfg: ExperimentConfig):
    kind = cfg.get("objective", "quadratic")
    try:
        if kind == "quadratic":
            return objectives.make_quadratic(cfg.get("diag", np.array([1.0])))
        if kind == "logistic1d":
            return objectives.make_logistic_1d(cfg.get("L", 1.0), cfg.get("mu", 0.01))
        if cfg.get("data"):
            header = str(cfg.get("header", "false")).lower() in ("1", "true", "yes")
            return objectives.load_reg_logistic_csv(cfg.get("data"), cfg.get("mu", 1e-3), header=header)
        return objectives.random_reg_logistic(cfg.get("n_samples", 1000), cfg.get("dim", 10),
                                              cfg.get("mu", 1e-3), seed=cfg.seed)
    except (Gm2Error, OSError, ValueError) as exc:
        raise ConfigError(f"cannot build objective: {exc}", line=cfg.lines.get("objective"),
                          field="objective") from None


def default_x0(f, cfg: ExperimentConfig):
    if "x0" in cfg.values:
        x0 = np.asarray(cfg.get("x0"), dtype=float)
        if x0.size == 1 and f.dim > 1:
            x0 = np.full(f.dim, float(x0[0]))
        if x0.size != f.dim:
            cfg.fail("x0", f"x0 has {x0.size} entries, objective has dimension {f.dim}")
        return x0
    if isinstance(f, objectives.Logistic1D):
        return np.array([10.0])
    if isinstance(f, objectives.RegularizedLogistic):
        return np.zeros(f.dim)
    return np.ones(f.dim)


def step_size(f, cfg: ExperimentConfig) -> float:
    return float(cfg.get("s", 1.0 / f.L))


def build_params(f, cfg: ExperimentConfig, s: float) -> gm2.Gm2Params:
    try:
        if cfg.get("preset"):
            name = gm2._as_method(cfg.get("preset"))
            extra = None
            if name is gm2.Method.QHM:
                extra = cfg.get("a", 0.25)
            elif name is gm2.Method.HNAG:
                alpha = cfg.get("alpha", math.sqrt(f.mu / f.L))
                extra = (cfg.get("gamma", f.mu * (1 - alpha)), alpha, cfg.get("beta", math.sqrt(s)))
            params = gm2.preset(name, f, s, extra)
        else:
            params = gm2.Gm2Params(*(cfg.get(k, 0.0) for k in ("m", "n", "p", "q")))
    except Gm2Error as exc:
        field_name = "preset" if cfg.get("preset") else "m"
        raise ConfigError(f"invalid parameters: {exc}", line=cfg.lines.get(field_name),
                          field=field_name) from None
    return params


# -- results -------------------------------------------------------------------------

@dataclass
class RunResult:
    records: List[TrajectoryRecord]
    report: Optional[dict]
    sequence: np.ndarray  # the compared sequence (x for GM2, y for NAG, ...)
    seed: int = 0

    @property
    def passed(self) -> bool:
        return self.report is None or bool(self.report.get("passed", True))


def _decay_dict(rep: lyapunov.DecayReport, **extra):
    out = {"passed": rep.passed, "worst_ratio": rep.worst_ratio, "worst_index": rep.worst_index,
           "fitted_rate": rep.fitted_rate, "theoretical_rate": rep.theoretical_rate,
           "floor_hits": rep.floor_hits}
    out.update(extra)
    return out


def _discrete_run(f, cfg: ExperimentConfig):
    """Returns (ks, X, V or None, compared sequence, params or None, s, lyapunov series or None)."""
    method = cfg.get("method", "gm2")
    s = step_size(f, cfg)
    n_iter = int(cfg.get("iterations", 1000))
    x0 = default_x0(f, cfg)

    if method in ("gm2", "ee"):
        params = build_params(f, cfg, s)
        step = gm2.gm2_step
        v0_mode = str(cfg.get("v0", "auto"))
        sie = params
        if method == "ee":
            step = gm2.ee_step
            if str(cfg.get("map_from_sie", "false")).lower() in ("1", "true", "yes"):
                params = gm2.ee_params_from_sie(sie, s)
                if v0_mode == "auto":
                    v0_mode = "ee_aligned"
        if v0_mode == "tm":
            c = classic.tm_coefficients(f.mu, f.L)
            start = classic.tm_gm2_start(f, c, classic.tm_init(x0))
            x0, v0 = start.x, start.v
        elif v0_mode == "ee_aligned":
            v0 = gm2.ee_initial_v(x0, sie, s, f)
        elif v0_mode == "auto":
            v0 = gm2.initial_v(x0, params, f) if params.n > 0 else x0.copy()
        else:
            v0 = _parse_value("x0", v0_mode, cfg.lines.get("v0"))
            if v0.size != f.dim:
                cfg.fail("v0", "v0 dimension mismatch")
        X, V = gm2.gm2_trajectory(params, s, f, x0, v0, n_iter, step=step)
        lyap = None
        if method == "gm2" and params.p > 0:
            lyap = lyapunov.lyap_disc_sc(params, s, f, gm2.Gm2State(X, V)).value
        return np.arange(n_iter + 1), X, V, X, params, s, lyap

    if method == "nag_sc":
        st = classic.nag_sc_init(x0)
        Xs, Ys = [st.current], [st.auxiliary]
        for _ in range(n_iter):
            st = classic.nag_sc_step(f, s, st)
            Xs.append(st.current)
            Ys.append(st.auxiliary)
        X = np.array(Xs)
        return np.arange(n_iter + 1), X, np.array(Ys), np.array(Ys), None, s, None

    if method == "nag_cvx":
        st = classic.nag_cvx_init(f, s, x0)
        Xs, Vs = [st.current], [st.auxiliary]
        for _ in range(n_iter):
            st = classic.nag_cvx_step(f, s, st)
            Xs.append(st.current)
            Vs.append(st.auxiliary)
        X = np.array(Xs)
        ks = np.arange(1, n_iter + 2)
        lyap = np.full(len(ks), np.nan)
        lyap[:-1] = lyapunov.lyap_disc_cvx(s, f, X[:-1], X[1:], ks[:-1]).value
        lyap = [None if not np.isfinite(v) else float(v) for v in lyap]
        return ks, X, np.array(Vs), X, None, s, lyap

    if method == "tm":
        c = classic.tm_coefficients(f.mu, f.L)
        st = classic.tm_init(x0)
        Ys, Xs = [], []
        for _ in range(n_iter + 1):
            y, x = classic.tm_outputs(c, st)
            Ys.append(y)
            Xs.append(x)
            st = classic.tm_step(f, c, st)
        Y = np.array(Ys)
        # y_k is where the gradient is taken; x_k is the method's reported output
        seq = np.array(Xs) if cfg.get("sequence", "y") == "x" else Y
        return np.arange(n_iter + 1), np.array(Xs), Y, seq, None, s, None

    if method == "qhm":
        a = float(cfg.get("a", 0.25))
        try:
            params, b = classic.qhm_params_map(a, f, s)
        except InadmissibleParametersError as exc:
            raise ConfigError(f"QHM parameters inadmissible: {exc.constraint}",
                              line=cfg.lines.get("a"), field="a") from None
        buf = None
        if cfg.get("qhm_buffer", "aligned") == "aligned":
            buf = classic.qhm_aligned_buffer(f, params, a, b, s, x0)
        st = classic.qhm_init(x0, buf)
        qp = classic.QhmParams(a, b, s)
        Xs = [st.current]
        for _ in range(n_iter):
            st = classic.qhm_step(f, qp, st)
            Xs.append(st.current)
        X = np.array(Xs)
        return np.arange(n_iter + 1), X, None, X, params, s, None

    if method == "rate_matching":
        variant = cfg.get("variant", "perturbed")
        st = classic.rate_matching_init(x0)
        Xs = [st.current]
        for _ in range(n_iter):
            st = classic.rate_matching_step(f, s, st, variant)
            Xs.append(st.current)
        X = np.array(Xs)
        return np.arange(n_iter + 1), X, None, X, None, s, None

    cfg.fail("method", f"'{method}' is not a discrete method")


def _verify_discrete(f, cfg, kind, ks, X, V, params, s, lyap):
    tol = cfg.get("tol")
    method = cfg.get("method", "gm2")
    if kind == "lyapunov":
        if method == "nag_cvx":
            return gradient_norm_report(f, s, X, ks, tol=1e-12 if tol is None else tol)
        if params is None or lyap is None:
            cfg.fail("verify", f"no discrete Lyapunov function for method '{method}'")
        bad = params.discrete_violations(f, s)
        if bad:
            return {"passed": False, "status": "no guarantee", "violated": bad}
        rep = lyapunov.certify_decay(lyap, 1.0 - params.q * math.sqrt(s), "geometric",
                                     1e-12 if tol is None else tol,
                                     atol=lyapunov.resolution_floor(f, params, s))
        return _decay_dict(rep, status="certified" if rep.passed else "violated")
    if kind == "gap_bound":
        if params is None:
            cfg.fail("verify", "gap_bound needs GM2-form parameters")
        return gap_bound_report(f, params, s, X, V)
    if kind == "rate":
        rate = cfg.get("rate")
        if rate is None:
            cfg.fail("rate", "verify = rate needs 'rate' (per-step contraction factor)")
        gaps = np.atleast_1d(f.f_gap(X))
        slope = lyapunov.fit_log_slope(ks.astype(float), gaps)
        fitted = math.exp(slope) if math.isfinite(slope) else math.nan
        tol = 0.05 if tol is None else tol
        # f-gap contracts like ratio^2 per step when iterates contract like ratio
        passed = math.isfinite(fitted) and fitted <= rate ** 2 * (1 + tol)
        return {"passed": bool(passed), "fitted_factor": fitted, "required_factor": rate ** 2}
    if kind == "gradient_norm":
        return gradient_norm_report(f, s, X, ks, tol=1e-12 if tol is None else tol)
    cfg.fail("verify", f"verify = {kind} does not apply to discrete runs")


def gap_bound_report(f, params, s, X, V, floor=0.0):
    """f(x_k) - f* <= C (1 - q sqrt(s))^k with C = eps(0) / (1 - n p s L).

    The constant follows from the discrete Lyapunov function because
    ||g||^2 <= 2 L (f - f*).
    """
    rs = math.sqrt(s)
    eps0 = float(lyapunov.lyap_disc_sc(params, s, f, gm2.Gm2State(X[0], V[0])).value)
    shrink = 1.0 - params.n * params.p * s * f.L
    if not shrink > 0:
        return {"passed": False, "status": "no guarantee", "violated": ["n p s L < 1"]}
    C = eps0 / shrink
    k = np.arange(len(X))
    bound = C * (1.0 - params.q * rs) ** k
    gaps = np.atleast_1d(f.f_gap(X))
    ok_strict = gaps <= bound
    ok = gaps <= bound + floor
    with np.errstate(divide="ignore", invalid="ignore"):
        tight = np.max(np.where(bound > 0, gaps / (1.0 - params.q * rs) ** k, 0.0))
    return {"passed": bool(np.all(ok)), "C": C, "fitted_C": float(tight),
            "violations": int(np.sum(~ok)), "floor_hits": int(np.sum(ok & ~ok_strict)),
            "min_bound": float(bound[-1])}


def gradient_norm_report(f, s, X, ks, tol=1e-12, use_floor=True):
    """Checks along a convex NAG run started at x_1 (X[0] = x_1, ks[0] = 1).

    - (k^3 s^2 / 12) min_{i<k} ||g(x_i)||^2 <= ||x_1 - x*||^2 (x_0 taken as x_1)
    - (s k (k+2) / 2) (f(x_k) - f*) <= ||x_1 - x*||^2
    - per-step descent of the Lyapunov function, including the k = 0 step.

    The energy argument alone gives the looser constants 24 and 4; those ratios
    are reported as ``proof_*`` diagnostics and never fail the check.

    Descent steps that pass only within the energy's double-precision
    resolution are counted in ``floor_hits``.
    """
    X = np.asarray(X, dtype=float)
    r0 = float(np.sum((X[0] - f.x_star) ** 2))
    g = f.gradient(X)
    gn = np.sum(g * g, axis=-1)
    gaps = np.atleast_1d(f.f_gap(X))
    k = ks.astype(float)
    # min over i < k, with i = 0 contributing x_0 = x_1
    run_min = np.minimum.accumulate(gn)
    lhs_grad = k ** 3 * s ** 2 / 12.0 * np.concatenate(([gn[0]], run_min[:-1]))
    lhs_val = s * k * (k + 2) / 2.0 * gaps
    grad_bad = int(np.sum(lhs_grad > r0))
    val_bad = int(np.sum(lhs_val > r0))
    # Lyapunov sequence eps(0), eps(1), ..., eps(K-1)
    lv = lyapunov.lyap_disc_cvx(s, f, X[:-1], X[1:], k[:-1])
    eps = np.concatenate(([0.5 * r0], lv.value))
    mixed = np.concatenate(([0.5 * r0], lv.components["mixed"]))
    kk = np.concatenate(([0.0], k[:-1]))  # index of each eps entry
    gk = np.concatenate(([gn[0]], gn[:-1]))  # ||g(x_k)||^2 aligned with eps entries
    drop = eps[1:] - eps[:-1]
    allowed = -(s ** 2) * kk[:-1] * (kk[:-1] + 2) / 8.0 * gk[:-1] + tol * np.abs(eps[:-1])
    floor = lyapunov.convex_resolution_floor(f, kk[1:], mixed[1:]) if use_floor else 0.0
    strict_bad = drop > allowed
    bad = drop > allowed + floor
    descent_bad = int(np.sum(bad))
    return {"passed": grad_bad == 0 and val_bad == 0 and descent_bad == 0,
            "grad_bound_violations": grad_bad, "value_bound_violations": val_bad,
            "descent_violations": descent_bad, "floor_hits": int(np.sum(strict_bad & ~bad)),
            "max_grad_ratio": float(np.max(lhs_grad) / r0) if r0 > 0 else 0.0,
            "max_value_ratio": float(np.max(lhs_val) / r0) if r0 > 0 else 0.0,
            "proof_grad_ratio": float(np.max(lhs_grad) / (2 * r0)) if r0 > 0 else 0.0,
            "proof_value_ratio": float(np.max(lhs_val) / (2 * r0)) if r0 > 0 else 0.0}


def _flow_run(f, cfg: ExperimentConfig):
    method = cfg.get("method", "gm2_ode")
    s = float(cfg.get("s", 1.0 / f.L))
    x0 = default_x0(f, cfg)
    dt = float(cfg.get("dt", flows.default_dt(s)))
    t_end = float(cfg.get("t_end", 100.0))
    lyap_fn = None
    params = None
    if method == "gm2_ode":
        params = build_params(f, cfg, s)
        v0 = _vector_or_zero(cfg, "v0", f, x0)
        field_fn = flows.gm2_field(params, f)
        state0 = flows.FlowState(x0, v0, 0.0)
        if params.p > 0:
            if abs(params.n - params.q) <= 1e-12 * max(params.q, 1e-300):
                lyap_fn = ("cont_a", params.q)
            else:
                lyap_fn = ("cont_b", params.n)
    elif method == "phase_nag":
        field_fn = flows.phase_field_nag(f, s, f.mu)
        state0 = flows.FlowState(x0, _vector_or_zero(cfg, "v0", f, x0, zero=True), 0.0)
    elif method == "hr_tm":
        hp = flows.tm_hr_params(f.mu, f.L, xi=float(cfg.get("xi", 2.0 / 3.0)))
        field_fn = flows.hr_tm_field(f, hp)
        state0 = flows.FlowState(x0, _vector_or_zero(cfg, "v0", f, x0, zero=True), 0.0)
    elif method == "convex_flow":
        cp = flows.ConvexFlowParams(p_exp=float(cfg.get("p_exp", 2.0)), C=float(cfg.get("C", 0.25)),
                                    s=s, t0=float(cfg.get("t0", math.sqrt(s))))
        field_fn = flows.convex_flow_field(f, cp, cfg.get("variant", "shi"))
        state0 = flows.FlowState(x0, _vector_or_zero(cfg, "v0", f, x0), cp.t0)
    else:
        cfg.fail("method", f"'{method}' is not a flow")
    traj = flows.rk4_solve(field_fn, state0, t_end, dt, cfg.stride)
    return traj, params, lyap_fn, method


def _vector_or_zero(cfg, key, f, x0, zero=False):
    """Second state variable: explicit value, or zero for second-order forms and
    1-D logistic runs, or a copy of x0 otherwise."""
    raw = cfg.get(key)
    if raw is None or raw == "auto":
        if zero or isinstance(f, objectives.Logistic1D):
            return np.zeros(f.dim)
        return x0.copy()
    v = _parse_value("x0", raw, cfg.lines.get(key))
    if v.size == 1 and f.dim > 1:
        v = np.full(f.dim, float(v[0]))
    if v.size != f.dim:
        cfg.fail(key, f"{key} dimension mismatch")
    return v


def run(config: ExperimentConfig, stride: Optional[int] = None, verify: Optional[str] = None) -> RunResult:
    """Run one experiment. Deterministic given the config (including its seed)."""
    if stride is not None:
        config.values["stride"] = int(stride)
    f = build_objective(config)
    method = config.get("method", "gm2")
    kind = verify or config.get("verify", "none")
    if method in FLOW_METHODS:
        traj, params, lyap_fn, _ = _flow_run(f, config)
        lyap_vals = None
        report = None
        if lyap_fn is not None:
            which, rate = lyap_fn
            st = flows.FlowState(traj.primary, traj.secondary)
            lv = (lyapunov.lyap_cont_a(params, f, st) if which == "cont_a"
                  else _quiet_cont_b(params, f, st))
            lyap_vals = np.asarray(lv.value)
            if kind in ("lyapunov", "rate"):
                tol = config.get("tol", 1e-3 if kind == "lyapunov" else 0.05)
                if kind == "lyapunov":
                    rep = lyapunov.certify_decay(lyap_vals, rate, "exponential", tol, times=traj.t)
                    report = _decay_dict(rep, function=which)
                else:
                    slope = lyapunov.fit_log_slope(traj.t, np.atleast_1d(f.f_gap(traj.primary)))
                    report = {"passed": bool(slope <= -rate * (1 - tol)), "fitted_rate": -slope,
                              "required_rate": rate}
        if kind == "rate" and report is None:
            rate = config.get("rate")
            if rate is None:
                config.fail("rate", "verify = rate needs 'rate'")
            tol = config.get("tol", 0.05)
            slope = lyapunov.fit_log_slope(traj.t, np.atleast_1d(f.f_gap(traj.primary)))
            report = {"passed": bool(slope <= -rate * (1 - tol)), "fitted_rate": -slope,
                      "required_rate": rate}
        elif kind not in ("none", "lyapunov", "rate"):
            config.fail("verify", f"verify = {kind} does not apply to flows")
        elif kind == "lyapunov" and report is None:
            config.fail("verify", "no Lyapunov function for this flow")
        ks = np.arange(len(traj.t)) * traj.stride
        ks[-1] = int(round((traj.t[-1] - traj.t[0]) / traj.dt))
        recs = build_records(ks, traj.t, traj.primary,
                             traj.secondary if method == "gm2_ode" or method == "convex_flow" else None,
                             f, None if lyap_vals is None else list(lyap_vals))
        return RunResult(recs, report, traj.primary, config.seed)

    ks, X, V, seq, params, s, lyap = _discrete_run(f, config)
    report = None if kind == "none" else _verify_discrete(f, config, kind, ks, X, V, params, s, lyap)
    stride_n = config.stride
    idx = np.arange(0, len(ks), stride_n)
    if idx[-1] != len(ks) - 1:
        idx = np.append(idx, len(ks) - 1)
    ts = ks * math.sqrt(s)
    recs = build_records(ks[idx], ts[idx], X[idx], None if V is None else V[idx], f,
                         None if lyap is None else [lyap[i] for i in idx])
    return RunResult(recs, report, seq, config.seed)


def _quiet_cont_b(params, f, st):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return lyapunov.lyap_cont_b(params, f, st)


@dataclass
class CompareReport:
    passed: bool
    max_deviation: float
    per_step: np.ndarray
    tol: float
    metric: str
    pointwise_deviation: float = math.nan

    def to_dict(self):
        return {"passed": self.passed, "max_deviation": self.max_deviation, "tol": self.tol,
                "metric": self.metric, "steps": int(len(self.per_step)),
                "pointwise_deviation": self.pointwise_deviation}


def relative_deviation(a, b, window: int = 2):
    """Per-step max_i |a_i - b_i| scaled by the size of the recursion state.

    The state of a two-step method at step k is (x_k, x_{k-1}), so the scale is
    the largest entry of either run over the last ``window`` steps. A purely
    pointwise ratio blows up where a coordinate crosses zero; ``window=1``
    gives that stricter, ill-conditioned variant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    A = np.abs(a).reshape(a.shape[0], -1).max(axis=1)
    B = np.abs(b).reshape(b.shape[0], -1).max(axis=1)
    size = np.maximum(A, B)
    scale = size.copy()
    for lag in range(1, window):
        scale[lag:] = np.maximum(scale[lag:], size[:-lag])
    scale = np.maximum(scale, np.finfo(float).tiny)
    diff = np.abs(a - b).reshape(a.shape[0], -1).max(axis=1)
    return diff / scale


def compare(config_a: ExperimentConfig, config_b: ExperimentConfig, metric: str = "x_sequence",
            tol: float = 1e-12) -> CompareReport:
    ra, rb = run(config_a, verify="none"), run(config_b, verify="none")
    if metric == "x_sequence":
        A, B = ra.sequence, rb.sequence
    elif metric == "f_gap":
        A = np.array([r.f_gap for r in ra.records])[:, None]
        B = np.array([r.f_gap for r in rb.records])[:, None]
    else:
        raise ConfigError(f"unknown metric {metric!r}", field="metric")
    if A.shape != B.shape:
        raise ConfigError(f"incompatible shapes {A.shape} and {B.shape}", field="iterations")
    dev = relative_deviation(A, B)
    worst = float(np.max(dev)) if dev.size else 0.0
    pointwise = float(np.max(relative_deviation(A, B, window=1))) if dev.size else 0.0
    return CompareReport(worst <= tol, worst, dev, tol, metric, pointwise)


def write_csv(path: str, records, seed: int = 0):
    """Write telemetry atomically: temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(f"# seed={int(seed)}\n")
            fh.write(CSV_HEADER + "\n")
            for rec in records:
                fh.write(rec.csv_row() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- analytic subcommands -----------------------------------------------------------

def spectral_report(config: ExperimentConfig) -> dict:
    f = build_objective(config)
    if not isinstance(f, objectives.Quadratic):
        config.fail("objective", "spectral analysis needs a quadratic objective")
    s = step_size(f, config)
    params = build_params(f, config, s)
    cont = spectral.quad_cont_eigs(params, f.diag)
    disc = spectral.quad_disc_eigs(params, s, f.diag)
    out = {
        "continuous": {"worst_rate": cont.worst_rate, "critically_damped": cont.critically_damped,
                       "modes": [_mode_dict(m) for m in cont.per_mode]},
        "discrete": {"worst_rate": disc.worst_rate, "critically_damped": disc.critically_damped,
                     "modes": [_mode_dict(m) for m in disc.per_mode]},
        "passed": True,
    }
    if config.get("verify", "none") == "spectral":
        n_iter = int(config.get("iterations", 500))
        burn = int(config.get("burn_in", n_iter // 2))
        x0 = default_x0(f, config)
        X, _ = gm2.gm2_trajectory(params, s, f, x0, None if params.n > 0 else x0, n_iter)
        emp = empirical_contraction(X, burn)
        tol = config.get("tol", 0.02)
        out["empirical_rate"] = emp
        out["passed"] = bool(abs(emp - disc.worst_rate) <= tol * disc.worst_rate)
    return out


def empirical_contraction(X, burn_in: int):
    """Geometric-mean per-step contraction of max_i |x_k,i| between burn_in and the end.

    The max norm is used because squaring tiny iterates underflows.
    """
    X = np.asarray(X, dtype=float)
    norms = np.abs(X).reshape(X.shape[0], -1).max(axis=1)
    k1 = len(norms) - 1
    if norms[burn_in] == 0 or norms[k1] == 0:
        return 0.0
    return float((norms[k1] / norms[burn_in]) ** (1.0 / (k1 - burn_in)))


def _mode_dict(m: spectral.ModeSpectrum):
    return {"a": m.a, "discriminant": m.discriminant,
            "eigenvalues": [[e.real, e.imag] for e in m.eigenvalues]}


def iqc_report(config: ExperimentConfig) -> dict:
    mu = config.get("mu")
    if mu is None:
        f = build_objective(config)
        mu = f.mu
    params = gm2.Gm2Params(*(config.get(k, 0.0) for k in ("m", "n", "p", "q")))
    try:
        cert = spectral.iqc_certificate(params, float(mu), config.get("lam"))
    except Gm2Error as exc:
        raise ConfigError(str(exc), line=config.lines.get("lam") or config.lines.get("n"),
                          field="lam") from None
    d = {k: getattr(cert, k) for k in ("lam", "p11", "p12", "p22", "t11", "t12", "t13", "t22",
                                       "t23", "t33", "p_psd", "t_nsd")}
    d["passed"] = bool(cert.p_psd and cert.t_nsd)
    d["certified_rate"] = spectral.certificate_rate(cert)
    return d


def to_json(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)
    return json.dumps(obj, default=default, sort_keys=True)
