import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gm2lab import classic, flows as F, gm2, lyapunov as Ly, objectives as O
from gm2lab.errors import MissingOptimumError, SingularTimeError

pos = st.floats(0.01, 10.0)


def _nag(mu, s):
    return gm2.Gm2Params(m=math.sqrt(s), n=math.sqrt(mu), p=1 / math.sqrt(mu), q=math.sqrt(mu))


# -- pointwise values --------------------------------------------------------------------------

def test_cont_a_examples():
    f = O.make_quadratic([1.0])
    P = gm2.Gm2Params(0.0, 1.0, 1.0, 1.0)
    # the velocity term vanishes at V = x* = 0, so only f(1) = 1/2 remains
    assert Ly.lyap_cont_a(P, f, F.FlowState(np.ones(1), np.zeros(1))).value == pytest.approx(0.5)
    assert Ly.lyap_cont_a(P, f, F.FlowState(np.ones(1), np.ones(1))).value == pytest.approx(1.0)
    assert Ly.lyap_cont_a(P, f, F.FlowState(np.zeros(1), np.zeros(1))).value == 0.0
    with pytest.raises(ValueError):
        Ly.lyap_cont_a(gm2.Gm2Params(0.0, 1.0, 0.0, 1.0), f, F.FlowState(np.ones(1), np.zeros(1)))


@given(st.floats(0.0, 2.0), pos, pos, st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_cont_b_equals_cont_a_when_n_equals_q(m, q, p, xv):
    f = O.make_quadratic([0.5, 2.0])
    P = gm2.Gm2Params(m, q, p, q)
    state = F.FlowState(np.array(xv[:2]), np.array(xv[2:]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = Ly.lyap_cont_b(P, f, state).value
    assert b == Ly.lyap_cont_a(P, f, state).value


def test_cont_b_flags_violations():
    f = O.make_quadratic([0.1, 1.0])
    with pytest.warns(UserWarning):
        v = Ly.lyap_cont_b(gm2.Gm2Params(10.0, 3.0, 1.0, 1.0), f, F.FlowState(np.ones(2), np.ones(2)))
    assert set(v.violations) == {"n <= 2q", "q <= p mu", "m <= 2p"}


def test_value_is_sum_of_components():
    f = O.make_logistic_1d(1.0, 0.01)
    v = Ly.lyap_disc_sc(_nag(0.01, 1.0), 1.0, f, gm2.Gm2State(np.array([3.0]), np.array([-1.0]), 0))
    assert v.value == sum(v.components.values())
    assert float(v) == v.value


def test_disc_sc_example():
    f = O.make_quadratic([1.0])
    P = gm2.Gm2Params(0.5, 1.0, 1.0, 1.0)
    v = Ly.lyap_disc_sc(P, 0.25, f, gm2.Gm2State(np.ones(1), np.array([0.5]), 0))
    assert v.value == pytest.approx(0.5, rel=1e-15)
    assert Ly.lyap_disc_sc(P, 0.25, f, gm2.Gm2State(np.zeros(1), np.zeros(1), 0)).value == 0.0


def test_disc_cvx_k0_is_half_distance():
    f = O.make_logistic_1d(1.0, 0.01)
    x1 = np.array([4.0])
    v = Ly.lyap_disc_cvx(1.0, f, np.array([7.0]), x1, 0)
    assert v.value == pytest.approx(0.5 * float(np.sum((x1 - f.x_star) ** 2)), rel=1e-15)
    with pytest.raises(ValueError):
        Ly.lyap_disc_cvx(1.0, f, x1, x1, -1)


def test_hrode_zero_at_optimum():
    f = O.make_quadratic([0.3, 1.0])
    for variant in ("a", "b"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = Ly.lyap_hrode(math.log(0.3), 0.3, 1.0, 0.1, f, np.zeros(2), np.zeros(2), variant)
        assert v.value == 0.0


def test_hrode_a_matches_cont_a_under_reparameterization():
    # alpha = log n, C = 1/p, m = sqrt(s), weight e^{beta} dropped (pointwise)
    f = O.make_quadratic([0.04, 1.0])
    mu, s = f.mu, 0.25
    P = _nag(mu, s)
    rng = np.random.default_rng(1)
    for _ in range(20):
        X, V = rng.normal(size=2), rng.normal(size=2)
        dX = F.gm2_rhs(P, f, F.FlowState(X, V)).primary
        h = Ly.lyap_hrode(math.log(P.n), math.sqrt(mu), 1 / P.p, s, f, X, dX, "a")
        a = Ly.lyap_cont_a(P, f, F.FlowState(X, V))
        assert h.value == pytest.approx(a.value, rel=1e-12)
        assert not h.violations


@given(pos, st.floats(0.0, 1.0), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_hrode_variants_coincide_when_rates_match(ea, s, xd):
    f = O.make_quadratic([0.5, 1.5])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        va = Ly.lyap_hrode(math.log(ea), ea, 0.3, s, f, np.array(xd[:2]), np.array(xd[2:]), "a", 2.0)
        vb = Ly.lyap_hrode(math.log(ea), ea, 0.3, s, f, np.array(xd[:2]), np.array(xd[2:]), "b", 2.0)
    assert vb.value == pytest.approx(va.value, rel=1e-12, abs=1e-15)


def test_hrode_violation_lists():
    assert Ly.hrode_violations(0.0, 2.0, 1.0, 0.0, 1.0, "a") == ("beta_dot <= e^alpha",)
    assert Ly.hrode_violations(0.0, 0.5, 1.0, 9.0, 1.0, "b") == ("C sqrt(s) <= 2",)
    with pytest.raises(ValueError):
        Ly.lyap_hrode(0.0, 1.0, 1.0, 0.0, O.make_quadratic([1.0]), np.zeros(1), np.zeros(1), "c")


def test_convex_weights_example():
    cp = F.ConvexFlowParams(p_exp=2.0, C=0.25, s=0.01, t0=0.1)
    t = 2.0
    assert Ly.convex_weight(cp, t, "laborde") == pytest.approx(1.0, rel=1e-15)
    # oracle: beta_t differentiated numerically
    h = 1e-6
    bdot = (cp.beta(t + h) - cp.beta(t - h)) / (2 * h)
    shi = math.exp(cp.beta(t)) + math.sqrt(cp.s) * math.exp(-2 * cp.alpha(t)) * bdot
    assert Ly.convex_weight(cp, t, "shi") == pytest.approx(shi, rel=1e-8)
    assert shi == pytest.approx(1.1, rel=1e-8)


@given(st.floats(2.0, 5.0), pos, st.floats(1e-4, 1.0), st.floats(0.2, 50.0))
def test_shi_weight_exceeds_laborde(p_exp, C, s, t):
    cp = F.ConvexFlowParams(p_exp=p_exp, C=C, s=s, t0=0.1)
    assert Ly.convex_weight(cp, t, "shi") > Ly.convex_weight(cp, t, "laborde")


def test_flow_convex_value_and_errors():
    f = O.make_quadratic([1.0])
    cp = F.ConvexFlowParams(s=0.01, t0=1.0)
    assert Ly.lyap_flow_convex(f, cp, np.zeros(1), np.zeros(1), 2.0).value == 0.0
    with pytest.raises(SingularTimeError):
        Ly.lyap_flow_convex(f, cp, np.zeros(1), np.zeros(1), 0.5)
    with pytest.raises(ValueError):
        Ly.convex_weight(cp, 2.0, "other")


def test_missing_optimum():
    class Bare(O.Objective):
        def value(self, x):
            return 0.0

        def gradient(self, x):
            return np.zeros_like(x)

    f = Bare(1, 1.0, 1.0)
    with pytest.raises(MissingOptimumError):
        Ly.lyap_disc_sc(_nag(1.0, 1.0), 1.0, f, gm2.Gm2State(np.zeros(1), np.zeros(1), 0))


# -- certify_decay ------------------------------------------------------------------------------

def test_certify_zero_series():
    assert Ly.certify_decay([0.0, 0.0, 0.0], 0.1).passed


def test_certify_exact_geometric():
    r = Ly.certify_decay([1.0, 0.5, 0.25], 0.5)
    assert r.passed and r.worst_ratio == 0.5
    assert r.fitted_rate == pytest.approx(0.5)


def test_certify_detects_violation():
    r = Ly.certify_decay([1.0, 0.6, 0.25], 0.5)
    assert not r.passed and r.worst_index == 0 and r.worst_ratio == pytest.approx(0.6)


def test_certify_errors():
    with pytest.raises(ValueError):
        Ly.certify_decay([1.0], 0.5)
    with pytest.raises(ValueError):
        Ly.certify_decay([1.0, np.nan], 0.5)
    with pytest.raises(ValueError):
        Ly.certify_decay([1.0, 0.5], 0.5, mode="exponential")
    with pytest.raises(ValueError):
        Ly.certify_decay([1.0, 0.5], 0.5, mode="linear")


def test_certify_exponential_mode():
    t = np.linspace(0, 10, 101)
    r = Ly.certify_decay(np.exp(-0.3 * t), 0.3, "exponential", tol=1e-12, times=t)
    assert r.passed and r.fitted_rate == pytest.approx(0.3)
    assert not Ly.certify_decay(np.exp(-0.3 * t), 0.31, "exponential", tol=1e-12, times=t).passed


def test_floor_absorbs_only_tiny_violations():
    series = [1e-3, 1e-4, 1e-30, 1.5e-30]
    strict = Ly.certify_decay(series, 0.5)
    loose = Ly.certify_decay(series, 0.5, atol=1e-29)
    assert not strict.passed and loose.passed and loose.floor_hits == 1
    assert not Ly.certify_decay([1.0, 0.9], 0.5, atol=1e-29).passed


# -- resolution floors ----------------------------------------------------------------------------

def test_resolution_floor_scale():
    f = O.make_logistic_1d(1.0, 0.01)
    fl = Ly.resolution_floor(f, _nag(0.01, 1.0), 1.0)
    h = 4 * np.spacing(max(1.0, abs(f.x_star[0])))
    assert fl == pytest.approx(0.5 * (1 + 0.01 + 0.01) * h * h)
    assert fl < 1e-28


def test_convex_floor_grows_with_k_and_mixed():
    f = O.make_logistic_1d(1.0, 0.01)
    a = Ly.convex_resolution_floor(f, 10, 1e-10)
    assert Ly.convex_resolution_floor(f, 100, 1e-10) > a
    assert Ly.convex_resolution_floor(f, 10, 1e-6) > a
    assert a < 1e-18


# -- along trajectories ----------------------------------------------------------------------------

def test_cont_a_envelope_along_nag_flow(fig1_logistic):
    f = fig1_logistic
    P = _nag(f.mu, 1.0)
    x0 = np.array([10.0])
    traj = F.rk4_solve(F.gm2_field(P, f), F.FlowState(x0, x0), 100.0, 1e-2, 10)
    eps = Ly.lyap_cont_a(P, f, F.FlowState(traj.primary, traj.secondary)).value
    env = eps[0] * np.exp(-P.q * traj.t) * (1 + 1e-3)
    assert np.all(eps <= env)


def test_cont_b_rate_hr_tm2(fig1_logistic):
    f = fig1_logistic
    rmu = math.sqrt(f.mu)
    P = gm2.Gm2Params(1.0, 2 * rmu, 1 / rmu, rmu)
    x0 = np.array([10.0])
    traj = F.rk4_solve(F.gm2_field(P, f), F.FlowState(x0, x0), 100.0, 1e-2, 10)
    eps = Ly.lyap_cont_b(P, f, F.FlowState(traj.primary, traj.secondary)).value
    rep = Ly.certify_decay(eps, P.n, "exponential", tol=0.05, times=traj.t)
    assert rep.passed


def test_disc_sc_contraction_on_fig1(fig1_logistic):
    f = fig1_logistic
    P = gm2.preset("NAG", f, 1.0)
    X, V = gm2.gm2_trajectory(P, 1.0, f, np.array([10.0]), None, 1000)
    eps = Ly.lyap_disc_sc(P, 1.0, f, gm2.Gm2State(X, V, 0)).value
    rep = Ly.certify_decay(eps, 1 - P.q, tol=1e-12, atol=Ly.resolution_floor(f, P, 1.0))
    assert rep.passed
    # floor hits only happen once the energy is at rounding scale
    small = eps[1:] < 1e4 * Ly.resolution_floor(f, P, 1.0)
    bad = eps[1:] > (1 - P.q) * eps[:-1] * (1 + 1e-12)
    assert not np.any(bad & ~small)


def test_disc_cvx_descent_on_quadratic():
    f = O.make_quadratic([0.3, 1.0])
    s = 1.0
    st_ = classic.nag_cvx_init(f, s, np.array([5.0, -2.0]))
    xs = [st_.current, st_.current]  # x_0 := x_1
    for _ in range(200):
        st_ = classic.nag_cvx_step(f, s, st_)
        xs.append(st_.current)
    X = np.array(xs)
    k = np.arange(len(X) - 1)
    eps = Ly.lyap_disc_cvx(s, f, X[:-1], X[1:], k).value
    g2 = np.sum(f.gradient(X[:-2]) ** 2, axis=-1)
    kk = k[:-1]
    assert np.all(eps[1:] - eps[:-1] <= -(s * s * kk * (kk + 2) / 8) * g2 + 1e-12)


def test_disc_cvx_monotone_on_fig1(fig1_logistic):
    f = fig1_logistic
    s = 1.0 / f.L
    st_ = classic.nag_cvx_init(f, s, np.array([10.0]))
    xs = [st_.current]
    for _ in range(10 ** 4):
        st_ = classic.nag_cvx_step(f, s, st_)
        xs.append(st_.current)
    X = np.array(xs)
    k = np.arange(1, len(X))
    eps = Ly.lyap_disc_cvx(s, f, X[:-1], X[1:], k)
    vals = eps.value
    floor = Ly.convex_resolution_floor(f, k[1:], eps.components["mixed"][1:])
    assert np.all(vals[1:] <= vals[:-1] + floor)
