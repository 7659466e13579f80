import math
import types
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gm2lab import classic, gm2, objectives as O
from gm2lab.errors import (InadmissibleParametersError, InitializationUndefinedError,
                           InvalidPresetError, NumericalFailureError)
from gm2lab.gm2 import Gm2Params, Gm2State

from gm2lab.runner import relative_deviation

from conftest import admissible_draw, random_diag_quadratic


def _nag_sc_y(f, s, x0, steps):
    st_ = classic.nag_sc_init(x0)
    ys = [st_.auxiliary]
    for _ in range(steps):
        st_ = classic.nag_sc_step(f, s, st_)
        ys.append(st_.auxiliary)
    return np.array(ys)


# -- parameters ---------------------------------------------------------------------

def test_params_reject_negative_and_nonfinite():
    with pytest.raises(InadmissibleParametersError):
        Gm2Params(-1.0, 0, 0, 0)
    with pytest.raises(InadmissibleParametersError):
        Gm2Params(1.0, math.nan, 0, 0)


def test_admissibility_names_violations(fig1_logistic):
    f = fig1_logistic
    P = gm2.preset("NAG", f, 1.0)
    assert P.discrete_admissible(f, 1.0)
    bad = Gm2Params(m=2.0, n=0.1, p=1.0, q=0.2).discrete_violations(f, 1.0)
    assert "n = q" in bad and "q/p <= mu" in bad and "m sqrt(s) <= 1/L" in bad
    assert "p > 0" in Gm2Params(1.0, 0.0, 0.0, 0.0).discrete_violations(f, 1.0)


# -- gm2_step ----------------------------------------------------------------------

def test_fixed_point():
    f = O.make_quadratic([0.01, 1.0])
    P = gm2.preset("NAG", f, 1.0)
    out = gm2.gm2_step(P, 1.0, f, Gm2State(np.zeros(2), np.zeros(2)))
    assert np.all(out.x == 0) and np.all(out.v == 0) and out.k == 1


def test_fixed_point_logistic_to_rounding(fig1_logistic):
    f = fig1_logistic
    P = gm2.preset("NAG", f, 1.0)
    out = gm2.gm2_step(P, 1.0, f, Gm2State(f.x_star.copy(), f.x_star.copy()))
    np.testing.assert_allclose(out.x, f.x_star, rtol=4 * np.finfo(float).eps)
    np.testing.assert_allclose(out.v, f.x_star, rtol=4 * np.finfo(float).eps)


def test_hand_evaluated_step():
    # a = 1, s = 0.25, n = q = 1, p = 1, m = 0.5, x0 = 1, v0 = 1 - (m/n) * 1 = 0.5
    f = O.make_quadratic([1.0])
    P = Gm2Params(0.5, 1.0, 1.0, 1.0)
    v0 = gm2.initial_v(np.array([1.0]), P, f)
    assert v0[0] == 0.5
    out = gm2.gm2_step(P, 0.25, f, Gm2State(np.array([1.0]), v0))
    x1 = (1.0 - 0.5 * 0.5 * 1.0 + 1.0 * 0.5 * 0.5) / (1.0 + 0.5)
    v1 = 0.5 - 1.0 * 0.5 * x1 - 1.0 * 0.5 * (0.5 - x1)
    assert out.x[0] == pytest.approx(x1, rel=1e-15)
    assert out.v[0] == pytest.approx(v1, rel=1e-15)
    assert out.x[0] == pytest.approx(2.0 / 3.0, rel=1e-15) and out.v[0] == pytest.approx(0.25, rel=1e-15)


def test_nag_preset_matches_nag(fig1_logistic):
    f = fig1_logistic
    P = gm2.preset("NAG", f, 1.0)
    X, _ = gm2.gm2_trajectory(P, 1.0, f, np.array([10.0]), None, 100)
    Y = _nag_sc_y(f, 1.0, np.array([10.0]), 100)
    assert np.max(np.abs(X - Y) / np.abs(Y)) <= 1e-12


def test_gradient_evaluated_twice_per_step():
    calls = []

    class Counting(O.Quadratic):
        def gradient(self, x):
            calls.append(1)
            return super().gradient(x)

    f = Counting([1.0, 2.0])
    gm2.gm2_step(Gm2Params(0.5, 1, 1, 1), 0.1, f, Gm2State(np.ones(2), np.ones(2)))
    assert len(calls) == 2


def test_nonfinite_gradient_reports_index():
    class Broken(O.Quadratic):
        def gradient(self, x):
            return np.full_like(np.asarray(x, dtype=float), np.nan)

    f = Broken([1.0])
    with pytest.raises(NumericalFailureError) as info:
        gm2.gm2_step(Gm2Params(1, 1, 1, 1), 0.1, f, Gm2State(np.ones(1), np.ones(1), 7))
    # the gradient at x_7 is the first non-finite value
    assert info.value.index == 7


# -- one-line recursion -------------------------------------------------------------

def test_one_line_small_step_limit():
    c = gm2.gm2_one_line_coeffs(Gm2Params(1.0, 2.0, 3.0, 4.0), 1e-20)
    np.testing.assert_allclose(c, (1.0, 0.0, 0.0), atol=1e-9)


def test_one_line_momentum_equals_qhm_b():
    f = O.random_reg_logistic(50, 3, 1e-3, seed=1)
    P, b = classic.qhm_params_map(0.25, f, 0.1)
    assert gm2.gm2_one_line_coeffs(P, 0.1)[0] == pytest.approx(b, rel=1e-15)


def test_one_line_nag_momentum_value():
    P = Gm2Params(math.sqrt(0.1), 0.1, 10.0, 0.1)
    c_mom = gm2.gm2_one_line_coeffs(P, 0.1)[0]
    rq = 0.1 * math.sqrt(0.1)
    assert c_mom == pytest.approx((1 - rq) / (1 + rq), rel=1e-15)
    assert c_mom == pytest.approx(0.9386931, abs=5e-8)
    # the printed value 0.9386859 agrees to five significant digits only
    assert c_mom == pytest.approx(0.9386859, rel=1e-5)


def test_one_line_equivalence_random_draws():
    rng = np.random.default_rng(11)
    for _ in range(100):
        L, mu, s, P = admissible_draw(rng)
        f = random_diag_quadratic(rng, mu, L)
        x0 = rng.normal(size=f.dim)
        X, _ = gm2.gm2_trajectory(P, s, f, x0, None, 2)
        x2 = gm2.one_line_step(gm2.gm2_one_line_coeffs(P, s), f, X[1], X[0])
        assert np.linalg.norm(x2 - X[2]) <= 1e-13 * max(np.linalg.norm(X[2]), 1e-300)


# -- presets ------------------------------------------------------------------------

def test_preset_nag_row():
    f = O.make_quadratic([0.01, 1.0])
    P = gm2.preset("NAG", f, 0.1)
    np.testing.assert_allclose(P.as_tuple(), (0.3162278, 0.1, 10.0, 0.1), rtol=0, atol=5e-8)


def test_preset_tm_row():
    f = O.make_quadratic([0.01, 1.0])
    P = gm2.preset(gm2.Method.TM, f, 1.0)
    np.testing.assert_allclose(P.as_tuple(), (1.0, 0.2 / 0.9, 10.0, 0.1), rtol=1e-15)


def test_preset_tm_warns_off_design_step():
    f = O.make_quadratic([0.01, 1.0])
    with pytest.warns(UserWarning):
        gm2.preset("TM", f, 0.5)


def test_preset_gd_and_polyak():
    f = O.make_quadratic([0.04, 1.0])
    gd = gm2.preset("GD", f, 0.3)
    assert gd.n == 0 and gd.m == 1
    pk = gm2.preset("polyak", f, 0.3)
    assert pk.as_tuple() == pytest.approx((0.0, 0.2, 5.0, 0.2))


def test_preset_hb_row():
    f = O.make_quadratic([0.01, 1.0])
    s = 0.5
    P = gm2.preset("HB", f, s)
    alpha = (1 - math.sqrt(0.01 * s)) / (1 + math.sqrt(0.01 * s))
    n = (1 - alpha) / (math.sqrt(s) * (1 + alpha))
    assert P.as_tuple() == pytest.approx((0.0, n, 1 / n + math.sqrt(s), n), rel=1e-15)
    # m = 0 cannot dominate n p s, so no discrete contraction guarantee
    assert "n p s <= m sqrt(s)" in P.discrete_violations(f, s)


def test_preset_hb_is_heavy_ball():
    # one-line form has no gradient-difference term and momentum alpha
    f = O.make_quadratic([0.01, 1.0])
    s = 0.5
    P = gm2.preset("HB", f, s)
    c_mom, c_grad, c_prev = gm2.gm2_one_line_coeffs(P, s)
    alpha = (1 - math.sqrt(0.01 * s)) / (1 + math.sqrt(0.01 * s))
    assert c_prev == 0.0
    assert c_mom == pytest.approx(alpha, rel=1e-14)
    # n p s = s (1 + n sqrt(s)) when p = 1/n + sqrt(s), so the gradient weight is s
    assert c_grad == pytest.approx(s, rel=1e-14)


def test_preset_errors():
    flat = types.SimpleNamespace(mu=0.0, L=1.0)
    with pytest.raises(InvalidPresetError):
        gm2.preset("NAG", flat, 0.1)
    with pytest.raises(InvalidPresetError):
        gm2.preset("adam", O.make_quadratic([1.0]), 0.1)
    with pytest.raises(InvalidPresetError):
        gm2.preset("QHM", O.make_quadratic([0.1, 1.0]), 0.1)


def test_preset_hnag_row():
    f = O.make_quadratic([0.01, 1.0])
    alpha = math.sqrt(f.mu / f.L)
    P = gm2.preset("HNAG", f, 1.0, (f.mu * (1 - alpha), alpha, 0.7))
    assert P.as_tuple() == pytest.approx((0.7, 1.0, 1.0 / f.mu, 1.0))


# -- initial velocity ---------------------------------------------------------------

def test_initial_v_examples():
    f = O.make_quadratic([1.0])
    P = gm2.preset("NAG", f, 0.25)
    np.testing.assert_array_equal(gm2.initial_v(np.zeros(1), P, f), np.zeros(1))
    assert gm2.initial_v(np.array([1.0]), P, f)[0] == pytest.approx(1 - math.sqrt(0.25) / 1.0)
    hb = Gm2Params(0.0, 0.5, 2.0, 0.5)
    np.testing.assert_array_equal(gm2.initial_v(np.array([3.0]), hb, f), [3.0])
    with pytest.raises(InitializationUndefinedError):
        gm2.initial_v(np.ones(1), Gm2Params(1, 0, 0, 0), f)


def test_gd_needs_explicit_v0():
    f = O.make_quadratic([1.0, 0.5])
    X, V = gm2.gm2_trajectory(Gm2Params(1.0, 0, 0, 0), 0.25, f, np.ones(2), np.zeros(2), 3)
    np.testing.assert_allclose(X[1], np.ones(2) - 0.5 * f.diag, rtol=1e-15)


def test_gd_preset_one_step_minimizes():
    f = O.make_quadratic([1.0])
    X, _ = gm2.gm2_trajectory(gm2.preset("GD", f, 1.0), 1.0, f, np.ones(1), np.ones(1), 1)
    assert X[1, 0] == 0.0


# -- explicit Euler ------------------------------------------------------------------

def test_ee_fixed_point():
    f = O.make_quadratic([0.3, 2.0])
    out = gm2.ee_step(Gm2Params(1, 1, 1, 1), 0.1, f, Gm2State(np.zeros(2), np.zeros(2)))
    assert np.all(out.x == 0) and np.all(out.v == 0)


def test_ee_decoupled_is_gradient_descent():
    f = O.make_quadratic([0.3, 2.0])
    x = np.array([1.0, -2.0])
    out = gm2.ee_step(Gm2Params(0.8, 0, 5, 0), 0.09, f, Gm2State(x, np.zeros(2)))
    np.testing.assert_allclose(out.x, x - 0.8 * 0.3 * f.gradient(x), rtol=1e-15)


def test_ee_map_identity_at_zero_step():
    P = Gm2Params(0.3, 0.2, 5.0, 0.2)
    assert gm2.ee_params_from_sie(P, 0.0) == P


def test_ee_map_nag_values():
    P = Gm2Params(math.sqrt(0.1), 0.1, 10.0, 0.1)
    E = gm2.ee_params_from_sie(P, 0.1)
    d = 1 + 0.1 * math.sqrt(0.1)
    assert E.n == pytest.approx((0.1 - 0.1 * 0.1 * math.sqrt(0.1)) / d, rel=1e-15)
    assert E.m == pytest.approx(2 * math.sqrt(0.1) / d, rel=1e-15)
    assert (E.p, E.q) == (10.0, 0.1)
    assert E.n == pytest.approx(0.0938693, abs=5e-8)
    assert E.m == pytest.approx(0.6130686, abs=5e-8)
    # printed approximations (0.0938687, 0.6130655) agree to five digits
    assert E.n == pytest.approx(0.0938687, rel=1e-5)
    assert E.m == pytest.approx(0.6130655, rel=1e-5)


def test_ee_one_line_coefficients_match_sie():
    rng = np.random.default_rng(4)
    for _ in range(50):
        L, mu, s, P = admissible_draw(rng)
        E = gm2.ee_params_from_sie(P, s)
        rs = math.sqrt(s)
        # explicit-Euler one-line form, written out independently
        ee_mom = 1 - E.q * rs - E.n * rs
        ee_grad = E.m * rs
        ee_prev = E.m * rs * (1 - E.q * rs) - E.n * E.p * s
        np.testing.assert_allclose((ee_mom, ee_grad, ee_prev), gm2.gm2_one_line_coeffs(P, s),
                                   rtol=1e-12, atol=1e-15)


def test_ee_recovers_nag(fig1_logistic):
    f = fig1_logistic
    s = 1.0
    rs, rmu = math.sqrt(s), math.sqrt(f.mu)
    # n = sqrt(mu)(1 - sqrt(mu s))/(1 + sqrt(mu s)), m = 2 sqrt(s)/(1 + sqrt(mu s))
    E = Gm2Params(2 * rs / (1 + rmu * rs), rmu * (1 - rmu * rs) / (1 + rmu * rs), 1 / rmu, rmu)
    np.testing.assert_allclose(E.as_tuple(), gm2.ee_params_from_sie(gm2.preset("NAG", f, s), s).as_tuple(),
                               rtol=1e-15)
    x0 = np.array([10.0])
    v0 = gm2.ee_initial_v(x0, gm2.preset("NAG", f, s), s, f)
    X, _ = gm2.gm2_trajectory(E, s, f, x0, v0, 200, step=gm2.ee_step)
    Y = _nag_sc_y(f, s, x0, 200)
    assert np.max(np.abs(X - Y) / np.abs(Y)) <= 1e-12


@given(st.integers(0, 10_000))
def test_ee_sie_sequences_agree(seed):
    rng = np.random.default_rng(seed)
    L, mu, s, P = admissible_draw(rng)
    f = random_diag_quadratic(rng, mu, L)
    x0 = rng.normal(size=f.dim) * 3
    Xs, _ = gm2.gm2_trajectory(P, s, f, x0, None, 100)
    Xe, _ = gm2.gm2_trajectory(gm2.ee_params_from_sie(P, s), s, f, x0,
                               gm2.ee_initial_v(x0, P, s, f), 100, step=gm2.ee_step)
    assert np.max(relative_deviation(Xe, Xs)) <= 1e-12


# -- coefficient consistency -----------------------------------------------------------

@pytest.mark.parametrize("name", ["GD", "Polyak", "HB", "NAG", "TM"])
def test_presets_drive_both_discrete_and_continuous(name):
    from gm2lab import flows
    f = O.make_logistic_1d(1.0, 0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        P = gm2.preset(name, f, 1.0)
    x0, v0 = np.array([2.0]), np.array([1.0])
    X, _ = gm2.gm2_trajectory(P, 1.0, f, x0, v0, 5)
    d = flows.gm2_rhs(P, f, flows.FlowState(x0, v0))
    assert np.all(np.isfinite(X)) and np.all(np.isfinite(d.primary))
