import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlab.construct import build_profile, synthetic_sequence
from mlab.domain import (
    Box,
    GraphDomain,
    LogCusp,
    PowerCusp,
    gap_inverse,
    index_of_convexity,
    modulus_of_continuity,
    profile_eval,
    profile_from_json,
    profile_inverse,
    solve_epsilon_n,
    validate_regular_cusp,
)
from mlab.errors import ConstructionError, DomainError

FLAT_CAP = build_profile(synthetic_sequence(2.0, 32)).profile
PROFILES = [PowerCusp(1.0), PowerCusp(2.0), PowerCusp(3.0), PowerCusp(4.5), LogCusp(1.0), LogCusp(2.0), FLAT_CAP]


def short_id(prof):
    if isinstance(prof, PowerCusp):
        return f"power{prof.k:g}"
    if isinstance(prof, LogCusp):
        return f"log{prof.iota:g}"
    if isinstance(prof, Box):
        return f"box{prof.value:g}"
    return "flatcap"


# --- profile evaluation ------------------------------------------------------------

def test_power_cusp_tip():
    assert profile_eval(PowerCusp(2.0), 1.0) == 0.0


def test_log_cusp_value():
    x = 1 - math.exp(-1)
    assert profile_eval(LogCusp(1.0), x) == pytest.approx(math.exp(-1) / 2, rel=1e-14)


def test_power_cusp_value():
    assert profile_eval(PowerCusp(3.0), 0.5) == pytest.approx(0.125, rel=1e-15)


def test_log_cusp_floor_near_tip():
    assert profile_eval(LogCusp(1.0), 1.0 - 1e-16) == 0.0
    assert profile_eval(LogCusp(1.0), 1.0) == 0.0


@pytest.mark.parametrize("x", [-0.1, 1.1])
def test_profile_eval_outside_unit_interval(x):
    with pytest.raises(DomainError):
        profile_eval(PowerCusp(2.0), x)


def test_profile_parameter_validation():
    with pytest.raises(DomainError):
        PowerCusp(0.5)
    with pytest.raises(DomainError):
        LogCusp(0.9)
    with pytest.raises(DomainError):
        Box(0.0)


@pytest.mark.parametrize("prof", PROFILES, ids=short_id)
def test_profile_vanishes_at_tip_and_decreases(prof):
    x = np.linspace(prof.decreasing_from, 1.0, 1001)
    v = prof(x)
    assert v[-1] == 0.0
    assert np.all(np.diff(v) < 0.0)


@pytest.mark.parametrize("prof", PROFILES, ids=short_id)
def test_derivative_matches_finite_difference(prof):
    x = np.linspace(max(prof.decreasing_from, 0.0) + 0.013, 0.97, 37)
    h = 1e-7
    fd = (prof(x + h) - prof(x - h)) / (2 * h)
    np.testing.assert_allclose(prof.derivative(x), fd, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("prof", [PowerCusp(2.5), LogCusp(1.5), Box(0.25), FLAT_CAP], ids=short_id)
def test_profile_json_round_trip(prof):
    back = profile_from_json(json.loads(json.dumps(prof.to_json())))
    x = np.linspace(0.0, 1.0, 513)
    np.testing.assert_array_equal(back(x), prof(x))


def test_unknown_profile_kind():
    with pytest.raises(DomainError):
        profile_from_json({"kind": "spline", "parameters": {}})


# --- graph domains -----------------------------------------------------------------

def test_domain_must_fit_box():
    with pytest.raises(DomainError):
        GraphDomain(Box(1.5))


def test_domain_symmetry_values():
    with pytest.raises(DomainError):
        GraphDomain(PowerCusp(2.0), "lower")
    assert GraphDomain(PowerCusp(2.0), "symmetric").y_range == (-1.0, 1.0)


def test_domain_json_round_trip():
    dom = GraphDomain(LogCusp(2.0), "symmetric")
    assert GraphDomain.from_json(json.loads(json.dumps(dom.to_json()))) == dom


# --- inverse and modulus of continuity -----------------------------------------------

@pytest.mark.parametrize("prof", PROFILES, ids=short_id)
def test_inverse_round_trip(prof):
    x = np.linspace(prof.convex_from + 0.01, 1 - 1e-6, 2000)
    back = profile_inverse(prof, prof(x))
    assert np.max(np.abs(back - x)) <= 1e-12


def test_inverse_rejects_levels_above_range():
    with pytest.raises(DomainError):
        gap_inverse(PowerCusp(2.0), 1.5)


def test_inverse_undefined_without_cusp():
    with pytest.raises(DomainError):
        gap_inverse(Box(1.0), 0.5)


@pytest.mark.parametrize("t", [1e-12, 1e-8, 1e-4, 0.01, 0.3, 1.0])
def test_modulus_closed_form_k2(t):
    dom = GraphDomain(PowerCusp(2.0))
    assert modulus_of_continuity(dom, t) == pytest.approx(math.sqrt(t + t * t), rel=1e-13)


@pytest.mark.parametrize("k", [1.5, 2.0, 3.0, 5.0])
def test_modulus_dominated_by_gap_near_tip(k):
    dom = GraphDomain(PowerCusp(k))
    ratios = [modulus_of_continuity(dom, t) / gap_inverse(dom.profile, t) for t in (1e-2, 1e-4, 1e-8, 1e-14)]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(t1=st.floats(1e-12, 0.9), t2=st.floats(1e-12, 0.9), iota=st.sampled_from([1.0, 2.0]))
def test_modulus_monotone(t1, t2, iota):
    if t1 == t2:
        return
    lo, hi = sorted((t1, t2))
    dom = GraphDomain(LogCusp(iota))
    assert modulus_of_continuity(dom, lo) < modulus_of_continuity(dom, hi)


def test_modulus_needs_positive_level():
    with pytest.raises(DomainError):
        modulus_of_continuity(GraphDomain(PowerCusp(2.0)), 0.0)


def test_flat_cap_modulus_at_knots():
    dom = GraphDomain(FLAT_CAP)
    seq = synthetic_sequence(2.0, 32)
    for n in range(1, 33):
        level = seq.values[n - 1] / n**2
        want = math.sqrt(1 / (4 * n**4) + level**2)
        assert modulus_of_continuity(dom, level) == pytest.approx(want, abs=1e-10)


# --- epsilon_n ------------------------------------------------------------------------

def test_epsilon_one_k2():
    cs = solve_epsilon_n(GraphDomain(PowerCusp(2.0)), 1)
    assert cs.epsilon_n == pytest.approx((math.sqrt(2) - 1) / 2, rel=1e-12)
    assert 4 * cs.epsilon_n + 4 * cs.epsilon_n**2 == pytest.approx(1.0, abs=1e-14)


def test_epsilon_asymptotics_k2():
    eps = solve_epsilon_n(GraphDomain(PowerCusp(2.0)), 1000).epsilon_n
    assert 4 * 1000**2 * eps == pytest.approx(1.0, abs=1e-5)


def test_epsilon_asymptotics_k3():
    eps = solve_epsilon_n(GraphDomain(PowerCusp(3.0)), 1000).epsilon_n
    assert eps * 1000**4 == pytest.approx(2.0**-3, rel=1e-6)


@pytest.mark.parametrize("prof", PROFILES, ids=short_id)
@pytest.mark.parametrize("n", [1, 3, 17, 64, 250])
def test_epsilon_residual_and_scale(prof, n):
    cs = solve_epsilon_n(GraphDomain(prof), n)
    assert cs.residual <= 1e-12
    assert abs(2 * n * n * modulus_of_continuity(GraphDomain(prof), cs.epsilon_n / n**2) - 1) <= 1e-12
    assert cs.x_n == pytest.approx(profile_inverse(prof, cs.epsilon_n / n**2), abs=1e-15)
    assert math.cos(cs.u_n) == pytest.approx(cs.x_n, abs=1e-15)


@pytest.mark.parametrize("k", [2.0, 2.5, 3.0, 4.0])
@pytest.mark.parametrize("n", [20, 35, 100, 700])
def test_x_n_sandwich(k, n):
    x_n = solve_epsilon_n(GraphDomain(PowerCusp(k)), n).x_n
    assert 1 - 1 / (2 * n * n) <= x_n <= 1 - 1 / (4 * n * n)


@pytest.mark.parametrize("prof", PROFILES, ids=short_id)
def test_epsilon_monotone_in_n(prof):
    dom = GraphDomain(prof)
    eps = [solve_epsilon_n(dom, n).epsilon_n for n in range(1, 41)]
    # k = 1 gives a constant sequence, so allow round-off
    assert all(b <= a * (1 + 1e-14) for a, b in zip(eps, eps[1:]))


def test_epsilon_requires_cusp():
    with pytest.raises(DomainError):
        solve_epsilon_n(GraphDomain(Box(1.0)), 3)


def test_epsilon_no_sign_change():
    # strictly decreasing only on the last tenth: omega at the top level is ~0.1 < 1/2
    class ShortCusp(PowerCusp):
        decreasing_from = 0.9

        def gap_value(self, s):
            return 1e-3 * np.power(np.minimum(s, 0.1), self.k)

        def gap_slope(self, s):
            return np.where(s < 0.1, 1e-3 * self.k * np.power(s, self.k - 1.0), 0.0)

    with pytest.raises(ConstructionError, match="no sign change"):
        solve_epsilon_n(GraphDomain(ShortCusp(2.0)), 1)


def test_epsilon_degree_validation():
    with pytest.raises(DomainError):
        solve_epsilon_n(GraphDomain(PowerCusp(2.0)), 0)


# --- convexity index and regularity ---------------------------------------------------

def test_iconv_k3():
    assert index_of_convexity(PowerCusp(3.0), 0.0) == pytest.approx(3.0, abs=1e-4)


def test_iconv_k1():
    assert index_of_convexity(PowerCusp(1.0), 0.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("k", [1.5, 2.0, 4.0, 6.5])
def test_iconv_power_equals_exponent(k):
    assert index_of_convexity(PowerCusp(k), 0.0) == pytest.approx(k, abs=1e-4)


def test_iconv_ordering():
    assert index_of_convexity(PowerCusp(2.0)) < index_of_convexity(PowerCusp(4.0))


def test_iconv_caps_at_r_max():
    assert index_of_convexity(PowerCusp(9.0), 0.0, r_max=4.0) == 4.0


def test_iconv_rejects_nonconvex():
    class Concave(PowerCusp):
        def gap_value(self, s):
            return np.sqrt(s)

        def gap_slope(self, s):
            return 0.5 / np.sqrt(s)

    with pytest.raises(DomainError):
        index_of_convexity(Concave(1.0), 0.0)


def test_regular_k2():
    rep = validate_regular_cusp(GraphDomain(PowerCusp(2.0)))
    assert rep.regular and rep.convex and rep.i_conv_finite
    assert rep.i_conv == pytest.approx(2.0, abs=1e-4)
    assert rep.appindex_margin >= 0.0 and rep.appindex_ok


def test_regular_k1():
    rep = validate_regular_cusp(GraphDomain(PowerCusp(1.0)))
    assert rep.regular
    assert rep.i_conv == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("iota", [1.0, 2.0, 3.0])
def test_log_cusp_regular_with_finite_index(iota):
    rep = validate_regular_cusp(GraphDomain(LogCusp(iota)))
    assert rep.regular
    assert math.isfinite(rep.i_conv) and rep.i_conv_finite
    # the grid value sits a little above iota; the exact index is not asserted
    assert iota <= rep.i_conv <= iota + 0.25


def test_regularity_report_json():
    payload = validate_regular_cusp(GraphDomain(LogCusp(1.0))).to_json()
    assert set(payload) >= {"convex", "i_conv_estimate", "appindex_margin", "regular"}
    json.dumps(payload)
