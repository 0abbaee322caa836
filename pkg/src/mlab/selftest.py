"""Fast closed-form example checks across all modules, run by ``mlab selftest``."""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import quad
from .construct import (
    EpsilonSequence,
    build_profile,
    check_secant_property,
    log_cusp_domain,
    synthetic_sequence,
    validate_sequence,
)
from .domain import (
    Box,
    GraphDomain,
    LogCusp,
    PowerCusp,
    index_of_convexity,
    modulus_of_continuity,
    profile_eval,
    solve_epsilon_n,
    validate_regular_cusp,
)
from .jacobi import (
    JacobiParams,
    bessel_j,
    bessel_j_scaled,
    bessel_scaled_lower_bound,
    darboux_terms,
    envelope_bound,
    jacobi_deriv,
    jacobi_eval,
    jacobi_zeros_theta,
    mehler_heine_gap,
)
from .markov import (
    alpha_selector,
    assemble_gram,
    best_markov_p2,
    extremal_ratio,
    fit_exponent,
    lemma31_epsilon,
)
from .poly import Monomial, Poly2D

__all__ = ["CHECKS", "CheckResult", "run_selftest", "inject_fault"]


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


LEG = JacobiParams(0.0, 0.0)
SQUARE = GraphDomain(Box(1.0))


# --- jacobi -----------------------------------------------------------------------

def j_degree0():
    return jacobi_eval(LEG, 0, 0.3) == 1.0


def j_legendre1():
    return _close(jacobi_eval(LEG, 1, 0.5), 0.5, 1e-15)


def j_endpoint():
    exact = math.gamma(13.5) / (math.gamma(8.5) * math.factorial(5))
    return _close(jacobi_eval(JacobiParams(7.5, 0.0), 5, 1.0), exact, 1e-13)


def j_deriv0():
    return jacobi_deriv(JacobiParams(1.3, 0.2), 0, 0.4) == 0.0


def j_deriv_legendre2():
    return abs(jacobi_deriv(LEG, 2, 0.0)) <= 1e-15


def j_deriv_fd():
    par, h = JacobiParams(1.0, 1.0), 1e-6
    fd = (jacobi_eval(par, 3, 0.2 + h) - jacobi_eval(par, 3, 0.2 - h)) / (2 * h)
    return abs(jacobi_deriv(par, 3, 0.2) - fd) <= 1e-8


def j_bessel0():
    return bessel_j(0.0, 0.0) == 1.0


def j_bessel1():
    return abs(bessel_j(0.0, 1.0) - 0.7651976866) <= 1e-10


def j_bessel_bound():
    z = np.linspace(0.0, 1.0, 201)
    lowest = float(np.min(bessel_j_scaled(0.0, z)))
    return lowest >= bessel_scaled_lower_bound(0.0) >= bessel_scaled_lower_bound(0.0, weak=True)


def j_mehler_small_z():
    return mehler_heine_gap(LEG, 1e-8, 10) <= 1e-12


def j_mehler_n500():
    return mehler_heine_gap(JacobiParams(0.5, 0.0), 1.0, 500) <= 0.01


def j_mehler_trend():
    return mehler_heine_gap(LEG, 2.0, 400) < mehler_heine_gap(LEG, 2.0, 100)


def j_darboux_symmetry():
    par = JacobiParams(1.5, 1.5)
    return _close(darboux_terms(par, 20, 0.7).k_theta, darboux_terms(par, 20, math.pi - 0.7).k_theta, 1e-13)


def j_zeros_legendre2():
    z = jacobi_zeros_theta(LEG, 2, 0.5, math.pi - 0.5)
    want = [math.acos(1 / math.sqrt(3)), math.acos(-1 / math.sqrt(3))]
    return len(z) == 2 and all(abs(a - b) <= 1e-12 for a, b in zip(z, want))


def j_envelope_flat():
    return envelope_bound(LEG, 10, 0.01) == 1.0


# --- domain -----------------------------------------------------------------------

def d_power_tip():
    return profile_eval(PowerCusp(2.0), 1.0) == 0.0


def d_log_value():
    x = 1.0 - math.exp(-1.0)
    return _close(profile_eval(LogCusp(1.0), x), math.exp(-1.0) / 2.0, 1e-14)


def d_power_value():
    return _close(profile_eval(PowerCusp(3.0), 0.5), 0.125, 1e-15)


def d_omega_k2():
    dom = GraphDomain(PowerCusp(2.0))
    return all(_close(modulus_of_continuity(dom, t), math.sqrt(t + t * t), 1e-12)
               for t in (1e-6, 1e-3, 0.1, 0.5))


def d_epsilon1():
    eps = solve_epsilon_n(GraphDomain(PowerCusp(2.0)), 1).epsilon_n
    return _close(eps, (math.sqrt(2.0) - 1.0) / 2.0, 1e-12)


def d_iconv_k3():
    return abs(index_of_convexity(PowerCusp(3.0), 0.0) - 3.0) <= 1e-4


def d_iconv_k1():
    return abs(index_of_convexity(PowerCusp(1.0), 0.0) - 1.0) <= 1e-6


def d_regular_k2():
    rep = validate_regular_cusp(GraphDomain(PowerCusp(2.0)))
    return rep.regular and abs(rep.i_conv - 2.0) <= 1e-4 and rep.appindex_margin >= 0.0


# --- quad -------------------------------------------------------------------------

def q_rule1():
    r = quad.gauss_legendre(1)
    return r.nodes.tolist() == [0.0] and _close(r.weights[0], 2.0, 1e-15)


def q_rule2():
    r = quad.gauss_legendre(2)
    return (np.allclose(r.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=0, atol=1e-15)
            and np.allclose(r.weights, [1.0, 1.0], rtol=0, atol=1e-15))


def q_exact_x4():
    r = quad.gauss_legendre(3)
    return _close(float(np.dot(r.weights, r.nodes**4)), 0.4, 1e-15)


def q_square_xy():
    xy = Poly2D(2, (0.0, 0.0, 0.0, 0.0, 1.0, 0.0))
    return _close(quad.lp_norm_pth_power(SQUARE, xy, 2), 1.0 / 9.0, 1e-13)


def q_triangle_area():
    one = Poly2D(0, (1.0,))
    return _close(quad.lp_norm_pth_power(GraphDomain(PowerCusp(1.0)), one, 2), 0.5, 1e-13)


def q_separable():
    # y * P_3(x) on the k=2 cusp: analytic inner integral vs the weighted line integral
    dom = GraphDomain(PowerCusp(2.0))
    q = np.polynomial.legendre.leg2poly([0.0, 0.0, 0.0, 1.0])
    area_form = quad.lp_norm_pth_power(dom, Poly2D.y_times(q), 2)
    line_form = quad.lp_weighted_line(dom.profile, 3.0, LEG, 3, 2.0) / 3.0
    return _close(area_form, line_form, 1e-10)


def q_line_n0():
    return _close(quad.lp_weighted_line(PowerCusp(1.0), 1.0, LEG, 0, 2.0), 0.5, 1e-13)


def q_legendre_norm():
    val = quad.lp_weighted_line(Box(1.0), 0.0, LEG, 4, 2.0, lower=-1.0)
    return _close(val, 2.0 / 9.0, 1e-13)


# --- markov -----------------------------------------------------------------------

def m_alpha_examples():
    return alpha_selector(2, 2, 0.5) == 7.0 and alpha_selector(1, 1, 1) == 6.5


def m_rectangle_ratio():
    return all(_close(extremal_ratio(SQUARE, JacobiParams(3.0), n, 2.0), math.sqrt(3.0), 1e-12)
               for n in (1, 5, 12))


def m_gram_n0():
    gp = assemble_gram(GraphDomain(PowerCusp(2.0)), 0)
    return gp.G.shape == (1, 1) and _close(gp.G[0, 0], 1.0 / 3.0, 1e-13) and not gp.A_x.any()


def m_gram_monomial():
    gp = assemble_gram(SQUARE, 1, basis=Monomial())
    want = np.array([[1, 0.5, 0.5], [0.5, 1 / 3, 0.25], [0.5, 0.25, 1 / 3]])
    return np.allclose(gp.G, want, rtol=0, atol=1e-14)


def m_strip():
    strip = GraphDomain(Box(1e-3))
    return _close(best_markov_p2(strip, 1, "x"), math.sqrt(12.0), 1e-10)


def m_degree0():
    return best_markov_p2(SQUARE, 0) == 0.0


def m_fit_pure():
    rep = fit_exponent([(n, 5.0 * n**3) for n in (2, 4, 8, 16, 32)])
    return abs(rep.fitted_exponent - 3) <= 1e-12 and _close(rep.fitted_constant, 5.0, 1e-12) \
        and rep.residual <= 1e-12


def m_fit_log():
    data = [(n, 2.0 * n**2 * (1 + math.log(2.0 * n * n))) for n in (8, 16, 32, 64)]
    return abs(fit_exponent(data, "log", 1.0).fitted_exponent - 2.0) <= 1e-10


def m_lemma31_eps():
    return all(_close(lemma31_epsilon(PowerCusp(k), n, 0.5), 2.0**-k * n ** (2 - 2 * k), 1e-13)
               for k in (2.0, 3.0) for n in (4, 16, 64))


# --- construct --------------------------------------------------------------------

def c_synthetic_valid():
    return validate_sequence(synthetic_sequence(2.0, 16)).ok


def c_increasing_flagged():
    return "monotonicity" in validate_sequence(EpsilonSequence((0.1, 0.2), (1.0, 1.0))).kinds()


def c_zero_slopes_flagged():
    seq = EpsilonSequence((1.0, 0.9, 0.8), (0.0, 0.0, 0.0))
    return "compatibility" in validate_sequence(seq).kinds()


def c_knot_residual():
    res = build_profile(synthetic_sequence(2.0, 16))
    prof = res.profile
    xs = np.array([k[0] for k in res.knots])
    vals = np.array([k[1] for k in res.knots])
    slopes = np.array([k[2] for k in res.knots])
    return (np.max(np.abs(prof(xs) - vals)) <= 1e-14
            and np.max(np.abs(prof.derivative(xs) - slopes)) <= 1e-14)


def c_round_trip_s2():
    prof = build_profile(synthetic_sequence(2.0, 16)).profile
    x = np.linspace(0.5, 1.0 - 1.0 / (2 * 16**2), 101)
    mid = 0.5 * (x[1:] + x[:-1])
    return np.max(np.abs(prof(mid) - 4.0 * (1.0 - mid) ** 2)) <= 1e-10


def c_secant():
    prof = build_profile(synthetic_sequence(2.0, 16)).profile
    return check_secant_property(prof, samples=500, seed=1).ok


def c_log_cusp_values():
    e1 = log_cusp_domain(1.0).profile
    e2 = log_cusp_domain(2.0).profile
    x = 1.0 - math.exp(-0.5)
    return e1(0.0) == 1.0 and _close(e2(x), math.exp(-1.0) / 2.0, 1e-14)


CHECKS = [
    ("jacobi", "degree0", j_degree0),
    ("jacobi", "legendre1", j_legendre1),
    ("jacobi", "endpoint-binomial", j_endpoint),
    ("jacobi", "deriv-degree0", j_deriv0),
    ("jacobi", "deriv-legendre2", j_deriv_legendre2),
    ("jacobi", "deriv-finite-difference", j_deriv_fd),
    ("jacobi", "bessel-origin", j_bessel0),
    ("jacobi", "bessel-j0-at-1", j_bessel1),
    ("jacobi", "bessel-lower-bound", j_bessel_bound),
    ("jacobi", "mehler-heine-small-z", j_mehler_small_z),
    ("jacobi", "mehler-heine-n500", j_mehler_n500),
    ("jacobi", "mehler-heine-trend", j_mehler_trend),
    ("jacobi", "darboux-symmetry", j_darboux_symmetry),
    ("jacobi", "zeros-legendre2", j_zeros_legendre2),
    ("jacobi", "envelope-alpha0", j_envelope_flat),
    ("domain", "power-tip", d_power_tip),
    ("domain", "log-value", d_log_value),
    ("domain", "power-value", d_power_value),
    ("domain", "omega-k2", d_omega_k2),
    ("domain", "epsilon1-k2", d_epsilon1),
    ("domain", "iconv-k3", d_iconv_k3),
    ("domain", "iconv-k1", d_iconv_k1),
    ("domain", "regular-k2", d_regular_k2),
    ("quad", "rule-m1", q_rule1),
    ("quad", "rule-m2", q_rule2),
    ("quad", "exactness-x4", q_exact_x4),
    ("quad", "square-xy", q_square_xy),
    ("quad", "triangle-area", q_triangle_area),
    ("quad", "separable-vs-tensor", q_separable),
    ("quad", "line-degree0", q_line_n0),
    ("quad", "legendre-norm", q_legendre_norm),
    ("markov", "alpha-selector", m_alpha_examples),
    ("markov", "rectangle-ratio", m_rectangle_ratio),
    ("markov", "gram-degree0", m_gram_n0),
    ("markov", "gram-monomial", m_gram_monomial),
    ("markov", "strip-sqrt12", m_strip),
    ("markov", "factor-degree0", m_degree0),
    ("markov", "fit-pure", m_fit_pure),
    ("markov", "fit-log", m_fit_log),
    ("markov", "lemma31-epsilon", m_lemma31_eps),
    ("construct", "synthetic-valid", c_synthetic_valid),
    ("construct", "increasing-flagged", c_increasing_flagged),
    ("construct", "zero-slopes-flagged", c_zero_slopes_flagged),
    ("construct", "knot-residual", c_knot_residual),
    ("construct", "round-trip-s2", c_round_trip_s2),
    ("construct", "secant-audit", c_secant),
    ("construct", "log-cusp-values", c_log_cusp_values),
]


@dataclass
class CheckResult:
    module: str
    name: str
    ok: bool
    detail: str = ""


def _corrupt_leggauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w * 1.001


@contextmanager
def inject_fault(target: str | None):
    """Temporarily corrupt a module's numerics; only ``quad`` is supported."""
    if target is None:
        yield
        return
    if target != "quad":
        raise ValueError(f"unknown fault target {target!r}")
    original = quad._leggauss
    quad._leggauss = _corrupt_leggauss
    quad._cached_rule.cache_clear()
    try:
        yield
    finally:
        quad._leggauss = original
        quad._cached_rule.cache_clear()


def run_selftest(fault: str | None = None) -> tuple[list[CheckResult], float]:
    start = time.perf_counter()
    results = []
    with inject_fault(fault):
        for module, name, fn in CHECKS:
            try:
                ok = bool(fn())
                detail = "" if ok else "check returned False"
            except Exception as exc:  # a failing example must not stop the run
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            results.append(CheckResult(module, name, ok, detail))
    return results, time.perf_counter() - start
