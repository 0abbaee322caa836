"""Jacobi polynomials, the Bessel function J_alpha and their classical asymptotics.

Everything here is vectorised over the evaluation point and works in double
precision on [-1, 1] (or on angles in (0, pi) for the trigonometric forms).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "JacobiParams",
    "DarbouxApprox",
    "jacobi_eval",
    "jacobi_deriv",
    "jacobi_table",
    "bessel_j",
    "bessel_j_scaled",
    "bessel_scaled_lower_bound",
    "mehler_heine_gap",
    "darboux_terms",
    "darboux_eval",
    "jacobi_zeros_theta",
    "envelope_bound",
]

ENVELOPE_C = 1.0
ENVELOPE_DELTA = 0.1


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha > -1.0 and self.beta > -1.0):
            raise DomainError(
                f"Jacobi parameters must exceed -1, got alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(frozen=True)
class DarbouxApprox:
    """Amplitude, effective frequency and phase of the interior asymptotic form."""

    k_theta: float
    N: float
    gamma: float


def _as_params(params) -> JacobiParams:
    if isinstance(params, JacobiParams):
        return params
    alpha, beta = params
    return JacobiParams(float(alpha), float(beta))


def _check_degree(n):
    if int(n) != n or n < 0:
        raise DomainError(f"degree must be a nonnegative integer, got {n}")
    return int(n)


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def jacobi_table(params, nmax: int, x) -> np.ndarray:
    """Values of P_0, ..., P_nmax at ``x``; shape ``(nmax + 1,) + shape(x)``.

    Forward three-term recurrence, stable on [-1, 1].
    """
    params = _as_params(params)
    nmax = _check_degree(nmax)
    a, b = params.alpha, params.beta
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax == 0:
        return out
    out[1] = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0)
    for n in range(2, nmax + 1):
        s = 2.0 * n + a + b
        c0 = 2.0 * n * (n + a + b) * (s - 2.0)
        c1 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b)
        c2 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s
        out[n] = (c1 * out[n - 1] - c2 * out[n - 2]) / c0
    return out


def jacobi_eval(params, n: int, x):
    """P_n^{(alpha, beta)}(x) by forward recurrence."""
    n = _check_degree(n)
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 1.0):
        raise DomainError("Jacobi evaluation is restricted to [-1, 1]")
    params = _as_params(params)
    a, b = params.alpha, params.beta
    if n == 0:
        return _scalar_or_array(np.ones_like(xa), x)
    p_prev = np.ones_like(xa)
    p = (a + 1.0) + 0.5 * (a + b + 2.0) * (xa - 1.0)
    for k in range(2, n + 1):
        s = 2.0 * k + a + b
        c0 = 2.0 * k * (k + a + b) * (s - 2.0)
        c1 = (s - 1.0) * (s * (s - 2.0) * xa + a * a - b * b)
        c2 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s
        p_prev, p = p, (c1 * p - c2 * p_prev) / c0
    return _scalar_or_array(p, x)


def jacobi_deriv(params, n: int, x):
    """d/dx P_n^{(alpha, beta)}(x) = (n + alpha + beta + 1)/2 * P_{n-1}^{(alpha+1, beta+1)}(x)."""
    n = _check_degree(n)
    params = _as_params(params)
    if n == 0:
        xa = np.asarray(x, dtype=float)
        if np.any(np.abs(xa) > 1.0):
            raise DomainError("Jacobi evaluation is restricted to [-1, 1]")
        return _scalar_or_array(np.zeros_like(xa), x)
    shifted = JacobiParams(params.alpha + 1.0, params.beta + 1.0)
    scale = 0.5 * (n + params.alpha + params.beta + 1.0)
    return scale * jacobi_eval(shifted, n - 1, x)


# --- Bessel -----------------------------------------------------------------

_BESSEL_REL_TOL = 1e-17
_BESSEL_MAX_TERMS = 200


def bessel_j_scaled(alpha: float, z):
    """(z/2)^{-alpha} J_alpha(z) as the entire series sum_k (-z^2/4)^k / (k! Gamma(k+alpha+1))."""
    if not alpha > -1.0:
        raise DomainError(f"alpha must exceed -1, got {alpha}")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise DomainError("Bessel series is implemented for z >= 0 only")
    q = -0.25 * za * za
    term = np.full_like(za, 1.0 / math.gamma(alpha + 1.0))
    total = term.copy()
    for k in range(1, _BESSEL_MAX_TERMS):
        term = term * q / (k * (k + alpha))
        total = total + term
        if np.all(np.abs(term) <= _BESSEL_REL_TOL * np.abs(total)):
            break
    return _scalar_or_array(total, z)


def bessel_j(alpha: float, z):
    """J_alpha(z) for z >= 0 by the ascending power series.

    Accurate for moderate z; cancellation in the alternating series costs
    roughly exp(z)/sqrt(z) relative digits, so results beyond z ~ 30 are
    approximate.
    """
    scaled = np.asarray(bessel_j_scaled(alpha, z))
    za = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.power(0.5 * za, alpha) * scaled
    return _scalar_or_array(out, z)


def bessel_scaled_lower_bound(alpha: float, weak: bool = False) -> float:
    """Lower bound for min_{z in [0,1]} (z/2)^{-alpha} J_alpha(z).

    Two truncated-series constants appear in the lower-bound argument:
    (4 alpha + 3)/(4 Gamma(alpha + 2)) and the weaker (4 alpha + 2)/(4 Gamma(alpha + 2)).
    """
    num = 4.0 * alpha + (2.0 if weak else 3.0)
    return num / (4.0 * math.gamma(alpha + 2.0))


def mehler_heine_gap(params, z: float, n: int) -> float:
    """|n^{-alpha} P_n(cos(z/n)) - (z/2)^{-alpha} J_alpha(z)|."""
    params = _as_params(params)
    n = _check_degree(n)
    if n < 1:
        raise DomainError("Mehler-Heine gap needs n >= 1")
    if not (0.0 < z <= n):
        raise DomainError(f"z must lie in (0, n], got z={z}, n={n}")
    lhs = jacobi_eval(params, n, math.cos(z / n)) * float(n) ** (-params.alpha)
    rhs = bessel_j_scaled(params.alpha, z)
    return abs(lhs - rhs)


# --- interior asymptotics ----------------------------------------------------

def darboux_terms(params, n: int, theta) -> DarbouxApprox:
    params = _as_params(params)
    n = _check_degree(n)
    th = np.asarray(theta, dtype=float)
    if np.any((th <= 0.0) | (th >= math.pi)):
        raise DomainError("Darboux form needs theta strictly inside (0, pi)")
    a, b = params.alpha, params.beta
    k = (
        math.pi ** -0.5
        * np.sin(0.5 * th) ** (-a - 0.5)
        * np.cos(0.5 * th) ** (-b - 0.5)
    )
    big_n = n + 0.5 * (a + b + 1.0)
    gamma = -(a + 0.5) * math.pi / 2.0
    return DarbouxApprox(_scalar_or_array(k, theta), big_n, gamma)


def darboux_eval(params, n: int, theta):
    """n^{-1/2} k(theta) cos(N theta + gamma), the leading interior term of P_n(cos theta)."""
    if n < 1:
        raise DomainError("Darboux form needs n >= 1")
    d = darboux_terms(params, n, theta)
    th = np.asarray(theta, dtype=float)
    out = n ** -0.5 * np.asarray(d.k_theta) * np.cos(d.N * th + d.gamma)
    return _scalar_or_array(out, theta)


# --- zeros -------------------------------------------------------------------

_NEWTON_MAX_STEPS = 50


def _theta_fn(params, n):
    def g(th):
        return jacobi_eval(params, n, np.cos(th))

    def dg(th):
        return -np.sin(th) * jacobi_deriv(params, n, np.cos(th))

    return g, dg


def jacobi_zeros_theta(params, n: int, a: float, b: float) -> list[float]:
    """Zeros of theta -> P_n(cos theta) lying in [a, b], sorted increasingly.

    Brackets come from a sign scan at spacing pi/(16 N); inside each bracket
    Newton starts from the nearest asymptotic zero location
    ((l - 1/2) pi - gamma)/N and falls back to bisection whenever a step
    leaves the bracket.
    """
    params = _as_params(params)
    n = _check_degree(n)
    if not (0.0 < a < b < math.pi):
        raise DomainError(f"need 0 < a < b < pi, got [{a}, {b}]")
    if n == 0:
        return []
    g, dg = _theta_fn(params, n)
    big_n = n + 0.5 * (params.alpha + params.beta + 1.0)
    gamma = -(params.alpha + 0.5) * math.pi / 2.0
    m = max(64, int(math.ceil(16.0 * big_n * (b - a) / math.pi)) + 1)
    grid = np.linspace(a, b, m)
    vals = g(grid)

    zeros: list[float] = []
    for i in range(m - 1):
        lo, hi = grid[i], grid[i + 1]
        flo, fhi = vals[i], vals[i + 1]
        if flo == 0.0:
            zeros.append(float(lo))
            continue
        if i == m - 2 and fhi == 0.0:
            zeros.append(float(hi))
            continue
        if flo * fhi > 0.0:
            continue
        mid = 0.5 * (lo + hi)
        l = round(mid * big_n / math.pi + 0.5 + gamma / math.pi)
        th = (l - 0.5) * math.pi / big_n - gamma / big_n
        if not lo < th < hi:
            th = mid
        for _ in range(_NEWTON_MAX_STEPS):
            f = float(g(th))
            if f == 0.0:
                break
            if (f < 0.0) == (flo < 0.0):
                lo, flo = th, f
            else:
                hi = th
            step = f / float(dg(th))
            new = th - step
            if not lo < new < hi or not math.isfinite(new):
                new = 0.5 * (lo + hi)
            if abs(new - th) <= 4.0 * np.spacing(th) or hi - lo <= 4.0 * np.spacing(hi):
                th = new
                break
            th = new
        else:
            raise NumericalError(f"zero refinement did not converge for l={l} (n={n})")
        zeros.append(float(th))
    return sorted(set(zeros))


# --- envelope ----------------------------------------------------------------

def envelope_bound(params, n: int, theta, c: float = ENVELOPE_C, delta: float = ENVELOPE_DELTA):
    """Two-regime bound for |P_n(cos theta)|, up to a constant.

    n^alpha for theta <= c/n and n^{-1/2} theta^{-alpha-1/2} on [c/n, pi - delta].
    """
    params = _as_params(params)
    n = _check_degree(n)
    if n < 1:
        raise DomainError("envelope needs n >= 1")
    th = np.asarray(theta, dtype=float)
    if np.any((th <= 0.0) | (th > math.pi - delta)):
        raise DomainError(f"theta must lie in (0, pi - {delta}]")
    a = params.alpha
    with np.errstate(divide="ignore"):
        inner = float(n) ** -0.5 * th ** (-a - 0.5)
    out = np.where(th <= c / n, float(n) ** a, inner)
    return _scalar_or_array(out, theta)
