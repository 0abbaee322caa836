"""Deterministic quadrature over cuspidal graph domains.

The outer x-integral runs over a mesh graded geometrically toward the cusp at
x = 1 (built in gap coordinates s = 1 - x), refined further at the kinks of
the profile. Panel sums are reduced with ``math.fsum`` so the result does not
depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_jacobi

from .domain import CuspProfile, GraphDomain
from .errors import ConfigurationError, DomainError
from .jacobi import jacobi_eval
from .poly import Poly2D

__all__ = [
    "QuadratureRule",
    "GradedMesh",
    "gauss_legendre",
    "outer_nodes",
    "domain_nodes",
    "lp_norm_pth_power",
    "lp_weighted_line",
    "DEFAULT_MESH",
]

MAX_RULE = 256


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray


def _leggauss(m):
    return np.polynomial.legendre.leggauss(m)


@lru_cache(maxsize=None)
def _cached_rule(m):
    x, w = _leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(x, w)


def gauss_legendre(m: int) -> QuadratureRule:
    """m-point Gauss-Legendre rule on [-1, 1] (exact up to degree 2m - 1)."""
    if int(m) != m or not 1 <= m <= MAX_RULE:
        raise DomainError(f"rule size must be in [1, {MAX_RULE}], got {m}")
    return _cached_rule(int(m))


@dataclass(frozen=True)
class GradedMesh:
    """Panels [rho^{j+1} L, rho^j L] in the gap s = 1 - x, j < depth, plus the tip panel [0, rho^depth L]."""

    ratio: float = 0.5
    depth: int = 40

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise DomainError("grading ratio must lie in (0, 1)")
        if int(self.depth) != self.depth or self.depth < 0:
            raise DomainError("mesh depth must be a nonnegative integer")

    def gaps(self, span: float = 1.0) -> np.ndarray:
        """Decreasing gap breakpoints from ``span`` down to 0."""
        g = span * self.ratio ** np.arange(self.depth + 1, dtype=float)
        return np.append(g, 0.0)

    @property
    def breakpoints(self) -> np.ndarray:
        """Increasing x breakpoints for the unit interval [0, 1]."""
        return (1.0 - self.gaps(1.0))

    def refined(self, extra: int = 1) -> "GradedMesh":
        return GradedMesh(self.ratio, self.depth + extra)


DEFAULT_MESH = GradedMesh()


def outer_nodes(mesh: GradedMesh, span: float, m: int, extra_gaps=()):
    """Gauss nodes and weights in the gap coordinate on [0, span].

    Returns ``(s, w, starts)`` where ``starts`` indexes the first node of every panel.
    """
    edges = set(mesh.gaps(span).tolist())
    edges.update(g for g in extra_gaps if 0.0 < g < span)
    edges = np.array(sorted(edges))
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    rule = gauss_legendre(m)
    half = 0.5 * (hi - lo)[:, None]
    s = (0.5 * (hi + lo))[:, None] + half * rule.nodes[None, :]
    w = half * rule.weights[None, :]
    starts = np.arange(lo.size) * m
    return s.ravel(), w.ravel(), starts


def _panel_total(terms: np.ndarray, starts: np.ndarray) -> float:
    return math.fsum(np.add.reduceat(terms, starts).tolist())


def lp_weighted_line(profile: CuspProfile, weight_power: float, params, n: int, p: float,
                     mesh: GradedMesh = DEFAULT_MESH, lower: float | None = None,
                     nodes_per_panel: int | None = None) -> float:
    """Integral of f(x)^weight_power |P_n^{(alpha,beta)}(x)|^p over [lower, 1].

    ``lower`` defaults to the profile support start; values below it are only
    allowed with ``weight_power == 0``.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    if lower is None:
        lower = profile.x0
    if lower < profile.x0 and weight_power != 0:
        raise DomainError("integration range leaves the profile support")
    if not -1.0 <= lower < 1.0:
        raise DomainError("lower limit must lie in [-1, 1)")
    m = nodes_per_panel or min(MAX_RULE, max(16, math.ceil((p * n + 1) / 2) + 8))
    span = 1.0 - lower
    extra = list(profile.breakpoints())
    if not _is_even(p) and n >= 1:
        # |P_n|^p has kinks at the zeros of P_n; panel edges there keep Gauss accurate
        extra.extend((1.0 - roots_jacobi(n, params.alpha, params.beta)[0]).tolist())
    s, w, starts = outer_nodes(mesh, span, m, extra)
    if s.size < 8 * n:
        raise ConfigurationError(f"{s.size} outer nodes cannot resolve degree {n} (need >= {8 * n})")
    vals = np.abs(np.asarray(jacobi_eval(params, n, np.clip(1.0 - s, -1.0, 1.0)))) ** p
    if weight_power != 0:
        vals = vals * np.power(np.asarray(profile.gap_value(s)), weight_power)
    return _panel_total(vals * w, starts)


def _is_even(p: float) -> bool:
    return float(p).is_integer() and int(p) % 2 == 0


def domain_nodes(domain: GraphDomain, mesh: GradedMesh, mx: int, my: int):
    """Tensor quadrature over the domain: outer graded mesh in x, Gauss in y.

    Returns x, y, w (flattened) and the panel starts of the flattened arrays.
    """
    prof = domain.profile
    s, wx, starts = outer_nodes(mesh, 1.0 - prof.x0, mx, prof.breakpoints())
    f = np.asarray(prof.gap_value(s))
    rule = gauss_legendre(my)
    t = rule.nodes[None, :]
    if domain.symmetry == "symmetric":
        y = f[:, None] * t
        w = (wx * f)[:, None] * rule.weights[None, :]
    else:
        y = 0.5 * f[:, None] * (t + 1.0)
        w = (0.5 * wx * f)[:, None] * rule.weights[None, :]
    x = np.repeat(1.0 - s, my)
    return x, y.ravel(), w.ravel(), starts * my


def _sign_split_inner(poly: Poly2D, x: float, ylo: float, yhi: float, p: float, my: int) -> float:
    deg = max(poly.degree, 1)
    ys = np.linspace(ylo, yhi, 4 * deg + 8)
    vals = poly(np.full_like(ys, x), ys)
    cuts = [ylo]
    for i in range(ys.size - 1):
        if vals[i] == 0.0 and i > 0:
            cuts.append(ys[i])
        elif vals[i] * vals[i + 1] < 0.0:
            cuts.append(brentq(lambda yy: poly(x, yy), ys[i], ys[i + 1], xtol=1e-15, rtol=1e-15))
    cuts.append(yhi)
    rule = gauss_legendre(my)
    total = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        yy = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes
        total.append(0.5 * (b - a) * float(np.dot(rule.weights, np.abs(poly(np.full_like(yy, x), yy)) ** p)))
    return math.fsum(total)


def lp_norm_pth_power(domain: GraphDomain, poly: Poly2D, p: float,
                      mesh: GradedMesh = DEFAULT_MESH, inner_nodes: int | None = None) -> float:
    """Integral of |P(x, y)|^p over the domain (the p-th power of the L^p norm).

    Exact up to rounding for even p, polynomial integrands and polynomial
    profiles; for other p sign changes of P along each vertical segment are
    located by sampling and bisection and the result is approximate.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    prof = domain.profile
    if prof.height <= 0.0:
        raise DomainError("empty domain")
    deg = poly.degree
    mx = min(MAX_RULE, max(16, math.ceil(p * deg) + 2))
    q = poly.separable_y_factor()
    if q is not None:
        extra = list(prof.breakpoints())
        if not _is_even(p) and q.size > 1:
            r = np.polynomial.polynomial.polyroots(q)
            extra.extend((1.0 - r.real[np.abs(r.imag) <= 1e-12 * (1.0 + np.abs(r.real))]).tolist())
        s, w, starts = outer_nodes(mesh, 1.0 - prof.x0, mx, extra)
        f = np.asarray(prof.gap_value(s))
        qv = np.abs(np.polynomial.polynomial.polyval(1.0 - s, q)) ** p
        terms = w * np.power(f, p + 1.0) * qv / (p + 1.0)
        scale = 2.0 if domain.symmetry == "symmetric" else 1.0
        return scale * _panel_total(terms, starts)
    my = inner_nodes or min(MAX_RULE, max(16, math.ceil((p * deg + 1) / 2) + 2))
    if _is_even(p):
        x, y, w, starts = domain_nodes(domain, mesh, mx, my)
        return _panel_total(w * np.abs(poly(x, y)) ** p, starts)
    s, wx, starts = outer_nodes(mesh, 1.0 - prof.x0, mx, prof.breakpoints())
    f = np.asarray(prof.gap_value(s))
    terms = np.empty_like(s)
    for k, (sk, fk) in enumerate(zip(s, f)):
        lo = -fk if domain.symmetry == "symmetric" else 0.0
        terms[k] = wx[k] * _sign_split_inner(poly, 1.0 - sk, lo, fk, p, my)
    return _panel_total(terms, starts)
