"""Markov factors on graph domains.

Three routes are provided:

* ``extremal_ratio`` -- the ratio ||d/dy P_n|| / ||P_n|| for P_n = y P_n^{(alpha,beta)}(x),
  reduced to one-dimensional weighted integrals so that large n is cheap;
* ``best_markov_p2`` -- the exact L^2 factor over all polynomials of degree <= n,
  the largest generalized eigenvalue of the (stiffness, mass) pencil;
* ``lower_bound_markov_p`` -- a multistart gradient ascent of the L^p Rayleigh
  quotient, giving a lower bound on the supremum for any p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .domain import CuspProfile, GraphDomain, index_of_convexity
from .errors import DomainError, FitError, NumericalError, PreconditionError
from .jacobi import JacobiParams
from .poly import Poly2D, TensorLegendre, basis_matrices
from .quad import DEFAULT_MESH, GradedMesh, domain_nodes, lp_norm_pth_power, lp_weighted_line

__all__ = [
    "GramPair",
    "MarkovReport",
    "alpha_selector",
    "extremal_ratio",
    "lemma31_ratio",
    "lemma31_epsilon",
    "assemble_gram",
    "best_markov_p2",
    "lower_bound_markov_p",
    "fit_exponent",
    "P2_DEGREE_GUARD",
]

P2_DEGREE_GUARD = 14
ASCENT_MAX_ITER = 64


def alpha_selector(p: float, i_conv: float, margin: float) -> float:
    """alpha = (2 (p+1) I_conv + 2 - p/2)/p + margin.

    Satisfies alpha p + p/2 - 2 > 2 I_conv (p+1) strictly and
    alpha p >= 2 I_conv + 2 - p/2.
    """
    if p < 1 or i_conv < 1 or margin <= 0:
        raise DomainError("alpha_selector needs p >= 1, i_conv >= 1, margin > 0")
    return (2.0 * (p + 1.0) * i_conv + 2.0 - 0.5 * p) / p + margin


def extremal_ratio(domain: GraphDomain, params, n: int, p: float,
                   mesh: GradedMesh = DEFAULT_MESH) -> float:
    """||d/dy P||_p / ||P||_p for P(x, y) = y P_n^{(alpha,beta)}(x).

    Computed as (int f |P_n|^p / ((1/(p+1)) int f^{p+1} |P_n|^p))^{1/p}; the
    symmetric variant has the same value.
    """
    if n < 1:
        raise DomainError("extremal ratio needs n >= 1")
    prof = domain.profile
    top = lp_weighted_line(prof, 1.0, params, n, p, mesh)
    bottom = lp_weighted_line(prof, p + 1.0, params, n, p, mesh) / (p + 1.0)
    return (top / bottom) ** (1.0 / p)


def lemma31_epsilon(profile: CuspProfile, n: int, upsilon: float) -> float:
    """epsilon_n defined by f(1 - upsilon/n^2) = epsilon_n / n^2."""
    n2 = float(n) * float(n)
    return n2 * float(profile.gap_value(upsilon / n2))


def lemma31_ratio(profile: CuspProfile, params, n: int, p: float, upsilon: float,
                  mesh: GradedMesh = DEFAULT_MESH, i_conv: float | None = None,
                  eta: float | None = None) -> float:
    """[int_0^1 f |P_n|^p dx] / (epsilon_n n^{alpha p - 4}); bounded above and below in n."""
    if not isinstance(params, JacobiParams):
        params = JacobiParams(*params)
    if not 0.0 < upsilon <= 1.0:
        raise PreconditionError("upsilon must lie in (0, 1]")
    if i_conv is None:
        i_conv = index_of_convexity(profile, eta)
    need = 2.0 * i_conv + 2.0 - 0.5 * p
    if params.alpha * p < need:
        raise PreconditionError(
            f"alpha p >= 2 I_conv + 2 - p/2 fails: {params.alpha * p:.6g} < {need:.6g}"
        )
    eps = lemma31_epsilon(profile, n, upsilon)
    integral = lp_weighted_line(profile, 1.0, params, n, p, mesh)
    return integral / (eps * float(n) ** (params.alpha * p - 4.0))


# --- exact p = 2 factors -------------------------------------------------------

@dataclass
class GramPair:
    G: np.ndarray
    A_x: np.ndarray
    A_y: np.ndarray
    retained_dim: int
    #: columns span the retained subspace and are G-orthonormal
    transform: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def full_dim(self) -> int:
        return self.G.shape[0]


def _bounding_basis(domain: GraphDomain):
    y0, y1 = domain.y_range
    return TensorLegendre((domain.profile.x0, 1.0, y0, y1))


def _gram_nodes(domain, n, mesh):
    mx = min(256, max(24, 4 * n + 8))
    my = max(4, n + 2)
    return domain_nodes(domain, mesh, mx, my)


def assemble_gram(domain: GraphDomain, n: int, mesh: GradedMesh = DEFAULT_MESH,
                  threshold: float = 1e-12, basis=None) -> GramPair:
    """Mass and stiffness matrices of P_n(R^2) on the domain.

    Directions of G with eigenvalue below ``threshold * lambda_max`` are
    discarded; ``transform`` maps the retained subspace to coefficients.
    """
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold must lie in (0, 1)")
    if basis is None:
        basis = _bounding_basis(domain)
    x, y, w, _ = _gram_nodes(domain, n, mesh)
    B, Bx, By = basis_matrices(n, basis, x, y)
    G = B.T @ (w[:, None] * B)
    Ax = Bx.T @ (w[:, None] * Bx)
    Ay = By.T @ (w[:, None] * By)
    G = 0.5 * (G + G.T)
    Ax = 0.5 * (Ax + Ax.T)
    Ay = 0.5 * (Ay + Ay.T)
    lam, V = eigh(G)
    lam_max = lam[-1]
    if lam_max <= 0.0 or lam[0] < -1e-10 * lam_max:
        raise NumericalError(f"mass matrix is indefinite (lambda_min={lam[0]:.3e}, lambda_max={lam_max:.3e})")
    keep = lam >= threshold * lam_max
    T = V[:, keep] / np.sqrt(lam[keep])
    return GramPair(G, Ax, Ay, int(keep.sum()), T, lam)


def _pencil_max(A, T):
    M = T.T @ A @ T
    M = 0.5 * (M + M.T)
    return max(float(np.linalg.eigvalsh(M)[-1]), 0.0)


def best_markov_p2(domain: GraphDomain, n: int, direction: str = "max",
                   mesh: GradedMesh = DEFAULT_MESH, threshold: float = 1e-12,
                   allow_large: bool = False) -> float:
    """sup ||d P / d x_j||_2 / ||P||_2 over P of total degree <= n."""
    if direction not in ("x", "y", "max"):
        raise DomainError(f"direction must be x, y or max, got {direction!r}")
    if n > P2_DEGREE_GUARD and not allow_large:
        raise PreconditionError(
            f"n={n} exceeds the conditioning guard {P2_DEGREE_GUARD}; pass allow_large=True to override"
        )
    if n == 0:
        return 0.0
    gram = assemble_gram(domain, n, mesh, threshold)
    try:
        lx = _pencil_max(gram.A_x, gram.transform) if direction in ("x", "max") else 0.0
        ly = _pencil_max(gram.A_y, gram.transform) if direction in ("y", "max") else 0.0
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solver failed: {exc}") from exc
    return math.sqrt(max(lx, ly))


# --- general p lower bound -----------------------------------------------------

def _ascent(Bv, Bd, w, p, z0, max_iter, tol):
    """Maximize log(int |Bd z|^p / int |Bv z|^p) over the unit sphere."""

    def objective(z):
        u, v = Bd @ z, Bv @ z
        num = float(np.dot(w, np.abs(u) ** p))
        den = float(np.dot(w, np.abs(v) ** p))
        return num, den, u, v

    def log_ratio(num, den):
        if den <= 0.0:
            return -math.inf
        return math.log(num) - math.log(den) if num > 0.0 else -math.inf

    z = z0 / np.linalg.norm(z0)
    num, den, u, v = objective(z)
    best = log_ratio(num, den)
    step = 0.5
    for _ in range(max_iter):
        gu = Bd.T @ (w * np.abs(u) ** (p - 1.0) * np.sign(u))
        gv = Bv.T @ (w * np.abs(v) ** (p - 1.0) * np.sign(v))
        g = p * (gu / num - gv / den) if num > 0.0 else -p * gv / den
        g = g - np.dot(g, z) * z
        gn = np.linalg.norm(g)
        if gn == 0.0 or not math.isfinite(gn):
            break
        g /= gn
        improved = False
        while step > 1e-14:
            trial = z + step * g
            trial /= np.linalg.norm(trial)
            tn, td, tu, tv = objective(trial)
            val = log_ratio(tn, td)
            if val > best:
                gain = val - best
                z, num, den, u, v, best = trial, tn, td, tu, tv, val
                improved = True
                step = min(2.0 * step, 1.0)
                break
            step *= 0.5
        if not improved or gain < tol:
            break
    return z, best


def lower_bound_markov_p(domain: GraphDomain, n: int, p: float, direction: str = "max",
                         restarts: int = 8, seed: int = 0, mesh: GradedMesh = DEFAULT_MESH,
                         max_iter: int = ASCENT_MAX_ITER, threshold: float = 1e-12) -> float:
    """Best ||d P / d x_j||_p / ||P||_p found by multistart normalized gradient ascent.

    Works in G-orthonormal coordinates of the retained subspace; initial points
    are seeded uniform draws on the unit sphere. Deterministic given ``seed``.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    if restarts < 1:
        raise DomainError("need at least one restart")
    if direction not in ("x", "y", "max"):
        raise DomainError(f"direction must be x, y or max, got {direction!r}")
    if n == 0:
        return 0.0
    basis = _bounding_basis(domain)
    gram = assemble_gram(domain, n, mesh, threshold, basis)
    x, y, w, _ = _gram_nodes(domain, n, mesh) if p == 2 else domain_nodes(
        domain, mesh, min(256, max(24, 4 * n + 8)), 2 * n + 8)
    B, Bx, By = basis_matrices(n, basis, x, y)
    T = gram.transform
    Bv = B @ T
    dirs = ["x", "y"] if direction == "max" else [direction]
    rng = np.random.default_rng(seed)
    starts = [rng.standard_normal(T.shape[1]) for _ in range(restarts)]
    best_val = 0.0
    for d in dirs:
        Bd = (Bx if d == "x" else By) @ T
        for z0 in starts:
            z, _ = _ascent(Bv, Bd, w, float(p), z0, max_iter, 1e-10)
            poly = Poly2D(n, tuple(T @ z), basis)
            num = lp_norm_pth_power(domain, poly.partial(d), p, mesh)
            den = lp_norm_pth_power(domain, poly, p, mesh)
            if den > 0.0:
                best_val = max(best_val, (num / den) ** (1.0 / p))
    return best_val


# --- exponent fits ---------------------------------------------------------------

@dataclass
class MarkovReport:
    entries: list
    fitted_exponent: float
    fitted_constant: float
    model: str
    residual: float
    iota: float | None = None

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "entries": [[int(n), float(v)] for n, v in self.entries],
            "model": self.model,
            "iota": self.iota,
            "exponent": self.fitted_exponent,
            "constant": self.fitted_constant,
            "residual": self.residual,
        }


def fit_exponent(entries, model: str = "pure", iota: float | None = None) -> MarkovReport:
    """Least squares in log space.

    ``pure``: log M = log c + mu log n.
    ``log``:  log M = log c + mu log n + log(1 + iota ln(2 n^2)).
    """
    pts = sorted((int(n), float(v)) for n, v in entries)
    if len(pts) < 4:
        raise FitError("need at least 4 entries")
    ns = np.array([n for n, _ in pts], dtype=float)
    if len(set(ns.tolist())) != len(ns):
        raise FitError("degrees must be distinct")
    vals = np.array([v for _, v in pts])
    if np.any(vals <= 0.0) or np.any(ns <= 0.0):
        raise FitError("factors and degrees must be positive")
    target = np.log(vals)
    if model == "log":
        if iota is None:
            raise FitError("log-corrected model needs iota")
        target = target - np.log1p(iota * np.log(2.0 * ns**2))
    elif model != "pure":
        raise FitError(f"unknown model {model!r}")
    design = np.column_stack([np.ones_like(ns), np.log(ns)])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    return MarkovReport(
        entries=pts,
        fitted_exponent=float(coef[1]),
        fitted_constant=float(math.exp(coef[0])),
        model=model,
        residual=float(math.sqrt(np.mean(resid**2))),
        iota=iota if model == "log" else None,
    )
