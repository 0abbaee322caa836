"""Bivariate polynomials of total degree <= n in a monomial or tensor-Legendre basis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .jacobi import JacobiParams, jacobi_table

__all__ = ["Monomial", "TensorLegendre", "Poly2D", "index_pairs", "basis_matrices", "dimension"]

_LEGENDRE = JacobiParams(0.0, 0.0)
_LEGENDRE_SHIFTED = JacobiParams(1.0, 1.0)


@dataclass(frozen=True)
class Monomial:
    pass


@dataclass(frozen=True)
class TensorLegendre:
    """L_i(xi) L_j(zeta) with (xi, zeta) the affine image of ``box`` = (x0, x1, y0, y1) onto [-1, 1]^2."""

    box: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)


def dimension(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def index_pairs(degree: int) -> list[tuple[int, int]]:
    """(i, j) exponents ordered by total degree, then by increasing j."""
    return [(t - j, j) for t in range(degree + 1) for j in range(t + 1)]


def _legendre_with_derivs(nmax, t):
    vals = jacobi_table(_LEGENDRE, nmax, t)
    ders = np.zeros_like(vals)
    if nmax >= 1:
        shifted = jacobi_table(_LEGENDRE_SHIFTED, nmax - 1, t)
        for k in range(1, nmax + 1):
            ders[k] = 0.5 * (k + 1.0) * shifted[k - 1]
    return vals, ders


def basis_matrices(degree: int, basis, x, y):
    """Values and first partials of every basis element at the points (x, y).

    Returns three arrays of shape (len(x), dimension(degree)).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    pairs = index_pairs(degree)
    if isinstance(basis, Monomial):
        px = np.vstack([x**i for i in range(degree + 1)])
        py = np.vstack([y**j for j in range(degree + 1)])
        dpx = np.vstack([np.zeros_like(x)] + [i * x ** (i - 1) for i in range(1, degree + 1)])
        dpy = np.vstack([np.zeros_like(y)] + [j * y ** (j - 1) for j in range(1, degree + 1)])
    elif isinstance(basis, TensorLegendre):
        x0, x1, y0, y1 = basis.box
        sx, sy = 2.0 / (x1 - x0), 2.0 / (y1 - y0)
        xi = np.clip(sx * (x - x0) - 1.0, -1.0, 1.0)
        zeta = np.clip(sy * (y - y0) - 1.0, -1.0, 1.0)
        px, dpx = _legendre_with_derivs(degree, xi)
        py, dpy = _legendre_with_derivs(degree, zeta)
        dpx = dpx * sx
        dpy = dpy * sy
    else:
        raise DomainError(f"unknown basis {basis!r}")
    B = np.empty((x.size, len(pairs)))
    Bx = np.empty_like(B)
    By = np.empty_like(B)
    for c, (i, j) in enumerate(pairs):
        B[:, c] = px[i] * py[j]
        Bx[:, c] = dpx[i] * py[j]
        By[:, c] = px[i] * dpy[j]
    return B, Bx, By


@dataclass(frozen=True)
class Poly2D:
    degree: int
    coeffs: tuple
    basis: object = Monomial()

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != dimension(self.degree):
            raise DomainError(
                f"degree {self.degree} needs {dimension(self.degree)} coefficients, got {len(coeffs)}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def y_times(cls, q_coeffs) -> "Poly2D":
        """y * q(x) with q given by monomial coefficients (constant term first)."""
        q = list(q_coeffs)
        degree = len(q)
        pos = {pair: k for k, pair in enumerate(index_pairs(degree))}
        c = [0.0] * dimension(degree)
        for i, qi in enumerate(q):
            c[pos[(i, 1)]] = qi
        return cls(degree, tuple(c), Monomial())

    def separable_y_factor(self):
        """Monomial coefficients of q when the polynomial is y * q(x), else None."""
        if not isinstance(self.basis, Monomial) or self.degree < 1:
            return None
        q = np.zeros(self.degree)
        for (i, j), c in zip(index_pairs(self.degree), self.coeffs):
            if j == 1:
                q[i] = c
            elif c != 0.0:
                return None
        return q

    def coefficient_grid(self) -> np.ndarray:
        """Coefficients as a (degree+1) x (degree+1) array indexed by (i, j)."""
        C = np.zeros((self.degree + 1, self.degree + 1))
        for (i, j), c in zip(index_pairs(self.degree), self.coeffs):
            C[i, j] = c
        return C

    @classmethod
    def from_grid(cls, C, degree: int, basis) -> "Poly2D":
        return cls(degree, tuple(C[i, j] for i, j in index_pairs(degree)), basis)

    def partial(self, direction: str) -> "Poly2D":
        """The partial derivative in ``direction`` ('x' or 'y'), in the same basis."""
        if direction not in ("x", "y"):
            raise DomainError(f"direction must be 'x' or 'y', got {direction!r}")
        if self.degree == 0:
            return Poly2D(0, (0.0,), self.basis)
        C = self.coefficient_grid()
        if direction == "y":
            C = C.T
        if isinstance(self.basis, Monomial):
            D = np.polynomial.polynomial.polyder(C, axis=0)
            scale = 1.0
        else:
            x0, x1, y0, y1 = self.basis.box
            D = np.polynomial.legendre.legder(C, axis=0)
            scale = 2.0 / (x1 - x0) if direction == "x" else 2.0 / (y1 - y0)
        out = np.zeros((self.degree, self.degree))
        out[: D.shape[0], :] = D[: self.degree, : self.degree] * scale
        if direction == "y":
            out = out.T
        return Poly2D.from_grid(out, self.degree - 1, self.basis)

    def _eval(self, x, y, which):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        mats = basis_matrices(self.degree, self.basis, xb, yb)
        out = (mats[which] @ np.asarray(self.coeffs)).reshape(shape)
        return float(out) if out.ndim == 0 else out

    def __call__(self, x, y):
        return self._eval(x, y, 0)

    def dx(self, x, y):
        return self._eval(x, y, 1)

    def dy(self, x, y):
        return self._eval(x, y, 2)
