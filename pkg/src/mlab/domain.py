"""Normalised cuspidal graph domains {0 <= x <= 1, 0 <= y <= f(x)}.

Profiles are evaluated through the gap coordinate s = 1 - x so that values,
slopes and inverses keep full relative precision at the cusp tip x = 1.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DomainError

__all__ = [
    "CuspProfile",
    "PowerCusp",
    "LogCusp",
    "Box",
    "FlatCapInterpolant",
    "QuadPiece",
    "GraphDomain",
    "CuspScale",
    "RegularityReport",
    "profile_eval",
    "gap_inverse",
    "profile_inverse",
    "modulus_of_continuity",
    "solve_epsilon_n",
    "index_of_convexity",
    "is_convex",
    "validate_regular_cusp",
    "profile_from_json",
]

CONVEXITY_SLACK = 1e-12
CONVEXITY_GRID = 2048
LOG_CUSP_FLOOR = 1e-15


class CuspProfile:
    """Decreasing boundary profile y = f(x) on [x0, 1] with f(1) = 0.

    Subclasses implement ``gap_value(s)`` = f(1 - s) and ``gap_slope(s)`` = -f'(1 - s).
    """

    x0 = 0.0
    #: f is declared convex on [convex_from, 1]
    convex_from = 0.0
    #: f is strictly decreasing on [decreasing_from, 1]
    decreasing_from = 0.0
    cuspidal = True

    def gap_value(self, s):
        raise NotImplementedError

    def gap_slope(self, s):
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Gap coordinates where the profile is not smooth."""
        return ()

    def to_json(self) -> dict:
        raise NotImplementedError

    def __call__(self, x):
        return profile_eval(self, x)

    def derivative(self, x):
        xa = np.asarray(x, dtype=float)
        out = -np.asarray(self.gap_slope(1.0 - xa))
        return float(out) if np.ndim(x) == 0 else out

    @property
    def height(self) -> float:
        return float(self.gap_value(1.0 - self.x0))


@dataclass(frozen=True)
class PowerCusp(CuspProfile):
    """f(x) = (1 - x)^k."""

    k: float

    def __post_init__(self):
        if not self.k >= 1.0:
            raise DomainError(f"power cusp needs k >= 1, got {self.k}")

    def gap_value(self, s):
        return np.power(s, self.k)

    def gap_slope(self, s):
        return self.k * np.power(s, self.k - 1.0)

    def to_json(self):
        return {"kind": "power", "parameters": {"k": self.k}}


def _phi(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, safe / (1.0 - np.log(safe)), 0.0)


def _phi_prime(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    lg = np.log(safe)
    return np.where(t > 0.0, (2.0 - lg) / (1.0 - lg) ** 2, 0.0)


@dataclass(frozen=True)
class LogCusp(CuspProfile):
    """f(x) = phi((1 - x)^iota) with phi(t) = t / (1 + ln(1/t)), phi(0) = 0."""

    iota: float

    def __post_init__(self):
        if not self.iota >= 1.0:
            raise DomainError(f"log cusp needs iota >= 1, got {self.iota}")

    def gap_value(self, s):
        if isinstance(s, float):
            if s < LOG_CUSP_FLOOR:
                return 0.0
            t = s**self.iota
            return t / (1.0 - math.log(t)) if t > 0.0 else 0.0
        s = np.asarray(s, dtype=float)
        v = _phi(np.power(np.where(s < LOG_CUSP_FLOOR, 0.0, s), self.iota))
        return float(v) if v.ndim == 0 else v

    def gap_slope(self, s):
        s = np.asarray(s, dtype=float)
        live = np.where(s < LOG_CUSP_FLOOR, 0.0, s)
        v = _phi_prime(np.power(live, self.iota)) * self.iota * np.power(live, self.iota - 1.0)
        return float(v) if v.ndim == 0 else v

    def to_json(self):
        return {"kind": "log", "parameters": {"iota": self.iota}}


@dataclass(frozen=True)
class Box(CuspProfile):
    """Constant profile f = height; turns the graph domain into a rectangle."""

    value: float = 1.0
    cuspidal = False

    def __post_init__(self):
        if not self.value > 0.0:
            raise DomainError("box height must be positive")

    def gap_value(self, s):
        s = np.asarray(s, dtype=float)
        v = np.full_like(s, self.value)
        return float(v) if v.ndim == 0 else v

    def gap_slope(self, s):
        s = np.asarray(s, dtype=float)
        v = np.zeros_like(s)
        return float(v) if v.ndim == 0 else v

    def to_json(self):
        return {"kind": "box", "parameters": {"value": self.value}}


@dataclass(frozen=True)
class QuadPiece:
    """q(s) = value + slope (s - anchor) + curvature (s - anchor)^2 on [lo, hi] (gap coordinates)."""

    lo: float
    hi: float
    anchor: float
    value: float
    slope: float
    curvature: float


@dataclass(frozen=True)
class FlatCapInterpolant(CuspProfile):
    """Cap ``cap_value`` on x in [0, 1/2), piecewise quadratic convex C^1 on [1/2, x_N],
    and a power tail ``tail_coef * s**tail_exp`` on the last gap [0, tail_gap].

    ``knots`` holds (x, value, slope) triples with slopes in the x direction.
    """

    cap_value: float
    knots: tuple
    pieces: tuple
    tail_coef: float
    tail_exp: float
    tail_gap: float
    cap_gap: float = 0.5
    convex_from = 0.5
    decreasing_from = 0.5
    _los: tuple = field(init=False, repr=False, compare=False)
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_los", tuple(p.lo for p in self.pieces))
        table = np.array([(p.anchor, p.value, p.slope, p.curvature) for p in self.pieces], dtype=float)
        object.__setattr__(self, "_table", table.reshape(-1, 4))

    def _eval_scalar(self, s: float, deriv: bool) -> float:
        if s > self.cap_gap:
            return 0.0 if deriv else self.cap_value
        if s <= self.tail_gap:
            if deriv:
                return self.tail_coef * self.tail_exp * s ** (self.tail_exp - 1.0)
            return self.tail_coef * s**self.tail_exp
        i = min(max(bisect_right(self._los, s) - 1, 0), len(self.pieces) - 1)
        anc, val, slo, cur = self.pieces[i].anchor, self.pieces[i].value, self.pieces[i].slope, self.pieces[i].curvature
        d = s - anc
        return slo + 2.0 * cur * d if deriv else val + d * (slo + cur * d)

    def _eval(self, s, deriv):
        if isinstance(s, float):
            return self._eval_scalar(s, deriv)
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s)
        out = np.empty_like(flat)
        cap = flat > self.cap_gap
        tail = flat <= self.tail_gap
        mid = ~(cap | tail)
        out[cap] = 0.0 if deriv else self.cap_value
        st = flat[tail]
        if deriv:
            out[tail] = self.tail_coef * self.tail_exp * np.power(st, self.tail_exp - 1.0)
        else:
            out[tail] = self.tail_coef * np.power(st, self.tail_exp)
        if np.any(mid):
            sm = flat[mid]
            idx = np.searchsorted(self._los, sm, side="right") - 1
            idx = np.clip(idx, 0, len(self.pieces) - 1)
            anc, val, slo, cur = self._table[idx].T
            d = sm - anc
            out[mid] = slo + 2.0 * cur * d if deriv else val + d * (slo + cur * d)
        out = out.reshape(s.shape)
        return float(out) if out.ndim == 0 else out

    def gap_value(self, s):
        return self._eval(s, False)

    def gap_slope(self, s):
        return self._eval(s, True)

    def breakpoints(self):
        pts = {self.cap_gap, self.tail_gap}
        for p in self.pieces:
            pts.add(p.lo)
            pts.add(p.hi)
        return tuple(sorted(pts))

    def kink_at_cap(self) -> float:
        """Jump of f' across x = 1/2 (cap slope 0 against the first knot slope)."""
        return float(self.knots[0][2]) if self.knots else 0.0

    def to_json(self):
        return {
            "kind": "flat_cap",
            "parameters": {
                "cap_value": self.cap_value,
                "cap_gap": self.cap_gap,
                "tail": {
                    "coefficient": self.tail_coef,
                    "exponent": self.tail_exp,
                    "gap": self.tail_gap,
                },
            },
            "knots": [
                {"x": x, "gap": g, "value": v, "slope": d} for (x, v, d), g in zip(self.knots, self._knot_gaps())
            ],
            "pieces": [
                {
                    "lo_gap": p.lo,
                    "hi_gap": p.hi,
                    "anchor_gap": p.anchor,
                    "lo_x": 1.0 - p.hi,
                    "hi_x": 1.0 - p.lo,
                    "anchor_x": 1.0 - p.anchor,
                    "value": p.value,
                    "slope_x": -p.slope,
                    "curvature": p.curvature,
                }
                for p in self.pieces
            ],
        }

    def _knot_gaps(self):
        return [0.5 / (n * n) for n in range(1, len(self.knots) + 1)]


def profile_from_json(obj: dict) -> CuspProfile:
    kind = obj.get("kind")
    par = obj.get("parameters", {})
    if kind == "power":
        return PowerCusp(float(par["k"]))
    if kind == "log":
        return LogCusp(float(par["iota"]))
    if kind == "box":
        return Box(float(par.get("value", 1.0)))
    if kind == "flat_cap":
        tail = par["tail"]
        knots = tuple((k["x"], k["value"], k["slope"]) for k in obj["knots"])
        pieces = tuple(
            QuadPiece(p["lo_gap"], p["hi_gap"], p["anchor_gap"], p["value"], -p["slope_x"], p["curvature"])
            for p in obj["pieces"]
        )
        return FlatCapInterpolant(
            cap_value=float(par["cap_value"]),
            knots=knots,
            pieces=pieces,
            tail_coef=float(tail["coefficient"]),
            tail_exp=float(tail["exponent"]),
            tail_gap=float(tail["gap"]),
            cap_gap=float(par.get("cap_gap", 0.5)),
        )
    raise DomainError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class GraphDomain:
    """{0 <= x <= 1, 0 <= y <= f(x)} (upper) or {-f(x) <= y <= f(x)} (symmetric)."""

    profile: CuspProfile
    symmetry: str = "upper"

    def __post_init__(self):
        if self.symmetry not in ("upper", "symmetric"):
            raise DomainError(f"symmetry must be 'upper' or 'symmetric', got {self.symmetry!r}")
        top = float(np.max(self.profile.gap_value(np.linspace(0.0, 1.0 - self.profile.x0, 257))))
        if top > 1.0 + 1e-12:
            raise DomainError(f"profile exceeds the bounding box [0,1]x[-1,1] (max {top})")

    @property
    def y_range(self) -> tuple[float, float]:
        top = float(np.max(self.profile.gap_value(np.linspace(0.0, 1.0 - self.profile.x0, 1025))))
        return (-top, top) if self.symmetry == "symmetric" else (0.0, top)

    def to_json(self):
        return {"profile": self.profile.to_json(), "symmetry": self.symmetry}

    @classmethod
    def from_json(cls, obj):
        return cls(profile_from_json(obj["profile"]), obj.get("symmetry", "upper"))


@dataclass(frozen=True)
class CuspScale:
    n: int
    epsilon_n: float
    x_n: float
    gap_n: float
    u_n: float
    residual: float


@dataclass
class RegularityReport:
    convex: bool
    i_conv: float
    i_conv_finite: bool
    appindex_margin: float
    appindex_ok: bool
    eta: float

    @property
    def regular(self) -> bool:
        return self.convex and self.i_conv_finite

    def to_json(self):
        return {
            "convex": self.convex,
            "i_conv_estimate": self.i_conv,
            "i_conv_finite": self.i_conv_finite,
            "appindex_margin": self.appindex_margin,
            "appindex_ok": self.appindex_ok,
            "eta": self.eta,
            "regular": self.regular,
        }


def profile_eval(profile: CuspProfile, x):
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0.0) | (xa > 1.0)):
        raise DomainError("profile is defined on [0, 1]")
    out = profile.gap_value(1.0 - xa)
    return float(out) if np.ndim(x) == 0 else out


def gap_inverse(profile: CuspProfile, t):
    """s with f(1 - s) = t on the strictly decreasing part, by bisection to full precision."""
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    top = 1.0 - profile.decreasing_from
    fmax = float(profile.gap_value(top))
    if not profile.cuspidal:
        raise DomainError("profile has no cusp; its inverse is undefined")
    if np.any((ta < 0.0) | (ta > fmax * (1.0 + 1e-15))):
        raise DomainError(f"level outside the profile range [0, {fmax}]")
    if ta.size == 1:
        return _gap_inverse_scalar(profile, float(ta[0]), top) if np.ndim(t) == 0 \
            else np.full(np.shape(t), _gap_inverse_scalar(profile, float(ta[0]), top))
    lo = np.zeros_like(ta)
    hi = np.full_like(ta, top)
    active = np.ones(ta.shape, dtype=bool)
    for _ in range(2200):
        mid = 0.5 * (lo + hi)
        active &= (mid > lo) & (mid < hi)
        if not active.any():
            break
        below = np.asarray(profile.gap_value(mid)) < ta
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    # pick the endpoint whose value is closest to the target
    flo = np.asarray(profile.gap_value(lo))
    fhi = np.asarray(profile.gap_value(hi))
    out = np.where(np.abs(flo - ta) <= np.abs(fhi - ta), lo, hi)
    return float(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))


def _gap_inverse_scalar(profile: CuspProfile, t: float, top: float) -> float:
    lo, hi = 0.0, top
    for _ in range(2200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if float(profile.gap_value(mid)) < t:
            lo = mid
        else:
            hi = mid
    flo, fhi = float(profile.gap_value(lo)), float(profile.gap_value(hi))
    return lo if abs(flo - t) <= abs(fhi - t) else hi


def profile_inverse(profile: CuspProfile, t):
    """f^{-1}(t) as an abscissa in [decreasing_from, 1]."""
    return 1.0 - gap_inverse(profile, t)


def modulus_of_continuity(domain: GraphDomain, t):
    """sqrt((1 - f^{-1}(t))^2 + t^2)."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0.0):
        raise DomainError("modulus of continuity needs t > 0")
    s = gap_inverse(domain.profile, t)
    out = np.hypot(s, ta)
    return float(out) if np.ndim(t) == 0 else out


def solve_epsilon_n(domain: GraphDomain, n: int) -> CuspScale:
    """epsilon_n solving 2 n^2 omega(epsilon/n^2) = 1, with x_n = f^{-1}(epsilon_n/n^2)."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    prof = domain.profile
    if not prof.cuspidal:
        raise DomainError("epsilon_n is only defined on cuspidal domains")
    n2 = float(n) * float(n)
    fmax = float(prof.gap_value(1.0 - prof.decreasing_from))

    def resid(eps):
        return 2.0 * n2 * modulus_of_continuity(domain, eps / n2) - 1.0

    lo, hi = 0.0, n2 * fmax
    if resid(hi) < 0.0:
        raise ConstructionError(
            f"no sign change for n={n}: 2n^2 omega stays below 1 (profile not cuspidal enough)"
        )
    r_lo, r_hi = -1.0, resid(hi)
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        r = resid(mid)
        if r == 0.0:
            lo = hi = mid
            r_lo = r_hi = 0.0
            break
        if r < 0.0:
            lo, r_lo = mid, r
        else:
            hi, r_hi = mid, r
    eps, res = (lo, r_lo) if abs(r_lo) <= abs(r_hi) else (hi, r_hi)
    s = gap_inverse(prof, eps / n2)
    return CuspScale(
        n=int(n),
        epsilon_n=eps,
        x_n=1.0 - s,
        gap_n=s,
        u_n=2.0 * math.asin(math.sqrt(0.5 * s)),
        residual=abs(res),
    )


def _convexity_grid(eta: float, m: int = CONVEXITY_GRID) -> np.ndarray:
    x = np.linspace(eta, 1.0 - 1e-9, m)
    return 1.0 - x


def is_convex(values: np.ndarray, slack: float = CONVEXITY_SLACK) -> bool:
    """True when all second differences of uniformly sampled values are >= -slack."""
    d2 = values[:-2] - 2.0 * values[1:-1] + values[2:]
    return bool(np.all(d2 >= -slack))


def index_of_convexity(profile: CuspProfile, eta: float | None = None, r_max: float = 64.0,
                       tol: float = 1e-6) -> float:
    """sup{r >= 1 : f^{1/r} convex on [eta, 1]} by bisection on r, capped at r_max."""
    if eta is None:
        eta = profile.convex_from
    if r_max < 1.0:
        raise DomainError("r_max must be >= 1")
    vals = np.asarray(profile.gap_value(_convexity_grid(eta)))
    if not is_convex(vals):
        raise DomainError("profile is not convex on [eta, 1]")
    if is_convex(np.power(vals, 1.0 / r_max)):
        return float(r_max)
    lo, hi = 1.0, float(r_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_convex(np.power(vals, 1.0 / mid)):
            lo = mid
        else:
            hi = mid
    return lo


def validate_regular_cusp(domain: GraphDomain, eta: float | None = None, r_max: float = 64.0,
                          delta: float = 0.01) -> RegularityReport:
    """Convexity, convexity index and the margin of (I_conv + delta) f(x) >= -f'(x)(1 - x)."""
    prof = domain.profile
    if eta is None:
        eta = prof.convex_from
    s = _convexity_grid(eta)
    vals = np.asarray(prof.gap_value(s))
    convex = is_convex(vals)
    if convex:
        ic = index_of_convexity(prof, eta, r_max)
    else:
        ic = math.nan
    finite = convex and ic < r_max
    if convex:
        margin = float(np.min((ic + delta) * vals - np.asarray(prof.gap_slope(s)) * s))
    else:
        margin = math.nan
    return RegularityReport(
        convex=convex,
        i_conv=ic,
        i_conv_finite=bool(finite),
        appindex_margin=margin,
        appindex_ok=bool(convex and margin >= -1e-9),
        eta=eta,
    )
