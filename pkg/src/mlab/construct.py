"""Inverse construction: a graph domain whose cusp scale follows a prescribed sequence.

Knots sit at x_n = 1 - 1/(2 n^2) with value eps_n / n^2 and slope -C_n eps_n.
A convex C^1 piecewise-quadratic Hermite interpolant joins consecutive knots
(in the gap s = 1 - x), a power tail c s^q closes the profile at the tip, and
the profile is capped by eps_1 on [0, 1/2].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import FlatCapInterpolant, GraphDomain, LogCusp, QuadPiece, gap_inverse
from .errors import ConstructionError, PreconditionError

__all__ = [
    "EpsilonSequence",
    "SequenceReport",
    "ConstructionResult",
    "SecantReport",
    "synthetic_sequence",
    "validate_sequence",
    "build_profile",
    "check_secant_property",
    "build_domain",
    "log_cusp_domain",
]

REL_TOL = 1e-12
MEAN_SLOPE_TOL = 1e-12
ENDPOINT_TOL = 1e-13


@dataclass(frozen=True)
class EpsilonSequence:
    values: tuple
    constants: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        if len(self.values) != len(self.constants):
            raise PreconditionError("epsilons and constants must have equal length")

    @property
    def N(self) -> int:
        return len(self.values)

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["epsilons"]), tuple(obj["constants"]))

    def to_json(self):
        return {"epsilons": list(self.values), "constants": list(self.constants)}


def synthetic_sequence(s: float, N: int) -> EpsilonSequence:
    """eps_n = n^{2-2s}, C_n = 2s: knots on F(x) = 2^s (1 - x)^s."""
    ns = range(1, N + 1)
    return EpsilonSequence(tuple(float(n) ** (2.0 - 2.0 * s) for n in ns), (2.0 * s,) * N)


@dataclass
class SequenceReport:
    violations: list = field(default_factory=list)
    equality_cases: list = field(default_factory=list)
    checked_range: tuple = (1, 1)
    sup_constant: float = math.nan
    tail_exponent: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v[0] for v in self.violations}

    def to_json(self):
        return {
            "ok": self.ok,
            "violations": [list(v) for v in self.violations],
            "equality_cases": [list(e) for e in self.equality_cases],
            "checked_range": list(self.checked_range),
            "sup_constant": self.sup_constant,
            "tail_exponent": self.tail_exponent,
        }


def _knot_data(seq: EpsilonSequence, N: int):
    ns = np.arange(1, N + 1, dtype=float)
    gaps = 0.5 / ns**2
    eps = np.array(seq.values[:N])
    vals = eps / ns**2
    # slopes in the gap coordinate: dF/ds = -dF/dx = C_n eps_n
    slopes = np.array(seq.constants[:N]) * eps
    return gaps, vals, slopes


def _close(a, b, scale):
    return abs(a - b) <= REL_TOL * scale


def validate_sequence(seq: EpsilonSequence) -> SequenceReport:
    """Positivity, monotonicity, the pairwise tangent condition and Hermite compatibility.

    Violations are ``(kind, detail)`` pairs; kinds are ``positivity``,
    ``monotonicity``, ``tangent``, ``compatibility`` and ``tail``.
    """
    N = seq.N
    if N < 2:
        raise PreconditionError("need at least two sequence terms")
    rep = SequenceReport(checked_range=(1, N), sup_constant=max(seq.constants))
    eps, C = seq.values, seq.constants
    for n in range(N):
        if not eps[n] > 0.0:
            rep.violations.append(("positivity", f"eps_{n + 1} = {eps[n]} is not positive"))
        if not C[n] > 0.0:
            rep.violations.append(("positivity", f"C_{n + 1} = {C[n]} is not positive"))
    for n in range(N - 1):
        if eps[n + 1] > eps[n]:
            rep.violations.append(("monotonicity", f"eps_{n + 2} > eps_{n + 1}"))

    gaps, vals, slopes = _knot_data(seq, N)
    # tangent-line condition at every knot m against every other knot n
    for m in range(N):
        for n in range(N):
            if n == m:
                continue
            lhs = vals[n] - vals[m]
            rhs = -C[m] * eps[m] / 2.0 * (1.0 / (m + 1) ** 2 - 1.0 / (n + 1) ** 2)
            scale = max(abs(vals[n]), abs(vals[m]), abs(rhs))
            if lhs < rhs and not _close(lhs, rhs, scale):
                rep.violations.append(("tangent", f"pair (n={n + 1}, m={m + 1}): {lhs:.6g} < {rhs:.6g}"))
            elif _close(lhs, rhs, scale):
                holds = _close(C[n] * eps[n], C[m] * eps[m], max(C[n] * eps[n], C[m] * eps[m]))
                rep.equality_cases.append((n + 1, m + 1, bool(holds)))

    for n in range(N - 1):
        # interval [s_{n+1}, s_n]: left slope d_a belongs to knot n+1
        a, b = gaps[n + 1], gaps[n]
        sec = (vals[n] - vals[n + 1]) / (b - a)
        d_a, d_b = slopes[n + 1], slopes[n]
        scale = max(abs(d_a), abs(d_b), abs(sec))
        if _close(d_a, d_b, scale) and _close(sec, d_a, scale):
            continue
        if not (d_a < sec < d_b) or _close(sec, d_a, scale) or _close(sec, d_b, scale):
            rep.violations.append((
                "compatibility",
                f"knots {n + 1}-{n + 2}: secant {sec:.6g} not strictly between slopes {d_a:.6g} and {d_b:.6g}",
            ))
    if vals[-1] > 0.0 and slopes[-1] > 0.0:
        rep.tail_exponent = float(slopes[-1] * gaps[-1] / vals[-1])
        if rep.tail_exponent < 1.0 - REL_TOL:
            rep.violations.append(("tail", f"power tail exponent {rep.tail_exponent:.6g} < 1 is concave"))
    return rep


@dataclass
class ConstructionResult:
    profile: FlatCapInterpolant
    knots: list
    n_max: int
    report: SequenceReport

    def to_json(self):
        return {"n_max": self.n_max, "profile": self.profile.to_json(), "validation": self.report.to_json()}


def _hermite_pieces(a, b, ya, yb, da, db):
    """Convex C^1 quadratic pieces on [a, b] (gap coordinates, a < b)."""
    h = b - a
    sec = (yb - ya) / h
    scale = max(abs(da), abs(db), abs(sec))
    if abs(da - db) <= MEAN_SLOPE_TOL * scale:
        return [QuadPiece(a, b, a, ya, da, 0.0)]
    if abs(sec - 0.5 * (da + db)) <= MEAN_SLOPE_TOL * max(scale, 1.0):
        return [QuadPiece(a, b, a, ya, da, (db - da) / (2.0 * h))]
    xi = (yb - ya + da * a - db * b) / (da - db)
    if xi - a <= ENDPOINT_TOL or b - xi <= ENDPOINT_TOL:
        return [QuadPiece(a, b, a, ya, da, (db - da) / (2.0 * h))]
    h0, h1 = xi - a, b - xi
    sigma = (da * h0 + db * h1) / h
    return [
        QuadPiece(a, xi, a, ya, da, (sigma - da) / (2.0 * h0)),
        QuadPiece(xi, b, b, yb, db, (db - sigma) / (2.0 * h1)),
    ]


def build_profile(seq: EpsilonSequence, n_max: int = 64) -> ConstructionResult:
    """Flat-capped convex C^1 profile interpolating the first ``n_max`` knots."""
    N = min(seq.N, n_max)
    if N < 2:
        raise ConstructionError("need at least two knots")
    trimmed = EpsilonSequence(seq.values[:N], seq.constants[:N])
    rep = validate_sequence(trimmed)
    if not rep.ok:
        # basic data errors first, then failures naming the offending knot interval
        rank = {"positivity": 0, "monotonicity": 1, "compatibility": 2}
        ordered = sorted(rep.violations, key=lambda v: rank.get(v[0], 3))
        kind, detail = ordered[0]
        raise ConstructionError(f"{kind} violation: {detail}")
    gaps, vals, slopes = _knot_data(trimmed, N)
    pieces = []
    for n in range(N - 2, -1, -1):
        pieces.extend(_hermite_pieces(gaps[n + 1], gaps[n], vals[n + 1], vals[n], slopes[n + 1], slopes[n]))
    q = slopes[-1] * gaps[-1] / vals[-1]
    c = vals[-1] / gaps[-1] ** q
    knots = [(1.0 - g, float(v), -float(d)) for g, v, d in zip(gaps, vals, slopes)]
    prof = FlatCapInterpolant(
        cap_value=float(trimmed.values[0]),
        knots=tuple(knots),
        pieces=tuple(pieces),
        tail_coef=float(c),
        tail_exp=float(q),
        tail_gap=float(gaps[-1]),
        cap_gap=float(gaps[0]),
    )
    return ConstructionResult(prof, knots, N, rep)


@dataclass
class SecantReport:
    samples: int
    checked: int
    skipped: int
    violations: int
    worst_margin: float

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self):
        return {
            "samples": self.samples,
            "checked": self.checked,
            "skipped": self.skipped,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "ok": self.ok,
        }


def check_secant_property(profile, samples: int = 10_000, seed: int = 0,
                          slack: float = 1e-10) -> SecantReport:
    """Audit f(y)/(1 - y) <= (f(x1) - f(x2))/(x2 - x1) where f(y) = f(x1) - f(x2).

    x1 < x2 are drawn uniformly from [1/2, 1]; draws with x1 == x2 or with
    y = 1 are skipped.
    """
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.uniform(0.5, 1.0, size=(samples, 2)), axis=1)
    # work with gaps: s1 = 1 - x1 > s2 = 1 - x2
    s1, s2 = 1.0 - pts[:, 0], 1.0 - pts[:, 1]
    width = pts[:, 1] - pts[:, 0]
    drop = np.asarray(profile.gap_value(s1)) - np.asarray(profile.gap_value(s2))
    live = (width > 0.0) & (drop > 0.0)
    sy = np.zeros_like(s1)
    if live.any():
        sy[live] = gap_inverse(profile, drop[live])
    live &= sy > 0.0
    margin = np.full_like(s1, np.inf)
    fy = np.asarray(profile.gap_value(sy[live]))
    margin[live] = drop[live] / width[live] - fy / sy[live]
    checked = int(live.sum())
    worst = float(margin[live].min()) if checked else math.inf
    return SecantReport(
        samples=samples,
        checked=checked,
        skipped=samples - checked,
        violations=int(np.sum(margin[live] < -slack)),
        worst_margin=worst,
    )


def build_domain(result: ConstructionResult) -> GraphDomain:
    return GraphDomain(result.profile, "upper")


def log_cusp_domain(iota: float) -> GraphDomain:
    """E_iota = {0 <= x <= 1, 0 <= y <= phi((1 - x)^iota)}."""
    return GraphDomain(LogCusp(iota), "upper")
