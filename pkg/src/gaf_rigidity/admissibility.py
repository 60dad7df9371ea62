"""Desk-scale diagnostics for Hayman admissibility and the two kernel claims.

Nothing here decides an o(1) statement.  Each check returns a number whose
trend over growing r is the evidence; the tests look at trends, never at a
single value in isolation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernel as K
from ._quad import adaptive_simpson
from .errors import PrecisionLossWarning

MAJOR_POINTS = 129
MINOR_POINTS = 2049
CLAIM2_GRID = 64
DELTA_RULES = ("power", "log")


def estimate_delta(spec: K.KernelSpec, r: float, rule: str = "power") -> float:
    """Cutoff between the major and the minor arc.

    ``power``: min(pi/2, b^(-2/5)).  ``log``: min(pi/2, sqrt(2 log b / b)),
    which makes the Gaussian tail exp(-delta^2 b/2) equal to 1/b.
    """
    b = K.b_of(spec, r)
    if not b >= 10:
        raise ValueError(f"b({r:g}) = {b:.3g} < 10: r is below the admissible regime")
    if rule == "power":
        d = b ** -0.4
    elif rule == "log":
        d = math.sqrt(2 * math.log(b) / b)
    else:
        raise ValueError(f"unknown delta rule {rule!r}")
    return min(math.pi / 2, d)


def _complex_log_G(spec, r, theta):
    lm, arg, rel = K.log_G_complex_arrays(spec, r, theta)
    if np.any(rel > 2.0**-K.PRECISION_BITS):
        warnings.warn(
            f"{spec.name}: cancellation in G(r e^(i theta)) at r={r:g}", PrecisionLossWarning, stacklevel=3
        )
    return lm, arg, rel


def check_major_arc(spec: K.KernelSpec, r: float, delta: float, points: int = MAJOR_POINTS) -> float:
    """max over |theta| <= delta of |log G(r e^{i theta}) - log G(r) - i theta a + theta^2 b / 2|."""
    if not 0 < delta < math.pi:
        raise ValueError("delta must lie in (0, pi)")
    points = max(points, MAJOR_POINTS) | 1
    theta = np.linspace(-delta, delta, points)
    lm, arg, _ = _complex_log_G(spec, r, theta)
    logG, a, b = K.log_G_real(spec, r), K.a_of(spec, r), K.b_of(spec, r)
    re = lm - logG + 0.5 * theta**2 * b
    im = K.wrap_angle(arg - theta * a)
    return float(np.max(np.hypot(re, im)))


def _minor_log_ratio(spec, r, delta, points):
    theta = np.linspace(delta, math.pi, max(points, 2))
    lm, _, rel = _complex_log_G(spec, r, theta)
    # upper bound of |G| when cancellation is present
    lm = lm + np.log1p(rel)
    return float(np.max(lm)) - K.log_G_real(spec, r)


def check_minor_arc(spec: K.KernelSpec, r: float, delta: float, points: int = MINOR_POINTS, power: float = 0.5) -> float:
    """sup over delta <= |theta| <= pi of |G(r e^{i theta})| b(r)^power / G(r).

    Real coefficients make |G| even in theta, so only [delta, pi] is sampled.
    """
    if not 0 < delta < math.pi:
        raise ValueError("delta must lie in (0, pi)")
    return math.exp(_minor_log_ratio(spec, r, delta, points) + power * K.log_b_of(spec, r))


def verify_claim1(spec: K.KernelSpec, R: float, rel_tol: float = 1e-9) -> float:
    """A(R) sqrt(b(R)) / (4 pi^2 G(R)^2) with A(R) = 2 pi * int |G(R e^{i theta})|^2 d theta."""
    logG = K.log_G_real(spec, R)

    def integrand(theta):
        lm, _, _ = K.log_G_complex_arrays(spec, R, theta)
        return np.exp(2 * (lm - logG))

    b = K.b_of(spec, R)
    start = int(min(4096, max(16, 8 * math.pi * math.sqrt(b))))
    half, _ = adaptive_simpson(integrand, 0.0, math.pi, rel_tol=rel_tol, scale=1.0, start=start)
    return 2 * half / (2 * math.pi) * math.sqrt(b)


def _min_b(spec, lo, hi):
    if lo == hi:
        return K.b_of(spec, lo)
    grid = np.concatenate(([lo], np.geomspace(lo, hi, CLAIM2_GRID), [hi]))
    return float(np.min(K.b_of(spec, grid)))


def claim2_terms(spec: K.KernelSpec, L: float, r: float, s: float):
    """(slack, scale) for the normalized-kernel decay bound."""
    if not 0 < r <= s:
        raise ValueError("need 0 < r <= s")
    Lr, Ls = L * r, L * s
    x_rs, x_rr, x_ss = Lr * Ls, Lr * Lr, Ls * Ls
    g_rs, g_rr, g_ss = (K.log_G_real(spec, x) for x in (x_rs, x_rr, x_ss))
    lhs = 2 * g_rs - g_rr - g_ss
    ls = math.log(s / r)
    bound = -ls * ls * _min_b(spec, x_rr, x_ss)
    scale = max(1.0, abs(g_rs), abs(g_rr), abs(g_ss))
    return bound - lhs, scale


def verify_claim2(spec: K.KernelSpec, L: float, r: float, s: float) -> float:
    """Slack of G(L^2 rs)^2 / (G(L^2 r^2) G(L^2 s^2)) <= exp(-log^2(s/r) min b) in log form."""
    return claim2_terms(spec, L, r, s)[0]


def log_convexity_terms(spec: K.KernelSpec, t_grid):
    """(min second difference, scale) of t -> log G(e^t) on a uniform grid."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 64:
        raise ValueError("need a uniform grid of at least 64 points")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * abs(dt[0]):
        raise ValueError("t grid must be uniform and increasing")
    g = K.log_G_real(spec, np.exp(t))
    d2 = g[2:] - 2 * g[1:-1] + g[:-2]
    return float(np.min(d2)), float(max(1.0, np.max(np.abs(g))))


def check_log_convexity(spec: K.KernelSpec, t_grid) -> float:
    return log_convexity_terms(spec, t_grid)[0]


@dataclass(frozen=True)
class AdmissibilityReport:
    family: str
    delta_rule: str
    r_grid: tuple
    delta_hat: tuple
    major_arc_err: tuple
    minor_arc_ratio: tuple
    minor_arc_ratio_quarter: tuple
    b: tuple
    convexity_min: float
    convexity_scale: float
    b_divergent: bool
    claim1_ratio: tuple = field(default=())

    def rows(self):
        for i, r in enumerate(self.r_grid):
            yield {
                "r": r,
                "b": self.b[i],
                "delta_hat": self.delta_hat[i],
                "major_arc_err": self.major_arc_err[i],
                "minor_arc_ratio": self.minor_arc_ratio[i],
                "minor_arc_ratio_quarter": self.minor_arc_ratio_quarter[i],
                "claim1_ratio": self.claim1_ratio[i] if self.claim1_ratio else None,
            }

    def as_dict(self):
        return {
            "family": self.family,
            "delta_rule": self.delta_rule,
            "r_grid": list(self.r_grid),
            "b": list(self.b),
            "delta_hat": list(self.delta_hat),
            "major_arc_err": list(self.major_arc_err),
            "minor_arc_ratio": list(self.minor_arc_ratio),
            "minor_arc_ratio_quarter": list(self.minor_arc_ratio_quarter),
            "claim1_ratio": list(self.claim1_ratio),
            "convexity_min": self.convexity_min,
            "convexity_scale": self.convexity_scale,
            "b_divergent": self.b_divergent,
        }


def admissibility_report(spec: K.KernelSpec, r_grid, t_grid=None, delta_rule: str = "power", claim1: bool = True):
    r = [float(x) for x in r_grid]
    if any(y <= x for x, y in zip(r, r[1:])):
        raise ValueError("r grid must be increasing")
    if t_grid is None:
        t_grid = np.linspace(-2.0, math.log(r[-1]), 64)
    deltas, major, minor, quarter, bs, c1 = [], [], [], [], [], []
    for x in r:
        d = estimate_delta(spec, x, delta_rule)
        deltas.append(d)
        major.append(check_major_arc(spec, x, d))
        lr = _minor_log_ratio(spec, x, d, MINOR_POINTS)
        lb = K.log_b_of(spec, x)
        minor.append(math.exp(lr + 0.5 * lb))
        quarter.append(math.exp(lr + 0.25 * lb))
        bs.append(math.exp(lb))
        if claim1:
            c1.append(verify_claim1(spec, x))
    cmin, cscale = log_convexity_terms(spec, t_grid)
    divergent = bool(all(y > x for x, y in zip(bs, bs[1:])) and bs[-1] >= 2 * bs[0])
    return AdmissibilityReport(
        spec.name, delta_rule, tuple(r), tuple(deltas), tuple(major), tuple(minor), tuple(quarter),
        tuple(bs), cmin, cscale, divergent, tuple(c1),
    )
