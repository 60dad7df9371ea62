"""Zeros of sampled functions inside a disk, certified by the argument principle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _aberth
from . import kernel as K
from .errors import CertificationError, ContourThroughZero, RootFindingStalled
from .sampler import SampledFunction

ABERTH_TOL = 1e-14
ABERTH_MAXITER = 600
POLISH_STEPS = 3
RESIDUAL_MAX = 1e-8
NEAR_CIRCLE = 1e-9
PERTURB_RETRIES = 5
PERTURB_SPAN = 1e-3
FFT_MAX = 1 << 22


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of one realization inside |z| <= disk_radius.

    ``residuals`` are |f(z_j)| / sqrt(G(|z_j|^2)), the natural scale of |f|.
    """

    points: np.ndarray
    disk_radius: float
    residuals: np.ndarray
    certified_count: int
    sample_seed: int = 0

    def __len__(self):
        return len(self.points)

    def restrict(self, inner: float) -> np.ndarray:
        """Points with |z| > inner."""
        return self.points[np.abs(self.points) > inner]

    def csv_rows(self):
        for z, res in zip(self.points, self.residuals):
            yield {"sample_seed": self.sample_seed, "re": repr(float(z.real)),
                   "im": repr(float(z.imag)), "residual": repr(float(res))}


CSV_FIELDS = ("sample_seed", "re", "im", "residual")


def write_zero_csv(path, zero_sets):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for zs in zero_sets:
            w.writerows(zs.csv_rows())


def read_zero_csv(path):
    """Read back the CSV as {sample_seed: (points, residuals)}; '#' lines are skipped."""
    out: dict[int, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(ln for ln in fh if not ln.startswith("#")):
            pts, res = out.setdefault(int(row["sample_seed"]), ([], []))
            pts.append(complex(float(row["re"]), float(row["im"])))
            res.append(float(row["residual"]))
    return {k: (np.array(p), np.array(r)) for k, (p, r) in out.items()}


# ------------------------------------------------------------- root engine


def _upper_hull(x, y):
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (x[i1] - x[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (x[i] - x[i0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def newton_polygon_radii(log_abs):
    """(edge radii, multiplicities) of the Newton polygon of log|c_n|."""
    idx = np.nonzero(np.isfinite(log_abs))[0]
    hull = _upper_hull(idx.astype(float), log_abs[idx])
    verts = idx[hull]
    radii, mult = [], []
    for a, b in zip(verts[:-1], verts[1:]):
        radii.append(math.exp((log_abs[a] - log_abs[b]) / (b - a)))
        mult.append(int(b - a))
    return np.array(radii), np.array(mult, dtype=int)


def _initial_guesses(radii, mult):
    pts = []
    for e, (rho, k) in enumerate(zip(radii, mult)):
        phase = 0.7 + 2.1 * e
        ang = 2 * np.pi * np.arange(k) / k + phase
        pts.append(rho * np.exp(1j * ang))
    return np.concatenate(pts) if pts else np.zeros(0, dtype=complex)


@dataclass(frozen=True)
class RootSolution:
    roots: np.ndarray
    converged: np.ndarray
    log_abs_f: np.ndarray  # log |f(root)|
    iterations: int


def polynomial_roots(log_abs, unit, tol=ABERTH_TOL, maxiter=ABERTH_MAXITER) -> RootSolution:
    """All roots of sum_n |c_n| unit_n z^n given log|c_n| (-inf for zero terms)."""
    log_abs = np.asarray(log_abs, dtype=float)
    unit = np.asarray(unit, dtype=complex)
    finite = np.nonzero(np.isfinite(log_abs))[0]
    if len(finite) == 0:
        raise ValueError("zero polynomial")
    lo, hi = int(finite[0]), int(finite[-1])
    zeros_at_origin = lo
    la = log_abs[lo : hi + 1].copy()
    un = unit[lo : hi + 1].copy()
    deg = hi - lo
    if deg == 0:
        roots = np.zeros(zeros_at_origin, dtype=complex)
        return RootSolution(roots, np.ones(len(roots), bool), np.full(len(roots), -np.inf), 0)
    radii, mult = newton_polygon_radii(la)
    z = _initial_guesses(radii, mult).astype(complex)
    rmin, rmax = 0.5 * radii.min(), 2.0 * radii.max()
    log_rho0 = math.log(rmin)
    h = min(0.1, 150.0 / deg)
    rows = int(math.ceil((math.log(rmax) - log_rho0) / h)) + 1
    table = _aberth.build_table(la, un, log_rho0, h, rows)
    conv, iters = _aberth.aberth(table, log_rho0, h, z, tol, maxiter, rmin, rmax)
    pabs, mlog = _aberth.polish(la, un, z, POLISH_STEPS)
    with np.errstate(divide="ignore"):
        laf = np.log(pabs) + mlog
    roots = np.concatenate((np.zeros(zeros_at_origin, dtype=complex), z))
    conv = np.concatenate((np.ones(zeros_at_origin, bool), conv))
    laf = np.concatenate((np.full(zeros_at_origin, -np.inf), laf))
    return RootSolution(roots, conv, laf, int(iters))


def polynomial_roots_from_coeffs(coeffs, **kw) -> RootSolution:
    """Roots of sum_n coeffs[n] z^n (ascending order)."""
    c = np.asarray(coeffs, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.log(np.abs(c))
        un = np.where(c != 0, np.exp(1j * np.angle(c)), 1.0)
    return polynomial_roots(la, un, **kw)


def all_roots(fn: SampledFunction) -> RootSolution:
    """All roots of the truncated series (cached on the sample)."""
    sol = fn._cache.get("roots")
    if sol is None:
        sol = polynomial_roots(fn.log_abs_coeffs, fn.unit_coeffs)
        fn._cache["roots"] = sol
    return sol


# -------------------------------------------------------- argument principle


class _NearZero(Exception):
    pass


def _winding(fn: SampledFunction, R: float) -> tuple[int, float]:
    c, _ = fn.scaled_coeffs(R)
    n = np.arange(len(c))
    m = 256
    while m < 4 * len(c):
        m *= 2
    while m <= FFT_MAX:
        q = np.fft.ifft(c, m) * m
        if np.any(q == 0):
            raise _NearZero
        dq = np.fft.ifft(c * n, m) * m
        dphi = np.angle(np.roll(q, -1) / q)
        wind = float(np.sum(dphi)) / (2 * np.pi)
        raw = float(np.mean(dq / q).real)
        count = int(round(wind))
        if np.max(np.abs(dphi)) < np.pi / 3 and abs(raw - count) <= 0.1 and abs(wind - count) < 1e-6:
            return count, raw
        m *= 2
    raise _NearZero


def _perturbed(R, attempt):
    return R * (1.0 + PERTURB_SPAN * attempt / PERTURB_RETRIES)


def count_via_argument_principle(fn: SampledFunction, R: float, return_radius: bool = False):
    """Number of zeros of the truncation in |z| < R' from (1/2 pi i) of the
    contour integral of f'/f, with R' = R unless the circle passes too close
    to a zero (then R' is perturbed upwards by at most 0.1%)."""
    for attempt in range(PERTURB_RETRIES + 1):
        Rp = _perturbed(R, attempt)
        try:
            count, _ = _winding(fn, Rp)
        except _NearZero:
            continue
        return (count, Rp) if return_radius else count
    raise ContourThroughZero(f"no clean contour near R={R:g}", op="count_via_argument_principle")


def _residuals(fn, roots, laf):
    if len(roots) == 0:
        return np.zeros(0)
    logG = K.log_G_real(fn.spec, np.abs(roots) ** 2)
    with np.errstate(under="ignore"):
        return np.exp(laf - 0.5 * logG)


def zeros_in_disk(fn: SampledFunction, R: float) -> ZeroSet:
    """Zeros of the truncation with |z| <= R', certified by the argument principle."""
    if R > fn.valid_radius * (1 + 1e-12):
        raise ValueError(f"R={R:g} exceeds the valid radius {fn.valid_radius:g}")
    sol = all_roots(fn)
    mods = np.abs(sol.roots)
    for attempt in range(PERTURB_RETRIES + 1):
        Rp = _perturbed(R, attempt)
        if np.any(np.abs(mods - Rp) <= NEAR_CIRCLE * Rp):
            continue
        try:
            count, _ = _winding(fn, Rp)
        except _NearZero:
            continue
        break
    else:
        raise ContourThroughZero(f"no clean contour near R={R:g}", op="zeros_in_disk")
    inside = mods <= Rp
    pts = sol.roots[inside]
    res = _residuals(fn, pts, sol.log_abs_f[inside])
    bad = res > RESIDUAL_MAX
    if np.any(bad):
        raise RootFindingStalled(
            f"{int(bad.sum())} root(s) inside R={Rp:g} with residual up to {res.max():.2e}",
            op="zeros_in_disk",
        )
    if len(pts) != count:
        raise CertificationError(
            f"root finder kept {len(pts)} zeros but the argument principle counts {count}",
            op="zeros_in_disk",
        )
    order = np.lexsort((pts.imag, pts.real, np.abs(pts)))
    return ZeroSet(pts[order], Rp, res[order], count, fn.seed)
