"""Truncated realizations of f(z) = sum xi_n a_n z^n.

The complex Gaussians come from a Philox counter-based generator keyed by
(seed, stream): draw n depends only on the key and n, so a sample at degree
N is a prefix of the same sample at any larger degree and results do not
depend on how trials are spread over threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernel as K
from .errors import NonConvergent, TruncationWarning

DEFAULT_TAIL_TOL = 1e-12
FLUSH_LOG_SQ = -1400.0
_U53 = 2.0**-53


def trial_seed(seed: int, index: int) -> int:
    """Derived 64-bit seed for trial ``index`` of an experiment seeded by ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def complex_gaussians(seed: int, count: int, stream: int = 0) -> np.ndarray:
    """``count`` standard complex Gaussians (E|xi|^2 = 1) keyed by (seed, stream).

    Box-Muller on pairs of Philox outputs: draw n uses raw words 2n, 2n+1.
    """
    bitgen = np.random.Philox(key=np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64))
    raw = bitgen.random_raw(2 * count)
    u1 = ((raw[0::2] >> np.uint64(11)).astype(float) + 0.5) * _U53
    u2 = ((raw[1::2] >> np.uint64(11)).astype(float) + 0.5) * _U53
    rad = np.sqrt(-np.log(u1))
    return rad * np.exp(2j * np.pi * u2)


def _log_tail_profile(spec, R):
    """(log G(R^2), log of sum_{m>n} a_m^2 R^{2m} for n = 0..P-1)."""
    rr = R * R
    P = K.series_prefix_length(spec, rr)
    lc = spec.log_sq_coeffs(P - 1)
    t = lc + np.arange(P) * math.log(rr)
    logG = float(np.logaddexp.reduce(t))
    tails = np.logaddexp.accumulate(t[::-1])[::-1]
    strict = np.concatenate((tails[1:], [-np.inf]))
    return logG, strict


def truncation_degree(spec: K.KernelSpec, R: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest N with sum_{n>N} a_n^2 R^{2n} <= tail_tol * G(R^2)."""
    if not 0 < tail_tol <= 1e-6:
        raise ValueError("tail_tol must lie in (0, 1e-6]")
    if R < 0:
        raise ValueError("R must be >= 0")
    if R == 0:
        return spec.lowest_index()
    key = ("truncation_degree", float(R), float(tail_tol))
    if key not in spec._cache:
        logG, strict = _log_tail_profile(spec, R)
        ok = np.nonzero(strict - logG <= math.log(tail_tol))[0]
        spec._cache[key] = int(ok[0])
    return spec._cache[key]


def _tail_ok(spec, N, R, target):
    try:
        logG, strict = _log_tail_profile(spec, R)
    except NonConvergent:
        # the series at R needs more terms than exist: far beyond degree N
        return False
    if N >= len(strict):
        return True
    return strict[N] - logG <= target


def valid_radius_for(spec: K.KernelSpec, N: int, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Largest R at which the degree-N truncation meets the tail tolerance."""
    key = ("valid_radius", int(N), float(tail_tol))
    if key not in spec._cache:
        spec._cache[key] = _valid_radius(spec, N, tail_tol)
    return spec._cache[key]


def _valid_radius(spec, N, tail_tol):
    bound = spec.degree_bound()
    if bound is not None and N >= bound:
        return math.inf
    target = math.log(tail_tol)
    lo, hi = 0.0, 1.0
    while _tail_ok(spec, N, hi, target):
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise NonConvergent("valid radius search diverged", op="valid_radius")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _tail_ok(spec, N, mid, target):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return lo


@dataclass(frozen=True)
class SampledFunction:
    """One realization truncated at degree N; zeros are trusted up to valid_radius."""

    spec: K.KernelSpec
    degree: int
    xi: np.ndarray
    seed: int
    valid_radius: float
    tail_tol: float = DEFAULT_TAIL_TOL
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @property
    def log_abs_coeffs(self) -> np.ndarray:
        """log |xi_n a_n| for n = 0..N (-inf for zero coefficients)."""
        out = self._cache.get("lac")
        if out is None:
            lc = self.spec.log_sq_coeffs(self.degree)
            with np.errstate(divide="ignore"):
                out = 0.5 * lc + np.log(np.abs(self.xi))
            out.flags.writeable = False
            self._cache["lac"] = out
        return out

    @property
    def unit_coeffs(self) -> np.ndarray:
        return self.xi / np.abs(self.xi)

    def scaled_coeffs(self, rho: float):
        """(c, M) with f(rho*u) = exp(M) * sum c_n u^n and max |c_n| = 1."""
        lac = self.log_abs_coeffs
        e = lac + np.arange(self.degree + 1) * math.log(rho)
        M = float(np.max(e))
        return np.exp(e - M) * self.unit_coeffs, M


def sample(
    spec: K.KernelSpec, N: int, seed: int, tail_tol: float = DEFAULT_TAIL_TOL, stream: int = 0
) -> SampledFunction:
    """Draw xi_0..xi_N and fix the validity radius of the truncation."""
    if N < 1:
        raise ValueError("degree must be >= 1")
    xi = complex_gaussians(seed, N + 1, stream)
    xi.flags.writeable = False
    return SampledFunction(spec, int(N), xi, int(seed), valid_radius_for(spec, N, tail_tol), tail_tol)


def sample_for_radius(
    spec: K.KernelSpec, R: float, seed: int, tail_tol: float = DEFAULT_TAIL_TOL, stream: int = 0
) -> SampledFunction:
    """Sample with the smallest degree whose zeros are trustworthy up to R."""
    N = max(1, truncation_degree(spec, R, tail_tol))
    return sample(spec, N, seed, tail_tol, stream)


def _materialized(fn):
    lc = fn.spec.log_sq_coeffs(fn.degree)
    with np.errstate(under="ignore"):
        a = np.where(lc < FLUSH_LOG_SQ, 0.0, np.exp(0.5 * np.maximum(lc, FLUSH_LOG_SQ)))
    return fn.xi * a


def _check_radius(fn, z):
    if np.any(np.abs(z) > 1.5 * fn.valid_radius):
        warnings.warn(
            f"evaluating beyond 1.5x the valid radius {fn.valid_radius:g}",
            TruncationWarning,
            stacklevel=3,
        )


def evaluate(fn: SampledFunction, z):
    """Horner evaluation of the truncated series (coefficients below e^-700 flushed)."""
    z = np.asarray(z, dtype=complex)
    _check_radius(fn, z)
    c = _materialized(fn)
    acc = np.zeros(z.shape, dtype=complex)
    for coef in c[::-1]:
        acc = acc * z + coef
    return complex(acc) if acc.ndim == 0 else acc


def evaluate_d1(fn: SampledFunction, z):
    """Derivative of the truncated series by Horner on n xi_n a_n."""
    z = np.asarray(z, dtype=complex)
    _check_radius(fn, z)
    c = _materialized(fn)[1:] * np.arange(1, fn.degree + 1)
    acc = np.zeros(z.shape, dtype=complex)
    for coef in c[::-1]:
        acc = acc * z + coef
    return complex(acc) if acc.ndim == 0 else acc
