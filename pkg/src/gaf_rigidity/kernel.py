"""Covariance kernels G(z) = sum a_n^2 z^n and their log-domain evaluation.

Everything here works with ``log a_n^2`` and ``log G``; values such as
``G(r) = exp(exp(r))`` never appear in linear scale.  Closed forms are used
where a family admits them and the adaptive series is used otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import erf, gammaln, logsumexp, wofz

from .errors import ConfigError, GridTooSmall, KernelBoundViolated, NonConvergent

HARD_CAP = 200_000
# next 50 terms each below 1e-16 of the running max
TAIL_TERMS = 50
TAIL_LOG = math.log(1e16)
EPS = np.finfo(float).eps
# dominant-exponential regime of the Mittag-Leffler kernel (alpha > 1/2):
# the power-law correction is below exp(-40) relative once r**alpha >= 40
ML_DOMINANT = 40.0
_CHUNK_ELEMS = 4_000_000

FAMILIES = ("gef", "mittag-leffler", "double-exp", "lindelof", "custom")


def wrap_angle(x):
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with coefficient rule ``n -> log a_n^2``.

    Build instances with the classmethods (``gef``, ``mittag_leffler``, ...)
    or :func:`parse_family`.  Instances are immutable; the coefficient cache
    only ever grows and is not part of equality.
    """

    family: str
    alpha: float | None = None
    custom: tuple[float, ...] | None = None
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.family in ("mittag-leffler", "lindelof"):
            if self.alpha is None or not self.alpha > 0:
                raise ConfigError(f"{self.family} needs a positive alpha")
        if self.family == "custom":
            if not self.custom or not np.isfinite(np.max(self.custom)):
                raise ConfigError("custom kernel needs at least one finite log a_n^2")
            if any(math.isnan(v) or v == math.inf for v in self.custom):
                raise ConfigError("custom log a_n^2 values must be finite or -inf")

    # construction helpers
    @classmethod
    def gef(cls):
        return cls("gef")

    @classmethod
    def mittag_leffler(cls, alpha):
        return cls("mittag-leffler", float(alpha))

    @classmethod
    def double_exp(cls):
        return cls("double-exp")

    @classmethod
    def lindelof(cls, alpha):
        return cls("lindelof", float(alpha))

    @classmethod
    def from_log_coeffs(cls, values: Sequence[float]):
        return cls("custom", custom=tuple(float(v) for v in values))

    @property
    def name(self) -> str:
        if self.family in ("mittag-leffler", "lindelof"):
            return f"{self.family}:{self.alpha:g}"
        if self.family == "custom":
            return f"custom[{len(self.custom)}]"
        return self.family

    def log_sq_coeffs(self, n_max: int) -> np.ndarray:
        """Return ``log a_n^2`` for ``n = 0..n_max`` (read-only view)."""
        have = self._cache.get("lc")
        if have is None or len(have) <= n_max:
            size = max(n_max + 1, 64 if have is None else 2 * len(have))
            arr = self._compute_log_coeffs(size, have)
            arr.flags.writeable = False
            self._cache["lc"] = arr
            have = arr
        return have[: n_max + 1]

    def _compute_log_coeffs(self, size, have):
        n = np.arange(size, dtype=float)
        if self.family == "gef":
            return -gammaln(n + 1.0)
        if self.family == "mittag-leffler":
            return -gammaln(1.0 + n / self.alpha)
        if self.family == "lindelof":
            return -self.alpha * n * np.log(np.log(n + np.e))
        if self.family == "double-exp":
            return 1.0 + _log_bell_numbers(size, self._cache) - gammaln(n + 1.0)
        out = np.full(size, -np.inf)
        vals = np.asarray(self.custom[:size], dtype=float)
        out[: len(vals)] = vals
        return out

    def degree_bound(self) -> int | None:
        """Index of the last nonzero coefficient for polynomial kernels."""
        if self.family != "custom":
            return None
        finite = np.nonzero(np.isfinite(self.custom))[0]
        return int(finite[-1])

    def lowest_index(self) -> int:
        """Smallest n with a_n != 0."""
        lc = self.log_sq_coeffs(256)
        idx = np.nonzero(np.isfinite(lc))[0]
        if len(idx) == 0:
            raise ConfigError("kernel has no nonzero coefficient in its first 256 terms")
        return int(idx[0])


def _log_bell_numbers(size, cache):
    """log B_n for n < size via the Bell triangle, in log-sum-exp form."""
    rows = cache.get("bell_row")
    logs = cache.get("bell_logs")
    if rows is None:
        rows = np.zeros(1)
        logs = [0.0]
    logs = list(logs)
    row = rows
    while len(logs) < size:
        first = row[-1]
        acc = np.logaddexp.accumulate(row)
        row = np.concatenate(([first], np.logaddexp(first, acc)))
        logs.append(row[0])
    cache["bell_row"] = row
    cache["bell_logs"] = logs
    return np.asarray(logs[:size])


def parse_family(text: str) -> KernelSpec:
    """Parse ``gef``, ``mittag-leffler:{a}``, ``double-exp``, ``lindelof:{a}``
    or ``custom:{path}`` (text file, one ``log a_n^2`` per line)."""
    text = text.strip()
    head, _, arg = text.partition(":")
    head = head.lower()
    try:
        if head == "gef" and not arg:
            return KernelSpec.gef()
        if head == "double-exp" and not arg:
            return KernelSpec.double_exp()
        if head == "mittag-leffler" and arg:
            return KernelSpec.mittag_leffler(_parse_alpha(arg))
        if head == "lindelof" and arg:
            return KernelSpec.lindelof(_parse_alpha(arg))
        if head == "custom" and arg:
            lines = Path(arg).read_text().split()
            return KernelSpec.from_log_coeffs([float(v) for v in lines])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad kernel family {text!r}: {exc}") from exc
    raise ConfigError(f"bad kernel family {text!r}")


def _parse_alpha(arg):
    if "/" in arg:
        num, den = arg.split("/")
        return float(num) / float(den)
    return float(arg)


@dataclass(frozen=True)
class LogComplex:
    """``exp(log_mod + i*arg)``; zero is ``log_mod=-inf, arg=0``."""

    log_mod: float
    arg: float = 0.0
    rel_err: float = 0.0
    precision_loss: bool = False

    def __post_init__(self):
        if self.log_mod == -math.inf:
            object.__setattr__(self, "arg", 0.0)
        else:
            object.__setattr__(self, "arg", float(wrap_angle(self.arg)))

    def __mul__(self, other):
        if not isinstance(other, LogComplex):
            return NotImplemented
        return LogComplex(
            self.log_mod + other.log_mod,
            self.arg + other.arg,
            self.rel_err + other.rel_err,
            self.precision_loss or other.precision_loss,
        )

    @property
    def value(self) -> complex:
        return complex(np.exp(self.log_mod) * np.exp(1j * self.arg))


# ---------------------------------------------------------------- series core


def _feasibility_check(spec, r_max):
    """Fail fast when the coefficient prefix needed at r_max is beyond the cap."""
    if r_max <= 0:
        return
    closed = _closed_real(spec, np.array([r_max]))
    if closed is None:
        return
    _, log_a, log_b = closed
    if not np.isfinite(log_a[0]):
        return
    if log_a[0] > math.log(HARD_CAP) or log_b[0] > 2 * math.log(HARD_CAP):
        raise NonConvergent(
            f"{spec.name}: series at r={r_max:g} needs more than {HARD_CAP} terms",
            op="series_prefix",
        )


def series_prefix_length(spec: KernelSpec, r_max: float) -> int:
    """Number of coefficients needed so that the tail is negligible at r_max."""
    bound = spec.degree_bound()
    if bound is not None:
        return bound + 1
    if r_max <= 0:
        return spec.lowest_index() + 1
    _feasibility_check(spec, r_max)
    logr = math.log(r_max)
    size = 64
    while True:
        lc = spec.log_sq_coeffs(size - 1)
        t = lc + np.arange(size) * logr
        m = int(np.argmax(t))
        if m < size - TAIL_TERMS and np.all(t[-TAIL_TERMS:] < t[m] - TAIL_LOG):
            return size
        if size >= HARD_CAP:
            raise NonConvergent(
                f"{spec.name}: series at r={r_max:g} did not meet the tail criterion "
                f"within {HARD_CAP} terms",
                op="series_prefix",
            )
        size = min(2 * size, HARD_CAP)


def _row_chunks(n_rows, n_cols):
    step = max(1, _CHUNK_ELEMS // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def _series_real(spec, r):
    """log G, log a, log b by the adaptive series for r > 0 (1-d array)."""
    P = series_prefix_length(spec, float(np.max(r)))
    lc = spec.log_sq_coeffs(P - 1)
    n = np.arange(P, dtype=float)
    logG = np.empty(len(r))
    a = np.empty(len(r))
    b = np.empty(len(r))
    logr = np.log(r)
    for sl in _row_chunks(len(r), P):
        t = lc[None, :] + n[None, :] * logr[sl, None]
        lg = logsumexp(t, axis=1)
        w = np.exp(t - lg[:, None])
        mean = w @ n
        var = np.einsum("ij,ij->i", w, (n[None, :] - mean[:, None]) ** 2)
        logG[sl], a[sl], b[sl] = lg, mean, var
    with np.errstate(divide="ignore"):
        return logG, np.log(a), np.log(b)


def _at_zero(spec):
    m = spec.lowest_index()
    lc = spec.log_sq_coeffs(m)
    return lc[m], (math.log(m) if m > 0 else -math.inf), -math.inf


# ---------------------------------------------------------------- closed forms


def _closed_real(spec, r):
    """Closed-form (log G, log a, log b) or None; NaN marks unavailable entries."""
    fam = spec.family
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logr = np.log(r)
        if fam == "gef" or (fam == "mittag-leffler" and spec.alpha == 1.0):
            return r.astype(float), logr, logr
        if fam == "double-exp":
            return np.exp(r), logr + r, logr + np.log1p(r) + r
        if fam != "mittag-leffler":
            return None
        al = spec.alpha
        if al == 0.5:
            q = np.sqrt(r)
            logG = q + np.log1p(np.exp(-2 * q)) - math.log(2.0)
            th = np.tanh(q)
            sech2 = 1.0 / np.cosh(np.minimum(q, 350.0)) ** 2
            a = 0.5 * q * th
            b = 0.25 * q * th + 0.25 * r * sech2
            return logG, np.log(a), np.log(b)
        if al == 2.0:
            logG = r * r + np.log1p(erf(r))
            invG = np.exp(-logG)
            c = 2.0 / math.sqrt(math.pi)
            a = 2 * r * r + c * r * invG
            b = 4 * r * r + c * r * (1.0 - a) * invG
            return logG, np.log(a), np.log(b)
        if al > 0.5:
            dom = r**al >= ML_DOMINANT
            if not np.any(dom):
                return None
            nan = np.full(r.shape, np.nan)
            logG, log_a, log_b = nan.copy(), nan.copy(), nan.copy()
            logG[dom] = math.log(al) + r[dom] ** al
            log_a[dom] = math.log(al) + al * logr[dom]
            log_b[dom] = 2 * math.log(al) + al * logr[dom]
            return logG, log_a, log_b
    return None


def has_closed_form(spec: KernelSpec) -> bool:
    return _closed_real(spec, np.array([1e3])) is not None


def _real_triplet(spec, r, method):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise ValueError("r must be finite and >= 0")
    logG = np.full(r.shape, np.nan)
    log_a = np.full(r.shape, np.nan)
    log_b = np.full(r.shape, np.nan)
    zero = r == 0
    if np.any(zero):
        z = _at_zero(spec)
        logG[zero], log_a[zero], log_b[zero] = z
    pos = ~zero
    if method in ("auto", "closed") and np.any(pos):
        closed = _closed_real(spec, r[pos])
        if closed is not None:
            for arr, val in zip((logG, log_a, log_b), closed):
                arr[pos] = val
        elif method == "closed":
            raise ValueError(f"{spec.name} has no closed form")
    todo = pos & np.isnan(logG)
    if method == "closed" and np.any(todo):
        raise ValueError(f"{spec.name}: closed form unavailable at some r")
    if np.any(todo):
        lg, la, lb = _series_real(spec, r[todo])
        logG[todo], log_a[todo], log_b[todo] = lg, la, lb
    return logG, log_a, log_b


def _scalarize(x, like):
    if np.ndim(like) == 0:
        return float(x[0])
    return x.reshape(np.shape(like))


def log_G_real(spec: KernelSpec, r, method: str = "auto"):
    """``log G(r)`` for r >= 0; ``method`` is ``auto``, ``series`` or ``closed``."""
    return _scalarize(_real_triplet(spec, r, method)[0], r)


def log_a_of(spec: KernelSpec, r, method: str = "auto"):
    return _scalarize(_real_triplet(spec, r, method)[1], r)


def log_b_of(spec: KernelSpec, r, method: str = "auto"):
    return _scalarize(_real_triplet(spec, r, method)[2], r)


def a_of(spec: KernelSpec, r, method: str = "auto"):
    """a(r) = r G'(r)/G(r), the mean index of the weights a_n^2 r^n."""
    return _scalarize(np.exp(_real_triplet(spec, r, method)[1]), r)


def b_of(spec: KernelSpec, r, method: str = "auto"):
    """b(r) = r a'(r), computed as the variance of the index under a_n^2 r^n."""
    return _scalarize(np.exp(_real_triplet(spec, r, method)[2]), r)


# ------------------------------------------------------------- complex argument


def _closed_complex(spec, rho, theta):
    """Closed-form complex log G(rho e^{i theta}) or None."""
    fam = spec.family
    z = rho * np.exp(1j * theta)
    if fam == "gef" or (fam == "mittag-leffler" and spec.alpha == 1.0):
        return z
    if fam == "double-exp":
        return np.exp(z)
    if fam == "mittag-leffler" and spec.alpha == 0.5:
        w = np.sqrt(z)
        with np.errstate(divide="ignore"):
            return w + np.log1p(np.exp(-2 * w)) - math.log(2.0)
    if fam == "mittag-leffler" and spec.alpha == 2.0:
        out = np.empty(z.shape, dtype=complex)
        right = np.cos(theta) >= 0
        zr = z[right]
        z2 = zr * zr
        wz = wofz(1j * zr)
        big = z2.real > 0
        val = np.empty(zr.shape, dtype=complex)
        with np.errstate(divide="ignore"):
            val[big] = z2[big] + np.log(2.0 - np.exp(-z2[big]) * wz[big])
            val[~big] = np.log(2.0 * np.exp(z2[~big]) - wz[~big])
            out[right] = val
            out[~right] = np.log(wofz(-1j * z[~right]))
        return out
    return None


def _series_complex(spec, rho, theta):
    P = series_prefix_length(spec, float(np.max(rho)))
    lc = spec.log_sq_coeffs(P - 1)
    n = np.arange(P, dtype=float)
    log_mod = np.empty(len(rho))
    arg = np.empty(len(rho))
    rel = np.empty(len(rho))
    finite = np.isfinite(lc)
    for sl in _row_chunks(len(rho), P):
        with np.errstate(invalid="ignore"):
            t = lc[None, :] + n[None, :] * np.log(rho[sl, None])
        t = np.where(finite[None, :], t, -np.inf)
        T = np.max(t, axis=1)
        mag = np.exp(t - T[:, None])
        s = np.sum(mag * np.exp(1j * n[None, :] * theta[sl, None]), axis=1)
        abs_sum = np.sum(mag, axis=1)
        tmax = np.max(np.where(finite[None, :], np.abs(t), 0.0), axis=1)
        err = EPS * (math.log2(P) + 4 + tmax + P * np.abs(theta[sl])) * abs_sum
        with np.errstate(divide="ignore"):
            log_mod[sl] = T + np.log(np.abs(s))
            rel[sl] = err / np.abs(s)
        arg[sl] = np.angle(s)
    return log_mod, arg, rel


def log_G_complex_arrays(spec: KernelSpec, rho, theta, method: str = "auto"):
    """Vectorized log G(rho e^{i theta}) -> (log|G|, arg G, relative error bound)."""
    rho, theta = np.broadcast_arrays(
        np.asarray(rho, dtype=float), np.asarray(theta, dtype=float)
    )
    shape = rho.shape
    rho = rho.ravel().copy()
    theta = wrap_angle(theta.ravel())
    log_mod = np.empty(rho.shape)
    arg = np.zeros(rho.shape)
    rel = np.zeros(rho.shape)
    real = (theta == 0) | (rho == 0)
    if np.any(real):
        log_mod[real] = _real_triplet(spec, rho[real], method)[0]
        rel[real] = 4 * EPS * (1 + np.abs(log_mod[real]))
    cplx = ~real
    if np.any(cplx):
        closed = None
        if method in ("auto", "closed"):
            closed = _closed_complex(spec, rho[cplx], theta[cplx])
        if closed is not None:
            log_mod[cplx] = closed.real
            arg[cplx] = wrap_angle(closed.imag)
            rel[cplx] = 8 * EPS * (1 + np.abs(closed))
        elif method == "closed":
            raise ValueError(f"{spec.name} has no complex closed form")
        else:
            lm, ag, rl = _series_complex(spec, rho[cplx], theta[cplx])
            log_mod[cplx], arg[cplx], rel[cplx] = lm, ag, rl
    return log_mod.reshape(shape), arg.reshape(shape), rel.reshape(shape)


PRECISION_BITS = 20


def log_G_complex(spec: KernelSpec, r: float, theta: float, method: str = "auto") -> LogComplex:
    """Log-domain value of G(r e^{i theta}).

    ``precision_loss`` is set when cancellation leaves fewer than 20
    significant bits; ``rel_err`` carries the error bound either way.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    lm, ag, rl = log_G_complex_arrays(spec, r, theta, method)
    rl = float(rl)
    return LogComplex(float(lm), float(ag), rl, bool(rl > 2.0**-PRECISION_BITS))


# ------------------------------------------------------------ derived kernels


KERNEL_TOL = 1e-10


def log_normalized_kernel_sq(spec: KernelSpec, z, w):
    """log |J(z, w)|^2 (array version, unclamped)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z, w = np.broadcast_arrays(z, w)
    p = z * np.conj(w)
    rho = np.abs(p)
    theta = np.where(rho > 0, np.angle(p), 0.0)
    zz = (z * np.conj(z)).real
    ww = (w * np.conj(w)).real
    lm, _, _ = log_G_complex_arrays(spec, rho, theta)
    return 2 * lm - log_G_real(spec, zz) - log_G_real(spec, ww)


def normalized_kernel_sq(spec: KernelSpec, z, w):
    """|J(z,w)|^2 = |G(z conj w)|^2 / (G(|z|^2) G(|w|^2)) in [0, 1].

    Overshoots up to 1e-10 are clamped; anything larger is an evaluation bug
    (non-negative coefficients force |J| <= 1) and raises KernelBoundViolated.
    """
    val = np.exp(log_normalized_kernel_sq(spec, z, w))
    if np.any(val > 1 + KERNEL_TOL):
        worst = float(np.max(val))
        raise KernelBoundViolated(
            f"|J|^2 = {worst!r} exceeds 1 for {spec.name}", op="normalized_kernel_sq"
        )
    val = np.minimum(val, 1.0)
    return float(val) if np.ndim(val) == 0 else val


def first_intensity(spec: KernelSpec, z):
    """Density of the expected zero measure, a'(|z|^2)/pi = b(u)/(u pi)."""
    u = np.abs(np.asarray(z, dtype=complex)) ** 2
    flat = np.atleast_1d(u).astype(float)
    out = np.empty(flat.shape)
    zero = flat == 0
    if np.any(zero):
        lc = spec.log_sq_coeffs(1)
        if not np.isfinite(lc[0]):
            raise ValueError("a_0 = 0: deterministic zero at the origin, no finite density")
        out[zero] = math.exp(lc[1] - lc[0]) / math.pi if np.isfinite(lc[1]) else 0.0
    if np.any(~zero):
        out[~zero] = np.exp(log_b_of(spec, flat[~zero]) - np.log(flat[~zero])) / math.pi
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(u))


def expected_count(spec: KernelSpec, R: float) -> float:
    """Expected number of zeros in the closed disk of radius R, a(R^2)."""
    return a_of(spec, R * R)


@dataclass(frozen=True)
class LowerOrderEstimate:
    value: float
    diverging: bool
    ratios: tuple[float, ...]


def lower_order_estimate(spec: KernelSpec, r_grid) -> LowerOrderEstimate:
    """Estimate B = liminf log b(r)/log r from a finite grid.

    ``value`` is the minimum of the ratio over the tail half of the grid;
    ``diverging`` flags a ratio that keeps increasing through the tail
    (the fully rigid regime) rather than settling to a finite level.
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) < 8:
        raise GridTooSmall("need at least 8 grid points")
    if np.any(np.diff(r) <= 0) or r[0] <= 1:
        raise GridTooSmall("grid must be increasing and start above 1")
    if math.log10(r[-1] / r[0]) < 4 - 1e-12:
        raise GridTooSmall("grid must span at least 4 decades")
    ratios = log_b_of(spec, r) / np.log(r)
    tail = ratios[len(r) // 2 :]
    diverging = bool(np.all(np.diff(tail) > 0) and tail[-1] > 1.25 * tail[0])
    return LowerOrderEstimate(float(np.min(tail)), diverging, tuple(float(x) for x in ratios))


def rigidity_level(estimate: LowerOrderEstimate) -> float:
    """Number of power sums (k = 0 .. level-1) covered by k < B; inf when diverging."""
    if estimate.diverging:
        return math.inf
    return float(math.ceil(estimate.value))
