"""Test functions and the variance of linear statistics of zeros.

Two independent routes to Var(sum_j Phi(z_j)):

* Monte Carlo over sampled zero sets (``variance_mc``), and
* quadrature of the covariance representation
  (1/16 pi^2) int int Lap Phi(z) conj(Lap Phi(w)) Li2(|J(z,w)|^2) dm(z) dm(w)
  (``variance_quadrature``).

For the radial-times-angular test functions used here the angular integrals
collapse and the quadrature runs over (log|z|, log|w|, arg z - arg w).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernel as K
from . import sampler as S
from . import zerofinder as Z
from ._quad import adaptive_simpson, composite_nodes
from .errors import QuadratureError, SupportExceedsValidity

PI2_6 = math.pi**2 / 6
BUMP_C = 8.0
_LI2_TERMS = 64
SKIP_EXPONENT = 40.0
QUAD_RTOL = 1e-3
QUAD_ORDER = 6
QUAD_LEVELS = 5
_PAIR_CHUNK = 20_000


# ------------------------------------------------------------------ dilog


def _li2_small(x):
    acc = np.zeros_like(x)
    for j in range(_LI2_TERMS, 0, -1):
        acc = acc * x + 1.0 / (j * j)
    return acc * x


def li2_from_log(ell):
    """Li2(exp(ell)) for ell <= 0, accurate as exp(ell) -> 1."""
    ell = np.minimum(np.asarray(ell, dtype=float), 0.0)
    x = np.exp(ell)
    out = np.empty_like(x)
    lo = x <= 0.5
    out[lo] = _li2_small(x[lo])
    hi = ~lo
    if np.any(hi):
        y = -np.expm1(ell[hi])  # 1 - x without cancellation
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(y > 0, ell[hi] * np.log(y), 0.0)
        out[hi] = PI2_6 - cross - _li2_small(y)
    return out


def li2(x):
    """Dilogarithm sum_j x^j / j^2 on [0, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("li2 is implemented on [0, 1]")
    with np.errstate(divide="ignore"):
        out = li2_from_log(np.log(arr))
    return float(out) if np.ndim(x) == 0 else out


# ------------------------------------------------------------ test function


def _smoothstep(t):
    t2 = t * t
    s = t2 * t * (10 - 15 * t + 6 * t2)
    s1 = 30 * t2 * (t - 1) ** 2
    s2 = 60 * t * (2 * t - 1) * (t - 1)
    return s, s1, s2


def bump(eta: float, r):
    """(phi, phi', phi'') of phi(r) = 1 - s(eta log r), s the quintic smoothstep.

    phi = 1 on [0, 1] and phi = 0 beyond e^(1/eta).
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    with np.errstate(divide="ignore"):
        t = np.clip(eta * np.log(np.where(r > 0, r, 1.0)), 0.0, 1.0)
    s, s1, s2 = _smoothstep(t)
    # derivatives vanish off the ramp; keep tiny r out of the divisions
    rr = np.where(t > 0, r, 1.0)
    val = 1.0 - s
    d1 = -s1 * eta / rr
    d2 = (s1 * eta - s2 * eta * eta) / (rr * rr)
    if r.ndim == 0:
        return float(val), float(d1), float(d2)
    return val, d1, d2


@dataclass(frozen=True)
class TestFunction:
    """Phi(z) = z^k phi_eta(|z| / L)."""

    __test__ = False

    k: int
    eta: float
    L: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a non-negative integer")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not self.L >= 1:
            raise ValueError("L must be >= 1")

    @property
    def outer(self) -> float:
        """Radius beyond which Phi vanishes."""
        return self.L * math.exp(1.0 / self.eta)

    def radial_laplacian_factor(self, t):
        """D(t) with Lap Phi = |z|^(k-2) e^{ik arg z} D(eta log(|z|/L))."""
        _, s1, s2 = _smoothstep(np.asarray(t, dtype=float))
        return -2 * self.k * self.eta * s1 - self.eta**2 * s2


def test_fn_value(tf: TestFunction, z):
    z = np.asarray(z, dtype=complex)
    phi, _, _ = bump(tf.eta, np.abs(z) / tf.L)
    out = z**tf.k * phi
    return complex(out) if out.ndim == 0 else out


def test_fn_laplacian(tf: TestFunction, z):
    """Laplacian of Phi from the polar formula; zero off the closed annulus."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    rho = r / tf.L
    _, d1, d2 = bump(tf.eta, rho)
    ramp = rho > 1
    safe = np.where(ramp, r, 1.0)
    phase = np.where(ramp, z / safe, 1.0) ** tf.k
    bracket = (2 * tf.k + 1) * rho * d1 + rho * rho * d2
    out = np.where(ramp, safe ** (tf.k - 2) * phase * bracket, 0.0)
    return complex(out) if out.ndim == 0 else out


# -------------------------------------------------------- linear statistics


def linear_statistic(zs: Z.ZeroSet, tf: TestFunction) -> complex:
    """sum_j Phi(z_j) over a zero set covering the support of Phi."""
    if zs.disk_radius < tf.outer * (1 - 1e-12):
        raise SupportExceedsValidity(
            f"zero set radius {zs.disk_radius:g} < support radius {tf.outer:g}"
        )
    if len(zs.points) == 0:
        return 0j
    return complex(np.sum(test_fn_value(tf, zs.points)))


def expected_statistic(spec: K.KernelSpec, tf: TestFunction) -> complex:
    """E sum_j Phi(z_j) = int Phi rho_1 dm.

    Zero for k >= 1; for k = 0 it is a(L^2) + 2 int phi b(e^{2u}) du over the ramp.
    """
    if tf.k >= 1:
        return 0j
    logL = math.log(tf.L)

    def integrand(t):
        u = logL + t / tf.eta
        s, _, _ = _smoothstep(t)
        return (1.0 - s) * K.b_of(spec, np.exp(2 * u))

    ramp, _ = adaptive_simpson(integrand, 0.0, 1.0, rel_tol=1e-12, start=64)
    return complex(K.a_of(spec, tf.L**2) + 2 * ramp / tf.eta)


# --------------------------------------------------------------- Monte Carlo


def _trial_statistic(spec, tf, seed, index, tail_tol):
    fn = S.sample_for_radius(spec, tf.outer, S.trial_seed(seed, index), tail_tol)
    zs = Z.zeros_in_disk(fn, tf.outer)
    return linear_statistic(zs, tf)


def sample_statistics(spec, tf, trials, seed, workers=1, tail_tol=S.DEFAULT_TAIL_TOL):
    """Linear statistics of ``trials`` independent samples, in trial order."""

    def job(i):
        return _trial_statistic(spec, tf, seed, i, tail_tol)

    if workers <= 1:
        vals = [job(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(job, range(trials)))
    return np.array(vals, dtype=complex)


def complex_variance(values):
    """(E|X - EX|^2 estimate, jackknife standard error)."""
    x = np.asarray(values, dtype=complex)
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 values")
    mean = x.mean()
    dev = x - mean
    var = float(np.sum(np.abs(dev) ** 2)) / (n - 1)
    # leave-one-out variances in closed form
    A = np.sum(dev)
    B = np.sum(np.abs(dev) ** 2)
    m = n - 1
    A_i = A - dev
    B_i = B - np.abs(dev) ** 2
    v_i = (B_i - np.abs(A_i) ** 2 / m) / (m - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((v_i - v_i.mean()) ** 2)))
    return var, se


# -------------------------------------------------------------- quadrature


def _u_panels(spec, tf, fac):
    """Panel edges in t on [0, 1], each about fac correlation widths wide."""
    logL = math.log(tf.L)
    cap = 1.0 / 8
    edges = [0.0]
    while edges[-1] < 1.0:
        t = edges[-1]
        u = logL + t / tf.eta
        width = fac * tf.eta / math.sqrt(K.b_of(spec, math.exp(2 * u)))
        nxt = t + min(width, cap)
        edges.append(min(nxt, 1.0))
        if len(edges) > 200_000:
            raise QuadratureError("correlation width too small for quadrature", op="variance_quadrature")
    return np.array(edges)


def _theta_kernels(spec, k, lr, ls, fac, order, power):
    """For pairs of radii e^lr, e^ls: (int cos(k th) Li2(|J|^power), int |J|^2) over th in (-pi, pi]."""
    lrs = lr + ls
    log_g_rr = K.log_G_real(spec, np.exp(2 * lr))
    log_g_ss = K.log_G_real(spec, np.exp(2 * ls))
    w = fac / np.sqrt(K.b_of(spec, np.exp(lrs)))
    npan = int(math.ceil(math.log2(math.pi / float(np.min(w))))) + 2
    steps = np.concatenate(([0.0], 2.0 ** np.arange(npan)))
    edges = np.minimum(w[:, None] * steps[None, :], math.pi)
    edges[:, -1] = math.pi
    x, wt = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    th = (0.5 * (lo + hi))[:, :, None] + half[:, :, None] * x
    wts = half[:, :, None] * wt
    n_pairs = len(lr)
    th = th.reshape(n_pairs, -1)
    wts = wts.reshape(n_pairs, -1)
    rho = np.broadcast_to(np.exp(lrs)[:, None], th.shape)
    lm, _, _ = K.log_G_complex_arrays(spec, rho, th)
    ell = np.minimum(2 * lm - log_g_rr[:, None] - log_g_ss[:, None], 0.0)
    li = li2_from_log(0.5 * power * ell.ravel()).reshape(ell.shape)
    kk = 2 * np.sum(wts * np.cos(k * th) * li, axis=1)
    jj = 2 * np.sum(wts * np.exp(ell), axis=1)
    return kk, jj


def _integrals(spec, tf, fac, order, power):
    """(variance integral, bound integral I_L) at one resolution."""
    edges = _u_panels(spec, tf, fac)
    t, wt = composite_nodes(edges, order)
    logL = math.log(tf.L)
    u = logL + t / tf.eta
    wu = wt / tf.eta
    D = tf.radial_laplacian_factor(t)
    n_pan = len(edges) - 1
    pan_lo = logL + edges[:-1] / tf.eta
    pan_hi = logL + edges[1:] / tf.eta
    b_lo = K.b_of(spec, np.exp(2 * pan_lo))
    b_min_pan = np.minimum(b_lo, K.b_of(spec, np.exp(2 * pan_hi)))
    # panel pairs that can matter: |J|^2 <= exp(-(gap)^2 min b) by log-convexity
    ip, jp = np.triu_indices(n_pan)
    gap = np.maximum(0.0, pan_lo[jp] - pan_hi[ip])
    mb = np.minimum(b_min_pan[ip], b_min_pan[jp])
    live = gap * gap * mb <= SKIP_EXPONENT
    ip, jp = ip[live], jp[live]
    sym = np.where(ip == jp, 1.0, 2.0)
    var_sum = 0.0
    bnd_sum = 0.0
    loc = np.arange(order)
    per_pair = order * order
    chunk = max(1, _PAIR_CHUNK // per_pair)
    for c0 in range(0, len(ip), chunk):
        a = ip[c0 : c0 + chunk]
        b = jp[c0 : c0 + chunk]
        ii = (a[:, None, None] * order + loc[None, :, None]) * np.ones(order, int)[None, None, :]
        jj = (b[:, None, None] * order + loc[None, None, :]) * np.ones(order, int)[None, :, None]
        f = np.repeat(sym[c0 : c0 + chunk], per_pair)
        ii, jj = ii.ravel(), jj.ravel()
        kk, jint = _theta_kernels(spec, tf.k, u[ii], u[jj], fac, order, power)
        radial = np.exp(tf.k * (u[ii] + u[jj])) * wu[ii] * wu[jj] * f
        var_sum += float(np.sum(radial * D[ii] * D[jj] * kk))
        bnd_sum += float(np.sum(radial * 2 * math.pi * jint))
    return var_sum / (8 * math.pi), bnd_sum


def _refined(spec, tf, power=2):
    key = (spec, tf, power)
    cached = _QUAD_CACHE.get(key)
    if cached is not None:
        return cached
    fac = 1.0
    prev = None
    for _ in range(QUAD_LEVELS):
        cur = _integrals(spec, tf, fac, QUAD_ORDER, power)
        if prev is not None:
            dv = abs(cur[0] - prev[0]) <= QUAD_RTOL * abs(cur[0])
            db = abs(cur[1] - prev[1]) <= QUAD_RTOL * abs(cur[1])
            if dv and db:
                _QUAD_CACHE[key] = cur
                return cur
        prev = cur
        fac *= 0.5
    raise QuadratureError("variance quadrature refinement did not settle", op="variance_quadrature")


_QUAD_CACHE: dict = {}


def variance_quadrature(spec: K.KernelSpec, tf: TestFunction, kernel_power: int = 2) -> float:
    """Var(sum_j Phi(z_j)) from the covariance representation.

    ``kernel_power`` selects the series sum_j |J|^(p j) / j^2 in the
    log-modulus covariance; p = 2 is the correct one, p = 1 is kept only so
    that tests can show Monte Carlo rejects it.
    """
    if kernel_power not in (1, 2):
        raise ValueError("kernel_power must be 1 or 2")
    return _refined(spec, tf, kernel_power)[0]


def bound_integral(spec: K.KernelSpec, tf: TestFunction) -> float:
    """I_L: int int e^{k(u+v)} 2 pi int |J(L e^u, L e^v, th)|^2 d th du dv over [0, 1/eta]^2."""
    return _refined(spec, tf)[1] / tf.L ** (2 * tf.k)


def variance_bound(spec: K.KernelSpec, tf: TestFunction) -> float:
    """(8/3)(k+1)^2 eta^2 L^(2k) I_L, using |Lap Phi| <= 16 (k+1) eta |z|^(k-2) and Li2(x) <= (pi^2/6) x."""
    return (2 * BUMP_C) ** 2 / 96 * (tf.k + 1) ** 2 * tf.eta**2 * tf.L ** (2 * tf.k) * bound_integral(spec, tf)


def final_form_bound(eta: float, L: float, c5: float = 1.0) -> float:
    """The large-L shape c5 eta^2 L^-2 of the bound."""
    return c5 * eta * eta / (L * L)


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class VarianceReport:
    family: str
    k: int
    eta: float
    L: float
    mc_estimate: float
    mc_stderr: float
    quadrature_value: float
    bound_value: float
    trials: int
    seed: int
    mc_mean: complex = 0j
    expected: complex = 0j

    def as_dict(self):
        return {
            "family": self.family,
            "k": self.k,
            "eta": self.eta,
            "L": self.L,
            "mc_estimate": self.mc_estimate,
            "mc_stderr": self.mc_stderr,
            "mc_mean": [self.mc_mean.real, self.mc_mean.imag],
            "expected": [self.expected.real, self.expected.imag],
            "quadrature_value": self.quadrature_value,
            "bound_value": self.bound_value,
            "trials": self.trials,
            "seed": self.seed,
        }


def variance_mc(spec: K.KernelSpec, tf: TestFunction, trials: int, seed: int, workers: int = 1,
                tail_tol: float = S.DEFAULT_TAIL_TOL, quadrature: bool = True) -> VarianceReport:
    if trials < 100:
        raise ValueError("trials must be >= 100")
    vals = sample_statistics(spec, tf, trials, seed, workers, tail_tol)
    var, se = complex_variance(vals)
    quad = variance_quadrature(spec, tf) if quadrature else math.nan
    bnd = variance_bound(spec, tf) if quadrature else math.nan
    return VarianceReport(
        spec.name, tf.k, tf.eta, tf.L, var, se, quad, bnd, trials, seed,
        complex(vals.mean()), expected_statistic(spec, tf),
    )
