"""Recovering the zeros inside a disk from the zeros outside it.

For each k the power sum S_k = sum_{|z_j| <= L} z_j^k is estimated by

    S_k_hat = E[sum Phi(z_j)] - sum_{|z_j| > L} Phi(z_j),

with Phi = z^k phi_eta(|z|/L).  Because Phi = z^k on the disk,
S_k_hat - S_k = E[sum Phi] - sum Phi, whose variance is the linear-statistic
variance.  The inside configuration is then rebuilt from (round(S_0_hat),
S_1_hat, S_2_hat, ...) by Newton's identities.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernel as K
from . import linstat as LS
from . import sampler as S
from . import zerofinder as Z
from .errors import IllConditionedWarning, NumericalError, SupportExceedsValidity

RECONSTRUCT_MAX = 256
ILL_CONDITIONED = 1e12


def recover_power_sum(spec: K.KernelSpec, outside, k: int, eta: float, L: float, expected=None) -> complex:
    """Estimate the k-th power sum of the zeros in |z| <= L from the zeros outside.

    ``outside`` is a ZeroSet whose disk covers the support L e^(1/eta); points
    with |z| <= L in it are ignored.  ``expected`` may carry a precomputed
    expected_statistic for the same (k, eta, L).
    """
    tf = LS.TestFunction(k, eta, L)
    if outside.disk_radius < tf.outer * (1 - 1e-12):
        raise SupportExceedsValidity(
            f"zero set radius {outside.disk_radius:g} < support radius {tf.outer:g}"
        )
    pts = outside.points[np.abs(outside.points) > L]
    if expected is None:
        expected = LS.expected_statistic(spec, tf)
    observed = complex(np.sum(LS.test_fn_value(tf, pts))) if len(pts) else 0j
    return complex(expected) - observed


def power_sums(points, K_max):
    """S_0..S_K_max of a finite point set (S_0 is the count)."""
    pts = np.asarray(points, dtype=complex)
    return np.array([complex(np.sum(pts**k)) if len(pts) else 0j for k in range(K_max + 1)], dtype=complex)


def elementary_symmetric(S):
    """e_0..e_N from power sums S_0..S_N by Newton's identities."""
    S = np.asarray(S, dtype=complex)
    n = len(S) - 1
    e = np.zeros(n + 1, dtype=complex)
    e[0] = 1.0
    for m in range(1, n + 1):
        i = np.arange(1, m + 1)
        sign = np.where(i % 2 == 1, 1.0, -1.0)
        e[m] = np.sum(sign * e[m - i] * S[i]) / m
    return e


def newton_reconstruct(S) -> np.ndarray:
    """Points whose power sums are S_1..S_N, with N = S_0."""
    S = np.asarray(S, dtype=complex)
    if len(S) == 0:
        raise ValueError("need S_0")
    n0 = S[0].real
    if n0 < 0 or n0 != round(n0) or S[0].imag != 0:
        raise ValueError("S_0 must be a non-negative integer")
    N = int(round(n0))
    if len(S) < N + 1:
        raise ValueError(f"need power sums up to S_{N}")
    if N == 0:
        return np.zeros(0, dtype=complex)
    S = S[: N + 1]
    e = elementary_symmetric(S)
    scale = max(1.0, float(np.max(np.abs(S[1:]))))
    if np.max(np.abs(e)) > ILL_CONDITIONED * scale:
        warnings.warn(
            f"Newton recursion grew to |e| = {np.max(np.abs(e)):.3g}", IllConditionedWarning, stacklevel=2
        )
    ell = np.arange(N + 1)
    coeffs = ((-1.0) ** (N - ell)) * e[N - ell]
    # companion eigenvalues are backward stable, so clustered roots keep their power sums
    return np.sort_complex(np.polynomial.polynomial.polyroots(coeffs).astype(complex))


def matching_distance(a, b) -> float:
    """Optimal-assignment sum of |a_i - b_pi(i)| for equal-size point sets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if len(a) != len(b):
        raise ValueError("point sets differ in size")
    if len(a) == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    true_count: int = 0
    count_estimate: float = math.nan
    recovered_count: int = -1
    true_power_sums: tuple = ()
    recovered_power_sums: tuple = ()
    true_points: tuple = ()
    reconstructed_points: tuple = ()
    matching_distance: float | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def distance_to_integer(self):
        return abs(self.count_estimate - round(self.count_estimate))

    @property
    def count_ok(self):
        return self.ok and self.recovered_count == self.true_count

    def as_dict(self):
        def cl(xs):
            return [[float(z.real), float(z.imag)] for z in xs]

        return {
            "index": self.index,
            "seed": self.seed,
            "true_count": self.true_count,
            "count_estimate": self.count_estimate,
            "distance_to_integer": self.distance_to_integer if self.ok else None,
            "recovered_count": self.recovered_count,
            "true_power_sums": cl(self.true_power_sums),
            "recovered_power_sums": cl(self.recovered_power_sums),
            "true_points": cl(self.true_points),
            "reconstructed_points": cl(self.reconstructed_points),
            "matching_distance": self.matching_distance,
            "error": self.error,
        }


@dataclass(frozen=True)
class RecoveryReport:
    config: dict
    records: tuple = field(default=())

    @property
    def good(self):
        return [r for r in self.records if r.ok]

    @property
    def failed(self):
        return sum(1 for r in self.records if not r.ok)

    @property
    def count_success_rate(self):
        good = self.good
        return sum(r.count_ok for r in good) / len(good) if good else math.nan

    def errors(self, k):
        """Per-trial S_k_hat - S_k."""
        return np.array([r.recovered_power_sums[k] - r.true_power_sums[k] for r in self.good], dtype=complex)

    def rms_error(self, k):
        err = self.errors(k)
        return float(np.sqrt(np.mean(np.abs(err) ** 2))) if len(err) else math.nan

    def mean_error(self, k):
        """(mean of S_k_hat - S_k, its standard error per real/imag component)."""
        err = self.errors(k)
        n = len(err)
        if n < 2:
            return complex(math.nan), math.nan
        se = math.sqrt(float(np.var(err, ddof=1)) / n)
        return complex(np.mean(err)), se

    def matching_distances(self):
        return np.array([r.matching_distance for r in self.good if r.matching_distance is not None])

    def as_dict(self):
        K_max = self.config["K_max"]
        md = self.matching_distances()
        good = self.good
        agg = {
            "trials": len(self.records),
            "failed_trials": self.failed,
            "count_success_rate": self.count_success_rate,
            "rms_error": [self.rms_error(k) for k in range(K_max + 1)],
            "mean_error": [[self.mean_error(k)[0].real, self.mean_error(k)[0].imag] for k in range(K_max + 1)],
            "mean_error_stderr": [self.mean_error(k)[1] for k in range(K_max + 1)],
            "mean_matching_distance": float(np.mean(md)) if len(md) else None,
            "median_matching_distance": float(np.median(md)) if len(md) else None,
            "mean_distance_to_integer": float(np.mean([r.distance_to_integer for r in good])) if good else None,
        }
        return {"config": dict(self.config), "aggregate": agg, "trials": [r.as_dict() for r in self.records]}


def _run_trial(spec, D_radius, K_max, eta, index, seed, tail_tol, expected):
    tseed = S.trial_seed(seed, index)
    outer = D_radius * math.exp(1.0 / eta)
    try:
        fn = S.sample_for_radius(spec, outer, tseed, tail_tol)
        zs = Z.zeros_in_disk(fn, outer)
    except NumericalError as exc:
        return TrialRecord(index, tseed, error=f"{type(exc).__name__}: {exc}")
    inside = zs.points[np.abs(zs.points) <= D_radius]
    true_ps = power_sums(inside, K_max)
    est0 = recover_power_sum(spec, zs, 0, eta, D_radius, expected[0]).real
    n_hat = int(round(est0))
    top = max(K_max, min(n_hat, RECONSTRUCT_MAX))
    rec = [complex(est0)] + [recover_power_sum(spec, zs, k, eta, D_radius, 0j) for k in range(1, top + 1)]
    recon = np.zeros(0, dtype=complex)
    dist = None
    if 0 <= n_hat <= RECONSTRUCT_MAX:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            recon = newton_reconstruct(np.array([n_hat] + rec[1 : n_hat + 1], dtype=complex))
        if n_hat == len(inside):
            dist = matching_distance(inside, recon)
    return TrialRecord(
        index, tseed, len(inside), float(est0), n_hat,
        tuple(complex(x) for x in true_ps), tuple(rec[: K_max + 1]),
        tuple(complex(x) for x in inside), tuple(complex(x) for x in recon), dist,
    )


def rigidity_experiment(spec: K.KernelSpec, D_radius: float, K_max: int, eta: float, trials: int, seed: int,
                        workers: int = 1, tail_tol: float = S.DEFAULT_TAIL_TOL) -> RecoveryReport:
    """Run ``trials`` independent recoveries of the zeros in |z| <= D_radius."""
    if K_max < 0 or trials < 1:
        raise ValueError("need K_max >= 0 and trials >= 1")
    tf0 = LS.TestFunction(0, eta, D_radius)
    # fails fast when the support disk holds more zeros than can be computed
    S.truncation_degree(spec, tf0.outer, tail_tol)
    expected = [LS.expected_statistic(spec, tf0)]

    def job(i):
        return _run_trial(spec, D_radius, K_max, eta, i, seed, tail_tol, expected)

    if workers <= 1:
        records = [job(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(job, range(trials)))
    config = {
        "family": spec.name,
        "D_radius": D_radius,
        "K_max": K_max,
        "eta": eta,
        "trials": trials,
        "seed": seed,
        "tail_tol": tail_tol,
    }
    return RecoveryReport(config, tuple(records))
