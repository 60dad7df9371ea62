"""Acceptance criteria, one test per criterion.

Each test prints a single ``#n <title>: PASS|FAIL (detail)`` line; the lines
are also collected into the terminal summary.  A criterion that cannot be met
is still run as stated and reported as FAIL.
"""

import math
import os
import warnings

import numpy as np
import pytest
from scipy.special import gammaln

from gaf_rigidity import admissibility as A
from gaf_rigidity import cli
from gaf_rigidity import kernel as K
from gaf_rigidity import linstat as LS
from gaf_rigidity import rigidity as RG
from gaf_rigidity import sampler as S
from gaf_rigidity import svg
from gaf_rigidity import zerofinder as Z
from gaf_rigidity.errors import NonConvergent

from conftest import ACCEPTANCE_LINES, FAMILIES, mc_statistics

pytestmark = pytest.mark.slow

CUSTOM = K.KernelSpec.from_log_coeffs(list(-2 * gammaln(np.arange(40) / 2 + 1)))


def verdict(n, title, ok, detail):
    line = f"#{n} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    if not ok:
        pytest.fail(line, pytrace=False)


def _counts(spec, radii, trials, seed):
    R = max(radii)
    out = np.zeros((trials, len(radii)), dtype=int)
    for i in range(trials):
        fn = S.sample_for_radius(spec, R, S.trial_seed(seed, i))
        mod = np.abs(Z.zeros_in_disk(fn, R).points)
        out[i] = [np.count_nonzero(mod <= r) for r in radii]
    return out


def test_01_intensity_law():
    trials = 20_000
    notes, ok = [], True
    gef = _counts(FAMILIES["gef"], [1.0, 2.0, 3.0], trials, seed=101)
    for j, R in enumerate((1.0, 2.0, 3.0)):
        mean = gef[:, j].mean()
        se = gef[:, j].std(ddof=1) / math.sqrt(trials)
        z = (mean - R * R) / se
        ok &= abs(z) <= 3
        notes.append(f"GEF R={R:g}: {mean:.4f} vs {R * R:g}, z={z:+.2f}")
    dexp = _counts(FAMILIES["double-exp"], [1.0], trials, seed=102)[:, 0]
    mean, se = dexp.mean(), dexp.std(ddof=1) / math.sqrt(trials)
    z = (mean - math.e) / se
    ok &= abs(z) <= 3
    notes.append(f"DoubleExp R=1: {mean:.4f} vs e, z={z:+.2f}")
    verdict(1, "intensity law", ok, "; ".join(notes))


J_GRID = {
    "gef": 5.0,
    "ml-half": 30.0,
    "ml-2": 3.0,
    "ml-3": 2.0,
    "double-exp": 1.5,
    "lindelof-1": 3.0,
    "lindelof-2": 5.0,
    "custom": 3.0,
}


def _spec(name):
    return CUSTOM if name == "custom" else FAMILIES[name]


def test_02_kernel_bound(rng):
    worst, ok, diag_ok = {}, True, True
    for name, rad in J_GRID.items():
        spec = _spec(name)
        n = 10_000
        z = rad * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        w = rad * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val = np.exp(K.log_normalized_kernel_sq(spec, z, w))
            diag = np.exp(K.log_normalized_kernel_sq(spec, z, z))
        worst[name] = float(val.max())
        ok &= bool(np.all(val >= 0) and np.all(val <= 1 + 1e-10))
        diag_ok &= bool(np.all(diag == 1.0))
    detail = f"max |J|^2 {max(worst.values()):.15f}, diagonal exact: {diag_ok}"
    verdict(2, "kernel bound", ok and diag_ok, detail)


CONVEXITY_T = {
    "gef": 6.0,
    "ml-half": 5.0,
    "ml-2": 5.0,
    "ml-3": 5.0,
    "double-exp": 3.0,
    "lindelof-1": 2.4,
    "lindelof-2": 5.0,
    "custom": 5.0,
}


def test_03_convexity():
    notes, ok = [], True
    for name, T in CONVEXITY_T.items():
        m, scale = A.log_convexity_terms(_spec(name), np.linspace(-2.0, T, 400))
        ok &= m >= -1e-9 * scale
        notes.append(f"{name} {m:.2e}")
    verdict(3, "log-convexity", ok, ", ".join(notes))


# radii multiplier keeping L s inside the range where each series is summable
CLAIM2_SCALE = {"gef": 1.0, "ml-half": 1.0, "ml-2": 1.0, "ml-3": 1.0, "double-exp": 1.0, "lindelof-1": 0.6,
                "lindelof-2": 1.0, "custom": 1.0}


def test_04_claim2_grid():
    base = [0.5, 0.75, 1.0, 1.5, 2.0]
    worst, ok, diag_ok = math.inf, True, True
    for name, c in CLAIM2_SCALE.items():
        spec = _spec(name)
        for L in (1.0, 2.0, 3.0):
            for r in base:
                for s in base:
                    if s < r:
                        continue
                    slack, scale = A.claim2_terms(spec, L, c * r, c * s)
                    if r == s:
                        diag_ok &= slack == 0.0
                    else:
                        ok &= slack >= -1e-9 * scale
                        worst = min(worst, slack / scale)
    verdict(4, "Claim 2 slack", ok and diag_ok, f"min slack/scale {worst:.3e}, r=s exact zero: {diag_ok}")


def test_05_claim1_bounded():
    notes, ok = [], True
    for name, R in (("gef", 10.0), ("ml-2", 5.0)):
        lo = A.verify_claim1(FAMILIES[name], R)
        hi = A.verify_claim1(FAMILIES[name], 4 * R)
        change = abs(hi - lo) / lo
        ok &= change < 0.5
        notes.append(f"{name} {lo:.5f} -> {hi:.5f} ({100 * change:.2f}%)")
    verdict(5, "Claim 1 boundedness", ok, "; ".join(notes))


def test_06_asymptotics():
    notes, ok = [], True
    r = 1e4
    for alpha in (0.5, 1.0, 2.0, 3.0):
        ratio = K.b_of(K.KernelSpec.mittag_leffler(alpha), r) / (alpha**2 * r**alpha)
        ok &= 0.9 <= ratio <= 1.1
        notes.append(f"ML{alpha:g} b/(a^2 r^a)={ratio:.4f}")
    dexp = FAMILIES["double-exp"]
    rs = np.array([0.25, 0.5, 1.0, 2.0, 3.0])
    a_err = np.max(np.abs(K.a_of(dexp, rs, method="series") / (rs * np.exp(rs)) - 1))
    b_err = np.max(np.abs(K.b_of(dexp, rs, method="series") / (rs * np.exp(rs) * (1 + rs)) - 1))
    ok &= a_err <= 1e-10 and b_err <= 1e-10
    notes.append(f"DoubleExp rel err a {a_err:.1e}, b {b_err:.1e}")
    for alpha, r_top in ((1.0, 13.0), (2.0, 150.0)):
        b = K.b_of(K.KernelSpec.lindelof(alpha), r_top)
        stated = math.exp(r_top ** (1 / alpha) - math.log(r_top) / alpha - 1 - math.log(alpha))
        ratio = b / stated
        ok &= abs(ratio - 1) <= 0.15
        # with the sign of the log r / alpha term flipped the ratio is close to 1
        notes.append(f"Lindelof{alpha:g} r={r_top:g} b/stated={ratio:.2f}, b/flipped={ratio / r_top ** (2 / alpha):.3f}")
    verdict(6, "asymptotics", ok, "; ".join(notes))


MC_CONFIGS = [
    ("gef", 0, 1.0, 1.0),
    ("gef", 1, 1.0, 1.0),
    ("gef", 0, 0.5, 1.0),
    ("gef", 0, 1.0, 2.0),
    ("ml-2", 0, 1.0, 1.0),
    ("ml-2", 1, 1.0, 1.0),
]


def test_07_variance_cross_oracle():
    notes, ok = [], True
    for name, k, eta, L in MC_CONFIGS:
        spec = FAMILIES[name]
        tf = LS.TestFunction(k, eta, L)
        var, se = LS.complex_variance(mc_statistics(name, k, eta, L, 2000, 11))
        quad = LS.variance_quadrature(spec, tf)
        bound = LS.variance_bound(spec, tf)
        z = (var - quad) / se
        ok &= abs(z) <= 3 and bound >= quad
        notes.append(f"{name} k{k} eta{eta:g} L{L:g}: mc {var:.4f}+-{se:.4f} quad {quad:.4f} z={z:+.2f} "
                     f"bound/quad {bound / quad:.0f}")
    verdict(7, "variance cross-oracle", ok, "; ".join(notes))


def test_08_variance_scaling():
    v2, _ = LS.complex_variance(mc_statistics("gef", 0, 0.5, 2.0, 300, 21))
    v4, _ = LS.complex_variance(mc_statistics("gef", 0, 0.5, 4.0, 300, 21))
    vh, _ = LS.complex_variance(mc_statistics("gef", 0, 0.5, 1.0, 2000, 11))
    vq, _ = LS.complex_variance(mc_statistics("gef", 0, 0.25, 1.0, 100, 22))
    ok = v4 / v2 <= 0.5 and vq / vh <= 0.5
    verdict(8, "variance scaling", ok, f"Var(L=4)/Var(L=2) = {v4 / v2:.3f}, Var(eta=1/4)/Var(eta=1/2) = {vq / vh:.3f}")


def _double_exp_run(eta):
    spec = FAMILIES["double-exp"]
    try:
        return RG.rigidity_experiment(spec, 1.0, 4, eta, 500, seed=7), None
    except NonConvergent as exc:
        R = LS.TestFunction(0, eta, 1.0).outer
        log10_zeros = K.log_a_of(spec, R * R) / math.log(10)
        return None, f"eta={eta:g}: infeasible, support radius {R:.4g} holds 10^{log10_zeros:.4g} expected zeros ({exc})"


def test_09_full_rigidity_double_exp():
    rep, why = _double_exp_run(0.125)
    if rep is not None:
        md = rep.matching_distances()
        med = float(np.median(md)) if len(md) else math.inf
        ok = rep.count_success_rate >= 0.9 and med <= 0.1
        detail = f"count rate {rep.count_success_rate:.3f}, median distance {med:.3g}"
        if ok:
            verdict(9, "full rigidity recovery", True, detail)
            return
        why = detail
    # failing run: the errors must still improve along eta = 1/2, 1/4, 1/8
    notes = [why]
    rms = []
    for eta in (0.5, 0.25):
        r, w = _double_exp_run(eta)
        if r is None:
            notes.append(w)
            rms.append(None)
        else:
            rms.append([r.rms_error(k) for k in range(3)])
            notes.append(f"eta={eta:g}: rms {[round(x, 4) for x in rms[-1]]}")
    verdict(9, "full rigidity recovery", False, "; ".join(notes))


def test_10_level_discrimination(tmp_path_factory):
    etas = (1.0, 0.5, 1 / 3)
    reps = [RG.rigidity_experiment(FAMILIES["gef"], 1.0, 1, eta, 400, seed=31) for eta in etas]
    rms0 = [r.rms_error(0) for r in reps]
    rms1 = [r.rms_error(1) for r in reps]
    plot = tmp_path_factory.mktemp("acceptance") / "level_discrimination.svg"
    plot.write_text(svg.loglog([("k=0", [1 / e for e in etas], rms0), ("k=1", [1 / e for e in etas], rms1)],
                               title="GEF recovery error vs 1/eta", xlabel="1/eta", ylabel="RMS error"))
    ok = rms0[0] > rms0[1] > rms0[2]
    detail = f"k=0 RMS {[round(x, 3) for x in rms0]}, k=1 RMS {[round(x, 3) for x in rms1]}, plot {plot}"
    verdict(10, "level discrimination", ok, detail)


def test_11_round_trip(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        pts = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        # repeat a random prefix so some points are double
        reps = int(rng.integers(0, n // 2 + 1))
        pts = np.concatenate([pts[: n - reps], pts[: reps]])
        S_ = RG.power_sums(pts, n)
        back = RG.power_sums(RG.newton_reconstruct(S_), n)
        worst = max(worst, float(np.max(np.abs(back - S_))))
    verdict(11, "Newton round trip", worst <= 1e-6, f"max power-sum error {worst:.2e}")


def test_12_determinism(tmp_path, monkeypatch):
    trees = []
    for sub, workers in (("one", "1"), ("two", "4")):
        d = tmp_path / sub
        d.mkdir()
        monkeypatch.chdir(d)
        code = cli.run(["rigidity", "--family", "gef", "--d-radius", "1", "--k-max", "2", "--eta", "0.5",
                        "--trials", "30", "--seed", "12", "--workers", workers, "--output-dir", "out"])
        assert code == 0
        trees.append({f: (d / "out" / f).read_bytes() for f in sorted(os.listdir(d / "out"))})
    ok = trees[0] == trees[1]
    verdict(12, "determinism", ok, f"{len(trees[0])} files compared byte for byte")
