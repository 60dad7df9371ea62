"""Compiled kernels for simultaneous root iteration on log-scaled polynomials.

A polynomial is handed over as ``log|c_n|`` and unit phases.  Evaluation at
a point z uses a row of a precomputed table, ``exp(log|c_n| + n log rho_j - M_j)``,
for the grid radius rho_j nearest to |z|, so nothing overflows even when the
coefficients span thousands of orders of magnitude.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def build_table(log_abs, unit, log_rho0, h, rows):
    deg = log_abs.shape[0] - 1
    table = np.zeros((rows, deg + 1), dtype=np.complex128)
    for j in range(rows):
        lr = log_rho0 + j * h
        m = -np.inf
        for n in range(deg + 1):
            e = log_abs[n] + n * lr
            if e > m:
                m = e
        for n in range(deg + 1):
            e = log_abs[n] + n * lr - m
            if e > -745.0:
                table[j, n] = math.exp(e) * unit[n]
    return table


@njit(cache=True, nogil=True)
def _row_eval(table, log_rho0, h, z):
    rows = table.shape[0]
    deg = table.shape[1] - 1
    az = abs(z)
    j = int(round((math.log(az) - log_rho0) / h))
    if j < 0:
        j = 0
    elif j >= rows:
        j = rows - 1
    rho = math.exp(log_rho0 + j * h)
    u = z / rho
    p = table[j, deg]
    dp = 0j
    for n in range(deg - 1, -1, -1):
        dp = dp * u + p
        p = p * u + table[j, n]
    return p, dp, rho


@njit(cache=True, nogil=True)
def aberth(table, log_rho0, h, z, tol, maxiter, rmin, rmax):
    """Gauss-Seidel Aberth-Ehrlich iteration in place; returns (converged, iterations)."""
    N = z.shape[0]
    conv = np.zeros(N, dtype=np.bool_)
    it = 0
    for it in range(1, maxiter + 1):
        active = 0
        for i in range(N):
            if conv[i]:
                continue
            active += 1
            zi = z[i]
            p, dp, rho = _row_eval(table, log_rho0, h, zi)
            if p == 0:
                conv[i] = True
                continue
            if dp == 0:
                ratio = zi * 1e-3 + 1e-3 * rmin
            else:
                ratio = rho * p / dp
            s = 0j
            for j in range(N):
                if j != i:
                    d = zi - z[j]
                    if d != 0:
                        s += 1.0 / d
            denom = 1.0 - ratio * s
            if denom == 0:
                w = ratio
            else:
                w = ratio / denom
            znew = zi - w
            az = abs(znew)
            if az > rmax:
                znew = znew * (rmax / az)
            elif az < rmin:
                if az == 0:
                    znew = rmin + 0j
                else:
                    znew = znew * (rmin / az)
            z[i] = znew
            if abs(w) <= tol * max(abs(znew), rmin):
                conv[i] = True
        if active == 0:
            break
    return conv, it


@njit(cache=True, nogil=True)
def _exact_eval(log_abs, unit, z):
    """Scaled (p, dp, rho, M) with f(z) = exp(M) p and f'(z) = exp(M) dp / rho."""
    deg = log_abs.shape[0] - 1
    rho = abs(z)
    lr = math.log(rho)
    m = -np.inf
    for n in range(deg + 1):
        e = log_abs[n] + n * lr
        if e > m:
            m = e
    u = z / rho
    p = 0j
    dp = 0j
    for n in range(deg, -1, -1):
        dp = dp * u + p
        e = log_abs[n] + n * lr - m
        c = 0j
        if e > -745.0:
            c = math.exp(e) * unit[n]
        p = p * u + c
    return p, dp, rho, m


@njit(cache=True, nogil=True)
def polish(log_abs, unit, z, steps):
    """Newton polishing with exact per-root scaling.

    A step is kept only when it does not increase the scaled residual.
    Returns (|p|, M) at the final points so that |f(z)| = |p| exp(M).
    """
    N = z.shape[0]
    pabs = np.empty(N)
    mlog = np.empty(N)
    for i in range(N):
        zi = z[i]
        p, dp, rho, m = _exact_eval(log_abs, unit, zi)
        for _ in range(steps):
            if dp == 0 or p == 0:
                break
            znew = zi - rho * p / dp
            p2, dp2, rho2, m2 = _exact_eval(log_abs, unit, znew)
            # compare |f| across different scalings in log space
            old = math.log(abs(p)) + m if p != 0 else -np.inf
            new = math.log(abs(p2)) + m2 if p2 != 0 else -np.inf
            if new <= old:
                zi, p, dp, rho, m = znew, p2, dp2, rho2, m2
            else:
                break
        z[i] = zi
        pabs[i] = abs(p)
        mlog[i] = m
    return pabs, mlog
