"""Compiled inner loops for the psi-form stepper.

Targets are coded as integers: 0 sphere, 1 Yang-Mills.  Custom targets go
through the numpy path in :mod:`wavemap_lab.evolve`.  No fastmath, so the
results are bitwise reproducible.
"""

import math

import numpy as np
from numba import njit

SPHERE, YANG_MILLS = 0, 1


@njit(cache=True)
def _g(kind, p):
    if kind == SPHERE:
        return math.sin(p)
    return 0.5 * (1.0 - p * p)


@njit(cache=True)
def _f(kind, p):
    if kind == SPHERE:
        return math.sin(p) * math.cos(p)
    return -0.5 * p * (1.0 - p * p)


@njit(cache=True)
def accel(psi, coef, inv_w, pot, kind, out):
    n = psi.shape[0]
    out[0] = 0.0
    out[n - 1] = 0.0
    left = coef[0] * (psi[1] - psi[0])
    for i in range(1, n - 1):
        right = coef[i] * (psi[i + 1] - psi[i])
        out[i] = (right - left) * inv_w[i - 1] - pot[i - 1] * _f(kind, psi[i])
        left = right


@njit(cache=True)
def kdk(psi, v, acc, dt, coef, inv_w, pot, kind):
    """One kick-drift-kick step in place; returns False on non-finite values."""
    n = psi.shape[0]
    half = 0.5 * dt
    for i in range(1, n - 1):
        v[i] += half * acc[i]
        psi[i] += dt * v[i]
    accel(psi, coef, inv_w, pot, kind, acc)
    ok = True
    for i in range(1, n - 1):
        v[i] += half * acc[i]
        if not (math.isfinite(psi[i]) and math.isfinite(v[i])):
            ok = False
    return ok


@njit(cache=True)
def diagnostics(psi, v, r, ell, kind, level, cone_r):
    """(E_total, E_0^{cone_r}, half-energy radius, max|psi|, max|psi_r|) in one pass.

    Same cell quadrature as fields.energy: midpoint gradient, trapezoid
    kinetic and potential parts.
    """
    n = psi.shape[0]
    ell2 = ell * ell
    total = 0.0
    static_cum = 0.0
    lam = np.nan
    e_cone = np.nan
    max_psi = abs(psi[0])
    max_psir = 0.0
    kin_l = v[0] * v[0] * r[0]
    pot_l = 0.0
    for i in range(n - 1):
        d = r[i + 1] - r[i]
        rm = 0.5 * (r[i + 1] + r[i])
        dp = psi[i + 1] - psi[i]
        gi = _g(kind, psi[i + 1])
        pot_r = ell2 * gi * gi / r[i + 1]
        kin_r = v[i + 1] * v[i + 1] * r[i + 1]
        grad = rm * dp * dp / d
        st = grad + 0.5 * d * (pot_l + pot_r)
        cell = st + 0.5 * d * (kin_l + kin_r)
        if math.isnan(lam) and static_cum + st >= level and st > 0.0:
            lam = r[i] + (level - static_cum) / st * d
        if math.isnan(e_cone) and cone_r <= r[i + 1]:
            if cone_r <= r[i]:
                e_cone = total
            else:
                e_cone = total + (cone_r - r[i]) / d * cell
        static_cum += st
        total += cell
        a = abs(psi[i + 1])
        if a > max_psi:
            max_psi = a
        s = abs(dp) / d
        if s > max_psir:
            max_psir = s
        kin_l = kin_r
        pot_l = pot_r
    if math.isnan(e_cone) and cone_r >= r[n - 1]:
        e_cone = total
    return total, e_cone, lam, max_psi, max_psir
