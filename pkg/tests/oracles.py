"""Independent reference values: closed forms and adaptive quadrature.

Nothing here touches the grid quadrature of the package, so agreement
with it is a genuine check.
"""

import math

import numpy as np
from scipy import integrate, optimize


def Q(x):
    return 2.0 * np.arctan(x)


def quad(f, a, b, **kw):
    kw.setdefault("limit", 400)
    kw.setdefault("epsabs", 1e-14)
    kw.setdefault("epsrel", 1e-13)
    return integrate.quad(f, a, b, **kw)[0]


def h_norm_sq(psi, dpsi, a=0.0, b=np.inf):
    """int_a^b (psi_r^2 + psi^2 / r^2) r dr by adaptive quadrature."""
    return quad(lambda r: (dpsi(r) ** 2 + (psi(r) / r) ** 2) * r if r > 0 else 0.0, a, b)


def static_energy(psi, dpsi, a=0.0, b=np.inf):
    return quad(lambda r: (dpsi(r) ** 2 + (math.sin(psi(r)) / r) ** 2) * r if r > 0 else 0.0, a, b)


# h_norm^2 of r exp(-r^2): with u = r^2 the integral is
# 1/2 int_0^inf ((1 - 2u)^2 + 1) e^{-2u} du = 1/2 (1 - 1 + 1)
H_NORM_SQ_R_GAUSS = 0.5


def half_energy_scale(psi, dpsi, level=2.0, hi=50.0):
    """lambda with E_0^lambda(psi, 0) = level, by Brent on adaptive quadrature."""
    return optimize.brentq(lambda lam: static_energy(psi, dpsi, 0.0, lam) - level, 1e-3, hi, xtol=1e-14)


def dalembert_3d(f, r, t):
    """Radial d = 3 solution with data (f, 0): r v = (U(r + t) + U(r - t)) / 2, U(x) = x f(|x|)."""
    U = lambda x: x * f(np.abs(x))  # noqa: E731
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    nz = r > 0
    out[nz] = 0.5 * (U(r[nz] + t) + U(r[nz] - t)) / r[nz]
    # r -> 0 limit: d/dr of U at t, i.e. f(t) + t f'(t); use a symmetric difference of U
    e = 1e-6
    out[~nz] = (U(t + e) - U(t - e)) / (2 * e)
    return out


def bubble_cone_kinetic(s, T=1.0):
    """int_0^{T-s} psi_t^2 r dr for psi = Q(r / lam), lam = (T - s)^2.

    psi_t = -(lam'/lam) sin Q(r/lam), and int_0^X 4 x^3 / (1 + x^2)^2 dx
    = 2 (log(1 + X^2) + 1 / (1 + X^2) - 1).
    """
    rho = T - s
    X = rho / rho**2
    lam_dot = -2.0 * rho
    return lam_dot**2 * 2.0 * (math.log1p(X * X) + 1.0 / (1.0 + X * X) - 1.0)


def bubble_averaged_kinetic(t, t_stop, T=1.0):
    return quad(lambda s: bubble_cone_kinetic(s, T), t, t_stop) / (T - t)
