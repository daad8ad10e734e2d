"""Ground-state harmonic maps r Q_r = ell g(Q) for every target and ell."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .fields import FieldState, RadialGrid, TargetGeometry, write_snapshot


class DegenerateTargetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HarmonicProfile:
    ell: int
    target: TargetGeometry
    lam: float
    unit: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    method: str = "closed_form"

    def __call__(self, r):
        return self.unit(np.asarray(r, dtype=float) / self.lam)

    def r_dr(self, r):
        """r dQ/dr, which the Bogomolny equation gives as ell g(Q)."""
        return self.ell * self.target.g(self(r))

    def state(self, grid: RadialGrid, t: float = 0.0) -> FieldState:
        psi = self(grid.nodes)
        return FieldState(grid, psi, np.zeros_like(psi), t=t, ell=self.ell, target=self.target)

    def rescale(self, lam: float) -> "HarmonicProfile":
        return HarmonicProfile(self.ell, self.target, lam, self.unit, self.method)

    def export(self, grid: RadialGrid, path) -> None:
        write_snapshot(self.state(grid), path)


def _check_nondegenerate(target: TargetGeometry) -> None:
    lo, hi = target.vacua
    x = np.linspace(lo, hi, 4001)[1:-1]
    gx = np.asarray(target.g(x), dtype=float)
    if np.any(gx == 0) or np.any(np.sign(gx) != np.sign(gx[0])):
        raise DegenerateTargetError("g vanishes strictly between the vacua")


def _bogomolny_ode(ell: int, target: TargetGeometry, rtol: float = 1e-12):
    """Integrate dQ/ds = ell g(Q) in s = log r from Q(1) = midpoint of the vacua."""
    _check_nondegenerate(target)
    lo, hi = target.vacua
    sign = 1.0 if float(target.g(0.5 * (lo + hi))) > 0 else -1.0
    slopes = [abs(float(target.g_prime(v))) for v in (lo, hi)]
    span = 40.0 / (ell * max(min(slopes), 1e-3))

    def rhs(s, q):
        return ell * target.g(q)

    q0 = [0.5 * (lo + hi)]
    up = solve_ivp(rhs, (0.0, span), q0, method="DOP853", rtol=rtol, atol=1e-14, dense_output=True)
    down = solve_ivp(rhs, (0.0, -span), q0, method="DOP853", rtol=rtol, atol=1e-14, dense_output=True)
    start, end = (lo, hi) if sign > 0 else (hi, lo)

    def unit(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        with np.errstate(divide="ignore"):
            s = np.log(x)
        hi_mask = s >= 0
        out[hi_mask] = np.where(s[hi_mask] > span, end, up.sol(np.minimum(s[hi_mask], span))[0])
        lo_mask = ~hi_mask
        out[lo_mask] = np.where(s[lo_mask] < -span, start, down.sol(np.maximum(s[lo_mask], -span))[0])
        return out

    return unit


def ground_state(ell: int = 1, target: TargetGeometry | None = None, lam: float = 1.0,
                 method: str = "auto") -> HarmonicProfile:
    """The ground state Q_ell(r / lam) joining the two vacua of ``target``.

    The sphere uses the closed form 2 arctan((r/lam)^ell); ``method="ode"``
    forces the log-r integration used for every other target.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    target = TargetGeometry.sphere() if target is None else target
    if method == "auto":
        method = "closed_form" if target.kind == "sphere" else "ode"
    if method == "closed_form":
        if target.kind != "sphere":
            raise ValueError("closed form only known for the sphere")
        unit = lambda x: 2.0 * np.arctan(np.asarray(x, dtype=float) ** ell)  # noqa: E731
    elif method == "ode":
        unit = _bogomolny_ode(ell, target)
    else:
        raise ValueError(f"unknown method {method!r}")
    return HarmonicProfile(ell, target, float(lam), unit, method)


def static_residual(grid: RadialGrid, psi, ell: int, target: TargetGeometry) -> np.ndarray:
    """r^2 (psi_rr + psi_r/r) - ell^2 f(psi) at interior nodes, centered differences."""
    r = grid.nodes
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    pm, p0, pp = psi[:-2], psi[1:-1], psi[2:]
    d1 = (hm**2 * pp - hp**2 * pm + (hp**2 - hm**2) * p0) / (hm * hp * (hm + hp))
    d2 = 2.0 * (hm * pp - (hm + hp) * p0 + hp * pm) / (hm * hp * (hm + hp))
    ri = r[1:-1]
    return ri**2 * d2 + ri * d1 - ell**2 * target.f(p0)


def harmonic_residual(profile, grid: RadialGrid) -> float:
    """Sup over the grid of |r^2 (Q_rr + Q_r/r) - ell^2 f(Q)|.

    ``profile`` may be a :class:`HarmonicProfile` or a :class:`FieldState`.
    """
    if isinstance(profile, FieldState):
        psi, ell, target = profile.psi, profile.ell, profile.target
    else:
        psi, ell, target = profile(grid.nodes), profile.ell, profile.target
    return float(np.max(np.abs(static_residual(grid, psi, ell, target))))


def energy_of_ground_state(ell: int = 1, target: TargetGeometry | None = None) -> float:
    """E(Q_ell) = 2 ell |Gamma(v1) - Gamma(v0)| with Gamma the primitive of g."""
    from scipy.integrate import quad

    target = TargetGeometry.sphere() if target is None else target
    lo, hi = target.vacua
    return 2 * ell * abs(quad(lambda p: float(target.g(p)), lo, hi, epsabs=1e-14, epsrel=1e-13)[0])


E_Q = 4.0
