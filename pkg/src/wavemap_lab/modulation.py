"""Bubble scale fitting, radiation extraction and bubbling certificates.

The scale of a bubble is fixed by the half-energy rule: lambda is the radius
at which the static energy E_0^lambda(psi, 0) reaches E(Q)/2.  Every other
quantity here (distance to Q, remainder, ratios lambda/(T - t)) is measured
relative to that lambda.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .evolve import EvolutionTrace, SolverConfig, evolve
from .fields import (
    FieldState,
    RadialGrid,
    classify_degree,
    cumulative_static_energy,
    energy,
    h_norm_arrays,
    hxl2_norm,
)
from .static import E_Q


class InsufficientInteriorEnergy(ValueError):
    """E_0^infinity(psi, 0) never reaches E(Q)/2."""


class CapTooEnergetic(ValueError):
    pass


class NoBubblingCertificate(RuntimeError):
    pass


@dataclass(frozen=True)
class ModulationFit:
    lam: float
    distance_H: float
    remainder_energy: float
    excess_alpha: float
    sign: int = 1


def _Q(x):
    return 2.0 * np.arctan(x)


def bubble(grid: RadialGrid, lam: float, sign: int = 1) -> np.ndarray:
    return sign * _Q(grid.nodes / lam)


def scale_bisection(grid: RadialGrid, cum: np.ndarray, level: float = 0.5 * E_Q, rtol: float = 1e-10) -> float:
    """Root of F(lam) = E_0^lam - level by bisection.

    F is the piecewise-linear interpolant of the cumulative cell energies,
    continuous and nondecreasing, so bisection is well defined.  The loop
    has a fixed iteration count, so equal inputs give equal bits.
    """
    r = grid.nodes
    if cum[-1] <= level:
        raise InsufficientInteriorEnergy(f"E_0^r_max = {cum[-1]:.6g} <= {level}")
    lo, hi = 0.0, float(r[-1])
    F = lambda x: float(np.interp(x, r, cum)) - level  # noqa: E731
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if F(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def fit_scale(state: FieldState, rtol: float = 1e-10) -> ModulationFit:
    """Fit Q(r / lam) to ``state`` with lam from the half-energy rule.

    The sign of the bubble is read off psi(lam).  ``distance_H`` is the H
    norm of psi - sign Q(./lam) over the grid, ``remainder_energy`` the
    energy of (psi - sign Q(./lam), psi_t), and ``excess_alpha`` is
    E(psi, 0) - E(Q) including the harmonic tail beyond r_max.
    """
    if abs(state.psi[0]) > 1e-9:
        raise ValueError("fit_scale needs psi(0) = 0")
    lam = scale_bisection(state.grid, cumulative_static_energy(state), rtol=rtol)
    sign = 1 if float(np.interp(lam, state.r, state.psi)) >= 0 else -1
    diff = state.psi - bubble(state.grid, lam, sign)
    h, _ = h_norm_arrays(state.grid, diff)
    rem = energy(state.replace(psi=diff)).total
    static = state.replace(psidot=np.zeros_like(state.psidot))
    alpha = energy(static, tail=_has_tail(state)).total - E_Q
    return ModulationFit(lam, h, rem, alpha, sign)


def _has_tail(state: FieldState) -> bool:
    try:
        classify_degree(state)
    except ValueError:
        return False
    return True


def local_window(lam: float, cone: float | None = None, cone_frac: float = 0.5) -> float:
    """Rescaled window 1/sqrt(lam), cut to cone_frac of the backward cone radius."""
    w = 1.0 / math.sqrt(lam)
    if cone is not None:
        w = min(w, cone_frac * cone / lam)
    return w


def local_distance(state: FieldState, lam: float, sign: int = 1, window: float | None = None) -> float:
    """H distance between psi(lam .) and sign Q on r <= window (rescaled units).

    The H norm is scale invariant, so this equals the distance between psi
    and sign Q(./lam) on r <= lam * window.  ``window`` defaults to 1/sqrt(lam).
    """
    window = local_window(lam) if window is None else window
    b = min(lam * window, state.grid.r_max)
    diff = state.psi - bubble(state.grid, lam, sign)
    return h_norm_arrays(state.grid, diff, None, 0.0, b)[0]


def coercivity_family(grid: RadialGrid, amplitudes) -> list[FieldState]:
    """Q + a r exp(-r^2) at rest: a canonical degree-one family near Q."""
    r = grid.nodes
    return [FieldState(grid, _Q(r) + a * r * np.exp(-r * r), np.zeros_like(r)) for a in amplitudes]


def coercivity_curve(family: list[FieldState]) -> np.ndarray:
    """Rows (alpha, distance_H) sorted by alpha, alpha = E - E(Q)."""
    rows = []
    for st in family:
        if classify_degree(st) != (0, 1):
            raise ValueError("coercivity family members must have degree (0, 1)")
        if np.any(st.psidot != 0):
            raise ValueError("coercivity family members must be at rest")
        fit = fit_scale(st)
        rows.append((fit.excess_alpha, fit.distance_H))
    rows.sort()
    return np.array(rows, dtype=float).reshape(-1, 2)


# ----------------------------------------------------------------------------
# radiation and remainder
# ----------------------------------------------------------------------------


def extract_radiation_data(state: FieldState, r_n: float, max_gap: float = 0.5) -> tuple[FieldState, float]:
    """Replace psi on [0, r_n] by the line from pi at the axis to psi(r_n).

    Velocity is zeroed on [0, r_n].  Returns the degree-(1, 1) capped state
    and the energy of the cap, which is of order |pi - psi(r_n)|^2.
    """
    r = state.r
    end = float(np.interp(r_n, r, state.psi))
    gap = math.pi - end
    if abs(gap) >= max_gap:
        raise CapTooEnergetic(f"|pi - psi(r_n)| = {abs(gap):.3g} >= {max_gap}")
    inside = r <= r_n
    psi = state.psi.copy()
    psidot = state.psidot.copy()
    psi[inside] = math.pi - gap / r_n * r[inside]
    psidot[inside] = 0.0
    capped = state.replace(psi=psi, psidot=psidot)
    return capped, energy(capped, 0.0, r_n).total


def radiation_trace(trace: EvolutionTrace, t_ref: float, r_n: float | None = None) -> tuple[EvolutionTrace, float]:
    """Evolve the capped snapshot at time ``t_ref`` over the rest of the trace.

    The capped data takes the value pi at the axis; subtracting pi gives the
    degree-zero radiation field.  ``r_n`` defaults to the backward cone
    radius T_+ - t_ref.  Returns the radiation trace and the cap energy.
    """
    snap = min(trace.snapshots, key=lambda s: abs(s.t - t_ref))
    if r_n is None:
        r_n = trace.t_plus() - snap.t
    capped, cap_e = extract_radiation_data(snap, r_n)
    cfg = SolverConfig(**{**trace.config.to_dict(), "t_final": trace.t_end - snap.t,
                          "check_support": False, "stop_lambda_cells": 0.0})
    rad = evolve(capped, cfg)
    shifted = [s.replace(psi=s.psi - math.pi) for s in rad.snapshots]
    rad.snapshots = shifted
    return rad, cap_e


def radiation_reference_time(trace: EvolutionTrace, T: float | None = None, max_gap: float = 0.45) -> float:
    """Earliest snapshot time at which the cap at r = T - t costs |pi - psi| < max_gap."""
    T = trace.t_plus() if T is None else T
    for s in trace.snapshots:
        rho = T - s.t
        if 0 < rho < s.grid.r_max and abs(math.pi - float(np.interp(rho, s.r, s.psi))) < max_gap:
            return s.t
    raise CapTooEnergetic("no snapshot admits a cheap cap")


def radiation_at(rad: EvolutionTrace, t: float, tol: float | None = None) -> FieldState:
    tol = 0.25 * rad.dt if tol is None else tol
    s = min(rad.snapshots, key=lambda s: abs(s.t - t))
    if abs(s.t - t) > tol:
        raise ValueError(f"no radiation snapshot within {tol} of t={t}")
    return s


@dataclass(frozen=True)
class Remainder:
    state: FieldState
    norm: float
    energy: float


def subtract_bubble(state: FieldState, fit: ModulationFit, radiation: FieldState | None = None) -> Remainder:
    """epsilon = psi - phi - sign Q(./lam), epsilon_t = psi_t - phi_t."""
    psi = state.psi - bubble(state.grid, fit.lam, fit.sign)
    psidot = state.psidot.copy()
    if radiation is not None:
        if radiation.grid.n_nodes != state.grid.n_nodes:
            raise ValueError("radiation and state live on different grids")
        psi = psi - radiation.psi
        psidot = psidot - radiation.psidot
    eps = state.replace(psi=psi, psidot=psidot)
    return Remainder(eps, hxl2_norm(state.grid, psi, psidot), energy(eps).total)


# ----------------------------------------------------------------------------
# bubbling certificate
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class BubblingRecord:
    t: float
    lam: float
    ratio: float
    distance: float
    sign: int
    distance_minus: float
    remainder_norm: float = math.nan


def bubbling_extract(trace: EvolutionTrace, times=None, T: float | None = None,
                     radiation: EvolutionTrace | None = None, **select_kw) -> list[BubblingRecord]:
    """Fit the bubble at selected times of a blow-up trace.

    Times default to :func:`wavemap_lab.diagnostics.select_times`.  For
    each t_n the local distance to +Q and to -Q is measured on the rescaled
    window of :func:`local_window` (1/sqrt(lam_n), kept inside half the
    backward cone); the nearer one fixes the reported sign.
    """
    from .diagnostics import select_times

    if not trace.blew_up and times is None:
        raise NoBubblingCertificate("trace was not diagnosed as blowing up")
    T = trace.t_plus() if T is None else T
    if times is None:
        times = select_times(trace, T=T, **select_kw)
    if len(times) == 0:
        raise NoBubblingCertificate("no qualifying times")
    by_t = {s.t: s for s in trace.snapshots}
    out = []
    for t in times:
        st = by_t[t]
        lam = scale_bisection(st.grid, cumulative_static_energy(st))
        w = local_window(lam, T - t)
        d_plus = local_distance(st, lam, +1, w)
        d_minus = local_distance(st, lam, -1, w)
        sign = 1 if d_plus <= d_minus else -1
        rem = math.nan
        if radiation is not None and t >= radiation.snapshots[0].t - 0.25 * radiation.dt:
            fit = ModulationFit(lam, math.nan, math.nan, math.nan, sign)
            rem = subtract_bubble(st, fit, radiation_at(radiation, t)).norm
        out.append(BubblingRecord(t, lam, lam / (T - t), min(d_plus, d_minus), sign, d_minus, rem))
    return out


def ratios_decreasing(records: list[BubblingRecord]) -> bool:
    r = np.array([rec.ratio for rec in records])
    return bool(np.all(np.diff(r) < 0) and np.all(r < 1.0))


# ----------------------------------------------------------------------------
# energy near-additivity of separated bubbles
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditivityReport:
    energy_sum: float
    sum_energies: float
    defect: float
    separation: float
    ok: bool | None = None


def separated_bubbles_grid(scales, r_min_factor: float = 1e-3, r_max_factor: float = 1e6, ratio: float = 1.005) -> RadialGrid:
    """Geometric grid resolving every scale in ``scales``."""
    lo, hi = min(scales), max(scales)
    h = lo * r_min_factor
    return RadialGrid.geometric(hi * r_max_factor, h, ratio, h_max=math.inf)


def energy_near_additivity(bubbles, grid: RadialGrid | None = None, tolerance: float | None = None) -> AdditivityReport:
    """Compare E(sum_k s_k Q(./lam_k)) with sum_k E(Q) for (s_k, lam_k) pairs.

    Each bubble carries exactly E(Q) = 4.  The sum is evaluated by grid
    quadrature plus the harmonic tail, so the grid must reach far beyond
    the largest scale.
    """
    bubbles = [(int(np.sign(s)), float(lam)) for s, lam in bubbles]
    scales = [lam for _, lam in bubbles]
    if len(bubbles) > 1:
        srt = sorted(scales)
        sep = min(b / a for a, b in zip(srt, srt[1:]))
        if sep < 100:
            raise ValueError("bubble scales must be separated by a factor >= 100")
    else:
        sep = math.inf
    grid = separated_bubbles_grid(scales) if grid is None else grid
    psi = sum(s * _Q(grid.nodes / lam) for s, lam in bubbles)
    st = FieldState(grid, psi, np.zeros_like(psi))
    e = energy(st, tail=_has_tail(st)).total
    total = E_Q * len(bubbles)
    defect = abs(e - total) / total
    ok = None if tolerance is None else defect < tolerance
    return AdditivityReport(e, total, defect, sep, ok)


# ----------------------------------------------------------------------------
# files
# ----------------------------------------------------------------------------

MODULATION_COLUMNS = ("t", "lambda", "distance_H", "remainder_energy", "sign")


def modulation_table(trace: EvolutionTrace) -> list[tuple]:
    rows = []
    for s in trace.snapshots:
        try:
            f = fit_scale(s)
            rows.append((s.t, f.lam, f.distance_H, f.remainder_energy, f.sign))
        except (InsufficientInteriorEnergy, ValueError):
            rows.append((s.t, math.nan, math.nan, math.nan, 0))
    return rows


def write_modulation(trace: EvolutionTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MODULATION_COLUMNS)
        for row in modulation_table(trace):
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def write_coercivity(table: np.ndarray, path) -> None:
    np.savetxt(path, table, delimiter=",", header="alpha,distance_H", comments="", fmt="%.17g")
