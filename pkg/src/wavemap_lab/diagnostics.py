"""Monitoring identities evaluated on stored traces.

* the virial balance for <chi_R psi_t | r psi_r>,
* energy in self-similar windows lambda (T - t) <= r <= T - t,
* time-averaged kinetic energy in the backward cone,
* a greedy choice of times where both cone kinetic quantities are small.

T is the blow-up time estimated from the trace (see
:meth:`wavemap_lab.evolve.EvolutionTrace.t_plus`); every function also
accepts it explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .evolve import EvolutionTrace
from .fields import FieldState, energy, energy_cells, _interval_sum
from .scenarios import cutoff


class InsufficientSampling(ValueError):
    pass


class NoBlowupTime(ValueError):
    """The trace was not diagnosed as blowing up, so there is no cone."""


# ----------------------------------------------------------------------------
# virial identity
# ----------------------------------------------------------------------------


def chi(x):
    """Even bump: 1 on |x| <= 1, 0 on |x| >= 2, C^2 quintic in between."""
    return cutoff(np.abs(x), 1.0, 2.0)


def chi_prime(x):
    x = np.clip(np.abs(np.asarray(x, dtype=float)) - 1.0, 0.0, 1.0)
    return -30.0 * x**2 * (1.0 - x) ** 2


CHI_PRIME_MAX = 15.0 / 8.0  # max |chi'|, attained at |x| = 3/2
VIRIAL_BAND_CONSTANT = 1.0 + CHI_PRIME_MAX


@dataclass(frozen=True)
class VirialReport:
    R: float
    T: float
    lhs: float
    kinetic_integral: float
    exterior_correction: float
    residual: float
    band: float
    quadrature_error: float
    sup_exterior: float
    identity_defect: float
    discretization_allowance: float

    @property
    def inside(self) -> bool:
        return abs(self.residual) <= self.band + self.quadrature_error + self.discretization_allowance


def virial_pairing(state: FieldState, R: float) -> float:
    """<chi_R psi_t | r psi_r> = int chi(r/R) psi_t r psi_r r dr, cell midpoints."""
    r = state.r
    rm = state.grid.mid
    psir = np.diff(state.psi) / state.grid.dr
    pt = 0.5 * (state.psidot[1:] + state.psidot[:-1])
    return float(np.sum(chi(rm / R) * pt * psir * rm**2 * state.grid.dr))


def _exterior_terms(state: FieldState, R: float) -> float:
    """int (1 - chi_R) psi_t^2 r dr - 1/2 int chi_R' (r^2 psi_t^2 + r^2 psi_r^2 - g^2) dr.

    This is exactly what the residual integrates in time; both pieces vanish
    where chi_R = 1.
    """
    kin, grad, pot = energy_cells(state)
    rm = state.grid.mid
    w = 1.0 - chi(rm / R)
    dchi = chi_prime(rm / R) / R
    # energy cells hold (density) r dr, so r^2 (...) dr = r x cells
    return float(np.sum(w * kin) - 0.5 * np.sum(dchi * rm * (kin + grad - pot)))


def _kinetic(state: FieldState, a: float = 0.0, b: float | None = None) -> float:
    kin, _, _ = energy_cells(state)
    b = state.grid.r_max if b is None else min(b, state.grid.r_max)
    if b <= a:
        return 0.0
    return _interval_sum(state.grid, kin, a, b)


def _time_integral(t, y):
    """Simpson value and |Simpson - trapezoid| as an error estimate."""
    t = np.asarray(t)
    y = np.asarray(y)
    if t.size < 3:
        v = float(np.trapezoid(y, t))
        return v, abs(v)
    s = float(simpson(y, x=t))
    return s, abs(s - float(np.trapezoid(y, t)))


def virial_check(trace: EvolutionTrace, R: float, T: float | None = None, min_samples: int = 200,
                 discretization_rtol: float = 1e-4) -> VirialReport:
    """Check V(T) - V(0) + int_0^T int psi_t^2 r dr dt against the exterior band.

    Differentiating V(t) = <chi_R psi_t | r psi_r> along the equation gives

        V' = -int chi_R psi_t^2 r dr - 1/2 int chi_R' (r^2 psi_t^2 + r^2 psi_r^2 - g^2) dr.

    Both error terms live on r >= R, and since |chi_R'| r <= 2 max|chi'| there,
    |residual| <= (1 + max|chi'|) int_0^T E_R^infinity dt.  The constant is
    ``VIRIAL_BAND_CONSTANT``; ``quadrature_error`` estimates the error of
    the time integrals over the stored snapshots.

    The discrete scheme satisfies the identity only up to O(h^2).
    ``identity_defect`` measures this directly (residual minus the exterior
    terms evaluated exactly), and ``inside`` allows
    ``discretization_rtol * kinetic_integral`` for it.  On uniform grids
    with h <= 4e-3 the defect stays below 2e-5 of the kinetic integral;
    stretched grids coarsen with r and need a larger allowance.
    """
    t0 = trace.snapshots[0].t
    T = trace.t_end - t0 if T is None else T
    snaps = [s for s in trace.snapshots if s.t - t0 <= T + 1e-12]
    times = np.array([s.t for s in snaps])
    if len(snaps) < min_samples + 1 or np.max(np.diff(times)) > T / min_samples * (1 + 1e-9):
        raise InsufficientSampling(f"need snapshot spacing <= T/{min_samples}")
    lhs = virial_pairing(snaps[-1], R) - virial_pairing(snaps[0], R)
    kin = np.array([_kinetic(s) for s in snaps])
    ext = np.array([energy(s, min(R, s.grid.r_max * (1 - 1e-15))).total if R < s.grid.r_max else 0.0 for s in snaps])
    K, k_err = _time_integral(times, kin)
    X, _ = _time_integral(times, ext)
    X = max(X, 0.0)
    exact, _ = _time_integral(times, [_exterior_terms(s, R) for s in snaps])
    # error of the pairing difference itself is O(h^2) and far below k_err
    return VirialReport(R, float(T), lhs, K, X, lhs + K, VIRIAL_BAND_CONSTANT * X, k_err, float(np.max(ext)),
                        lhs + K - exact, discretization_rtol * K)


# ----------------------------------------------------------------------------
# cone quantities for blow-up traces
# ----------------------------------------------------------------------------


def _blowup_time(trace: EvolutionTrace, T: float | None) -> float:
    if T is not None:
        return float(T)
    if not trace.blew_up:
        raise NoBlowupTime("trace completed without a blow-up diagnosis")
    return trace.t_plus()


def self_similar_window(trace: EvolutionTrace, lambda_frac: float = 0.25, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """E over lambda_frac (T - t) <= r <= T - t at every snapshot before T."""
    if not (0.0 < lambda_frac <= 1.0):
        raise ValueError("lambda_frac must lie in (0, 1]")
    T = _blowup_time(trace, T)
    ts, vals = [], []
    for s in trace.snapshots:
        rho = T - s.t
        if rho <= 0:
            continue
        a = lambda_frac * rho
        b = min(rho, s.grid.r_max)
        vals.append(energy(s, a, b).total if a < b else 0.0)
        ts.append(s.t)
    return np.array(ts), np.array(vals)


def cone_kinetic_series(trace: EvolutionTrace, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(t, int_0^{T - t} psi_t^2 r dr) at every snapshot before T."""
    T = _blowup_time(trace, T)
    ts, vals = [], []
    for s in trace.snapshots:
        if s.t < T:
            ts.append(s.t)
            vals.append(_kinetic(s, 0.0, T - s.t))
    return np.array(ts), np.array(vals)


def averaged_kinetic_cone(trace: EvolutionTrace, t: float, T: float | None = None, _series=None) -> float:
    """(1 / (T - t)) int_t^{t_stop} int_0^{T - s} psi_t^2 r dr ds, trapezoid in time."""
    T = _blowup_time(trace, T)
    ts, vals = cone_kinetic_series(trace, T) if _series is None else _series
    if not (ts[0] <= t < T):
        raise ValueError("t must lie in [t_0, T)")
    m = ts >= t
    tt, vv = ts[m], vals[m]
    if tt.size == 0 or tt[0] > t:
        v0 = float(np.interp(t, ts, vals))
        tt = np.concatenate([[t], tt])
        vv = np.concatenate([[v0], vv])
    return float(np.trapezoid(vv, tt)) / (T - t)


def select_times(trace: EvolutionTrace, T: float | None = None, theta0: float | None = None,
                 kappa: float = 0.25, t_min: float | None = None) -> list[float]:
    """Greedy scan for times t_1 < t_2 < ... with

        averaged_kinetic_cone(t_n) < theta_n,   int_0^{T - t_n} psi_t^2 r dr < theta_n,
        lambda(t_n) < T - t_n,

    where theta_n = theta0 / (1 + kappa (n - 1)); kappa = 1 is the 1/n
    schedule.  ``theta0`` defaults to the larger of the two quantities at the
    first scanned snapshot, so the scan starts from the data's own kinetic
    scale.  Returns the empty list when nothing qualifies.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    T = _blowup_time(trace, T)
    series = cone_kinetic_series(trace, T)
    ts, inst = series
    if t_min is not None:
        keep = ts >= t_min
    else:
        keep = np.ones_like(ts, dtype=bool)
    cands = [(t, k) for t, k, ok in zip(ts, inst, keep) if ok]
    if not cands:
        return []
    avg = {t: averaged_kinetic_cone(trace, t, T, series) for t, _ in cands}
    if theta0 is None:
        t_first, k_first = cands[0]
        theta0 = max(k_first, avg[t_first]) * (1 + 1e-12)
    lam_at = dict(zip(trace.series["t"], trace.series["lambda"]))
    out, n = [], 1
    for t, k in cands:
        theta = theta0 / (1.0 + kappa * (n - 1))
        lam = lam_at.get(t, math.nan)
        if k < theta and avg[t] < theta and np.isfinite(lam) and lam < T - t:
            out.append(float(t))
            n += 1
    return out


# ----------------------------------------------------------------------------
# files
# ----------------------------------------------------------------------------


def diagnostics_report(trace: EvolutionTrace, radii=(10.0, 20.0, 40.0), lambda_frac: float = 0.25) -> dict:
    """Virial reports for a completed trace, cone quantities for a blow-up trace."""
    out: dict = {"stop_reason": trace.stop_reason, "t_end": trace.t_end}
    if trace.blew_up:
        T = trace.t_plus()
        out["T_plus"] = T
        t, w = self_similar_window(trace, lambda_frac, T)
        out["self_similar_window"] = {"lambda_frac": lambda_frac, "t": t.tolist(), "energy": w.tolist()}
        out["selected_times"] = select_times(trace, T)
    else:
        reps = []
        for R in radii:
            try:
                rep = virial_check(trace, R)
                reps.append({**asdict(rep), "inside": rep.inside})
            except InsufficientSampling as exc:
                reps.append({"R": R, "error": str(exc)})
        out["virial"] = reps
    return out


def write_diagnostics(trace: EvolutionTrace, path, **kw) -> None:
    with open(path, "w") as fh:
        json.dump(diagnostics_report(trace, **kw), fh, indent=1, default=float)
