"""Explicit time evolution of the equivariant wave map equation

    psi_tt - psi_rr - psi_r / r + ell^2 f(psi) / r^2 = 0

and of its degree-zero 4d reduction u = psi / r.

Space is discretized in flux form, (1/r) d/dr (r d psi/dr), on the nodes of a
:class:`~wavemap_lab.fields.RadialGrid`.  The semi-discrete system is the
Hamiltonian flow of exactly the cell-quadrature energy in
:mod:`wavemap_lab.fields`, and time stepping is leapfrog in its
kick-drift-kick form (staggered velocity, synchronized for output).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fields import (
    FieldState,
    RadialGrid,
    TargetGeometry,
    classify_degree,
    cumulative_static_energy,
    energy,
    h_norm_arrays,
    write_snapshot,
)
from .static import E_Q
from . import _kernels


class NumericalBlowup(FloatingPointError):
    """A non-finite value appeared during a step."""


class CFLViolation(ValueError):
    pass


STOP_REASONS = ("completed", "blowup_underresolved", "gradient_blowup", "boundary_contact")
SERIES_COLUMNS = ("t", "E_total", "E_cone", "lambda", "max_psi", "max_psir")


@dataclass
class SolverConfig:
    dr: float = 1e-3
    cfl: float = 0.5
    t_final: float = 1.0
    r_max: float = 10.0
    snapshot_stride: int = 100
    stop_lambda_cells: float = 8.0
    stop_grad_factor: float = 0.25
    formulation: str = "psi_form"
    spacing: str = "uniform"
    geometric_ratio: float = 1.001
    cone_apex: float | None = None
    support_tol: float = 1e-8
    check_support: bool = True

    def __post_init__(self):
        if not (0.0 < self.cfl < 1.0):
            raise ValueError("cfl must lie in (0, 1)")
        if self.dr <= 0 or self.t_final < 0 or self.r_max <= 0:
            raise ValueError("dr, r_max must be positive and t_final nonnegative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.formulation not in ("psi_form", "reduced_4d"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.spacing not in ("uniform", "geometric"):
            raise ValueError(f"unknown spacing {self.spacing!r}")

    def make_grid(self) -> RadialGrid:
        if self.spacing == "uniform":
            return RadialGrid.uniform(self.r_max, h=self.dr)
        return RadialGrid.geometric(self.r_max, self.dr, self.geometric_ratio)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvolutionTrace:
    snapshots: list[FieldState]
    series: dict[str, np.ndarray]
    stop_reason: str
    config: SolverConfig
    dt: float
    energy_drift: float
    degree: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def t_end(self) -> float:
        return float(self.series["t"][-1])

    @property
    def final(self) -> FieldState:
        return self.snapshots[-1]

    @property
    def blew_up(self) -> bool:
        return self.stop_reason in ("blowup_underresolved", "gradient_blowup")

    def t_plus(self, method: str = "fit") -> float:
        """Estimated blow-up time; NaN for runs that did not blow up.

        ``method="fit"`` fits lambda = a (T - t)^b to the resolved tail of the
        lambda series (see :func:`fit_blowup_time`).  ``method="surrogate"``
        returns t_stop + 2 lambda(t_stop).
        """
        if not self.blew_up:
            return math.nan
        if method == "surrogate":
            lam = self.series["lambda"][-1]
            if not np.isfinite(lam):
                lam = self.config.stop_lambda_cells * self.final.grid.h_min
            return self.t_end + 2.0 * float(lam)
        if method != "fit":
            raise ValueError(f"unknown method {method!r}")
        return fit_blowup_time(self.series["t"], self.series["lambda"])[0]


def fit_blowup_time(t, lam, lam_max: float = 0.1) -> tuple[float, float, float]:
    """Least-squares fit of log lambda = log a + b log(T - t) on lambda < lam_max.

    Returns (T, a, b).  The fit only uses the part of the series where the
    bubble is small, which is where the power law holds.
    """
    from scipy.optimize import least_squares

    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    ok = np.isfinite(lam) & (lam > 0)
    t, lam = t[ok], lam[ok]
    m = lam < lam_max
    if m.sum() < 10:
        m = np.zeros_like(lam, dtype=bool)
        m[-max(10, lam.size // 4):] = True
    tt, ll = t[m], np.log(lam[m])
    t_last = tt[-1]

    def resid(p):
        T = t_last + math.exp(p[0])
        return p[1] + p[2] * np.log(T - tt) - ll

    x0 = [math.log(2.0 * float(np.exp(ll[-1]))), 0.0, 1.0]
    sol = least_squares(resid, x0, method="lm")
    T = t_last + math.exp(sol.x[0])
    return float(T), float(math.exp(sol.x[1])), float(sol.x[2])


# ----------------------------------------------------------------------------
# spatial operators
# ----------------------------------------------------------------------------


class _PsiOperator:
    """Acceleration of psi under the flux-form discretization."""

    def __init__(self, grid: RadialGrid, ell: int, target: TargetGeometry):
        r = grid.nodes
        d = grid.dr
        self.grid = grid
        self.coef = grid.mid / d
        w = np.empty_like(r)
        w[1:-1] = r[1:-1] * 0.5 * (d[:-1] + d[1:])
        w[0] = w[-1] = 1.0
        self.inv_w = 1.0 / w[1:-1]
        self.pot = ell**2 / r[1:-1] ** 2
        self.sphere = target.kind == "sphere"
        self.target = target
        self.kind = {"sphere": _kernels.SPHERE, "yang_mills": _kernels.YANG_MILLS}.get(target.kind, -1)
        self.ell = ell

    def accel(self, psi: np.ndarray, out: np.ndarray) -> np.ndarray:
        flux = self.coef * np.diff(psi)
        inner = psi[1:-1]
        if self.sphere:
            force = 0.5 * np.sin(2.0 * inner)
        else:
            force = self.target.f(inner)
        out[1:-1] = (flux[1:] - flux[:-1]) * self.inv_w - self.pot * force
        out[0] = 0.0
        out[-1] = 0.0
        return out


def _z_series(x):
    """(sin 2x - 2x) / (2 x^3), stable for small x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small] ** 2
    out[small] = -2.0 / 3.0 + xs * (2.0 / 15.0 + xs * (-4.0 / 315.0 + xs * (2.0 / 2835.0)))
    xl = x[~small]
    out[~small] = (np.sin(2.0 * xl) - 2.0 * xl) / (2.0 * xl**3)
    return out


def _p_series(x):
    """(sin^2 x - x^2) / x^4, stable for small x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small] ** 2
    out[small] = -1.0 / 3.0 + xs * (2.0 / 45.0 + xs * (-1.0 / 315.0 + xs * (2.0 / 14175.0)))
    xl = x[~small]
    out[~small] = (np.sin(xl) ** 2 - xl**2) / xl**4
    return out


class _ReducedOperator:
    """u_tt = (1/r^3)(r^3 u_r)_r - u^3 Z(r u) with control-volume weights."""

    def __init__(self, grid: RadialGrid):
        r = grid.nodes
        d = grid.dr
        mid = grid.mid
        self.grid = grid
        self.coef = mid**3 / d
        w = np.empty_like(r)
        w[0] = mid[0] ** 4 / 4.0
        w[1:-1] = (mid[1:] ** 4 - mid[:-1] ** 4) / 4.0
        w[-1] = 1.0
        self.w = w
        self.inv_w = 1.0 / w
        self.r = r

    def accel(self, u: np.ndarray, out: np.ndarray) -> np.ndarray:
        flux = self.coef * np.diff(u)
        lap = np.empty_like(u)
        lap[0] = flux[0]
        lap[1:-1] = flux[1:] - flux[:-1]
        lap[-1] = 0.0
        out[:] = lap * self.inv_w - u**3 * _z_series(self.r * u)
        out[-1] = 0.0
        return out

    def hamiltonian(self, u, udot) -> float:
        w = self.w[:-1]
        kin = np.sum(w * udot[:-1] ** 2)
        grad = np.sum(self.coef * np.diff(u) ** 2)
        pot = np.sum(w * u[:-1] ** 4 * _p_series(self.r[:-1] * u[:-1]))
        return float(kin + grad + pot)


# ----------------------------------------------------------------------------
# single steps
# ----------------------------------------------------------------------------


def _check_dt(grid: RadialGrid, dt: float, cfl: float = 1.0) -> None:
    if not (0.0 < dt <= cfl * grid.h_min * (1 + 1e-12)):
        raise CFLViolation(f"dt={dt} violates the CFL bound {cfl} * {grid.h_min}")


def step(state: FieldState, dt: float) -> FieldState:
    """One leapfrog (kick-drift-kick) step of the psi equation.

    The axis node stays at m C* and the outer node at its current value.
    """
    _check_dt(state.grid, dt)
    op = _PsiOperator(state.grid, state.ell, state.target)
    acc = op.accel(state.psi, np.empty_like(state.psi))
    v = state.psidot.copy()
    v[0] = v[-1] = 0.0
    v += 0.5 * dt * acc
    psi = state.psi + dt * v
    op.accel(psi, acc)
    v += 0.5 * dt * acc
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(v))):
        raise NumericalBlowup(f"non-finite values at t={state.t + dt}")
    return state.replace(psi=psi, psidot=v, t=state.t + dt)


# ----------------------------------------------------------------------------
# diagnostics computed every step
# ----------------------------------------------------------------------------


def half_energy_radius(grid: RadialGrid, cum: np.ndarray, level: float = 0.5 * E_Q) -> float:
    """Radius where the cumulative static energy reaches ``level`` (NaN if never).

    The cumulative energy is linear inside each cell, so the crossing is
    found by inverse linear interpolation in the first cell that reaches it.
    """
    if cum[-1] <= level:
        return math.nan
    i = int(np.searchsorted(cum, level, side="left"))
    r = grid.nodes
    c0, c1 = cum[i - 1], cum[i]
    return float(r[i - 1] + (level - c0) / (c1 - c0) * (r[i] - r[i - 1]))


def support_radius(state: FieldState, tol: float = 1e-8) -> float:
    """Largest radius at which the data is not (numerically) at rest.

    Harmonic-map tails such as those of Q are stationary and do not count.
    """
    op = _PsiOperator(state.grid, state.ell, state.target)
    acc = op.accel(state.psi, np.empty_like(state.psi))
    active = (np.abs(acc) > tol) | (np.abs(state.psidot) > tol)
    active[-1] = False
    idx = np.nonzero(active)[0]
    return float(state.r[idx[-1]]) if idx.size else 0.0


def _row(state: FieldState, e_total: float, cone_apex: float | None) -> tuple:
    cum = cumulative_static_energy(state)
    lam = half_energy_radius(state.grid, cum)
    psir = np.max(np.abs(np.diff(state.psi) / state.grid.dr))
    e_cone = math.nan
    if cone_apex is not None and state.t < cone_apex:
        e_cone = energy(state, 0.0, min(cone_apex - state.t, state.grid.r_max)).total
    return (state.t, e_total, e_cone, lam, float(np.max(np.abs(state.psi))), float(psir))


def _stop_check(row, config: SolverConfig, h_min: float, edge_speed: float) -> str | None:
    lam, psir = row[3], row[5]
    if np.isfinite(lam) and lam < config.stop_lambda_cells * h_min:
        return "blowup_underresolved"
    if psir > 1.0 / (4.0 * h_min) * (config.stop_grad_factor / 0.25):
        return "gradient_blowup"
    if edge_speed > 1e-6:
        return "boundary_contact"
    return None


# ----------------------------------------------------------------------------
# evolution drivers
# ----------------------------------------------------------------------------


def _validate(data: FieldState, config: SolverConfig) -> None:
    if abs(data.grid.h_min - config.dr) > 1e-9 * config.dr or abs(data.grid.r_max - config.r_max) > 1e-9 * config.r_max:
        raise ValueError("data grid does not match the solver config")
    if config.check_support:
        R = support_radius(data, config.support_tol)
        if config.r_max < config.t_final + R:
            raise ValueError(
                f"r_max={config.r_max} < t_final + support radius = {config.t_final + R:.4g}; "
                "the Dirichlet edge would not be causally isolated"
            )


def evolve(data: FieldState, config: SolverConfig) -> EvolutionTrace:
    """Run leapfrog steps to ``t_final`` or until a stop rule fires.

    Stop rules are reported in ``stop_reason``; nothing is raised for them.
    """
    if config.formulation == "reduced_4d":
        return evolve_reduced(data, config)
    _validate(data, config)
    grid = data.grid
    dt = config.cfl * grid.h_min
    n_steps = int(math.ceil(config.t_final / dt - 1e-9))
    op = _PsiOperator(grid, data.ell, data.target)
    r = grid.nodes
    compiled = op.kind >= 0

    psi = data.psi.copy()
    v = data.psidot.copy()
    v[0] = v[-1] = 0.0
    acc = op.accel(psi, np.empty_like(psi))
    cone = config.cone_apex

    def row(t):
        if compiled:
            cone_r = (cone - t) if cone is not None else -1.0
            e, e_cone, lam, mp, mpr = _kernels.diagnostics(psi, v, r, op.ell, op.kind, 0.5 * E_Q, cone_r)
            if cone is None or cone_r <= 0:
                e_cone = math.nan
            return (t, e, e_cone, lam, mp, mpr)
        st = data.replace(psi=psi, psidot=v, t=t)
        return _row(st, energy(st).total, cone)

    rows = [row(data.t)]
    snaps = [data.replace(psi=psi.copy(), psidot=v.copy())]
    reason = "completed"
    degree0 = classify_degree(data)

    for n in range(1, n_steps + 1):
        h = min(dt, config.t_final - (n - 1) * dt) if n == n_steps else dt
        if compiled:
            ok = _kernels.kdk(psi, v, acc, h, op.coef, op.inv_w, op.pot, op.kind)
        else:
            v += 0.5 * h * acc
            psi += h * v
            op.accel(psi, acc)
            v += 0.5 * h * acc
            ok = bool(np.all(np.isfinite(psi)) and np.all(np.isfinite(v)))
        t = data.t + (n - 1) * dt + h
        if not ok:
            reason = "gradient_blowup"
            break
        rw = row(t)
        rows.append(rw)
        stop = _stop_check(rw, config, grid.h_min, abs(v[-2]) if config.check_support else 0.0)
        if n % config.snapshot_stride == 0 or n == n_steps or stop:
            snaps.append(data.replace(psi=psi.copy(), psidot=v.copy(), t=t))
        if stop:
            reason = stop
            break

    return _finish(rows, snaps, reason, config, dt, degree0)


def _finish(rows, snaps, reason, config, dt, degree0) -> EvolutionTrace:
    arr = np.array(rows, dtype=float)
    series = {name: arr[:, k].copy() for k, name in enumerate(SERIES_COLUMNS)}
    e = series["E_total"]
    drift = float(np.max(np.abs(e - e[0])) / abs(e[0])) if e[0] != 0 else float(np.max(np.abs(e)))
    if snaps[-1].t != series["t"][-1]:
        raise AssertionError("final state missing from snapshots")
    return EvolutionTrace(snaps, series, reason, config, dt, drift, degree0)


def to_reduced(state: FieldState) -> tuple[np.ndarray, np.ndarray]:
    """u = psi / r with the even-in-r extrapolation u(0) = (4 u_1 - u_2) / 3."""
    r = state.r
    u = np.empty_like(state.psi)
    ud = np.empty_like(state.psi)
    u[1:] = state.psi[1:] / r[1:]
    ud[1:] = state.psidot[1:] / r[1:]
    h1, h2 = r[1], r[2]
    # quadratic-in-r^2 extrapolation exact for u0 + c r^2
    u[0] = (h2**2 * u[1] - h1**2 * u[2]) / (h2**2 - h1**2)
    ud[0] = (h2**2 * ud[1] - h1**2 * ud[2]) / (h2**2 - h1**2)
    return u, ud


def evolve_reduced(data: FieldState, config: SolverConfig) -> EvolutionTrace:
    """Evolve data with psi(0) = 0 through u = psi / r and map back to psi.

    The u equation holds pointwise for any such psi; degree (0, 0) is the
    regime where it is equivalent to the psi equation in energy spaces.
    Other degrees (0, n) are accepted with u pinned at its initial outer
    value.  E_total in the series is the conserved 4d Hamiltonian of the
    scheme.
    """
    if data.ell != 1 or data.target.kind != "sphere":
        raise ValueError("the 4d reduction is implemented for ell = 1 sphere maps")
    degree = classify_degree(data)
    if degree[0] != 0:
        raise ValueError("the 4d reduction needs psi(0) = 0")
    _validate(data, config)
    grid = data.grid
    r = grid.nodes
    dt = config.cfl * grid.h_min
    n_steps = int(math.ceil(config.t_final / dt - 1e-9))
    op = _ReducedOperator(grid)
    u, v = to_reduced(data)
    v[-1] = 0.0
    acc = op.accel(u, np.empty_like(u))

    def as_state(t):
        return data.replace(psi=r * u, psidot=r * v, t=t)

    state = as_state(data.t)
    rows = [_row(state, op.hamiltonian(u, v), config.cone_apex)]
    snaps = [state]
    reason = "completed"
    for n in range(1, n_steps + 1):
        h = min(dt, config.t_final - (n - 1) * dt) if n == n_steps else dt
        v += 0.5 * h * acc
        u += h * v
        op.accel(u, acc)
        v += 0.5 * h * acc
        t = data.t + (n - 1) * dt + h
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            reason = "gradient_blowup"
            break
        state = as_state(t)
        row = _row(state, op.hamiltonian(u, v), config.cone_apex)
        rows.append(row)
        stop = _stop_check(row, config, grid.h_min, abs(v[-2]) * r[-2] if config.check_support else 0.0)
        if n % config.snapshot_stride == 0 or n == n_steps or stop:
            snaps.append(state)
        if stop:
            reason = stop
            break
    return _finish(rows, snaps, reason, config, dt, degree)


def finite_speed_check(trace_a: EvolutionTrace, trace_b: EvolutionTrace, R: float) -> float:
    """max over shared snapshot times of the H x L^2 distance on r >= R + t."""
    worst = 0.0
    times_b = {round(s.t, 12): s for s in trace_b.snapshots}
    t0 = trace_a.snapshots[0].t
    for sa in trace_a.snapshots:
        sb = times_b.get(round(sa.t, 12))
        if sb is None:
            continue
        a = R + abs(sa.t - t0)
        if a >= sa.grid.r_max:
            continue
        h, l2 = h_norm_arrays(sa.grid, sa.psi - sb.psi, sa.psidot - sb.psidot, a, None)
        worst = max(worst, math.hypot(h, l2))
    return worst


# ----------------------------------------------------------------------------
# trace files
# ----------------------------------------------------------------------------


def write_trace(trace: EvolutionTrace, out_dir, snapshots: bool = True) -> Path:
    """series.csv, snap_<i>.csv (+ .json sidecars) and summary.json in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([trace.series[c] for c in SERIES_COLUMNS])
    np.savetxt(out / "series.csv", data, delimiter=",", header=",".join(SERIES_COLUMNS), comments="", fmt="%.17g")
    if snapshots:
        for i, s in enumerate(trace.snapshots):
            write_snapshot(s, out / f"snap_{i}.csv")
    summary = {
        "stop_reason": trace.stop_reason,
        "t_end": trace.t_end,
        "energy_drift": trace.energy_drift,
        "config": trace.config.to_dict(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return out
