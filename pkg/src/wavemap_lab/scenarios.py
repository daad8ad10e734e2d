"""Initial-data recipes and the sweep runner.

Three families of Cauchy data are provided:

* glued threshold data: a degree-one blow-up candidate on r <= 2 joined to
  an anti-bubble pi - Q(lambda r) outside, giving degree-zero data with
  energy just above 2 E(Q);
* the rate-ansatz seed Q(r / lambda) moving with lambda(t) = (1 - t)^(1 + nu);
* below-threshold degree-zero bumps tuned to a prescribed energy.

:func:`run_scenario` evolves a sweep of such data and writes one directory
per run plus a ``summary.csv``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, newton

from .evolve import SolverConfig, evolve, fit_blowup_time, write_trace
from .fields import FieldState, RadialGrid, classify_degree, energy
from .static import E_Q

WORKERS_ENV = "WAVEMAP_WORKERS"


class UnmatchableDataError(ValueError):
    """The inner datum at r = 2 is outside (0, pi), so no lambda matches it."""


class UnreachableTargetError(ValueError):
    pass


def smoothstep(x):
    """C^2 quintic step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def cutoff(r, r_in: float, r_out: float):
    """1 on r <= r_in, 0 on r >= r_out, quintic in between."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - r_in) / (r_out - r_in))


def _Q(x):
    return 2.0 * np.arctan(x)


# ----------------------------------------------------------------------------
# glued threshold data
# ----------------------------------------------------------------------------


@dataclass
class GluedData:
    """Parameters of one glued datum.

    The inner part is Q(r / s) with the inward kick A r exp(-r^2) cut off
    before the collar; the outer part is pi - Q(lambda_glue r).
    """

    delta: float
    s: float
    amplitude: float
    lambda_glue: float
    r_glue: float = 2.0
    collar: float = 0.1
    kick_cutoff: tuple[float, float] = (1.5, 1.85)
    inner_stop_time: float = math.nan
    bisection: list = field(default_factory=list)

    def inner_psi(self, r):
        return _Q(np.asarray(r, dtype=float) / self.s)

    def inner_psidot(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * r * np.exp(-r * r) * cutoff(r, *self.kick_cutoff)

    def outer_psi(self, r):
        return math.pi - _Q(self.lambda_glue * np.asarray(r, dtype=float))

    @property
    def matching_residual(self) -> float:
        return abs(float(self.outer_psi(self.r_glue)) - float(self.inner_psi(self.r_glue)))

    def state(self, grid: RadialGrid) -> FieldState:
        r = grid.nodes
        eta = smoothstep((r - (self.r_glue - self.collar)) / (2.0 * self.collar))
        psi = (1.0 - eta) * self.inner_psi(r) + eta * self.outer_psi(r)
        return FieldState(grid, psi, self.inner_psidot(r))

    def inner_state(self, grid: RadialGrid) -> FieldState:
        r = grid.nodes
        return FieldState(grid, self.inner_psi(r), self.inner_psidot(r))


def match_scale(inner_value: float, r_glue: float = 2.0) -> float:
    """lambda > 0 with pi - Q(r_glue lambda) = inner_value, by Brent's method."""
    if not (0.0 < inner_value < math.pi):
        raise UnmatchableDataError(f"inner value {inner_value!r} not in (0, pi)")
    fn = lambda lam: math.pi - 2.0 * math.atan(r_glue * lam) - inner_value  # noqa: E731
    hi = 1.0
    while fn(hi) > 0:
        hi *= 2.0
    lo = hi
    while fn(lo) < 0:
        lo /= 2.0
    return brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def inner_blows_up(s: float, amplitude: float, horizon: float, dr: float = 2e-3,
                   kick_cutoff=(1.5, 1.85)) -> tuple[bool, float]:
    """Evolve the inner datum alone; True if it is diagnosed as blowing up
    before ``horizon``.  Returns (flag, time of the diagnosis)."""
    params = GluedData(0.0, s, amplitude, 1.0, kick_cutoff=kick_cutoff)
    cfg = SolverConfig(dr=dr, t_final=horizon, r_max=horizon + 4.0, snapshot_stride=10**6)
    tr = evolve(params.inner_state(cfg.make_grid()), cfg)
    if not tr.blew_up:
        return False, math.nan
    return True, tr.t_end


def glued_parameters(delta: float, s: float = 0.2, iterations: int = 6, dr_search: float = 2e-3,
                     r_glue: float = 2.0, collar: float = 0.1) -> GluedData:
    """Choose the kick amplitude by bisection.

    The kick energy of A r exp(-r^2) is A^2 / 8, so the inner datum has
    energy at most E(Q) + delta when A <= sqrt(8 delta).  Starting from that
    value, bisection looks for the smallest amplitude whose inner evolution
    still blows up before the collar signal can reach the axis.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    horizon = r_glue - collar - 0.1
    hi = math.sqrt(8.0 * delta) * (1.0 - 1e-3)
    lo = 0.0
    log = []
    ok, T = inner_blows_up(s, hi, horizon, dr_search)
    log.append((hi, ok, T))
    if not ok:
        raise UnmatchableDataError(f"no blow-up at the largest admissible amplitude for delta={delta}")
    best = (hi, T)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        ok, T = inner_blows_up(s, mid, horizon, dr_search)
        log.append((mid, ok, T))
        if ok:
            hi, best = mid, (mid, T)
        else:
            lo = mid
    A, T = best
    inner2 = float(_Q(r_glue / s))
    lam = match_scale(inner2, r_glue)
    return GluedData(delta, s, A, lam, r_glue, collar, inner_stop_time=T, bisection=log)


def build_glued_threshold_data(delta: float, grid: RadialGrid, s: float = 0.2, iterations: int = 6,
                               return_params: bool = False):
    """Degree-zero data with energy a little above 2 E(Q) that blows up."""
    params = glued_parameters(delta, s, iterations)
    st = params.state(grid)
    return (st, params) if return_params else st


def collar_energy(params: GluedData, grid: RadialGrid) -> float:
    st = params.state(grid)
    return energy(st, params.r_glue - params.collar, params.r_glue + params.collar).total


# ----------------------------------------------------------------------------
# rate ansatz and below-threshold bumps
# ----------------------------------------------------------------------------


def build_rate_ansatz(nu: float, grid: RadialGrid, t0: float = 0.0, cap: tuple[float, float] = (1.0, 2.0)) -> FieldState:
    """Q(r / lambda(t0)) with the velocity of lambda(t) = (1 - t)^(1 + nu).

    psi_t = -(lambda'/lambda) (r/lambda) Q'(r/lambda) = -(lambda'/lambda) sin Q(r/lambda),
    which decays like 1/r and so is cut off outside r = cap[0].
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    if not (0.0 <= t0 < 1.0):
        raise ValueError("t0 must lie in [0, 1)")
    lam = (1.0 - t0) ** (1.0 + nu)
    rate = -(1.0 + nu) * (1.0 - t0) ** nu / lam  # lambda'/lambda
    r = grid.nodes
    psi = _Q(r / lam)
    psidot = -rate * np.sin(psi) * cutoff(r, *cap)
    return FieldState(grid, psi, psidot, t=0.0)


SHAPES = {
    "r_gauss": (lambda r: r * np.exp(-r * r), None),
    "r2_gauss": (lambda r: r * r * np.exp(-r * r), None),
    "kick": (None, lambda r: r * np.exp(-r * r)),
}


def _shape_state(shape_id: str, amplitude: float, grid: RadialGrid) -> FieldState:
    try:
        pos, vel = SHAPES[shape_id]
    except KeyError:
        raise ValueError(f"unknown shape {shape_id!r}; choose from {sorted(SHAPES)}") from None
    r = grid.nodes
    psi = amplitude * pos(r) if pos else np.zeros_like(r)
    psidot = amplitude * vel(r) if vel else np.zeros_like(r)
    return FieldState(grid, psi, psidot)


def build_below_threshold_family(energy_target: float, grid: RadialGrid, shape_id: str = "r_gauss",
                                 tol: float = 1e-6, return_amplitude: bool = False):
    """Degree-zero bump whose quadrature energy equals ``energy_target``."""
    if not (0.0 < energy_target < 2 * E_Q):
        raise ValueError("energy_target must lie in (0, 8)")
    E = lambda A: energy(_shape_state(shape_id, A, grid)).total  # noqa: E731
    unit = E(1.0)
    a0 = math.sqrt(energy_target / unit)  # exact for quadratic energies
    try:
        A = newton(lambda A: E(A) - energy_target, a0, x1=a0 * 1.01, tol=1e-13, maxiter=100)
    except RuntimeError as exc:
        raise UnreachableTargetError(str(exc)) from None
    st = _shape_state(shape_id, A, grid)
    try:
        degree = classify_degree(st)
    except ValueError:  # psi(r_max) away from every vacuum
        degree = None
    if abs(energy(st).total - energy_target) > tol or degree != (0, 0):
        raise UnreachableTargetError(f"shape {shape_id!r} cannot reach E={energy_target}")
    return (st, float(A)) if return_amplitude else st


# ----------------------------------------------------------------------------
# scenarios and sweeps
# ----------------------------------------------------------------------------

BUILDERS = ("glued", "rate_ansatz", "below_threshold", "ground_state")


@dataclass
class Scenario:
    name: str
    builder: str
    params: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    analyses: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.builder not in BUILDERS:
            raise ValueError(f"unknown builder {self.builder!r}")
        for k, vals in self.sweep.items():
            if not isinstance(vals, (list, tuple)) or not vals:
                raise ValueError(f"sweep entry {k!r} must be a nonempty list")

    def points(self) -> list[dict]:
        """Cartesian product of the sweep grid in config order."""
        if not self.sweep:
            return [dict(self.params)]
        keys = list(self.sweep)
        return [dict(self.params, **dict(zip(keys, combo))) for combo in itertools.product(*(self.sweep[k] for k in keys))]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solver"] = self.solver.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        d["solver"] = SolverConfig(**d.get("solver", {}))
        return cls(**d)


def build_data(builder: str, params: dict, grid: RadialGrid) -> FieldState:
    p = dict(params)
    if builder == "glued":
        return build_glued_threshold_data(p.pop("delta"), grid, **p)
    if builder == "rate_ansatz":
        return build_rate_ansatz(p.pop("nu", 1.0), grid, **p)
    if builder == "below_threshold":
        return build_below_threshold_family(p.pop("energy"), grid, **p)
    if builder == "ground_state":
        from .static import ground_state

        return ground_state(p.get("ell", 1), lam=p.get("lam", 1.0)).state(grid)
    raise ValueError(f"unknown builder {builder!r}")


def _run_analyses(trace, analyses, out: Path) -> dict:
    from . import diagnostics, modulation

    results = {}
    for name in analyses:
        if name == "modulation":
            modulation.write_modulation(trace, out / "modulation.csv")
            results[name] = "modulation.csv"
        elif name == "diagnostics":
            diagnostics.write_diagnostics(trace, out / "diagnostics.json")
            results[name] = "diagnostics.json"
        else:
            raise ValueError(f"unknown analysis {name!r}")
    return results


def _run_one(job) -> dict:
    index, builder, params, solver, analyses, out_dir, snapshots = job
    out = Path(out_dir) / f"run_{index:03d}"
    rec = {"run": index, **{k: params[k] for k in sorted(params)}}
    try:
        data = build_data(builder, params, solver.make_grid())
        rec["E0"] = energy(data).total
        e01 = energy(data, 0.0, 1.0).total
        trace = evolve(data, solver)
        write_trace(trace, out, snapshots=snapshots)
        _run_analyses(trace, analyses, out)
        rec.update(stop_reason=trace.stop_reason, t_end=trace.t_end, energy_drift=trace.energy_drift,
                   lambda_end=float(trace.series["lambda"][-1]),
                   t_plus=trace.t_plus() if trace.blew_up else math.nan,
                   interior_ratio=energy(trace.snapshots[-1], 0.0, 1.0).total / e01 if e01 > 0 else math.nan,
                   error="")
    except Exception as exc:  # recorded, never aborts the sweep
        out.mkdir(parents=True, exist_ok=True)
        rec.update(stop_reason="failed", error=f"{type(exc).__name__}: {exc}")
    return rec


# interior_ratio = E_0^1 at t_end over E_0^1 at t = 0
SUMMARY_COLUMNS = ("stop_reason", "t_end", "energy_drift", "E0", "lambda_end", "t_plus", "interior_ratio", "error")


def worker_count(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, default)))
    except ValueError:
        return default


def run_scenario(scenario: Scenario, out_dir, workers: int | None = None, snapshots: bool = True) -> list[dict]:
    """Run every sweep point and write ``summary.csv``.

    Runs may execute in worker processes; the summary is assembled here in
    sweep order, so its bytes do not depend on the worker count.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count() if workers is None else workers
    jobs = [(i, scenario.builder, p, scenario.solver, list(scenario.analyses), str(out), snapshots)
            for i, p in enumerate(scenario.points())]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    param_keys = sorted({k for p in scenario.points() for k in p})
    cols = ["run", *param_keys, *SUMMARY_COLUMNS]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            w.writerow([_fmt(rec.get(c, "")) for c in cols])
    (out / "scenario.json").write_text(json.dumps(scenario.to_dict(), indent=1, default=str))
    return records


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def ratio_windows(trace, n_windows: int = 10, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """lambda / (T - t) at the last ``n_windows`` recorded snapshots.

    T defaults to the fitted blow-up time.
    """
    T = fit_blowup_time(trace.series["t"], trace.series["lambda"])[0] if T is None else T
    t = trace.times[-n_windows:]
    idx = np.searchsorted(trace.series["t"], t)
    lam = trace.series["lambda"][idx]
    return t, lam / (T - t)
