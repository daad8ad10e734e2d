"""Free radial waves in R^{1+d}, the repulsive 2d operator, and exterior energy.

Free waves solve v_tt = v_rr + ((d - 1)/r) v_r.  In flux form the spatial
operator is r^{1-d} (r^{d-1} v_r)_r; node 0 is an ordinary control volume,
which is the even extension at the axis.  The repulsive operator
phi_tt = phi_rr + phi_r / r - phi / r^2 is the linearization of the
corotational wave map at zero, with phi(0) = 0 pinned.

Time stepping is a fourth-order symplectic composition of leapfrog steps
(Yoshida), so the discrete free energy is conserved to ~1e-10 on smooth data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .fields import RadialGrid


@dataclass
class LinearState:
    grid: RadialGrid
    v: np.ndarray
    vdot: np.ndarray
    t: float = 0.0
    dim: int = 4

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.vdot = np.asarray(self.vdot, dtype=float)
        n = self.grid.n_nodes
        if self.v.shape != (n,) or self.vdot.shape != (n,):
            raise ValueError("v and vdot must have one value per grid node")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("dim must be an integer >= 2")

    @classmethod
    def from_function(cls, grid: RadialGrid, f, g=None, dim: int = 4) -> "LinearState":
        r = grid.nodes
        v = np.asarray(f(r), dtype=float) * np.ones_like(r)
        vd = np.zeros_like(r) if g is None else np.asarray(g(r), dtype=float) * np.ones_like(r)
        return cls(grid, v, vd, 0.0, dim)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes


# ----------------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------------


class _FreeOperator:
    """v_tt = (1/w) Delta_flux v with control volumes w_i = (r_{i+1/2}^d - r_{i-1/2}^d)/d."""

    def __init__(self, grid: RadialGrid, dim: int):
        d = dim
        mid = grid.mid
        self.coef = mid ** (d - 1) / grid.dr
        w = np.empty(grid.n_nodes)
        w[0] = mid[0] ** d / d
        w[1:-1] = (mid[1:] ** d - mid[:-1] ** d) / d
        w[-1] = 1.0
        self.w = w
        self.inv_w = 1.0 / w
        self.fixed = np.zeros(grid.n_nodes, dtype=bool)
        self.fixed[-1] = True
        self.pot = None

    def accel(self, v: np.ndarray) -> np.ndarray:
        flux = self.coef * np.diff(v)
        out = np.empty_like(v)
        out[0] = flux[0]
        out[1:-1] = flux[1:] - flux[:-1]
        out[-1] = 0.0
        out *= self.inv_w
        if self.pot is not None:
            out -= self.pot * v
        out[self.fixed] = 0.0
        return out

    def hamiltonian(self, v: np.ndarray, vdot: np.ndarray) -> float:
        free = ~self.fixed
        kin = np.sum(self.w[free] * vdot[free] ** 2)
        grad = np.sum(self.coef * np.diff(v) ** 2)
        pot = 0.0 if self.pot is None else np.sum((self.w * self.pot * v**2)[free])
        return float(kin + grad + pot)


class _RepulsiveOperator(_FreeOperator):
    """phi_tt = (1/r)(r phi_r)_r - phi / r^2 with phi(0) = 0."""

    def __init__(self, grid: RadialGrid):
        super().__init__(grid, 2)
        r = grid.nodes
        self.pot = np.zeros_like(r)
        self.pot[1:] = 1.0 / r[1:] ** 2
        self.fixed[0] = True


_CBRT2 = 2.0 ** (1.0 / 3.0)
_W1 = 1.0 / (2.0 - _CBRT2)
_W0 = -_CBRT2 / (2.0 - _CBRT2)
_YOSHIDA_C = (0.5 * _W1, 0.5 * (_W0 + _W1), 0.5 * (_W0 + _W1), 0.5 * _W1)
_YOSHIDA_D = (_W1, _W0, _W1)


def _integrate(op: _FreeOperator, v, vdot, t_span: float, dt: float, record=None):
    n = int(math.ceil(t_span / dt - 1e-9)) if t_span > 0 else 0
    v = v.copy()
    vd = vdot.copy()
    vd[op.fixed] = 0.0
    for k in range(n):
        h = min(dt, t_span - k * dt)
        for i in range(3):
            v += _YOSHIDA_C[i] * h * vd
            vd += _YOSHIDA_D[i] * h * op.accel(v)
        v += _YOSHIDA_C[3] * h * vd
        if record is not None:
            record(k + 1, v, vd)
    return v, vd


def stable_dt(grid: RadialGrid, dim: int, cfl: float = 0.5) -> float:
    """The axis control volume has an eigenvalue near 2 d / h^2, hence the sqrt(2/d)."""
    return cfl * grid.h_min * min(1.0, math.sqrt(2.0 / dim))


def support_radius(state: LinearState, tol: float = 1e-12) -> float:
    active = (np.abs(state.v) > tol) | (np.abs(state.vdot) > tol)
    idx = np.nonzero(active)[0]
    return float(state.r[idx[-1]]) if idx.size else 0.0


def _guard(state: LinearState, t: float) -> None:
    if state.grid.r_max < t + support_radius(state):
        raise ValueError("r_max < t + support radius; the outer boundary would be reached")


def evolve_free(data: LinearState, t: float, cfl: float = 0.5, dt: float | None = None) -> LinearState:
    """S(t) applied to (v, vdot) in dimension ``data.dim``."""
    _guard(data, t)
    op = _FreeOperator(data.grid, data.dim)
    dt = stable_dt(data.grid, data.dim, cfl) if dt is None else dt
    v, vd = _integrate(op, data.v, data.vdot, t, dt)
    return replace(data, v=v, vdot=vd, t=data.t + t)


def evolve_repulsive_2d(data: LinearState, t: float, cfl: float = 0.5, dt: float | None = None) -> LinearState:
    """W(t) applied to (phi, phi_t); ``data.dim`` must be 2."""
    if data.dim != 2:
        raise ValueError("the repulsive operator lives in dimension 2")
    if abs(data.v[0]) > 1e-12:
        raise ValueError("phi(0) must vanish")
    _guard(data, t)
    op = _RepulsiveOperator(data.grid)
    dt = stable_dt(data.grid, 4, cfl) if dt is None else dt
    v, vd = _integrate(op, data.v, data.vdot, t, dt)
    return replace(data, v=v, vdot=vd, t=data.t + t)


def free_energy(state: LinearState, repulsive: bool = False) -> float:
    """Discrete ||v||^2_{H^1} + ||v_t||^2_{L^2} conserved by the scheme."""
    op = _RepulsiveOperator(state.grid) if repulsive else _FreeOperator(state.grid, state.dim)
    return op.hamiltonian(state.v, state.vdot)


# ----------------------------------------------------------------------------
# exterior energy
# ----------------------------------------------------------------------------


def _cells(state: LinearState, repulsive: bool):
    g = state.grid
    r = g.nodes
    rd = r ** (state.dim - 1)
    grad = g.mid ** (state.dim - 1) * np.diff(state.v) ** 2 / g.dr
    dens = state.vdot**2 * rd
    if repulsive:
        pot = np.zeros_like(r)
        pot[1:] = state.v[1:] ** 2 / r[1:]
        dens = dens + pot
    other = 0.5 * g.dr * (dens[1:] + dens[:-1])
    return grad + other


def _tail_integral(grid: RadialGrid, cells: np.ndarray, a: float) -> float:
    r = grid.nodes
    if a <= 0:
        return float(np.sum(cells))
    if a >= r[-1]:
        return 0.0
    i = int(np.searchsorted(r, a, side="right")) - 1
    part = (r[i + 1] - a) / (r[i + 1] - r[i]) * cells[i]
    return float(part + np.sum(cells[i + 1:]))


def exterior_energy(state: LinearState, t: float | None = None, repulsive: bool = False) -> float:
    """||(v, v_t)||_{H^1 x L^2(r >= t)}, a norm (not squared).

    With ``repulsive=True`` the H norm int (phi_r^2 + phi^2/r^2) r dr is used.
    """
    t = state.t if t is None else t
    return math.sqrt(max(_tail_integral(state.grid, _cells(state, repulsive), t), 0.0))


def hdot1_norm(state: LinearState, repulsive: bool = False) -> float:
    """||v(0)||: the H^1 (or H, for repulsive) norm of the position component."""
    return exterior_energy(replace(state, vdot=np.zeros_like(state.vdot)), 0.0, repulsive)


def exterior_ratio_profile(datum: LinearState, times, repulsive: bool = False, cfl: float = 0.5) -> np.ndarray:
    """Ratios exterior_energy(t) / ||datum position|| over increasing ``times``.

    One evolution is run and sampled at each requested time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be nonnegative and increasing")
    _guard(datum, float(times[-1]))
    norm = hdot1_norm(datum, repulsive)
    if norm == 0:
        raise ValueError("datum has zero position norm")
    op = _RepulsiveOperator(datum.grid) if repulsive else _FreeOperator(datum.grid, datum.dim)
    dt = stable_dt(datum.grid, 4 if repulsive else datum.dim, cfl)
    out = []
    v, vd = datum.v.copy(), datum.vdot.copy()
    t_now = 0.0
    for t in times:
        v, vd = _integrate(op, v, vd, t - t_now, dt)
        t_now = t
        st = replace(datum, v=v, vdot=vd, t=datum.t + t)
        out.append(exterior_energy(st, t, repulsive) / norm)
    return np.array(out)


# ----------------------------------------------------------------------------
# data families
# ----------------------------------------------------------------------------

FREE_FAMILY = {
    "gauss": lambda r: np.exp(-r * r),
    "r_gauss": lambda r: r * np.exp(-r * r),
    "r2_gauss": lambda r: r * r * np.exp(-r * r),
    "mexican_hat": lambda r: (1.0 - r * r) * np.exp(-r * r),
    "shell": lambda r: np.exp(-4.0 * (r - 1.5) ** 2),
}


def family_state(name: str, grid: RadialGrid, dim: int) -> LinearState:
    return LinearState.from_function(grid, FREE_FAMILY[name], dim=dim)


def conjugate_2d(state4: LinearState) -> LinearState:
    """phi = r v: maps 4d free data to data for the repulsive 2d operator."""
    if state4.dim != 4:
        raise ValueError("conjugation is from dimension 4")
    r = state4.r
    return LinearState(state4.grid, r * state4.v, r * state4.vdot, state4.t, 2)


@dataclass(frozen=True)
class SplineFamily:
    """Clamped cubic spline through (knots, coeffs) with f(r_max_support) = 0 beyond."""

    knots: tuple

    def __call__(self, coeffs, r):
        knots = np.asarray(self.knots, dtype=float)
        vals = np.append(np.asarray(coeffs, dtype=float), 0.0)
        sp = CubicSpline(np.append(knots, knots[-1] + (knots[-1] - knots[-2])), vals,
                         bc_type=((1, 0.0), (1, 0.0)))
        end = knots[-1] + (knots[-1] - knots[-2])
        r = np.asarray(r, dtype=float)
        return np.where(r < end, sp(np.minimum(r, end)), 0.0)

    @property
    def support(self) -> float:
        return self.knots[-1] + (self.knots[-1] - self.knots[-2])


def coordinate_search(fun, x0, step: float = 0.5, min_step: float = 1e-3, max_evals: int = 4000,
                      normalize=None):
    """Derivative-free compass search: try +-step along each axis, halve on failure.

    ``normalize`` maps an accepted point back to a canonical representative,
    which keeps steps meaningful when ``fun`` is scale invariant.
    """
    x = np.array(x0, dtype=float)
    fx = fun(x)
    evals = 1
    while step > min_step and evals < max_evals:
        improved = False
        for i in range(x.size):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[i] += sgn * step
                fy = fun(y)
                evals += 1
                if fy < fx:
                    x = y if normalize is None else normalize(y)
                    fx, improved = fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx, evals


def write_exterior(rows, path) -> None:
    """rows of (dim, t, ratio) to ``exterior.csv`` layout."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dim", "t", "ratio"))
        for d, t, ratio in rows:
            w.writerow((int(d), repr(float(t)), repr(float(ratio))))


# ----------------------------------------------------------------------------
# sweeps and the failure witness
# ----------------------------------------------------------------------------


@dataclass
class ExteriorSweep:
    rows: list
    floors: dict


def exterior_sweep(dims, family, times, h: float = 1e-2, repulsive_2d: bool = True, margin: float = 1.0) -> ExteriorSweep:
    """Ratios for every (dim, family member, t); floors are minima over members and t.

    ``rows`` holds (dim, t, min-over-family ratio) in the ``exterior.csv``
    layout; the repulsive 2d operator is reported as dim 2 and uses
    phi_0 = r f for the 4d family members f.
    """
    times = np.asarray(times, dtype=float)
    support = 6.0  # every FREE_FAMILY member is below 1e-14 beyond r = 6
    grid = RadialGrid.uniform(float(times[-1]) + support + margin, h=h)
    rows, floors = [], {}
    cases = [(d, False) for d in dims]
    if repulsive_2d:
        cases.append((2, True))
    for d, rep in cases:
        prof = []
        for name in family:
            st = family_state(name, grid, 4 if rep else d)
            st = _clip_tail(conjugate_2d(st) if rep else st)
            prof.append(exterior_ratio_profile(st, times, repulsive=rep))
        mins = np.min(np.array(prof), axis=0)
        rows.extend((d, float(t), float(m)) for t, m in zip(times, mins))
        floors[f"d{d}" if not rep else "repulsive_2d"] = float(np.min(mins))
    return ExteriorSweep(rows, floors)


def _clip_tail(state: LinearState, tol: float = 1e-14) -> LinearState:
    """Zero the numerically negligible far tail so that the support guard is meaningful."""
    v = np.where(np.abs(state.v) < tol, 0.0, state.v)
    vd = np.where(np.abs(state.vdot) < tol, 0.0, state.vdot)
    return replace(state, v=v, vdot=vd)


DEFAULT_WITNESS_KNOTS = (0.0, 0.1, 0.2, 0.4, 0.8, 1.2, 1.6, 2.4, 3.2, 4.0)
MIN_CELLS_PER_KNOT = 40


class UnderResolvedFamily(ValueError):
    """Knot spacing too small for the grid; ratios would be grid dispersion, not analysis."""


def check_resolution(knots, h: float, min_cells: int = MIN_CELLS_PER_KNOT) -> None:
    gap = float(np.min(np.diff(np.asarray(knots, dtype=float))))
    if gap < min_cells * h:
        raise UnderResolvedFamily(f"knot spacing {gap:g} < {min_cells} cells of width {h:g}")


@dataclass
class Witness:
    dim: int
    t: float
    knots: tuple
    coeffs: np.ndarray
    ratio: float
    family_min: float
    evals: int

    def to_dict(self) -> dict:
        return {"dim": self.dim, "t": self.t, "knots": list(self.knots), "coeffs": self.coeffs.tolist(),
                "ratio": self.ratio, "family_min": self.family_min, "evals": self.evals}


def _bilinear(grid: RadialGrid, dim: int, a, b, a_dot, b_dot, r0: float) -> float:
    r = grid.nodes
    grad = grid.mid ** (dim - 1) * np.diff(a) * np.diff(b) / grid.dr
    dens = a_dot * b_dot * r ** (dim - 1)
    return _tail_integral(grid, grad + 0.5 * grid.dr * (dens[1:] + dens[:-1]), r0)


def ratio_forms(family: SplineFamily, dim: int, t: float, h: float, cfl: float = 0.5):
    """Gram matrices (A, M) with ratio(c)^2 = c.A.c / c.M.c for spline coefficients c.

    The scheme is linear, so evolving each basis spline once and pairing
    the results gives the exterior energy of every combination exactly.
    """
    grid = RadialGrid.uniform(t + family.support + 1.0, h=h)
    n = len(family.knots)
    basis = []
    for i in range(n):
        c = np.zeros(n)
        c[i] = 1.0
        basis.append(family(c, grid.nodes))
    op = _FreeOperator(grid, dim)
    dt = stable_dt(grid, dim, cfl)
    evolved = [_integrate(op, b, np.zeros_like(b), t, dt) for b in basis]
    zero = np.zeros(grid.n_nodes)
    A = np.empty((n, n))
    M = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            A[i, j] = A[j, i] = _bilinear(grid, dim, evolved[i][0], evolved[j][0], evolved[i][1], evolved[j][1], t)
            M[i, j] = M[j, i] = _bilinear(grid, dim, basis[i], basis[j], zero, zero, 0.0)
    return A, M


def search_witness(dim: int = 6, t: float = 2.0, knots=None, h: float = 2.5e-3, max_evals: int = 20000,
                   x0=None) -> Witness:
    """Coordinate search for the spline datum (f, 0) with the smallest exterior ratio at time t.

    ``family_min`` is the exact minimum over the family from the generalized
    eigenvalue problem, reported as an independent check on the search.
    Knot intervals narrower than ``MIN_CELLS_PER_KNOT`` cells are rejected:
    on such data the discrete propagator, not the wave equation, sets the
    ratio (in d = 4 it then falls far below the sharp value 1/sqrt 2).
    """
    from scipy.linalg import eigh

    knots = DEFAULT_WITNESS_KNOTS if knots is None else tuple(knots)
    check_resolution(knots, h)
    fam = SplineFamily(knots)
    A, M = ratio_forms(fam, dim, t, h)

    def ratio(c):
        den = c @ M @ c
        return math.sqrt(max(c @ A @ c, 0.0) / den) if den > 0 else math.inf

    x0 = np.ones(len(knots)) if x0 is None else np.asarray(x0, dtype=float)
    def unit(c):
        return c / np.max(np.abs(c))

    x, fx, evals = coordinate_search(ratio, unit(x0), step=0.25, min_step=1e-6, max_evals=max_evals,
                                     normalize=unit)
    lam = eigh(A, M, eigvals_only=True)
    return Witness(dim, t, knots, x, fx, math.sqrt(max(lam[0], 0.0)), evals)
