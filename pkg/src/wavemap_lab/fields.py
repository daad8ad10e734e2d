"""Radial grids, target geometries, field states and the static functionals.

All integrals use the same cell quadrature: the gradient term is evaluated
with the midpoint rule on each cell (staggered differences), while the
kinetic and potential terms use the trapezoid rule on the nodes.  Summed
over a whole grid this equals the Hamiltonian that the time stepper in
:mod:`wavemap_lab.evolve` conserves, so "energy" means the same number
everywhere in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline


class OpenEndedDataError(ValueError):
    """Outer value of a field is not close to a multiple of C*."""


# ----------------------------------------------------------------------------
# grids
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    spacing: str = "uniform"

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < 3:
            raise ValueError("grid needs at least three nodes")
        if r[0] != 0.0:
            raise ValueError("nodes[0] must be 0")
        if not np.all(np.diff(r) > 0):
            raise ValueError("nodes must be strictly increasing")
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)

    @classmethod
    def uniform(cls, r_max: float, h: float | None = None, n_nodes: int | None = None) -> "RadialGrid":
        if (h is None) == (n_nodes is None):
            raise ValueError("give exactly one of h or n_nodes")
        if n_nodes is None:
            n_nodes = int(round(r_max / h)) + 1
        r = np.arange(n_nodes, dtype=float) * (r_max / (n_nodes - 1))
        r[-1] = r_max
        return cls(r, "uniform")

    @classmethod
    def geometric(cls, r_max: float, h_min: float, ratio: float = 1.001, h_max: float | None = None) -> "RadialGrid":
        """Spacing h_min at the axis, growing by ``ratio`` per cell up to ``h_max``."""
        if h_max is None:
            h_max = 50 * h_min
        steps = []
        r, dr = 0.0, h_min
        while r + dr < r_max:
            steps.append(dr)
            r += dr
            dr = min(dr * ratio, h_max)
        nodes = np.concatenate([[0.0], np.cumsum(steps)])
        if r_max - nodes[-1] < 0.5 * steps[-1]:
            nodes[-1] = r_max
        else:
            nodes = np.append(nodes, r_max)
        return cls(nodes, "geometric")

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def dr(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_min(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def scaled(self, mu: float) -> "RadialGrid":
        return RadialGrid(self.nodes * mu, self.spacing)


# ----------------------------------------------------------------------------
# targets
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TargetGeometry:
    """Rotationally symmetric target with metric d rho^2 + g(rho)^2 d omega^2.

    ``vacua`` are the two consecutive zeros of g joined by the ground state.
    For the sphere and custom targets these are (0, C*); the Yang-Mills
    target uses the variable in which the vacua sit at -1 and +1.
    """

    kind: str
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    C_star: float
    vacua: tuple[float, float] = (0.0, math.nan)

    def __post_init__(self):
        if math.isnan(self.vacua[1]):
            object.__setattr__(self, "vacua", (0.0, float(self.C_star)))

    def f(self, rho):
        return self.g(rho) * self.g_prime(rho)

    @classmethod
    def sphere(cls) -> "TargetGeometry":
        return cls("sphere", np.sin, np.cos, math.pi)

    @classmethod
    def yang_mills(cls) -> "TargetGeometry":
        return cls(
            "yang_mills",
            lambda p: 0.5 * (1.0 - np.asarray(p) ** 2),
            lambda p: -np.asarray(p, dtype=float),
            1.0,
            (-1.0, 1.0),
        )

    @classmethod
    def custom(cls, g, g_prime, C_star: float, check: bool = True) -> "TargetGeometry":
        target = cls("custom", g, g_prime, float(C_star))
        if check:
            check_target(target)
        return target

    @classmethod
    def from_table(cls, rho, g_values) -> "TargetGeometry":
        """Custom target from samples of g on [0, C*] (first and last samples are zeros).

        g is extended oddly about 0 and periodically with period 2 C*.
        """
        rho = np.asarray(rho, dtype=float)
        gv = np.asarray(g_values, dtype=float)
        C = float(rho[-1])
        full_r = np.concatenate([-rho[:0:-1], rho])
        full_g = np.concatenate([-gv[:0:-1], gv])
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(full_r, full_g, bc_type="periodic")
        deriv = spline.derivative()

        def wrap(p):
            return np.mod(np.asarray(p, dtype=float) + C, 2 * C) - C

        target = cls("custom", lambda p: spline(wrap(p)), lambda p: deriv(wrap(p)), C)
        check_target(target, rtol=1e-6)
        return target

    def name(self) -> str:
        return self.kind

    @classmethod
    def by_name(cls, name: str) -> "TargetGeometry":
        if name == "sphere":
            return cls.sphere()
        if name == "yang_mills":
            return cls.yang_mills()
        raise ValueError(f"no built-in target named {name!r}")


def check_target(target: TargetGeometry, rtol: float = 1e-9) -> None:
    """Sampled checks: g odd, g(0)=0, g'(0)=1, g(C*)=0 and no interior zero."""
    C = target.C_star
    x = np.linspace(-2 * C, 2 * C, 801)
    g = np.asarray(target.g(x), dtype=float)
    if not np.allclose(g, -g[::-1], atol=rtol * max(1.0, np.max(np.abs(g)))):
        raise ValueError("g must be odd")
    if abs(float(target.g(0.0))) > rtol or abs(float(target.g_prime(0.0)) - 1.0) > max(rtol, 1e-6):
        raise ValueError("need g(0) = 0 and g'(0) = 1")
    if abs(float(target.g(C))) > max(rtol, 1e-8):
        raise ValueError("g(C*) must vanish")
    inner = np.linspace(0.0, C, 2001)[1:-1]
    if np.any(np.asarray(target.g(inner)) <= 0):
        raise ValueError("degenerate target: g vanishes inside (0, C*)")


SPHERE = TargetGeometry.sphere()


# ----------------------------------------------------------------------------
# field states
# ----------------------------------------------------------------------------


@dataclass
class FieldState:
    grid: RadialGrid
    psi: np.ndarray
    psidot: np.ndarray
    t: float = 0.0
    ell: int = 1
    target: TargetGeometry = field(default_factory=TargetGeometry.sphere)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        self.psidot = np.asarray(self.psidot, dtype=float)
        n = self.grid.n_nodes
        if self.psi.shape != (n,) or self.psidot.shape != (n,):
            raise ValueError("psi and psidot must have one value per grid node")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.psidot))):
            raise ValueError("non-finite samples")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError("ell must be a positive integer")
        C = self.target.C_star
        m = round(self.psi[0] / C)
        if abs(self.psi[0] - m * C) >= 1e-9:
            raise ValueError(f"axis value {self.psi[0]!r} is not a multiple of C*")

    @classmethod
    def from_function(cls, grid, psi_fn, psidot_fn=None, **kw) -> "FieldState":
        r = grid.nodes
        psi = np.asarray(psi_fn(r), dtype=float) * np.ones_like(r)
        psidot = np.zeros_like(r) if psidot_fn is None else np.asarray(psidot_fn(r), dtype=float) * np.ones_like(r)
        return cls(grid, psi, psidot, **kw)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def replace(self, **changes) -> "FieldState":
        kw = dict(grid=self.grid, psi=self.psi, psidot=self.psidot, t=self.t, ell=self.ell, target=self.target)
        kw.update(changes)
        return FieldState(**kw)

    def rescaled(self, mu: float) -> "FieldState":
        """The state psi(./mu), psidot(./mu)/mu carried on the grid scaled by mu."""
        return self.replace(grid=self.grid.scaled(mu), psidot=self.psidot / mu)


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    gradient: float
    potential: float
    interval: tuple[float, float]
    total: float = math.nan

    def __post_init__(self):
        object.__setattr__(self, "total", self.kinetic + self.gradient + self.potential)


# ----------------------------------------------------------------------------
# cell quadrature
# ----------------------------------------------------------------------------


def _cell_trap(grid: RadialGrid, node_density: np.ndarray) -> np.ndarray:
    return 0.5 * grid.dr * (node_density[1:] + node_density[:-1])


def _cell_grad(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    return grid.mid * np.diff(u) ** 2 / grid.dr


def potential_density(r, psi, ell, target) -> np.ndarray:
    """ell^2 g(psi)^2 / r at the nodes; the axis limit is zero for regular fields."""
    out = np.zeros_like(psi)
    out[1:] = ell**2 * target.g(psi[1:]) ** 2 / r[1:]
    return out


def energy_cells(state: FieldState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cell (kinetic, gradient, potential) contributions."""
    grid, r = state.grid, state.r
    kin = _cell_trap(grid, state.psidot**2 * r)
    grad = _cell_grad(grid, state.psi)
    pot = _cell_trap(grid, potential_density(r, state.psi, state.ell, state.target))
    return kin, grad, pot


def _interval_sum(grid: RadialGrid, cells: np.ndarray, a: float, b: float) -> float:
    """Integral over [a, b] of a piecewise-constant-per-cell density.

    Uses C(b) - C(a) of the cumulative integral, linear inside a cell, so
    sums over adjacent intervals add up.
    """
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    return float(_cum_at(grid, cum, cells, b) - _cum_at(grid, cum, cells, a))


def _cum_at(grid, cum, cells, x):
    r = grid.nodes
    if x <= 0.0:
        return 0.0
    if x >= r[-1]:
        return cum[-1]
    i = int(np.searchsorted(r, x, side="right")) - 1
    return cum[i] + (x - r[i]) / (r[i + 1] - r[i]) * cells[i]


def _check_interval(grid, a, b):
    if b is None:
        b = grid.r_max
    if not (0.0 <= a < b <= grid.r_max + 1e-12 * grid.r_max):
        raise ValueError(f"need 0 <= a < b <= r_max, got a={a}, b={b}")
    return float(a), float(min(b, grid.r_max))


def tail_energy(state: FieldState) -> float:
    """Energy beyond r_max assuming a harmonic-map tail.

    A Bogomolny-saturated tail carries 2*ell*|G(n C*) - G(psi(r_max))|; for
    the sphere this is 4*ell*sin^2(d/2) with d the gap to the pole, which for
    Q gives exactly 4/(1 + r_max^2).
    """
    _, n = classify_degree(state)
    end = n * state.target.C_star
    return 2 * state.ell * abs(float(G_accumulate(state.target, end)) - float(G_accumulate(state.target, state.psi[-1])))


def energy(state: FieldState, a: float = 0.0, b: float | None = None, tail: bool = False) -> EnergyReport:
    """Localized energy of ``state`` on [a, b].

    ``tail=True`` adds :func:`tail_energy` to the potential part when b is the
    grid edge.
    """
    a, b = _check_interval(state.grid, a, b)
    kin, grad, pot = energy_cells(state)
    k = _interval_sum(state.grid, kin, a, b)
    gr = _interval_sum(state.grid, grad, a, b)
    p = _interval_sum(state.grid, pot, a, b)
    if tail and b >= state.grid.r_max:
        p += tail_energy(state)
    return EnergyReport(k, gr, p, (a, b))


def cumulative_static_energy(state: FieldState) -> np.ndarray:
    """E_0^{r_i}(psi, 0) at every node."""
    _, grad, pot = energy_cells(state)
    return np.concatenate([[0.0], np.cumsum(grad + pot)])


def h_norm_arrays(grid: RadialGrid, psi, psidot=None, a: float = 0.0, b: float | None = None) -> tuple[float, float]:
    a, b = _check_interval(grid, a, b)
    psi = np.asarray(psi, dtype=float)
    if abs(psi[0]) > 1e-9 and a == 0.0:
        raise ValueError("H norm is infinite unless psi(0) = 0")
    r = grid.nodes
    dens = np.zeros_like(psi)
    dens[1:] = psi[1:] ** 2 / r[1:]
    h2 = _interval_sum(grid, _cell_grad(grid, psi) + _cell_trap(grid, dens), a, b)
    l2 = 0.0
    if psidot is not None:
        l2 = _interval_sum(grid, _cell_trap(grid, np.asarray(psidot) ** 2 * r), a, b)
    return math.sqrt(max(h2, 0.0)), math.sqrt(max(l2, 0.0))


def h_norm(state: FieldState, a: float = 0.0, b: float | None = None) -> tuple[float, float]:
    """(H part, L^2 part) of the H x L^2 norm on [a, b]."""
    return h_norm_arrays(state.grid, state.psi, state.psidot, a, b)


def hxl2_norm(grid, psi, psidot=None, a=0.0, b=None) -> float:
    h, l2 = h_norm_arrays(grid, psi, psidot, a, b)
    return math.hypot(h, l2)


def classify_degree(state: FieldState) -> tuple[int, int]:
    C = state.target.C_star
    m = int(round(state.psi[0] / C))
    n = int(round(state.psi[-1] / C))
    if abs(state.psi[-1] - n * C) > 0.1 * C:
        raise OpenEndedDataError(f"psi(r_max) = {state.psi[-1]:.6g} is not within 0.1 C* of a multiple of C*")
    return m, n


# ----------------------------------------------------------------------------
# G, Bogomolny
# ----------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _G_table(target: TargetGeometry, lo: float, hi: float):
    # |g| has kinks at the zeros of g: they must be knots
    C = target.C_star
    breaks = [lo] + [k * C for k in range(int(math.ceil(lo / C)), int(math.floor(hi / C)) + 1) if lo < k * C < hi] + [hi]
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(4, int(math.ceil((b - a) / (C / 4000.0))))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    knots = np.append(np.concatenate(pieces), hi)
    half = 0.5 * np.diff(knots)
    centre = 0.5 * (knots[1:] + knots[:-1])
    pts = centre[:, None] + half[:, None] * _GL_X[None, :]
    panel = np.sum(np.abs(target.g(pts)) * _GL_W[None, :], axis=1) * half
    values = np.concatenate([[0.0], np.cumsum(panel)])
    return knots, values


def G_accumulate(target: TargetGeometry, psi):
    """G(psi) = integral of |g| from 0 to psi.

    Scalars go through adaptive quadrature with breakpoints at the zeros of
    g; arrays use a Gauss-Legendre table with cubic Hermite interpolation.
    """
    if np.ndim(psi) == 0:
        x = float(psi)
        if x == 0.0:
            return 0.0
        lo, hi = sorted((0.0, x))
        C = target.C_star
        breaks = [k * C for k in range(int(math.floor(lo / C)), int(math.ceil(hi / C)) + 1) if lo < k * C < hi]
        val, _ = integrate.quad(lambda p: abs(float(target.g(p))), lo, hi, points=breaks or None,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val if x > 0 else -val
    psi = np.asarray(psi, dtype=float)
    lo = min(0.0, float(psi.min())) - 1e-9
    hi = max(0.0, float(psi.max())) + 1e-9
    knots, values = _G_table(target, lo, hi)
    spline = CubicHermiteSpline(knots, values, np.abs(target.g(knots)))
    return spline(psi) - spline(0.0)


def signed_primitive(target: TargetGeometry, psi):
    """Integral of g (with sign) from 0 to psi."""
    if target.kind == "sphere":
        return 1.0 - np.cos(psi)
    if np.ndim(psi) == 0:
        return integrate.quad(lambda p: float(target.g(p)), 0.0, float(psi), epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return np.array([signed_primitive(target, float(p)) for p in np.ravel(psi)]).reshape(np.shape(psi))


def bogomolny_split(state: FieldState, tail: bool = False) -> tuple[float, float, float]:
    """(kinetic, defect, topological) with energy = kinetic + defect + topological.

    defect is the integral of (psi_r - ell g(psi)/r)^2 r dr; topological is
    2 ell (Gamma(psi(inf)) - Gamma(psi(0))) with Gamma the signed primitive of g.
    """
    grid, r, ell = state.grid, state.r, state.ell
    kin = float(np.sum(_cell_trap(grid, state.psidot**2 * r)))
    # midpoint rule on the perfect square, so a Bogomolny solution gives O(h^4)
    psi_mid = 0.5 * (state.psi[1:] + state.psi[:-1])
    resid = np.diff(state.psi) / grid.dr - ell * state.target.g(psi_mid) / grid.mid
    defect = float(np.sum(resid**2 * grid.mid * grid.dr))
    end = state.psi[-1]
    if tail:
        end = classify_degree(state)[1] * state.target.C_star
    topo = 2 * ell * float(signed_primitive(state.target, end) - signed_primitive(state.target, state.psi[0]))
    return kin, defect, topo


def pointwise_bound(state: FieldState) -> float:
    return float(np.max(np.abs(state.psi)))


# ----------------------------------------------------------------------------
# snapshot files
# ----------------------------------------------------------------------------


def write_snapshot(state: FieldState, path) -> None:
    """``path`` gets ``r,psi,psidot`` rows; ``path`` with suffix .json gets the metadata."""
    path = Path(path)
    data = np.column_stack([state.r, state.psi, state.psidot])
    np.savetxt(path, data, delimiter=",", header="r,psi,psidot", comments="", fmt="%.17g")
    meta = {
        "t": state.t,
        "ell": state.ell,
        "target": state.target.name(),
        "r_max": state.grid.r_max,
        "n_nodes": state.grid.n_nodes,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def read_snapshot(path, target: TargetGeometry | None = None) -> FieldState:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != meta["n_nodes"]:
        raise ValueError("row count does not match n_nodes in the sidecar")
    if target is None:
        target = TargetGeometry.by_name(meta["target"])
    grid = RadialGrid(data[:, 0])
    return FieldState(grid, data[:, 1], data[:, 2], t=float(meta["t"]), ell=int(meta["ell"]), target=target)
