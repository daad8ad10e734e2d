import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemap_lab.fields import RadialGrid
from wavemap_lab.linear import (
    FREE_FAMILY,
    LinearState,
    UnderResolvedFamily,
    conjugate_2d,
    evolve_free,
    evolve_repulsive_2d,
    exterior_energy,
    exterior_ratio_profile,
    exterior_sweep,
    free_energy,
    hdot1_norm,
    search_witness,
    write_exterior,
)

from .frozen import FLOOR_D4, FLOOR_D8, FLOOR_REPULSIVE_2D
from .oracles import dalembert_3d


def bump(r):
    """C^infinity-flat enough compact bump: (1 - r^2)^6 on r < 1."""
    return np.where(r < 1.0, np.clip(1.0 - r * r, 0.0, None) ** 6, 0.0)


def test_dalembert_d3():
    g = RadialGrid.uniform(4.0, h=5e-4)
    out = evolve_free(LinearState.from_function(g, bump, dim=3), 2.0)
    exact = dalembert_3d(bump, g.nodes, 2.0)
    assert np.max(np.abs(out.v - exact)) < 1e-6


def test_zero_data():
    g = RadialGrid.uniform(3.0, h=0.05)
    z = LinearState(g, np.zeros(g.n_nodes), np.zeros(g.n_nodes), dim=4)
    assert np.all(evolve_free(z, 1.0).v == 0)
    z2 = LinearState(g, np.zeros(g.n_nodes), np.zeros(g.n_nodes), dim=2)
    assert np.all(evolve_repulsive_2d(z2, 1.0).v == 0)


@pytest.mark.parametrize("dim", [3, 4, 6, 8])
def test_free_energy_conserved(dim):
    g = RadialGrid.uniform(12.0, h=1e-2)
    st0 = LinearState.from_function(g, FREE_FAMILY["gauss"], dim=dim)
    e0 = free_energy(st0)
    e1 = free_energy(evolve_free(st0, 4.0))
    assert abs(e1 - e0) / e0 < 1e-8


def test_repulsive_energy_conserved():
    g = RadialGrid.uniform(12.0, h=1e-2)
    st0 = LinearState.from_function(g, FREE_FAMILY["r_gauss"], dim=2)
    e0 = free_energy(st0, repulsive=True)
    assert abs(free_energy(evolve_repulsive_2d(st0, 4.0), repulsive=True) - e0) / e0 < 1e-8


def test_conjugacy():
    g = RadialGrid.uniform(8.0, h=1e-3)
    v0 = LinearState.from_function(g, bump, dim=4)
    phi0 = conjugate_2d(v0)
    for t in (0.5, 1.0, 2.0):
        W = evolve_repulsive_2d(phi0, t)
        S = conjugate_2d(evolve_free(v0, t))
        diff = LinearState(g, W.v - S.v, W.vdot - S.vdot, dim=2)
        assert exterior_energy(diff, 0.0, repulsive=True) < 5e-4


def test_repulsive_requires_axis_zero():
    g = RadialGrid.uniform(3.0, h=0.05)
    with pytest.raises(ValueError):
        evolve_repulsive_2d(LinearState.from_function(g, bump, dim=2), 0.5)


def test_guard():
    g = RadialGrid.uniform(2.0, h=0.05)
    with pytest.raises(ValueError):
        evolve_free(LinearState.from_function(g, bump, dim=4), 1.5)


def test_dim_validation():
    g = RadialGrid.uniform(2.0, h=0.5)
    with pytest.raises(ValueError):
        LinearState(g, np.zeros(g.n_nodes), np.zeros(g.n_nodes), dim=1)


# ---------------------------------------------------------------------------
# exterior energy
# ---------------------------------------------------------------------------


def test_ratio_at_zero_is_one():
    g = RadialGrid.uniform(10.0, h=1e-2)
    st4 = LinearState.from_function(g, bump, dim=4)
    assert exterior_ratio_profile(st4, [0.0])[0] == pytest.approx(1.0, abs=1e-14)
    assert exterior_ratio_profile(conjugate_2d(st4), [0.0], repulsive=True)[0] == pytest.approx(1.0, abs=1e-14)


def test_h1_norm_of_gauss_d4():
    # int (2 r e^{-r^2})^2 r^3 dr = 4 int r^5 e^{-2 r^2} dr = 4 * 1/8 = 1/2
    g = RadialGrid.uniform(8.0, h=1e-3)
    st4 = LinearState.from_function(g, FREE_FAMILY["gauss"], dim=4)
    assert hdot1_norm(st4) ** 2 == pytest.approx(0.5, rel=1e-5)


@pytest.fixture(scope="module")
def sweep():
    return exterior_sweep((4, 8), tuple(FREE_FAMILY), np.linspace(0.0, 5.0, 51))


def test_floors(sweep):
    assert sweep.floors["d4"] >= FLOOR_D4
    assert sweep.floors["d8"] >= FLOOR_D8
    assert sweep.floors["repulsive_2d"] >= FLOOR_REPULSIVE_2D
    # the conjugation loses at most a factor sqrt 2
    assert sweep.floors["repulsive_2d"] >= sweep.floors["d4"] / math.sqrt(2.0) - 1e-3


def test_sweep_rows_layout(sweep, tmp_path):
    assert {d for d, _, _ in sweep.rows} == {2, 4, 8}
    write_exterior(sweep.rows, tmp_path / "exterior.csv")
    lines = (tmp_path / "exterior.csv").read_text().splitlines()
    assert lines[0] == "dim,t,ratio" and len(lines) == 1 + 3 * 51


def test_equipartition():
    # (f, 0) data supported in r < 1: at t = 10 the energy is split evenly
    g = RadialGrid.uniform(12.0, h=1e-2)
    out = evolve_free(LinearState.from_function(g, bump, dim=4), 10.0)
    total = free_energy(out)
    kinetic = free_energy(LinearState(g, np.zeros(g.n_nodes), out.vdot, dim=4))
    assert abs(kinetic / total - 0.5) < 0.05 * 0.5


def test_exterior_monotone_in_radius():
    g = RadialGrid.uniform(6.0, h=1e-2)
    st4 = evolve_free(LinearState.from_function(g, bump, dim=4), 1.0)
    vals = [exterior_energy(st4, a) for a in np.linspace(0.0, 6.0, 121)]
    assert np.all(np.diff(vals) <= 1e-15)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3), A=st.floats(0.05, 2.0))
def test_conjugacy_two_sided_bounds(c, A):
    # with phi = r v: ||phi||^2_H(r>=A) = ||v||^2_H1(r>=A) - A^2 v(A)^2 and
    # Hardy gives A^2 v(A)^2 <= ||v||^2 / 2, so 1/2 ||v||^2 <= ||phi||^2 <= ||v||^2
    g = RadialGrid.uniform(6.0, h=2e-3)
    f = lambda r: sum(ck * np.exp(-((r - 0.5 * k) ** 2) * 4.0) for k, ck in enumerate(c))  # noqa: E731
    v = LinearState.from_function(g, f, dim=4)
    nv = exterior_energy(v, A) ** 2
    nphi = exterior_energy(conjugate_2d(v), A, repulsive=True) ** 2
    tol = 1e-4 * nv + 1e-12
    assert 0.5 * nv <= nphi + tol
    assert nphi <= nv + tol


# ---------------------------------------------------------------------------
# failure witness search
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def witness_d4():
    return search_witness(dim=4, t=2.0, max_evals=3000)


def test_witness_d4_bounded_below(witness_d4):
    # the family minimum sits at the sharp d = 4 value 1 / sqrt 2
    assert witness_d4.family_min == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-3)
    assert witness_d4.ratio >= witness_d4.family_min - 1e-9


def test_witness_serializes(witness_d4):
    d = witness_d4.to_dict()
    assert d["dim"] == 4 and len(d["coeffs"]) == len(d["knots"])
    assert np.max(np.abs(d["coeffs"])) == pytest.approx(1.0)


def test_witness_rejects_underresolved_knots():
    with pytest.raises(UnderResolvedFamily):
        search_witness(dim=6, knots=np.linspace(0.0, 0.3, 10), h=1e-2)
