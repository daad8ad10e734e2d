"""Property tests over the stored run corpus and over random inputs."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from wavemap_lab.fields import FieldState, G_accumulate, RadialGrid, bogomolny_split, classify_degree, energy, pointwise_bound
from wavemap_lab.modulation import energy_near_additivity, fit_scale
from wavemap_lab.static import E_Q

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@pytest.fixture(scope="session")
def corpus(scatter_run, nu_run, glued_runs):
    """Every stored snapshot of the shared runs, tagged by run name."""
    snaps = [("scatter", s) for s in scatter_run.snapshots]
    snaps += [("nu", s) for s in nu_run.trace.snapshots]
    for delta, (_, _, tr) in glued_runs.items():
        snaps += [(f"glued{delta}", s) for s in tr.snapshots]
    return snaps


def _pick(corpus, k):
    return corpus[k % len(corpus)]


@SETTINGS
@given(k=st.integers(0, 10**6), u=st.floats(0.0, 1.0), v=st.floats(0.0, 1.0))
def test_G_bound(corpus, k, u, v):
    # |G(psi(r2)) - G(psi(r1))| <= int |g(psi)| |psi_r| dr <= E_{r1}^{r2} / 2
    _, s = _pick(corpus, k)
    r_hi = min(s.grid.r_max, 30.0)
    r1, r2 = sorted((u * r_hi, v * r_hi))
    assume(r2 > r1)
    p1, p2 = np.interp([r1, r2], s.r, s.psi)
    lhs = abs(G_accumulate(s.target, float(p2)) - G_accumulate(s.target, float(p1)))
    e = energy(s, r1, r2).total
    assert lhs <= 0.5 * e * (1 + 1e-3) + 1e-6


@SETTINGS
@given(k=st.integers(0, 10**6))
def test_pointwise_bound_degree_zero(corpus, k):
    name, s = _pick(corpus, k)
    assume(name == "scatter")
    assert energy(s).total < 2 * E_Q
    assert pointwise_bound(s) < math.pi


@SETTINGS
@given(k=st.integers(0, 10**6))
def test_bogomolny_lower_bound(corpus, k):
    _, s = _pick(corpus, k)
    deg = classify_degree(s)
    E = energy(s, tail=True).total
    kin, defect, topo = bogomolny_split(s, tail=True)
    # E >= |topological charge| = E(Q) |n - m|
    assert E >= abs(topo) - 1e-6
    assert abs(topo - E_Q * (deg[1] - deg[0])) < 1e-9
    # a degree-zero map through psi = p costs at least 4 G(p) (two crossings)
    if deg == (0, 0):
        assert E >= 4 * G_accumulate(s.target, float(np.max(np.abs(s.psi)))) - 1e-6


@SETTINGS
@given(k=st.integers(0, 10**6), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0), c=st.floats(0.0, 1.0))
def test_energy_additivity_over_corpus(corpus, k, a, b, c):
    _, s = _pick(corpus, k)
    x, y, z = sorted(t * s.grid.r_max for t in (a, b, c))
    assume(x < y < z)
    whole = energy(s, x, z).total
    assert abs(whole - energy(s, x, y).total - energy(s, y, z).total) <= 1e-12 * max(whole, 1e-300) + 1e-300


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-10, 10), y=st.floats(-10, 10))
def test_sin_squared_cross_term(x, y):
    # sin^2(x+y) - sin^2 x - sin^2 y = 2 sin x sin y cos(x+y), so the cross
    # term is bounded by 2 |x| |y|
    lhs = math.sin(x + y) ** 2 - math.sin(x) ** 2 - math.sin(y) ** 2
    assert lhs == pytest.approx(2 * math.sin(x) * math.sin(y) * math.cos(x + y), abs=1e-12)
    assert lhs == pytest.approx(-2 * math.sin(x) ** 2 * math.sin(y) ** 2 + 0.5 * math.sin(2 * x) * math.sin(2 * y), abs=1e-12)
    assert abs(lhs) <= 2 * abs(x) * abs(y) + 1e-12


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-0.3, 0.3), mu=st.sampled_from([0.1, 10.0]))
def test_fit_scale_equivariance(a, mu):
    g = RadialGrid.uniform(10.0, h=2e-3)
    s = FieldState.from_function(g, lambda r: 2 * np.arctan(r) + a * r * np.exp(-r * r))
    assert fit_scale(s.rescaled(mu)).lam == pytest.approx(mu * fit_scale(s).lam, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(logsep=st.floats(4.0, 6.0), sign=st.sampled_from([1, -1]))
def test_separated_bubbles_nearly_additive(logsep, sign):
    rep = energy_near_additivity([(1, 1.0), (sign, 10.0**logsep)])
    assert rep.defect < 2e-2


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=4), w=st.floats(0.3, 2.0))
def test_energy_scale_invariance(c, w):
    g = RadialGrid.uniform(8.0 * w, h=2e-3 * w)
    f = lambda r: sum(ck * (r / w) ** (k + 1) * np.exp(-(r / w) ** 2) for k, ck in enumerate(c))  # noqa: E731
    s = FieldState.from_function(g, f, lambda r: f(r) / w)
    base = FieldState.from_function(RadialGrid.uniform(8.0, h=2e-3), lambda r: f(r * w),
                                    lambda r: f(r * w))
    assert energy(s).total == pytest.approx(energy(base).total, rel=1e-9, abs=1e-14)
