import math

import numpy as np
import pytest

from wavemap_lab.evolve import SolverConfig
from wavemap_lab.fields import RadialGrid, classify_degree, energy
from wavemap_lab.scenarios import (
    GluedData,
    Scenario,
    UnmatchableDataError,
    UnreachableTargetError,
    build_below_threshold_family,
    build_rate_ansatz,
    collar_energy,
    match_scale,
    ratio_windows,
    run_scenario,
)

from .conftest import GLUED_CONFIG
from .frozen import GLUED_AMPLITUDE_RANGE

# ---------------------------------------------------------------------------
# glued threshold data
# ---------------------------------------------------------------------------


def test_match_scale_arctan_identity():
    # pi - 2 arctan(2 lam) = pi / 2  <=>  lam = 1 / 2
    assert match_scale(math.pi / 2) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, math.pi, -0.1, 4.0])
def test_match_scale_rejects_values_outside_range(bad):
    with pytest.raises(UnmatchableDataError):
        match_scale(bad)


def test_glued_matching_residual(glued_runs):
    for _, params, _ in glued_runs.values():
        assert params.matching_residual < 1e-10


def test_glued_degree_and_energy(glued_runs):
    grid = GLUED_CONFIG.make_grid()
    for delta, (data, params, _) in glued_runs.items():
        assert classify_degree(data) == (0, 0)
        E = energy(data, tail=True).total
        assert 8.0 < E <= 8.0 + 1.2 * delta
        assert collar_energy(params, grid) < delta / 10
        assert GLUED_AMPLITUDE_RANGE[0] <= params.amplitude <= GLUED_AMPLITUDE_RANGE[1]
    E_half = energy(glued_runs[0.5][0], tail=True).total
    assert 8.0 < E_half < 8.6


def test_glued_outer_tail_energy(glued_runs):
    data, params, _ = glued_runs[0.5]
    outer = data.replace(psi=params.outer_psi(data.r), psidot=np.zeros_like(data.psidot))
    assert energy(outer, params.r_glue, tail=True).total <= 4.0


def test_glued_inner_energy_bounded(glued_runs):
    for delta, (data, params, _) in glued_runs.items():
        inner = params.inner_state(data.grid)
        assert energy(inner, tail=True).total <= 4.0 + delta


def test_glued_state_shapes():
    params = GluedData(0.5, 0.2, 1.1, match_scale(2 * math.atan(10.0)))
    g = RadialGrid.uniform(4.0, h=1e-2)
    st = params.state(g)
    r = g.nodes
    inner = r <= params.r_glue - params.collar
    outer = r >= params.r_glue + params.collar
    np.testing.assert_array_equal(st.psi[inner], params.inner_psi(r[inner]))
    np.testing.assert_allclose(st.psi[outer], params.outer_psi(r[outer]), atol=1e-15)


# ---------------------------------------------------------------------------
# rate ansatz
# ---------------------------------------------------------------------------


def test_rate_ansatz_nu1():
    g = RadialGrid.geometric(50.0, 1e-3, 1.001)
    st = build_rate_ansatz(1.0, g)
    assert float(np.interp(1.0, st.r, st.psi)) == pytest.approx(math.pi / 2, abs=1e-6)
    assert classify_degree(st) == (0, 1)
    assert energy(st, tail=True).total >= 4.0 - 1e-6
    assert np.all(st.psidot[st.r >= 2.0] == 0.0)


def test_rate_ansatz_validates():
    g = RadialGrid.uniform(2.0, h=0.1)
    with pytest.raises(ValueError):
        build_rate_ansatz(0.0, g)
    with pytest.raises(ValueError):
        build_rate_ansatz(1.0, g, t0=1.0)


# ---------------------------------------------------------------------------
# below-threshold family
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("shape", ["r_gauss", "r2_gauss", "kick"])
def test_family_hits_target(shape):
    g = RadialGrid.uniform(12.0, h=2e-3)
    st = build_below_threshold_family(6.0, g, shape)
    assert abs(energy(st).total - 6.0) < 1e-6
    assert classify_degree(st) == (0, 0)


def test_family_amplitude_vanishes_with_target():
    g = RadialGrid.uniform(12.0, h=2e-3)
    amps = [build_below_threshold_family(E, g, return_amplitude=True)[1] for E in (1e-2, 1e-4, 1e-6)]
    assert amps[0] > amps[1] > amps[2] and amps[2] < 1e-2


def test_family_rejects_targets():
    g = RadialGrid.uniform(12.0, h=2e-3)
    with pytest.raises(ValueError):
        build_below_threshold_family(8.0, g)
    with pytest.raises(ValueError):
        build_below_threshold_family(2.0, g, "triangle")


def test_family_unreachable_on_tiny_domain():
    # on a three-node grid the bump cannot carry the energy and still end
    # near a vacuum at r_max
    g = RadialGrid.uniform(0.5, n_nodes=3)
    with pytest.raises(UnreachableTargetError):
        build_below_threshold_family(7.9, g)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

TINY = SolverConfig(dr=2e-2, t_final=0.5, r_max=6.0, snapshot_stride=10)


def _tiny_scenario(**kw):
    base = dict(name="tiny", builder="below_threshold", params={"shape_id": "r_gauss"}, solver=TINY,
                sweep={"energy": [1.0, 2.0, 3.0]})
    base.update(kw)
    return Scenario(**base)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("x", "unknown")
    with pytest.raises(ValueError):
        Scenario("x", "below_threshold", sweep={"energy": []})


def test_scenario_points_in_config_order():
    sc = Scenario("x", "glued", {"s": 0.2}, sweep={"delta": [1.0, 0.5], "iterations": [1, 2]})
    assert [(p["delta"], p["iterations"]) for p in sc.points()] == [(1.0, 1), (1.0, 2), (0.5, 1), (0.5, 2)]
    assert all(p["s"] == 0.2 for p in sc.points())


def test_scenario_roundtrip():
    sc = _tiny_scenario(analyses=["modulation"])
    assert Scenario.from_dict(sc.to_dict()) == sc


def test_run_without_analyses_writes_only_evolution(tmp_path):
    recs = run_scenario(_tiny_scenario(), tmp_path, workers=1)
    assert [r["stop_reason"] for r in recs] == ["completed"] * 3
    files = {p.name for p in (tmp_path / "run_000").iterdir()}
    assert "series.csv" in files and "summary.json" in files
    assert not files & {"modulation.csv", "diagnostics.json"}
    header = (tmp_path / "summary.csv").read_text().splitlines()[0]
    assert header == "run,energy,shape_id,stop_reason,t_end,energy_drift,E0,lambda_end,t_plus,interior_ratio,error"


def test_run_with_analyses(tmp_path):
    run_scenario(_tiny_scenario(analyses=["diagnostics"], sweep={"energy": [1.0]}), tmp_path, workers=1)
    assert (tmp_path / "run_000" / "diagnostics.json").exists()


def test_run_failures_are_recorded(tmp_path):
    short = SolverConfig(dr=2e-2, t_final=5.0, r_max=3.0)
    recs = run_scenario(_tiny_scenario(solver=short), tmp_path, workers=1)
    assert all(r["stop_reason"] == "failed" and "causally" in r["error"] for r in recs)
    assert len((tmp_path / "summary.csv").read_text().splitlines()) == 4


def test_summary_is_bitwise_reproducible(tmp_path):
    sc = _tiny_scenario()
    run_scenario(sc, tmp_path / "a", workers=1)
    run_scenario(sc, tmp_path / "b", workers=1)
    run_scenario(sc, tmp_path / "c", workers=2)
    a = (tmp_path / "a" / "summary.csv").read_bytes()
    assert a == (tmp_path / "b" / "summary.csv").read_bytes() == (tmp_path / "c" / "summary.csv").read_bytes()
    for i in range(3):
        s = (tmp_path / "a" / f"run_{i:03d}" / "series.csv").read_bytes()
        assert s == (tmp_path / "c" / f"run_{i:03d}" / "series.csv").read_bytes()


def test_worker_count_from_environment(monkeypatch):
    from wavemap_lab.scenarios import WORKERS_ENV, worker_count

    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(WORKERS_ENV, "many")
    assert worker_count(1) == 1


def test_ratio_windows(glued_runs):
    _, _, tr = glued_runs[0.5]
    t, ratio = ratio_windows(tr, 10)
    assert len(t) == 10 and np.all(np.diff(ratio) < 0)
