import math

import numpy as np
import pytest

from dimer.errors import ConfigurationError
from dimer.experiments import ScenarioConfig, output_mesh, run_cell, run_fringes, run_sweep, run_trajectory
from dimer.grid import GridSpec

# coarse pair released from d = 2 so that everything runs in seconds
COARSE = ScenarioConfig(grid=GridSpec(6.0, 41), g=-2.0, kappa=0.4, d=2.0)


@pytest.fixture(scope="module")
def trajectory():
    return run_trajectory(COARSE)


def test_defaults():
    c = ScenarioConfig()
    assert (c.epsilon, c.d, c.g, c.kappa) == (5.164, 6.0, -7.0, 0.4)
    assert c.grid == GridSpec(9.0, 181)


@pytest.mark.parametrize("bad", [dict(epsilon=0.0), dict(kappa=-1.0), dict(g=math.nan),
                                 dict(fixed_times=(2.0, 1.0)), dict(retention="some"),
                                 dict(barrier="box"), dict(time_step=0.0)])
def test_invalid_config(bad):
    with pytest.raises(ConfigurationError):
        ScenarioConfig(**bad)


def test_output_mesh():
    times, flags = output_mesh(1.234, 2.5, 0.5)
    assert list(times) == sorted(times)
    assert flags.count(1) == 1 and flags.count(2) == 1
    assert times[flags.index(1)] == 1.234 and times[flags.index(2)] == 2.5
    assert times[-1] == pytest.approx(3.0)
    assert np.count_nonzero(np.isclose(times, 2.5)) == 1


def test_trajectory_contents(trajectory):
    r = trajectory
    assert r.timing.t_s < r.timing.t_A < r.timing.t_B
    assert r.records[0].t == 0.0 and r.records[-1].t >= r.timing.t_B
    assert r.at("tA").t == r.timing.t_A
    assert set(r.orbital_snapshots) == {"tA", "tB"}
    assert r.diagnostics["completeness"] > 1 - 1e-6
    assert r.diagnostics["max_norm_drift"] < 1e-10
    for rec in r.records:
        assert rec.P_20 + rec.P_11 + rec.P_02 == pytest.approx(1.0, abs=1e-8)


def test_fixed_times_override():
    r = run_trajectory(COARSE.replace(fixed_times=(3.0, 6.0)))
    assert (r.timing.t_A, r.timing.t_B) == (3.0, 6.0) and not r.timing.detected


def test_sweep_shape_order_and_isolation():
    res = run_sweep(COARSE, [-2.0, 1.0], [0.0, 0.4, 1.0])
    assert [[(c.g, c.kappa) for c in row] for row in res.cells] == [
        [(-2.0, 0.0), (-2.0, 0.4), (-2.0, 1.0)], [(1.0, 0.0), (1.0, 0.4), (1.0, 1.0)]]
    assert np.array(res.records_at_tA, dtype=object).shape == (2, 3)
    for row in res.cells:
        for c in row:
            assert c.error is None and 0.8 < c.timing.omega_delta < 1.2
    alone = run_cell(COARSE.replace(g=1.0, kappa=0.4))
    assert alone.records["tA"] == res.cells[1][1].records["tA"]


def test_sweep_failure_is_a_hole():
    # d = 5 on a half-width-6 box violates the preparation margin
    res = run_sweep(COARSE.replace(d=5.0), [-2.0], [0.4])
    cell = res.cells[0][0]
    assert cell.error.startswith("prepare") and cell.records["tA"] is None
    assert math.isnan(res.values("tA", "F_Q")[0, 0])


def test_sweep_rejects_bad_axes():
    with pytest.raises(ConfigurationError):
        run_sweep(COARSE, [], [0.4])
    with pytest.raises(ConfigurationError):
        run_sweep(COARSE, [math.inf], [0.4])


def test_fringes_normalized():
    f = run_fringes(COARSE, sample_step=0.1)
    np.testing.assert_allclose(f.norms, 1.0, atol=1e-8)
    assert f.report.degenerate or 0 <= f.visibility <= 1
    assert 0 <= f.best_delay <= 2 * math.pi + 1e-9


def test_fringes_without_barrier_low_contrast():
    # d = 0: nothing is ever split across a barrier; the density stays a single lump
    f = run_fringes(ScenarioConfig(grid=GridSpec(6.0, 41), g=-2.0, kappa=0.0, d=0.0,
                                   fixed_times=(math.pi, 2 * math.pi)), sample_step=0.1)
    assert f.low_contrast
