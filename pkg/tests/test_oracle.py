import numpy as np
import pytest

from reachtrack import dynamics as dyn
from reachtrack import geometry as geo
from reachtrack.grid import GridSpec, ScalarField
from reachtrack.hji import SolveConfig, solve_max_tracking
from reachtrack.oracle import (
    NodeCapError,
    OracleConfig,
    calibrated_tolerance,
    control_set,
    oracle_max_tracking,
    oracle_reach,
    oracle_solve_max_tracking,
    oracle_solve_reach,
)

SC = geo.reference_scenario()


def pursuit_1d():
    """Gap x = x_A - x_D between single integrators; defender closes at 4, attacker opens at 2."""
    return dyn.DynamicsModel("pursuit_1d", ("gap",), np.zeros((1, 1)), np.array([[-1.0]]), np.array([[1.0]]),
                             4.0, 2.0, dyn.MINIMIZE, dyn.MAXIMIZE)


def test_control_sets():
    cfg = OracleConfig(disk_angles=8, interval_points=5)
    assert control_set(0, 1.0, cfg).shape == (1, 0)
    np.testing.assert_allclose(control_set(1, 2.0, cfg).ravel(), [-2, -1, 0, 1, 2])
    d = control_set(2, 3.0, cfg)
    assert d.shape == (9, 2)
    np.testing.assert_allclose(np.linalg.norm(d[1:], axis=1), 3.0)
    assert np.all(d[0] == 0)


def test_horizon_zero_returns_l():
    m = pursuit_1d()
    spec = GridSpec((41,), (-10,), (10,))
    l = ScalarField(spec, np.abs(spec.axis(0)) - 1.0)
    np.testing.assert_array_equal(oracle_solve_reach(m, l, OracleConfig(horizon=0.0)).values, l.values)
    np.testing.assert_array_equal(oracle_solve_max_tracking(m, l, OracleConfig(horizon=0.0)).values, l.values)


def test_pure_pursuit_crossing_time():
    m = pursuit_1d()
    spec = GridSpec((201,), (-10,), (10,))
    l = ScalarField(spec, np.abs(spec.axis(0)) - 1.0)
    cfg = OracleConfig(horizon=4.0)
    cell = spec.spacing[0]
    # value at gap 5 is 4 - 2T until it reaches the target
    for T in (0.5, 1.0, 1.5, 2.0):
        r = oracle_reach(m, l, OracleConfig(horizon=T))
        v = r.field.interpolate([5.0])
        assert v == pytest.approx(4.0 - 2.0 * T, abs=6.0 * r.dt + cell)
    r = oracle_reach(m, l, cfg)
    assert r.field.interpolate([5.0]) <= 0


def test_node_cap():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((50, 50, 50), (-10, -4, -10), (10, 4, 10))
    with pytest.raises(NodeCapError):
        oracle_reach(m, ScalarField(spec, np.zeros(spec.shape)))


def test_max_tracking_monotone():
    m = dyn.model_for("rel_vertical_2d", SC)
    spec = GridSpec((31, 21), (-5, -4), (5, 4))
    l = geo.build_tracking_cost_z(spec)
    prev = l.values
    for T in (0.25, 0.5, 1.0):
        v = oracle_max_tracking(m, l, OracleConfig(horizon=T)).field.values
        assert np.all(v >= prev - 1e-12)
        prev = v


def test_tolerance_budget_terms():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((31, 21, 31), (-10, -4, -10), (10, 4, 10))
    l = geo.build_vertical_cost(SC, spec)
    cfg = OracleConfig(horizon=2.0)
    tol = calibrated_tolerance(m, l, cfg, 2.0, lipschitz=1.0)
    # interval control sets contain their optimal endpoints
    assert tol["control_gap"] == 0.0
    assert tol["cell"] == pytest.approx(np.linalg.norm(spec.spacing))
    assert tol["bound"] == pytest.approx(2 * (tol["control_gap"] + tol["dt_term"] + tol["cell"]))
    m2 = dyn.model_for("horizontal_game_6d", SC)
    spec2 = GridSpec((3,) * 6, (0, 0, -6, -6, 0, 0), (45, 25, 6, 6, 45, 25))
    t2 = calibrated_tolerance(m2, ScalarField(spec2, np.zeros(spec2.shape)), cfg, 2.0, 1.0)
    assert t2["control_gap"] > 0


@pytest.mark.slow
def test_tracking_oracle_and_solver_converge_together():
    """2-D vertical tracking: the gap between oracle and level-set values shrinks under refinement."""
    from reachtrack.cli import set_displacement

    m = dyn.model_for("rel_vertical_2d", SC)
    T = 2.0
    diffs = []
    for counts in ((31, 21), (61, 41), (121, 81)):
        spec = GridSpec(counts, (-5, -4), (5, 4))
        l = geo.build_tracking_cost_z(spec)
        o = oracle_solve_max_tracking(m, l, OracleConfig(horizon=T))
        h = solve_max_tracking(m, l, SolveConfig(horizon=T, snapshot_every=None)).field
        diffs.append(float(np.abs(o.values - h.values).max()))
        # sublevel sets at 1.5 m agree to within one cell diagonal
        assert set_displacement(o, h, 1.5) <= np.linalg.norm(spec.spacing) + 1e-9
    assert diffs[0] > diffs[1] > diffs[2]
