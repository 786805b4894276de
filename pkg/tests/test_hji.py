import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachtrack import dynamics as dyn
from reachtrack import geometry as geo
from reachtrack.grid import GridSpec, ScalarField
from reachtrack.hji import (
    MODE_REACH,
    MODE_REACH_AVOID,
    MODE_TRACK,
    SolveConfig,
    _group_opt1,
    _group_opt2,
    _group_opt2_nodrift,
    _Sweeper,
    cfl_timestep,
    extract_time_field,
    lf_step_numpy,
    solve_max_tracking,
    solve_reach,
    solve_reach_avoid,
)

SC = geo.reference_scenario()


def upw(f, dm, dp):
    return np.where(f > 0, f * dp, f * dm)


# CFL -----------------------------------------------------------------------


def test_cfl_examples():
    assert cfl_timestep([1, 1], [1, 1], 0.5) == pytest.approx(0.25)
    a = cfl_timestep([2, 3], [0.1, 0.2], 0.9)
    assert cfl_timestep([4, 6], [0.1, 0.2], 0.9) == pytest.approx(a / 2)
    dt = cfl_timestep([6, 12, 2], [0.084, 0.08, 0.084], 0.9)
    assert dt == pytest.approx(0.9 / (6 / 0.084 + 12 / 0.08 + 2 / 0.084))
    assert 0.9 / dt == pytest.approx(245.2, abs=0.1)
    assert cfl_timestep([0, 0], [1, 1], 0.9) == np.inf
    with pytest.raises(ValueError):
        cfl_timestep([1], [0.0], 0.9)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(cfl=1.5)
    with pytest.raises(ValueError):
        SolveConfig(scheme="weno")
    with pytest.raises(ValueError):
        SolveConfig(horizon=-1.0)


# exact per-group optimizers vs dense enumeration ---------------------------


def brute_group2(c0, b0, dm0, dp0, c1, b1, dm1, dp1, U, s):
    r = np.linspace(0, U, 201)
    th = np.linspace(0, 2 * np.pi, 1441)
    R, T = np.meshgrid(r, th)
    u0, u1 = R * np.cos(T), R * np.sin(T)
    v = upw(c0 + b0 * u0, dm0, dp0) + upw(c1 + b1 * u1, dm1, dp1)
    return v.max() if s > 0 else v.min()


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, st.floats(0.1, 3), finite, finite, st.floats(0.5, 6), st.sampled_from([1.0, -1.0]))
def test_group_opt1_exact(c, b, dm, dp, U, s):
    u = np.linspace(-U, U, 20001)
    v = upw(c + b * u, dm, dp)
    ref = v.max() if s > 0 else v.min()
    got = _group_opt1(c, b, dm, dp, U, s)
    slack = abs(b) * max(abs(dm), abs(dp)) * (2 * U / 20000)
    assert s * (got - ref) >= -1e-9
    assert abs(got - ref) <= slack + 1e-9


@settings(max_examples=200, deadline=None)
@given(finite, st.floats(0.1, 3), finite, finite, finite, st.floats(0.1, 3), finite, finite,
       st.floats(0.5, 6), st.sampled_from([1.0, -1.0]))
def test_group_opt2_exact(c0, b0, dm0, dp0, c1, b1, dm1, dp1, U, s):
    got = _group_opt2(c0, b0, dm0, dp0, c1, b1, dm1, dp1, U, s)
    ref = brute_group2(c0, b0, dm0, dp0, c1, b1, dm1, dp1, U, s)
    lip = np.hypot(b0 * max(abs(dm0), abs(dp0)), b1 * max(abs(dm1), abs(dp1)))
    slack = lip * U * (2 * np.pi / 1440 + 1 / 200)
    assert s * (got - ref) >= -1e-9
    assert abs(got - ref) <= slack + 1e-9


@settings(max_examples=500, deadline=None)
@given(st.floats(0.1, 3), finite, finite, st.floats(0.1, 3), finite, finite,
       st.floats(0.5, 6), st.sampled_from([1.0, -1.0]))
def test_nodrift_optimizer_matches_general(b0, dm0, dp0, b1, dm1, dp1, U, s):
    a = _group_opt2_nodrift(b0, dm0, dp0, b1, dm1, dp1, U, s)
    b = _group_opt2(0.0, b0, dm0, dp0, 0.0, b1, dm1, dp1, U, s)
    assert a == pytest.approx(b, abs=1e-12)


# kernels -------------------------------------------------------------------


def sweep_once(model, fld, l, g, mode, dt, scheme):
    sw = _Sweeper(model, fld.spec, scheme)
    out = np.empty(fld.spec.size)
    gv = (g if g is not None else l).values.reshape(-1)
    sw(np.ascontiguousarray(fld.values.reshape(-1)), out, l.values.reshape(-1), gv, mode, dt)
    return out.reshape(fld.spec.shape)


@pytest.mark.parametrize("mode", [MODE_REACH_AVOID, MODE_REACH, MODE_TRACK])
def test_lf_kernel_matches_numpy_reference(mode):
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((9, 7, 8), (-3, -4, -3), (3, 4, 3))
    rng = np.random.default_rng(0)
    phi = ScalarField(spec, rng.normal(size=spec.shape))
    l = ScalarField(spec, rng.normal(size=spec.shape) + (2.0 if mode == MODE_TRACK else 0.0))
    g = ScalarField(spec, rng.normal(size=spec.shape) - 1.0)
    dt = 0.5 * cfl_timestep(m.dissipation_bounds(spec), spec.spacing, 0.9)
    got = sweep_once(m, phi, l, g, mode, dt, "lf")
    ref = lf_step_numpy(m, phi, l, g if mode == MODE_REACH_AVOID else None, mode, dt)
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_upwind_linear_advection_is_exact():
    """For a linear field the upwind Hamiltonian equals the exact one."""
    m = dyn.model_for("rel_vertical_2d", SC)
    spec = GridSpec((11, 9), (-2, -4), (2, 4))
    Z, V = spec.meshgrid()
    phi = ScalarField(spec, 2.0 * Z - 0.5 * V)
    big = ScalarField(spec, np.full(spec.shape, -1e9))
    dt = 1e-3
    got = sweep_once(m, phi, big, None, MODE_TRACK, dt, "upwind")
    p = np.stack([np.full(spec.shape, 2.0), np.full(spec.shape, -0.5)], axis=-1)
    H = m.hamiltonian(p, np.stack([Z, V], axis=-1))
    np.testing.assert_allclose(got, np.maximum(phi.values + dt * H, phi.values), atol=1e-12)


# solvers -------------------------------------------------------------------


def test_horizon_zero_returns_l():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((9, 7, 9), (-4, -4, -4), (4, 4, 4))
    l = geo.build_vertical_cost(SC, spec)
    sol = solve_reach(m, l, SolveConfig(horizon=0.0))
    np.testing.assert_array_equal(sol.field.values, l.values)
    assert sol.iterations == 0


def test_avoid_surrogate_reduces_to_reach():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((15, 9, 15), (-5, -4, -5), (5, 4, 5))
    l = geo.build_vertical_cost(SC, spec)
    g = ScalarField(spec, np.full(spec.shape, -1e9))
    a = solve_reach_avoid(m, l, g, SolveConfig(horizon=1.0))
    b = solve_reach(m, l, SolveConfig(horizon=1.0))
    np.testing.assert_allclose(a.field.values, b.field.values)
    assert np.all(a.field.values <= l.values)


def test_reach_set_members_stay():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((15, 9, 15), (-5, -4, -5), (5, 4, 5))
    l = geo.build_vertical_cost(SC, spec)
    g = ScalarField(spec, np.full(spec.shape, -1e9))
    inside = l.values <= 0
    for T in (0.3, 1.0, 2.0):
        v = solve_reach_avoid(m, l, g, SolveConfig(horizon=T)).field.values
        assert np.all(v[inside] <= 0)


def test_unreachable_target_never_crossed():
    # attacker alone cannot change x_A + large offset, target unreachable within the horizon
    m = dyn.attacker_reach_2d(3.0)
    spec = GridSpec((21, 11), (0, 0), (20, 10))
    X, _ = spec.meshgrid()
    l = ScalarField(spec, X + 100.0)
    v = solve_reach(m, l, SolveConfig(horizon=5.0)).field.values
    assert np.all(v > 0)


def test_attacker_reach_eikonal():
    """Distance to {x <= 3} shrinks at speed 3: V_T = x - 3 - 3T and T_goal = (x - 3)/3."""
    s = geo.Scenario(target=geo.HalfSpace((1.0, 0.0), 3.0))
    spec = GridSpec((46, 26), (0, 0), (45, 25))
    l, g = geo.build_attacker_reach_costs(s, spec)
    T = 4.0
    sol = solve_reach_avoid(dyn.attacker_reach_2d(3.0), l, g, SolveConfig(horizon=T, time_field=True))
    X, _ = spec.meshgrid()
    cell = spec.spacing[0]
    np.testing.assert_allclose(sol.field.values, X - 3.0 - 3.0 * T, atol=2 * cell)
    tf = sol.time_field.times.reshape(spec.shape)
    reached = X - 3.0 <= 3.0 * T - cell
    np.testing.assert_allclose(tf[reached], np.maximum(X[reached] - 3.0, 0.0) / 3.0, atol=cell / 3 + 0.1)
    assert np.all(np.isinf(tf[X - 3.0 > 3.0 * T + 3 * cell]))


def test_winning_region_grows_with_horizon():
    m = dyn.model_for("vertical_game_3d", SC)
    spec = GridSpec((31, 21, 31), (-10, -4, -10), (10, 4, 10))
    l = geo.build_vertical_cost(SC, spec)
    sol = solve_reach(m, l, SolveConfig(horizon=6.0, snapshot_times=(1.0, 2.0, 4.0, 6.0)))
    regions = [sol.snapshots[t].values <= 0 for t in (1.0, 2.0, 4.0, 6.0)]
    for a, b in zip(regions, regions[1:]):
        assert np.all(b[a])
    assert regions[-1].sum() > regions[0].sum()


def test_max_tracking_properties():
    m = dyn.model_for("rel_vertical_2d", SC)
    spec = GridSpec((61, 41), (-5, -4), (5, 4))
    l = geo.build_tracking_cost_z(spec)
    sol = solve_max_tracking(m, l, SolveConfig(horizon=2.0, snapshot_times=(0.5, 1.0, 2.0)))
    assert np.all(sol.field.values >= l.values - 1e-12)
    a, b, c = (sol.snapshots[t].values for t in (0.5, 1.0, 2.0))
    assert np.all(b >= a) and np.all(c >= b)
    with pytest.raises(ValueError):
        solve_max_tracking(m, ScalarField(spec, l.values - 1.0), SolveConfig(horizon=1.0))


def test_convergence_flag_and_history():
    m = dyn.attacker_reach_2d(3.0)
    spec = GridSpec((11, 11), (0, 0), (10, 10))
    l = ScalarField(spec, np.zeros(spec.shape) + 1.0)
    # constant l >= 0 with max-tracking: nothing changes, converges at step one
    sol = solve_max_tracking(m, l, SolveConfig(horizon=None))
    assert sol.converged and sol.iterations == 1
    assert sol.metadata()["converged"] is True


def test_time_field_extraction_rules():
    spec = GridSpec((3,), (0,), (2,))
    snaps = [
        (0.0, ScalarField(spec, np.array([-1.0, 1.0, 5.0]))),
        (1.0, ScalarField(spec, np.array([-1.0, -1.0, 4.0]))),
    ]
    tf = extract_time_field(snaps)
    assert tf.times[0] == 0.0
    assert tf.times[1] == pytest.approx(0.5)
    assert tf.times[2] == np.inf
    with pytest.raises(ValueError):
        extract_time_field(snaps[::-1])
