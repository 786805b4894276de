import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachtrack import geometry as geo
from reachtrack.grid import GridSpec, ScalarField


def test_halfspace_signed_distance():
    t = geo.HalfSpace((1.0, 0.0), 3.0)
    assert t([5.0, 0.0]) == pytest.approx(2.0)
    assert t([3.0, 7.0]) == pytest.approx(0.0)
    assert t([1.0, -2.0]) == pytest.approx(-2.0)


def test_union_is_min():
    a = geo.Circle((0.0, 0.0), 1.0)
    b = geo.Circle((8.0, 0.0), 2.0)
    p = [5.0, 0.0]  # 4 m outside a, 1 m outside b
    assert a(p) == pytest.approx(4.0) and b(p) == pytest.approx(1.0)
    assert (a | b)(p) == pytest.approx(1.0)


def test_sphere_center():
    assert geo.Sphere((0, 0, 0), 2.0)([0, 0, 0]) == pytest.approx(-2.0)


def test_box_inside_outside():
    b = geo.Box((0.0, 0.0), (2.0, 4.0))
    assert b([1.0, 2.0]) == pytest.approx(-1.0)
    assert b([3.0, 2.0]) == pytest.approx(1.0)
    assert b([5.0, 8.0]) == pytest.approx(5.0)


def test_cylinder_ignores_height():
    c = geo.Cylinder((1.0, 1.0), 2.0)
    assert c([1.0, 1.0, 50.0]) == pytest.approx(-2.0)
    assert c([4.0, 5.0, -3.0]) == pytest.approx(3.0)


def test_composite_rejects_mixed_dims():
    with pytest.raises(ValueError):
        geo.Union([geo.Circle((0, 0), 1), geo.Sphere((0, 0, 0), 1)])


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20))
def test_set_algebra_properties(x, y):
    a = geo.Circle((1.0, 2.0), 3.0)
    b = geo.Box((-2.0, -1.0), (4.0, 0.5))
    p = [x, y]
    assert (a | b)(p) == min(a(p), b(p))
    assert (a & b)(p) == max(a(p), b(p))
    assert (~a)(p) == -a(p)
    # inside-outside agrees with the primitive definitions
    assert (a(p) <= 0) == (np.hypot(x - 1, y - 2) <= 3.0)


def test_set_json_round_trip():
    s = geo.Union([geo.Circle((1, 2), 3), geo.Intersection([geo.Box((0, 0), (1, 1)), ~geo.HalfSpace((0, 1), 0.5)])])
    back = geo.set_from_json(s.to_json())
    pts = np.random.default_rng(1).uniform(-5, 5, size=(100, 2))
    np.testing.assert_allclose(back.evaluate(pts), s.evaluate(pts))
    with pytest.raises(ValueError):
        geo.set_from_json({"op": "torus"})


def test_scenario_json_round_trip(tmp_path):
    s = geo.reference_scenario().with_counts("vertical_game", (11, 7, 11))
    s.save(tmp_path / "s.json")
    back = geo.Scenario.load(tmp_path / "s.json")
    assert back.to_json() == s.to_json()
    assert back.digest() == s.digest()
    assert back.grid("vertical_game").counts == (11, 7, 11)


def test_physics_digest_ignores_grids():
    s = geo.reference_scenario()
    t = s.with_counts("vertical_game", (11, 7, 11))
    assert s.physics_digest() == t.physics_digest() and s.digest() != t.digest()
    u = geo.Scenario(target=s.target, obstacles=s.obstacles, d_h=2.5)
    assert u.physics_digest() != s.physics_digest()


def test_scenario_validation():
    t = geo.HalfSpace((1.0, 0.0), 3.0)
    with pytest.raises(ValueError):
        geo.Scenario(target=t, d_z=0.0)
    with pytest.raises(ValueError):
        geo.Scenario(target=t, UhA=-1.0)
    with pytest.raises(ValueError):
        geo.Scenario(target=geo.Sphere((0, 0, 0), 1.0))


def test_paper_scale_grids():
    s = geo.reference_scenario().paper_scale()
    g = s.grid("vertical_tracking")
    assert g.counts == (240, 100) and g.lo[0] == -10.0 and g.hi[0] == 10.0
    assert s.grid("horizontal_game").counts == (85, 45, 8, 7, 85, 45)


# cost fields ---------------------------------------------------------------


def small_h6(scenario):
    return GridSpec((10, 6, 3, 3, 10, 6), (0, 0, -6, -6, 0, 0), (45, 25, 6, 6, 45, 25))


def h6_value(fld, x):
    return fld.interpolate(np.asarray(x, dtype=float))


def test_horizontal_cost_reach_conditions():
    s = geo.reference_scenario()
    grid = small_h6(s)
    l, g = geo.build_horizontal_costs(s, grid)
    # attacker node inside the target x <= 3 (x_A = 0), defender far away
    assert h6_value(l, [25.0, 5.0, 0, 0, 0.0, 20.0]) < 0
    # defender node at an obstacle centre: l < 0 wherever the attacker is
    s2 = geo.Scenario(target=s.target, obstacles=(geo.Circle((20.0, 10.0), 3.0),))
    l2, _ = geo.build_horizontal_costs(s2, grid)
    assert h6_value(l2, [20.0, 10.0, 0, 0, 45.0, 25.0]) < 0
    assert h6_value(l2, [20.0, 10.0, 0, 0, 30.0, 5.0]) < 0


def test_horizontal_cost_capture_boundary():
    s = geo.Scenario(target=geo.HalfSpace((1.0, 0.0), 3.0))
    grid = GridSpec((5, 3, 3, 3, 5, 3), (10, 0, -6, -6, 10, 0), (22, 10, 6, 6, 22, 10))
    _, g = geo.build_horizontal_costs(s, grid)
    # x_D = 13, x_A = 16, same y: distance exactly d_h = 3, attacker far from target
    assert h6_value(g, [13.0, 5.0, 0, 0, 16.0, 5.0]) == pytest.approx(0.0, abs=1e-12)
    assert h6_value(g, [13.0, 5.0, 0, 0, 22.0, 5.0]) < 0
    assert h6_value(g, [13.0, 5.0, 0, 0, 13.0, 5.0]) > 0


def test_horizontal_cost_invariant_variant():
    s = geo.Scenario(target=geo.HalfSpace((1.0, 0.0), 3.0))
    grid = GridSpec((5, 3, 3, 3, 5, 3), (10, 0, -6, -6, 10, 0), (22, 10, 6, 6, 22, 10))
    g4 = GridSpec((7, 7, 3, 3), (-3, -3, -6, -6), (3, 3, 6, 6))
    XR, YR, VX, VY = g4.meshgrid()
    vh = ScalarField(g4, np.hypot(XR, YR) + 0.5)
    _, g = geo.build_horizontal_costs(s, grid, vh, "invariant")
    # rel = (-3, 0): V_h = 3.5, margin 0.5, g = -0.5
    assert h6_value(g, [13.0, 5.0, 0, 0, 16.0, 5.0]) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        geo.build_horizontal_costs(s, grid, None, "invariant")


def test_vertical_cost_classic_and_invariant():
    s = geo.reference_scenario()
    g3 = GridSpec((9, 5, 9), (-4, -4, -4), (4, 4, 4))
    l = geo.build_vertical_cost(s, g3)
    assert l.interpolate([1.0, 0.0, 1.0]) == pytest.approx(-s.d_z)
    assert l.interpolate([2.0, 0.0, 1.0]) == pytest.approx(0.0)
    g2 = GridSpec((9, 5), (-4, -4), (4, 4))
    vz = ScalarField(g2, np.full(g2.shape, 0.4))
    li = geo.build_vertical_cost(s, g3, vz, "invariant")
    assert li.interpolate([0.0, 0.0, 0.0]) == pytest.approx(-0.6)
    # the |z_rel| lower bound applies where the field is below the distance
    assert li.interpolate([3.0, 0.0, 0.0]) == pytest.approx(2.0)


def test_tracking_costs():
    s = geo.reference_scenario()
    g4 = GridSpec((7, 9, 3, 3), (-3, -4, -6, -6), (3, 4, 6, 6))
    l = geo.build_tracking_cost_h(s, g4)
    assert l.interpolate([3.0, 4.0, 0, 0]) == pytest.approx(5.0)
    assert l.interpolate([0.0, 0.0, 6, -6]) == pytest.approx(0.0)
    # anchored at the circle obstacle centre: defender with rel = 0 sits inside it
    la = geo.build_tracking_cost_h(s, g4, attacker_anchor=(18.0, 7.0))
    assert la.interpolate([0.0, 0.0, 0, 0]) == pytest.approx(s.K)
    g2 = GridSpec((5, 3), (-2, -1), (2, 1))
    lz = geo.build_tracking_cost_z(g2)
    assert lz.interpolate([-2.0, 1.0]) == 2.0


def test_attacker_reach_costs():
    s = geo.reference_scenario()
    g2 = GridSpec((46, 26), (0, 0), (45, 25))
    l, g = geo.build_attacker_reach_costs(s, g2)
    assert l.interpolate([9.0, 4.0]) == pytest.approx(6.0)
    assert g.interpolate([18.0, 7.0]) == pytest.approx(2.5)
    assert g.interpolate([40.0, 3.0]) < 0


def test_cost_arity_checked():
    s = geo.reference_scenario()
    with pytest.raises(ValueError):
        geo.build_vertical_cost(s, GridSpec((3, 3), (0, 0), (1, 1)))
