import csv
import json

import numpy as np
import pytest
from conftest import desk_artifacts_or_skip, synthetic_artifacts

from reachtrack import geometry as geo
from reachtrack.analysis import Verdict, classify
from reachtrack.control import AdversarialAttacker, ConstantPolicy, PolicyOutput, ReachTrackDefender
from reachtrack.dynamics import JointState9
from reachtrack.sim import ATTACKER_WINS, CSV_HEADER, DEFENDER_WINS, TIMEOUT, SimConfig, run, step

SC = geo.reference_scenario()


def test_step_fixed_point():
    s = JointState9((10, 5, 1), (0, 0, 0), (20, 5, 0))
    assert step(SC, s, np.zeros(3), np.zeros(3), 0.1) == s


def test_step_velocity_lag():
    s = JointState9((10, 5, 1), (0, 0, 0), (20, 5, 0))
    out = step(SC, s, [0, 0, 4.0], [0, 0, 0], 0.1)
    assert out.v_D[2] == pytest.approx(0.6)
    assert out.p_D[2] == 1.0  # position uses the old velocity


def test_step_attacker_single_integrator():
    s = JointState9((10, 5, 1), (0, 0, 0), (20, 5, 0))
    out = step(SC, s, np.zeros(3), [3.0, 0, 0], 0.1)
    assert out.p_A[0] == pytest.approx(20.3)


def test_step_rejects_bad_commands():
    s = JointState9((10, 5, 1), (0, 0, 0), (20, 5, 0))
    with pytest.raises(ValueError):
        step(SC, s, [6.0, 1.0, 0.0], np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        step(SC, s, [0.0, 0.0, np.nan], np.zeros(3), 0.1)


def test_config_caps_dt():
    with pytest.raises(ValueError):
        SimConfig(dt=0.2)
    with pytest.raises(ValueError):
        SimConfig(duration=0.0)


def test_attacker_in_target_wins_immediately():
    log = run(SC, JointState9((20, 10, 0), (0, 0, 0), (2, 10, 0)), ConstantPolicy(), ConstantPolicy())
    assert log.outcome == ATTACKER_WINS and log.outcome_time == 0.0
    assert log.event_time("goal_reached") == 0.0


def test_timeout_with_zero_policies():
    log = run(SC, JointState9((10, 3, 0), (0, 0, 0), (40, 20, 5)), ConstantPolicy(), ConstantPolicy(),
              SimConfig(duration=2.0))
    assert log.outcome == TIMEOUT and log.outcome_time is None
    assert log.events[-1]["event"] == "timeout"
    assert len(log.t) == 101


def test_capture_needs_both_conditions():
    # horizontally captured from the start, vertically 3 m apart; attacker drifts down onto the defender
    log = run(SC, JointState9((20, 10, 0), (0, 0, 0), (21, 10, 3)), ConstantPolicy(), ConstantPolicy((0, 0, -2.0)),
              SimConfig(duration=3.0))
    assert log.outcome == DEFENDER_WINS
    assert log.event_time("capture_h") == 0.0
    assert log.event_time("capture_3d") == pytest.approx(1.0, abs=0.03)


def test_obstacle_hits():
    log = run(SC, JointState9((18, 7, 0), (0, 0, 0), (40, 20, 0)), ConstantPolicy(), ConstantPolicy())
    assert log.outcome == ATTACKER_WINS and log.event_time("defender_obstacle_hit") == 0.0
    log = run(SC, JointState9((40, 3, 0), (0, 0, 0), (28, 16, 0)), ConstantPolicy(), ConstantPolicy())
    assert log.outcome == DEFENDER_WINS and log.event_time("attacker_obstacle_hit") == 0.0


def test_post_terminal_continues():
    log = run(SC, JointState9((20, 10, 0), (0, 0, 0), (2, 10, 0)), ConstantPolicy(), ConstantPolicy(),
              SimConfig(post_terminal=1.0))
    assert log.outcome_time == 0.0 and log.t[-1] == pytest.approx(1.0)


def test_policy_error_carries_log():
    def broken(t, s):
        if t > 0.1:
            raise RuntimeError("boom")
        return PolicyOutput(np.zeros(3))

    with pytest.raises(RuntimeError) as info:
        run(SC, JointState9((10, 3, 0), (0, 0, 0), (40, 20, 5)), broken, ConstantPolicy())
    assert len(info.value.log.t) >= 5


def test_csv_and_events(tmp_path):
    art = synthetic_artifacts()
    sc = art.scenario
    log = run(sc, JointState9((10, 10, 0), (0, 0, 0), (30, 10, 0)), ReachTrackDefender(art), ConstantPolicy(),
              SimConfig(duration=0.5), art)
    csv_path, ev_path = log.save(tmp_path / "traj.csv")
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + len(log.t)
    assert rows[1][CSV_HEADER.index("mode_h")] == "Reach"
    assert float(rows[1][CSV_HEADER.index("Vh")]) == pytest.approx(20.0)
    ev = json.loads(ev_path.read_text())
    assert ev["outcome"] == TIMEOUT
    assert any(e["event"] == "mode_transition" for e in ev["events"])
    ts = [e["t"] for e in ev["events"]]
    assert ts == sorted(ts)


def test_log_stride():
    log = run(SC, JointState9((10, 3, 0), (0, 0, 0), (40, 20, 5)), ConstantPolicy(), ConstantPolicy(),
              SimConfig(duration=1.0, log_stride=10))
    # default dt 0.02, every 10th step
    assert log.t == pytest.approx([0.2 * k for k in range(6)])


def test_stationary_attacker_captured_and_held():
    """From a defender-guaranteed state the capture cylinder is entered and kept for 2 s."""
    art = desk_artifacts_or_skip()
    sc = art.scenario
    rng = np.random.default_rng(11)
    found = 0
    for _ in range(3000):
        pd = rng.uniform([5, 3], [40, 22])
        pa = pd + rng.uniform(-8, 8, size=2)
        if sc.obstacle_distance(pd) <= 0 or sc.obstacle_distance(pa) <= 0 or sc.target_distance(pa) <= 0:
            continue
        if not (0 <= pa[0] <= 45 and 0 <= pa[1] <= 25):
            continue
        s = JointState9((pd[0], pd[1], 0.5), (0, 0, 0), (pa[0], pa[1], 0.0))
        if classify(s, art).verdict != Verdict.DEFENDER:
            continue
        log = run(sc, s, ReachTrackDefender(art), ConstantPolicy(), SimConfig(duration=30.0, post_terminal=2.0), art)
        assert log.outcome == DEFENDER_WINS
        a = log.as_arrays()
        after = a["t"] >= log.outcome_time
        st = a["states"][after]
        assert np.all(np.hypot(st[:, 0] - st[:, 6], st[:, 1] - st[:, 7]) <= sc.d_h + 0.05)
        assert np.all(np.abs(st[:, 2] - st[:, 8]) <= sc.d_z + 0.05)
        found += 1
        if found == 5:
            break
    assert found == 5


def test_adversarial_runs_from_tiny_artifacts(tiny_solved):
    from reachtrack.analysis import GameArtifacts

    art = GameArtifacts.load(tiny_solved)
    log = run(art.scenario, JointState9((20, 12, 0), (0, 0, 0), (30, 12, 2)), ReachTrackDefender(art),
              AdversarialAttacker(art), SimConfig(duration=5.0), art)
    assert log.outcome in (DEFENDER_WINS, ATTACKER_WINS, TIMEOUT)
    a = log.as_arrays()
    assert np.all(np.linalg.norm(a["u_D"][:, :2], axis=1) <= art.scenario.UhD + 1e-9)
    assert np.all(np.abs(a["u_A"][:, 2]) <= art.scenario.UzA + 1e-9)
