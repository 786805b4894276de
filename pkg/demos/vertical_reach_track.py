"""Vertical sub-game: reach the invariant capture set, then stay in it.

Two starts: the defender 5 m above the attacker diving at full speed, and
5 m below climbing at 3 m/s.  The attacker plays the value-gradient
adversary.  Needs the vertical tracking and vertical game artifacts.

    python3 demos/vertical_reach_track.py [artifact_dir]
"""

import sys
from pathlib import Path

import numpy as np

from reachtrack.analysis import VERTICAL, GameArtifacts, tracking_value
from reachtrack.control import ControllerConfig, PolicyOutput, attacker_adversarial, defender_vertical
from reachtrack.dynamics import JointState9
from reachtrack.sim import SimConfig, run

art_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / ".cache" / "artifacts"
art = GameArtifacts.load(art_dir, mmap=True, strict=False)
art.require("v_z", "phi_z")
sc = art.scenario


class Defender:
    def __init__(self):
        self.law = None

    def __call__(self, t, s):
        d = defender_vertical(s.vertical(), art, ControllerConfig(), prev=self.law)
        self.law = d.law
        return PolicyOutput(np.array([0.0, 0.0, d.command[0]]), mode_z=d.mode.value)


def attacker(t, s):
    rz = s.rel_vertical()
    if tracking_value(art.v_z, rz)[0] <= sc.d_z:
        u = attacker_adversarial(rz, art, VERTICAL, "tracking")
    else:
        u = attacker_adversarial(s.vertical(), art, VERTICAL, "game")
    return PolicyOutput(np.array([0.0, 0.0, u[0]]))


for label, zD, vD in (("above, diving", 5.0, -sc.UzD), ("below, climbing", -5.0, 3.0)):
    s0 = JointState9((20.0, 10.0, zD), (0.0, 0.0, vD), (40.0, 20.0, 0.0))
    log = run(sc, s0, Defender(), attacker, SimConfig(duration=12.0, terminal_checks=False))
    a = log.as_arrays()
    zrel = a["states"][:, 2] - a["states"][:, 8]
    print(f"defender {label}")
    for k in range(0, len(a["t"]), 50):
        print(f"  t={a['t'][k]:5.1f}  z_rel={zrel[k]:+6.2f}  v_z={a['states'][k, 5]:+5.2f}  mode={log.mode_z[k]}")
