"""Full 3-D reach-avoid run from an indeterminate start: the attacker evades
along the north edge, the defender closes in, reaches the horizontal capture
set just before 10 s and then tracks.

Writes the trajectory CSV and event log next to the artifacts.

    python3 demos/horizontal_capture.py [artifact_dir]
"""

import sys
from pathlib import Path

import numpy as np

from reachtrack.analysis import GameArtifacts, classify
from reachtrack.control import AdversarialAttacker, ReachTrackDefender
from reachtrack.dynamics import JointState9
from reachtrack.sim import SimConfig, run

art_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / ".cache" / "artifacts"
art = GameArtifacts.load(art_dir, mmap=True)
sc = art.scenario

s0 = JointState9((25.0, 12.0, 0.0), (0.0, 0.0, 0.0), (42.0, 12.0, 0.0))
r = classify(s0, art)
print(f"verdict {r.verdict.value} by {r.rule.value}")

log = run(sc, s0, ReachTrackDefender(art), AdversarialAttacker(art), SimConfig(duration=20.0, post_terminal=3.0), art)
a = log.as_arrays()
st = a["states"]
dist = np.hypot(st[:, 0] - st[:, 6], st[:, 1] - st[:, 7])
for k in range(0, len(a["t"]), 50):
    print(f"t={a['t'][k]:5.1f}  D=({st[k, 0]:5.1f},{st[k, 1]:5.1f})  A=({st[k, 6]:5.1f},{st[k, 7]:5.1f})  "
          f"dist={dist[k]:5.2f}  mode={log.mode_h[k]}")
print(f"outcome {log.outcome} at t={log.outcome_time}")
csv_path, ev_path = log.save(art_dir / "horizontal_capture.csv")
print(f"wrote {csv_path} and {ev_path}")
