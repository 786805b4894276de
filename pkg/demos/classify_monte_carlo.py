"""Sample joint states, classify them and check verdicts by closed-loop play.

    python3 demos/classify_monte_carlo.py [artifact_dir] [n_states]
"""

import sys
from collections import Counter
from pathlib import Path

import numpy as np

from reachtrack.analysis import GameArtifacts, Rule, Verdict, classify
from reachtrack.control import AdversarialAttacker, GoalSeekingAttacker, ReachTrackDefender
from reachtrack.dynamics import JointState9
from reachtrack.sim import ATTACKER_WINS, DEFENDER_WINS, SimConfig, run

art_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / ".cache" / "artifacts"
n = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
art = GameArtifacts.load(art_dir, mmap=True)
sc = art.scenario
h = sc.grid("horizontal_game")
rng = np.random.default_rng(0)

counts = Counter()
checked = Counter()
for _ in range(n):
    pD = rng.uniform(h.lo[:2], h.hi[:2])
    pA = rng.uniform(h.lo[4:], h.hi[4:])
    if sc.obstacle_distance(pD) <= 0 or sc.obstacle_distance(pA) <= 0 or sc.target_distance(pA) <= 0:
        continue
    zD, zA = rng.uniform(-5.0, 5.0, size=2)
    s = JointState9((pD[0], pD[1], zD), (0.0, 0.0, rng.uniform(-2.0, 2.0)), (pA[0], pA[1], zA))
    r = classify(s, art)
    counts[(r.verdict.value, r.rule.value)] += 1
    if r.verdict == Verdict.DEFENDER and checked["defender"] < 20:
        out = run(sc, s, ReachTrackDefender(art), AdversarialAttacker(art), SimConfig(duration=30.0), art).outcome
        checked["defender"] += 1
        checked["defender_ok"] += out == DEFENDER_WINS
    elif r.rule == Rule.PROP1 and checked["attacker"] < 20:
        out = run(sc, s, ReachTrackDefender(art), GoalSeekingAttacker(art), SimConfig(duration=30.0), art).outcome
        checked["attacker"] += 1
        checked["attacker_ok"] += out == ATTACKER_WINS

for (verdict, rule), c in sorted(counts.items()):
    print(f"{verdict:20s} {rule:8s} {c}")
print(f"defender verdicts confirmed {checked['defender_ok']}/{checked['defender']}")
print(f"attacker verdicts confirmed {checked['attacker_ok']}/{checked['attacker']}")
