"""Winning-region membership, crossing-time queries and outcome classification."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import JointState9
from .geometry import Scenario
from .grid import ScalarField, TimeField, interpolate, read_field, read_meta, write_field
from .hji import ValueSolution

DEFENDER = "defender"
ATTACKER = "attacker"
HORIZONTAL = "horizontal"
VERTICAL = "vertical"


class StaleArtifactError(RuntimeError):
    """Artifacts on disk were built for a different scenario or grid."""


def _field_of(obj) -> ScalarField:
    return obj.field if isinstance(obj, ValueSolution) else obj


def in_winning_region(solution, state, side: str, game: str, delta: float = 0.0) -> tuple[bool, float, bool]:
    """Sign test of an interpolated game value.

    Horizontal game: defender wins where the value is ``> delta``, the
    attacker where it is ``<= 0``.  Vertical game (opposite convention):
    defender wins where the value is ``<= -delta``, the attacker where ``> 0``.
    Returns ``(member, value, clamped)``.
    """
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    v, clamped = interpolate(_field_of(solution), np.asarray(state, dtype=np.float64))
    if game == HORIZONTAL:
        member = v > delta if side == DEFENDER else v <= 0.0
    elif game == VERTICAL:
        member = v <= -delta if side == DEFENDER else v > 0.0
    else:
        raise ValueError(f"unknown game {game!r}")
    if side not in (DEFENDER, ATTACKER):
        raise ValueError(f"unknown side {side!r}")
    return bool(member), float(v), bool(clamped)


def query_time(tf: TimeField, point) -> float:
    """Interpolated crossing time; ``inf`` if any contributing corner is ``inf``."""
    return float(tf.query(np.asarray(point, dtype=np.float64))[0])


def tracking_value(tracking: ScalarField, rel: np.ndarray) -> tuple[float, bool]:
    """Tracking value at a relative state, bounded below by the current distance.

    Outside the tracking grid the interpolated value is replaced by
    ``max(value, distance)``, which is a valid lower bound of the worst-case
    future distance.
    """
    rel = np.asarray(rel, dtype=np.float64)
    npos = 1 if rel.size == 2 else 2
    dist = float(np.linalg.norm(rel[:npos]))
    v, clamped = interpolate(tracking, rel)
    return max(float(v), dist), bool(clamped)


# ---------------------------------------------------------------------------
# artifact bundle

ARTIFACT_FILES = {
    "phi_h": "phi_h.hjvf",
    "phi_z": "phi_z.hjvf",
    "v_z": "v_z.hjvf",
    "v_h": "v_h.hjvf",
    "phi_reach": "phi_reach.hjvf",
    "t_capture": "t_capture.hjvf",
    "t_goal": "t_goal.hjvf",
    "phi_z_classic": "phi_z_classic.hjvf",
    "t_capture_classic": "t_capture_classic.hjvf",
}

ARTIFACT_GRIDS = {
    "phi_h": "horizontal_game",
    "phi_z": "vertical_game",
    "v_z": "vertical_tracking",
    "v_h": "horizontal_tracking",
    "phi_reach": "attacker_reach",
    "t_capture": "vertical_game",
    "t_goal": "attacker_reach",
    "phi_z_classic": "vertical_game",
    "t_capture_classic": "vertical_game",
}

# Game values are built from tracking values; the digest of the input is
# recorded at solve time and re-checked on load.
ARTIFACT_DEPENDS = {"phi_z": "v_z", "t_capture": "v_z", "phi_h": "v_h"}


def field_digest(fld: ScalarField) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(fld.spec.to_dict(), sort_keys=True).encode())
    h.update(np.ascontiguousarray(fld.values).tobytes())
    return h.hexdigest()[:16]


@dataclass
class GameArtifacts:
    scenario: Scenario
    phi_h: ScalarField | None = None
    phi_z: ScalarField | None = None
    v_z: ScalarField | None = None
    v_h: ScalarField | None = None
    phi_reach: ScalarField | None = None
    t_capture: TimeField | None = None
    t_goal: TimeField | None = None
    # vertical game with the plain capture band |z_rel| <= d_z as target
    phi_z_classic: ScalarField | None = None
    t_capture_classic: TimeField | None = None
    meta: dict[str, dict] = field(default_factory=dict)

    def missing(self) -> list[str]:
        return [k for k in ARTIFACT_FILES if getattr(self, k) is None]

    def require(self, *names: str) -> None:
        absent = [n for n in names if getattr(self, n) is None]
        if absent:
            raise ValueError(f"missing artifacts: {', '.join(absent)}")

    def save(self, directory: str | Path, names=None) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        digest = self.scenario.physics_digest()
        self.scenario.save(d / "scenario.json")
        for name, fname in ARTIFACT_FILES.items():
            obj = getattr(self, name)
            if obj is None or (names is not None and name not in names):
                continue
            fld = obj.as_field() if isinstance(obj, TimeField) else obj
            meta = dict(self.meta.get(name, {}))
            meta["scenario_hash"] = digest
            meta["artifact"] = name
            meta["grid_name"] = ARTIFACT_GRIDS[name]
            write_field(d / fname, fld, meta)
        return d

    def _load_one(self, name: str, p: Path, scenario: Scenario, digest: str, mmap: bool) -> None:
        meta = read_meta(p)
        if meta.get("scenario_hash") != digest:
            raise StaleArtifactError(f"{p} was built for scenario {meta.get('scenario_hash')}, expected {digest}")
        fld = read_field(p, mmap=mmap)
        expect = scenario.grid(ARTIFACT_GRIDS[name])
        if fld.spec != expect:
            raise StaleArtifactError(f"{p} grid {fld.spec.counts} differs from the scenario grid {expect.counts}")
        setattr(self, name, TimeField(fld.spec, fld.values) if name.startswith("t_") else fld)
        self.meta[name] = meta

    @classmethod
    def load(cls, directory: str | Path, scenario: Scenario | None = None, mmap: bool = False,
             strict: bool = True) -> GameArtifacts:
        """Load whatever artifacts exist in ``directory``.

        Every artifact must match the scenario's physical parameters and its
        own grid, and game values must match the tracking values on disk.
        ``scenario`` defaults to the copy stored alongside the artifacts.
        With ``strict=False`` stale artifacts are skipped instead of raising.
        """
        d = Path(directory)
        if scenario is None:
            scenario = Scenario.load(d / "scenario.json")
        digest = scenario.physics_digest()
        art = cls(scenario=scenario)
        for name, fname in ARTIFACT_FILES.items():
            p = d / fname
            if not p.exists():
                continue
            try:
                art._load_one(name, p, scenario, digest, mmap)
            except StaleArtifactError:
                if strict:
                    raise
        for name, dep in ARTIFACT_DEPENDS.items():
            if getattr(art, name) is None or getattr(art, dep) is None:
                continue
            want = art.meta[name].get("depends_on", {}).get(dep)
            if want is not None and want != field_digest(getattr(art, dep)):
                if strict:
                    raise StaleArtifactError(f"{name} was built from a different {dep}; re-solve it")
                setattr(art, name, None)
                del art.meta[name]
        return art


# ---------------------------------------------------------------------------
# classification


class Verdict(str, Enum):
    DEFENDER = "DefenderGuaranteed"
    ATTACKER = "AttackerGuaranteed"
    INDETERMINATE = "Indeterminate"


class Rule(str, Enum):
    PROP1 = "Prop1"
    PROP2 = "Prop2"
    PROP3 = "Prop3"
    THEOREM = "Theorem"
    NONE = "none"


@dataclass
class ClassificationResult:
    verdict: Verdict
    rule: Rule
    evidence: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        ev = {k: (None if isinstance(v, float) and not np.isfinite(v) and v != v else v)
              for k, v in self.evidence.items()}
        for k, v in ev.items():
            if isinstance(v, float) and np.isinf(v):
                ev[k] = "inf" if v > 0 else "-inf"
        return {"verdict": self.verdict.value, "rule": self.rule.value, "evidence": ev}


def classify(state: JointState9, artifacts: GameArtifacts, delta: float = 0.0) -> ClassificationResult:
    """Apply the sufficient conditions in a fixed order.

    1. attacker: ``T_goal <= T_capture_classic`` (with ``T_goal`` finite)
    2. defender: ``x_z in W_Dz`` and ``T_goal > T_capture`` and ``x_h in W_Dh``
    3. defender: ``x_h in W_Dh`` and ``V_z(x_rel_z) <= d_z``
    4. defender: ``x_z in W_Dz`` and ``T_goal > T_capture`` and ``V_h(x_rel_h) <= d_h``

    ``T_capture`` is the time to reach the invariant set B_z; rule 1 uses the
    earliest time the defender can force ``|z_rel| <= d_z`` at all, since a
    transient capture before B_z is reached still ends the game.
    A condition that needs a value queried outside its grid is not used.
    """
    artifacts.require(*ARTIFACT_FILES)
    sc = artifacts.scenario
    xh = state.horizontal()
    xz = state.vertical()
    t_goal, c_goal = artifacts.t_goal.query(xh[4:6])
    t_cap, c_cap = artifacts.t_capture.query(xz)
    t_first, c_first = artifacts.t_capture_classic.query(xz)
    in_h, phi_h, c_h = in_winning_region(artifacts.phi_h, xh, DEFENDER, HORIZONTAL, delta)
    in_z, phi_z, c_z = in_winning_region(artifacts.phi_z, xz, DEFENDER, VERTICAL, delta)
    vz, c_vz = tracking_value(artifacts.v_z, state.rel_vertical())
    vh, c_vh = tracking_value(artifacts.v_h, state.rel_horizontal())
    # Beyond the tracking box the lower bound only certifies "outside".
    ok_vz = not c_vz or vz > sc.d_z
    ok_vh = not c_vh or vh > sc.d_h
    ev: dict[str, Any] = {
        "T_goal": float(t_goal), "T_capture": float(t_cap), "T_capture_classic": float(t_first),
        "phi_h": phi_h, "phi_z": phi_z, "V_z": vz, "V_h": vh,
        "in_W_Dh": in_h, "in_W_Dz": in_z,
        "clamped_T_goal": c_goal, "clamped_T_capture": c_cap,
        "clamped_T_capture_classic": c_first,
        "clamped_phi_h": c_h, "clamped_phi_z": c_z,
        "clamped_V_z": c_vz, "clamped_V_h": c_vh, "delta": delta,
    }
    if not (c_goal or c_first) and np.isfinite(t_goal) and t_goal <= t_first:
        return ClassificationResult(Verdict.ATTACKER, Rule.PROP1, ev)
    race_won = not (c_goal or c_cap) and t_goal > t_cap
    if race_won and in_z and not c_z and in_h and not c_h:
        return ClassificationResult(Verdict.DEFENDER, Rule.THEOREM, ev)
    if in_h and not c_h and ok_vz and vz <= sc.d_z:
        return ClassificationResult(Verdict.DEFENDER, Rule.PROP2, ev)
    if race_won and in_z and not c_z and ok_vh and vh <= sc.d_h:
        return ClassificationResult(Verdict.DEFENDER, Rule.PROP3, ev)
    return ClassificationResult(Verdict.INDETERMINATE, Rule.NONE, ev)


def classify_many(states, artifacts: GameArtifacts, delta: float = 0.0) -> list[ClassificationResult]:
    return [classify(s if isinstance(s, JointState9) else JointState9.from_array(s), artifacts, delta)
            for s in states]


def results_to_json(results: list[ClassificationResult]) -> str:
    return json.dumps([r.to_json() for r in results], indent=2)
