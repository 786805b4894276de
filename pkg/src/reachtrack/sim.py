"""Forward-Euler closed-loop simulation of the joint 9-D attacker/defender system."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .analysis import GameArtifacts, tracking_value
from .control import PolicyOutput
from .dynamics import JointState9
from .geometry import Scenario

DEFENDER_WINS = "DefenderWins"
ATTACKER_WINS = "AttackerWins"
TIMEOUT = "Timeout"

CSV_HEADER = ("t,xD,yD,zD,vxD,vyD,vzD,xA,yA,zA,uxD,uyD,uzD,uxA,uyA,uzA,"
              "mode_h,mode_z,Vh,Vz").split(",")

Policy = Callable[[float, JointState9], PolicyOutput]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.02
    duration: float = 20.0
    log_stride: int = 1
    # Keep integrating this long after the outcome is decided (0 stops at once).
    post_terminal: float = 0.0
    # Skip terminal checks entirely (sub-system invariance studies).
    terminal_checks: bool = True
    max_dt: float = 0.05

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.dt > self.max_dt:
            raise ValueError(f"dt {self.dt} exceeds the cap {self.max_dt}")
        if self.duration <= 0.0 or self.post_terminal < 0.0:
            raise ValueError("durations must be positive")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")


def step(scenario: Scenario, state: JointState9, u_D, u_A, dt: float, check: bool = True) -> JointState9:
    """One forward-Euler step: positions follow velocities, defender velocity lags its command."""
    x = state.as_array()
    uD = np.asarray(u_D, dtype=np.float64).reshape(3)
    uA = np.asarray(u_A, dtype=np.float64).reshape(3)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(uD)) and np.all(np.isfinite(uA)) and np.isfinite(dt)):
        raise ValueError("non-finite state, command or dt")
    if check:
        tol = 1e-9
        if np.hypot(uD[0], uD[1]) > scenario.UhD + tol or abs(uD[2]) > scenario.UzD + tol:
            raise ValueError(f"defender command {uD} violates its bounds")
        if np.hypot(uA[0], uA[1]) > scenario.UhA + tol or abs(uA[2]) > scenario.UzA + tol:
            raise ValueError(f"attacker command {uA} violates its bounds")
    k = np.array([scenario.kx, scenario.ky, scenario.kz])
    v = x[3:6]
    out = x.copy()
    out[0:3] = x[0:3] + dt * v
    out[3:6] = v + dt * k * (uD - v)
    out[6:9] = x[6:9] + dt * uA
    return JointState9.from_array(out)


@dataclass
class TrajectoryLog:
    t: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    u_D: list[np.ndarray] = field(default_factory=list)
    u_A: list[np.ndarray] = field(default_factory=list)
    mode_h: list[str] = field(default_factory=list)
    mode_z: list[str] = field(default_factory=list)
    V_h: list[float] = field(default_factory=list)
    V_z: list[float] = field(default_factory=list)
    events: list[dict[str, Any]] = field(default_factory=list)
    outcome: str = TIMEOUT
    outcome_time: float | None = None

    def record(self, t, s, uD, uA, mh, mz, vh, vz) -> None:
        self.t.append(float(t))
        self.states.append(s.as_array())
        self.u_D.append(np.asarray(uD, dtype=np.float64))
        self.u_A.append(np.asarray(uA, dtype=np.float64))
        self.mode_h.append(mh)
        self.mode_z.append(mz)
        self.V_h.append(float(vh))
        self.V_z.append(float(vz))

    def event_time(self, name: str) -> float | None:
        for e in self.events:
            if e["event"] == name:
                return e["t"]
        return None

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.array(self.t),
            "states": np.array(self.states).reshape(-1, 9),
            "u_D": np.array(self.u_D).reshape(-1, 3),
            "u_A": np.array(self.u_A).reshape(-1, 3),
            "V_h": np.array(self.V_h),
            "V_z": np.array(self.V_z),
        }

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for i, t in enumerate(self.t):
                row = [repr(t), *map(repr, self.states[i].tolist()), *map(repr, self.u_D[i].tolist()),
                       *map(repr, self.u_A[i].tolist()), self.mode_h[i], self.mode_z[i],
                       repr(self.V_h[i]), repr(self.V_z[i])]
                w.writerow(row)
        return path

    def events_json(self) -> dict[str, Any]:
        return {"outcome": self.outcome, "outcome_time": self.outcome_time, "events": self.events}

    def save(self, csv_path: str | Path) -> tuple[Path, Path]:
        p = self.to_csv(csv_path)
        side = p.with_suffix(".events.json")
        side.write_text(json.dumps(self.events_json(), indent=2))
        return p, side


def _no_readings(s: JointState9) -> tuple[float, float]:
    return float("nan"), float("nan")


def run(scenario: Scenario, initial: JointState9, defender: Policy, attacker: Policy,
        cfg: SimConfig | None = None, artifacts: GameArtifacts | None = None) -> TrajectoryLog:
    """Simulate until the first terminal event (or for ``duration``).

    Checks at each logged instant, in order: attacker in target, obstacle hits,
    then 3-D capture (horizontal distance ``<= d_h`` and ``|z_rel| <= d_z``).
    If a policy raises, the exception carries the partial log as ``.log``.
    """
    cfg = cfg or SimConfig()
    log = TrajectoryLog()

    def readings(s: JointState9) -> tuple[float, float]:
        if artifacts is None or artifacts.v_h is None or artifacts.v_z is None:
            return _no_readings(s)
        return tracking_value(artifacts.v_h, s.rel_horizontal())[0], tracking_value(artifacts.v_z, s.rel_vertical())[0]

    def event(name: str, t: float, **info) -> None:
        log.events.append({"event": name, "t": float(t), **info})

    s = initial
    n_steps = int(round(cfg.duration / cfg.dt))
    stop_at: int | None = None
    in_h = in_z = False
    for k in range(n_steps + 1):
        t = k * cfg.dt
        p = s.as_array()
        dist_h = float(np.hypot(p[0] - p[6], p[1] - p[7]))
        new_h = dist_h <= scenario.d_h
        new_z = abs(p[2] - p[8]) <= scenario.d_z
        if new_h and not in_h:
            event("capture_h", t, distance=dist_h)
        if new_z and not in_z:
            event("capture_z", t, distance=abs(p[2] - p[8]))
        in_h, in_z = new_h, new_z
        if cfg.terminal_checks and log.outcome_time is None:
            outcome = None
            if float(scenario.target_distance(p[6:8])) <= 0.0:
                event("goal_reached", t)
                outcome = ATTACKER_WINS
            elif float(scenario.obstacle_distance(p[0:2])) <= 0.0:
                event("defender_obstacle_hit", t)
                outcome = ATTACKER_WINS
            elif float(scenario.obstacle_distance(p[6:8])) <= 0.0:
                event("attacker_obstacle_hit", t)
                outcome = DEFENDER_WINS
            elif in_h and in_z:
                event("capture_3d", t)
                outcome = DEFENDER_WINS
            if outcome is not None:
                log.outcome, log.outcome_time = outcome, float(t)
                stop_at = k + int(round(cfg.post_terminal / cfg.dt))
        try:
            out_D = defender(t, s)
            out_A = attacker(t, s)
        except Exception as exc:
            exc.log = log  # type: ignore[attr-defined]
            raise
        for flag in out_D.flags:
            if flag.startswith("outside"):
                event(flag, t)
        if k % cfg.log_stride == 0 or k == n_steps or (stop_at is not None and k >= stop_at):
            vh, vz = readings(s)
            log.record(t, s, out_D.command, out_A.command, out_D.mode_h, out_D.mode_z, vh, vz)
        if (stop_at is not None and k >= stop_at) or k == n_steps:
            break
        s = step(scenario, s, out_D.command, out_A.command, cfg.dt)
    if log.outcome_time is None and cfg.terminal_checks:
        event("timeout", log.t[-1])
    trans = getattr(getattr(defender, "state", None), "transitions", None)
    if trans:
        for tr in trans:
            log.events.append({"event": "mode_transition", **tr})
        log.events.sort(key=lambda e: e["t"])
    return log
