"""Reach-Track defender policies and attacker policies.

The defender switches per sub-game on ``r``, the tracking value at the
current relative state:

* ``r > d``              reach law from the game value gradient
* ``d - eps < r <= d``   optimal tracking law from the tracking value gradient
* ``r <= d - eps``       feed-forward/proportional tracker

With a hysteresis width ``hyst`` a mode is left only after ``r`` moves past
its entry threshold by ``hyst``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import dynamics as dyn
from .analysis import (
    DEFENDER,
    HORIZONTAL,
    VERTICAL,
    GameArtifacts,
    in_winning_region,
    tracking_value,
)
from .dynamics import JointState9
from .grid import ScalarField, gradient_at


class PolicyMode(str, Enum):
    REACH = "Reach"
    TRACK_BOUNDARY = "TrackBoundary"
    TRACK_DEEP = "TrackDeep"
    OUTSIDE = "OutsideWinningRegion"


_LEVEL = {PolicyMode.REACH: 0, PolicyMode.TRACK_BOUNDARY: 1, PolicyMode.TRACK_DEEP: 2}


@dataclass(frozen=True)
class ControllerConfig:
    eps: float = 0.2
    eps_track: float = 0.3
    kp_z: float = 2.0
    kp_h: float = 1.0
    kv_z: float = 0.0
    kv_h: float = 0.0
    hysteresis: float = 0.0

    def __post_init__(self) -> None:
        if self.eps <= 0 or self.eps_track <= 0:
            raise ValueError("deep-inside bands must be positive")
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")
        if min(self.kp_z, self.kp_h, self.kv_z, self.kv_h) < 0:
            raise ValueError("tracker gains must be non-negative")


def select_mode(r: float, d: float, eps: float, hyst: float = 0.0, prev: PolicyMode | None = None) -> PolicyMode:
    """Branch rule with optional hysteresis on the previous mode."""
    # Entry thresholds: tracking at r <= d, deep at r <= d - eps.
    base = PolicyMode.REACH if r > d else PolicyMode.TRACK_DEEP if r <= d - eps else PolicyMode.TRACK_BOUNDARY
    if prev is None or hyst == 0.0 or prev == PolicyMode.OUTSIDE:
        return base
    lp, lb = _LEVEL[prev], _LEVEL[base]
    if lb >= lp:
        return base
    # Moving outward: leave a level only past its threshold plus hyst.
    if lp == 2 and r <= d - eps + hyst:
        return PolicyMode.TRACK_DEEP
    if lp >= 1 and r <= d + hyst:
        return PolicyMode.TRACK_BOUNDARY
    return base


def _grad(fld: ScalarField, x: np.ndarray) -> np.ndarray:
    g, _ = gradient_at(fld, np.asarray(x, dtype=np.float64))
    return np.asarray(g, dtype=np.float64)


def _clip_ball(u: np.ndarray, U: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    n = float(np.linalg.norm(u))
    if n > U:
        u = u * (U / n)
        # rounding can leave the norm an ulp or two above U
        while float(np.linalg.norm(u)) > U:
            u = u * (1.0 - 2.0 ** -52)
    return u


def performant_tracker(rel_pos, attacker_velocity, U: float, kp: float, kv: float = 0.0,
                       defender_velocity=None) -> np.ndarray:
    """``v_A - kp * rel`` (+ ``kv * (v_A - v_D)``), clipped to the speed bound."""
    rel = np.atleast_1d(np.asarray(rel_pos, dtype=np.float64))
    va = np.atleast_1d(np.asarray(attacker_velocity, dtype=np.float64))
    u = va - kp * rel
    if kv and defender_velocity is not None:
        u = u + kv * (va - np.atleast_1d(np.asarray(defender_velocity, dtype=np.float64)))
    return _clip_ball(u, U)


@dataclass
class Decision:
    command: np.ndarray
    mode: PolicyMode
    law: PolicyMode
    r: float
    clamped: bool


def centred_vertical(x3) -> np.ndarray:
    """Shift both altitudes so their midpoint is 0.

    The vertical game depends on altitude only through ``z_D - z_A``, so this
    keeps value lookups in the interior of the grid.
    """
    x3 = np.array(x3, dtype=np.float64)
    c = 0.5 * (x3[0] + x3[2])
    x3[0] -= c
    x3[2] -= c
    return x3


def defender_vertical(x3, artifacts: GameArtifacts, cfg: ControllerConfig,
                      attacker_vz: float = 0.0, prev: PolicyMode | None = None) -> Decision:
    """Vertical Reach-Track command for state ``(z_D, v_z_D, z_A)``."""
    sc = artifacts.scenario
    x3 = centred_vertical(x3)
    rel = np.array([x3[0] - x3[2], x3[1]])
    r, c_r = tracking_value(artifacts.v_z, rel)
    law = select_mode(r, sc.d_z, cfg.eps, cfg.hysteresis, prev)
    if law == PolicyMode.REACH:
        m = dyn.vertical_game_3d(sc.kz, sc.UzD, sc.UzA)
        u = m.optimal_control(_grad(artifacts.phi_z, x3), dyn.DEFENDER)
    elif law == PolicyMode.TRACK_BOUNDARY:
        m = dyn.rel_vertical_2d(sc.kz, sc.UzD, sc.UzA)
        u = m.optimal_control(_grad(artifacts.v_z, rel), dyn.DEFENDER)
    else:
        u = performant_tracker(rel[:1], [attacker_vz], sc.UzD, cfg.kp_z, cfg.kv_z, x3[1:2])
    member, _, c_m = in_winning_region(artifacts.phi_z, x3, DEFENDER, VERTICAL)
    mode = law if (member or law != PolicyMode.REACH) else PolicyMode.OUTSIDE
    return Decision(np.asarray(u, dtype=np.float64).reshape(1), mode, law, r, bool(c_r or c_m))


def defender_horizontal(x6, artifacts: GameArtifacts, cfg: ControllerConfig,
                        attacker_vxy=(0.0, 0.0), prev: PolicyMode | None = None) -> Decision:
    """Horizontal Reach-Track command for ``(x_D, y_D, v_x_D, v_y_D, x_A, y_A)``."""
    sc = artifacts.scenario
    x6 = np.asarray(x6, dtype=np.float64)
    rel = np.array([x6[0] - x6[4], x6[1] - x6[5], x6[2], x6[3]])
    r, c_r = tracking_value(artifacts.v_h, rel)
    law = select_mode(r, sc.d_h, cfg.eps_track, cfg.hysteresis, prev)
    if law == PolicyMode.REACH:
        m = dyn.horizontal_game_6d(sc.kx, sc.ky, sc.UhD, sc.UhA)
        u = m.optimal_control(_grad(artifacts.phi_h, x6), dyn.DEFENDER)
    elif law == PolicyMode.TRACK_BOUNDARY:
        m = dyn.rel_horizontal_4d(sc.kx, sc.ky, sc.UhD, sc.UhA)
        u = m.optimal_control(_grad(artifacts.v_h, rel), dyn.DEFENDER)
    else:
        u = performant_tracker(rel[:2], attacker_vxy, sc.UhD, cfg.kp_h, cfg.kv_h, x6[2:4])
    member, _, c_m = in_winning_region(artifacts.phi_h, x6, DEFENDER, HORIZONTAL)
    mode = law if (member or law != PolicyMode.REACH) else PolicyMode.OUTSIDE
    return Decision(np.asarray(u, dtype=np.float64).reshape(2), mode, law, r, bool(c_r or c_m))


def attacker_adversarial(x, artifacts: GameArtifacts, game: str, phase: str, classic: bool = False) -> np.ndarray:
    """Attacker's optimal response to the matching value gradient.

    ``x`` is the game state in the game phase and the relative state in the
    tracking phase.  ``classic`` makes the vertical game phase evade the plain
    capture band instead of the invariant set.
    """
    sc = artifacts.scenario
    x = np.asarray(x, dtype=np.float64)
    if game == VERTICAL:
        if phase == "game":
            m = dyn.vertical_game_3d(sc.kz, sc.UzD, sc.UzA)
            f = artifacts.phi_z_classic if classic else artifacts.phi_z
            x = centred_vertical(x)
        else:
            m, f = dyn.rel_vertical_2d(sc.kz, sc.UzD, sc.UzA), artifacts.v_z
    elif game == HORIZONTAL:
        if phase == "game":
            m, f = dyn.horizontal_game_6d(sc.kx, sc.ky, sc.UhD, sc.UhA), artifacts.phi_h
        else:
            m, f = dyn.rel_horizontal_4d(sc.kx, sc.ky, sc.UhD, sc.UhA), artifacts.v_h
    else:
        raise ValueError(f"unknown game {game!r}")
    if phase not in ("game", "tracking"):
        raise ValueError(f"unknown phase {phase!r}")
    return m.optimal_control(_grad(f, x), dyn.ATTACKER)


_FINITE_TIMES: dict[int, tuple[np.ndarray, ScalarField]] = {}


def _finite_goal_time(tf) -> ScalarField:
    """``T_goal`` with never-reached nodes capped just above the largest finite time."""
    hit = _FINITE_TIMES.get(id(tf))
    if hit is not None and hit[0] is tf.times:
        return hit[1]
    t = np.asarray(tf.times)
    finite = np.isfinite(t)
    cap = float(t[finite].max()) + 1.0 if finite.any() else 1.0
    f = ScalarField(tf.spec, np.where(finite, t, cap))
    _FINITE_TIMES[id(tf)] = (tf.times, f)
    return f


def attacker_goal_seeking(position, artifacts: GameArtifacts) -> np.ndarray:
    """Steepest descent of the attacker's time-to-goal at speed ``U_hA``.

    The time-to-goal field is the minimum-time function of the obstacle-avoiding
    reach problem, so following its negative gradient is time-optimal.
    """
    sc = artifacts.scenario
    pos = np.asarray(position, dtype=np.float64)
    if sc.target_distance(pos) <= 0.0:
        return np.zeros(2)
    m = dyn.attacker_reach_2d(sc.UhA)
    return m.optimal_control(_grad(_finite_goal_time(artifacts.t_goal), pos), dyn.ATTACKER)


# ---------------------------------------------------------------------------
# stateful policies used by the simulator


@dataclass
class ControllerState:
    """Per-simulation mode memory and attacker velocity estimate."""

    mode_h: PolicyMode | None = None
    mode_z: PolicyMode | None = None
    law_h: PolicyMode | None = None
    law_z: PolicyMode | None = None
    prev_attacker: np.ndarray | None = None
    prev_t: float | None = None
    transitions: list[dict] = field(default_factory=list)


@dataclass
class PolicyOutput:
    command: np.ndarray
    mode_h: str = ""
    mode_z: str = ""
    flags: list[str] = field(default_factory=list)


class ReachTrackDefender:
    """Defender running both Reach-Track laws with mode memory."""

    def __init__(self, artifacts: GameArtifacts, cfg: ControllerConfig | None = None) -> None:
        artifacts.require("phi_h", "phi_z", "v_h", "v_z")
        self.artifacts = artifacts
        self.cfg = cfg or ControllerConfig()
        self.state = ControllerState()

    def reset(self) -> None:
        self.state = ControllerState()

    def _attacker_velocity(self, t: float, p_A: np.ndarray) -> np.ndarray:
        st = self.state
        if st.prev_attacker is None or st.prev_t is None or t <= st.prev_t:
            v = np.zeros(3)
        else:
            v = (p_A - st.prev_attacker) / (t - st.prev_t)
        st.prev_attacker = p_A.copy()
        st.prev_t = t
        return v

    def __call__(self, t: float, s: JointState9) -> PolicyOutput:
        st = self.state
        vA = self._attacker_velocity(t, np.asarray(s.p_A))
        dh = defender_horizontal(s.horizontal(), self.artifacts, self.cfg, vA[:2], st.law_h)
        dz = defender_vertical(s.vertical(), self.artifacts, self.cfg, vA[2], st.law_z)
        flags = []
        for axis, dec in (("h", dh), ("z", dz)):
            old = getattr(st, f"mode_{axis}")
            if old != dec.mode:
                st.transitions.append({"t": t, "sub_game": axis, "from": None if old is None else old.value,
                                       "to": dec.mode.value})
                if dec.mode == PolicyMode.OUTSIDE:
                    flags.append(f"outside_winning_region_{axis}")
            setattr(st, f"mode_{axis}", dec.mode)
            setattr(st, f"law_{axis}", dec.law)
            if dec.clamped:
                flags.append(f"clamped_{axis}")
        u = np.concatenate([dh.command, dz.command])
        return PolicyOutput(u, dh.mode.value, dz.mode.value, flags)


class AdversarialAttacker:
    """Attacker answering the defender's current phase in each sub-game.

    Game phase while the tracking value exceeds the capture radius,
    tracking phase otherwise.  With ``goal_seeking_horizontal`` the
    horizontal command instead descends the time-to-goal field, and the
    vertical game phase delays any capture (not just entry to B_z).
    """

    def __init__(self, artifacts: GameArtifacts, goal_seeking_horizontal: bool = False) -> None:
        self.artifacts = artifacts
        self.goal = goal_seeking_horizontal
        if self.goal:
            artifacts.require("phi_z_classic", "t_goal")

    def __call__(self, t: float, s: JointState9) -> PolicyOutput:
        a = self.artifacts
        sc = a.scenario
        if self.goal:
            uh = attacker_goal_seeking(s.horizontal()[4:6], a)
        else:
            rh = s.rel_horizontal()
            vh, _ = tracking_value(a.v_h, rh)
            uh = (attacker_adversarial(rh, a, HORIZONTAL, "tracking") if vh <= sc.d_h
                  else attacker_adversarial(s.horizontal(), a, HORIZONTAL, "game"))
        rz = s.rel_vertical()
        vz, _ = tracking_value(a.v_z, rz)
        uz = (attacker_adversarial(rz, a, VERTICAL, "tracking") if vz <= sc.d_z
              else attacker_adversarial(s.vertical(), a, VERTICAL, "game", classic=self.goal))
        return PolicyOutput(np.concatenate([np.asarray(uh).reshape(2), np.asarray(uz).reshape(1)]))


class GoalSeekingAttacker(AdversarialAttacker):
    def __init__(self, artifacts: GameArtifacts) -> None:
        super().__init__(artifacts, goal_seeking_horizontal=True)


class ConstantPolicy:
    """Fixed command (zero by default), e.g. a stationary attacker."""

    def __init__(self, command=(0.0, 0.0, 0.0)) -> None:
        self.command = np.asarray(command, dtype=np.float64)

    def __call__(self, t: float, s: JointState9) -> PolicyOutput:
        return PolicyOutput(self.command.copy())
