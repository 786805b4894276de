"""Solve stages and their dependencies, with on-disk caching of artifacts.

Stage            needs                 produces
vertical-tracking                      v_z
horizontal-tracking                    v_h
vertical-game    vertical-tracking     phi_z, t_capture
vertical-game-classic                  phi_z_classic, t_capture_classic
attacker-reach                         phi_reach, t_goal
horizontal-game  horizontal-tracking   phi_h
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import geometry as geo
from .analysis import GameArtifacts, field_digest
from .dynamics import model_for
from .geometry import Domain, Scenario
from .hji import SolveConfig, ValueSolution, solve_max_tracking, solve_reach, solve_reach_avoid

log = logging.getLogger(__name__)


class MissingDependencyError(RuntimeError):
    """A game solve was requested before the tracking solve it depends on."""


@dataclass(frozen=True)
class Stage:
    name: str
    grid: str
    produces: tuple[str, ...]
    needs: tuple[str, ...]
    config: SolveConfig


# Horizons: tracking solves per the reference settings; game solves stop on
# convergence or at a horizon long enough to cover the arena.
STAGES: dict[str, Stage] = {
    "vertical-tracking": Stage("vertical-tracking", "vertical_tracking", ("v_z",), (),
                               SolveConfig(horizon=20.0, snapshot_every=None)),
    "horizontal-tracking": Stage("horizontal-tracking", "horizontal_tracking", ("v_h",), (),
                                 SolveConfig(horizon=2.5, snapshot_every=None)),
    "vertical-game": Stage("vertical-game", "vertical_game", ("phi_z", "t_capture"), ("v_z",),
                           SolveConfig(horizon=15.0, time_field=True, snapshot_every=0.1)),
    "vertical-game-classic": Stage("vertical-game-classic", "vertical_game", ("phi_z_classic", "t_capture_classic"),
                                   (), SolveConfig(horizon=15.0, time_field=True, snapshot_every=0.1)),
    "attacker-reach": Stage("attacker-reach", "attacker_reach", ("phi_reach", "t_goal"), (),
                            SolveConfig(horizon=40.0, time_field=True, snapshot_every=0.1)),
    "horizontal-game": Stage("horizontal-game", "horizontal_game", ("phi_h",), ("v_h",),
                             SolveConfig(horizon=22.0, snapshot_every=None, log_every=20)),
}

ORDER = ("vertical-tracking", "horizontal-tracking", "vertical-game", "vertical-game-classic", "attacker-reach",
         "horizontal-game")


def parse_counts(text: str) -> tuple[int, ...]:
    """``"45x25x7x7x45x25"`` -> ``(45, 25, 7, 7, 45, 25)``."""
    try:
        counts = tuple(int(c) for c in text.lower().split("x"))
    except ValueError as exc:
        raise ValueError(f"bad grid counts {text!r}") from exc
    if any(c < 3 for c in counts):
        raise ValueError("every axis needs at least 3 nodes")
    return counts


def stage_scenario(scenario: Scenario, stage: Stage, counts: tuple[int, ...] | None) -> Scenario:
    if counts is None:
        return scenario
    return scenario.with_counts(stage.grid, counts)


def stage_config(stage: Stage, horizon: float | None = None, cfl: float | None = None,
                 tol: float | None = None) -> SolveConfig:
    cfg = stage.config
    kw = {}
    if horizon is not None:
        kw["horizon"] = horizon
    if cfl is not None:
        kw["cfl"] = cfl
    if tol is not None:
        kw["tol"] = tol
    return replace(cfg, **kw) if kw else replace(cfg)


def _meta(sol: ValueSolution, cfg: SolveConfig, grid_name: str, wall: float) -> dict:
    m = sol.metadata()
    m.update({"config": cfg.to_dict(), "grid_name": grid_name, "wall_seconds": round(wall, 3)})
    return m


def run_stage(name: str, scenario: Scenario, artifacts: GameArtifacts, cfg: SolveConfig | None = None) -> ValueSolution:
    """Solve one stage in place on ``artifacts``; dependencies must already be present."""
    stage = STAGES[name]
    absent = [n for n in stage.needs if getattr(artifacts, n) is None]
    if absent:
        dep = {"v_z": "vertical-tracking", "v_h": "horizontal-tracking"}
        raise MissingDependencyError(
            f"{name} needs {', '.join(dep[a] for a in absent)} output; solve it first"
        )
    cfg = cfg or stage_config(stage)
    grid = scenario.grid(stage.grid)
    t0 = time.perf_counter()
    if name == "vertical-tracking":
        sol = solve_max_tracking(model_for("rel_vertical_2d", scenario), geo.build_tracking_cost_z(grid), cfg)
    elif name == "horizontal-tracking":
        sol = solve_max_tracking(model_for("rel_horizontal_4d", scenario), geo.build_tracking_cost_h(scenario, grid), cfg)
    elif name == "vertical-game":
        l = geo.build_vertical_cost(scenario, grid, artifacts.v_z, "invariant")
        sol = solve_reach(model_for("vertical_game_3d", scenario), l, cfg)
    elif name == "vertical-game-classic":
        sol = solve_reach(model_for("vertical_game_3d", scenario), geo.build_vertical_cost(scenario, grid), cfg)
    elif name == "attacker-reach":
        l, g = geo.build_attacker_reach_costs(scenario, grid)
        sol = solve_reach_avoid(model_for("attacker_reach_2d", scenario), l, g, cfg)
    elif name == "horizontal-game":
        l, g = geo.build_horizontal_costs(scenario, grid, artifacts.v_h, "invariant")
        sol = solve_reach_avoid(model_for("horizontal_game_6d", scenario), l, g, cfg)
    else:
        raise KeyError(name)
    wall = time.perf_counter() - t0
    meta = _meta(sol, cfg, stage.grid, wall)
    deps = {d: field_digest(getattr(artifacts, d)) for d in stage.needs}
    if deps:
        meta["depends_on"] = deps
    setattr(artifacts, stage.produces[0], sol.field)
    artifacts.meta[stage.produces[0]] = meta
    if len(stage.produces) > 1:
        setattr(artifacts, stage.produces[1], sol.time_field)
        artifacts.meta[stage.produces[1]] = dict(meta, kind="crossing_time")
    log.info("%s: converged=%s horizon=%.3f iterations=%d wall=%.1fs",
             name, sol.converged, sol.final_horizon, sol.iterations, wall)
    return sol


def _fresh(artifacts: GameArtifacts, stage: Stage, cfg: SolveConfig) -> bool:
    meta = artifacts.meta.get(stage.produces[0], {})
    if meta.get("config") != cfg.to_dict():
        return False
    for d in stage.needs:
        if meta.get("depends_on", {}).get(d) != field_digest(getattr(artifacts, d)):
            return False
    return True


def build_artifacts(scenario: Scenario, out: str | Path | None = None, stages=ORDER,
                    configs: dict[str, SolveConfig] | None = None, reuse: bool = True) -> GameArtifacts:
    """Solve the requested stages (reusing valid cached ones) and optionally save them."""
    configs = configs or {}
    artifacts = GameArtifacts(scenario=scenario)
    if out is not None and reuse and (Path(out) / "scenario.json").exists():
        artifacts = GameArtifacts.load(out, scenario, strict=False)
    for name in ORDER:
        if name not in stages:
            continue
        stage = STAGES[name]
        cfg = configs.get(name) or stage_config(stage)
        have = all(getattr(artifacts, p) is not None for p in stage.produces)
        if have and _fresh(artifacts, stage, cfg):
            continue
        run_stage(name, scenario, artifacts, cfg)
        if out is not None:
            artifacts.save(out, names=stage.produces)
    return artifacts


def paper_scale(scenario: Scenario) -> Scenario:
    return scenario.paper_scale()


def override_domain(scenario: Scenario, stage_name: str, lo, hi, counts) -> Scenario:
    stage = STAGES[stage_name]
    return scenario.with_domain(stage.grid, Domain(tuple(lo), tuple(hi), tuple(counts)))

