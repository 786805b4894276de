import os
from pathlib import Path

import numpy as np
import pytest

from reachtrack import geometry as geo
from reachtrack.analysis import GameArtifacts
from reachtrack.grid import ScalarField, TimeField

ARTIFACT_DIR = Path(os.environ.get("REACHTRACK_ARTIFACTS", Path(__file__).resolve().parents[1] / ".cache" / "artifacts"))

TINY_COUNTS = {
    "vertical_tracking": (61, 41),
    "horizontal_tracking": (13, 13, 7, 7),
    "vertical_game": (21, 11, 21),
    "attacker_reach": (46, 26),
    "horizontal_game": (10, 6, 3, 3, 10, 6),
}


def tiny_scenario() -> geo.Scenario:
    s = geo.reference_scenario()
    for name, counts in TINY_COUNTS.items():
        s = s.with_counts(name, counts)
    return s


def field_from(scenario: geo.Scenario, grid_name: str, fn) -> ScalarField:
    spec = scenario.grid(grid_name)
    return ScalarField(spec, fn(*spec.meshgrid()))


def synthetic_artifacts(scenario: geo.Scenario | None = None, **fns) -> GameArtifacts:
    """Artifacts with closed-form values, for exact controller and classifier checks.

    Defaults: tracking values equal the distance, the horizontal game is won
    everywhere by the defender, the vertical game is ``|z_rel| - 2``, the
    reach value is the target distance and every time is finite.  The plain
    capture band is reached at closing speed 2.
    """
    sc = scenario or tiny_scenario()
    d = {
        "v_z": lambda z, v: np.abs(z) + 0.0 * v,
        "v_h": lambda x, y, vx, vy: np.hypot(x, y) + 0.0 * vx + 0.0 * vy,
        "phi_z": lambda zd, v, za: np.abs(zd - za) - 2.0 + 0.0 * v,
        "phi_h": lambda *a: np.ones_like(a[0]),
        "phi_reach": lambda x, y: x - 3.0 + 0.0 * y,
        "t_capture": lambda zd, v, za: np.abs(zd - za) / 2.0 + 0.0 * v,
        "t_goal": lambda x, y: np.maximum(x - 3.0, 0.0) / 3.0 + 0.0 * y,
        "phi_z_classic": lambda zd, v, za: np.abs(zd - za) - 1.0 + 0.0 * v,
        "t_capture_classic": lambda zd, v, za: np.maximum(np.abs(zd - za) - 1.0, 0.0) / 2.0 + 0.0 * v,
    }
    d.update(fns)
    grids = {"v_z": "vertical_tracking", "v_h": "horizontal_tracking", "phi_z": "vertical_game",
             "phi_h": "horizontal_game", "phi_reach": "attacker_reach", "t_capture": "vertical_game",
             "t_goal": "attacker_reach", "phi_z_classic": "vertical_game", "t_capture_classic": "vertical_game"}
    art = GameArtifacts(scenario=sc)
    for name, fn in d.items():
        f = field_from(sc, grids[name], fn)
        setattr(art, name, TimeField(f.spec, f.values) if name.startswith("t_") else f)
    return art


@pytest.fixture
def scenario():
    return tiny_scenario()


@pytest.fixture
def synth():
    return synthetic_artifacts()


@pytest.fixture(scope="session")
def tiny_solved(tmp_path_factory):
    """A full pipeline run on tiny grids, saved to disk."""
    from reachtrack.pipeline import STAGES, build_artifacts, stage_config

    out = tmp_path_factory.mktemp("tiny_art")
    sc = tiny_scenario()
    configs = {
        "vertical-tracking": stage_config(STAGES["vertical-tracking"], horizon=5.0),
        "horizontal-tracking": stage_config(STAGES["horizontal-tracking"], horizon=1.0),
        "vertical-game": stage_config(STAGES["vertical-game"], horizon=6.0),
        "vertical-game-classic": stage_config(STAGES["vertical-game-classic"], horizon=6.0),
        "attacker-reach": stage_config(STAGES["attacker-reach"], horizon=20.0),
        "horizontal-game": stage_config(STAGES["horizontal-game"], horizon=2.0),
    }
    build_artifacts(sc, out, configs=configs)
    return out


def desk_artifacts_or_skip():
    """Load the desk-scale artifacts, or skip when they have not been built."""
    if not (ARTIFACT_DIR / "scenario.json").exists():
        pytest.skip(f"no artifacts at {ARTIFACT_DIR}; run demos/build_artifacts.py first")
    art = GameArtifacts.load(ARTIFACT_DIR, mmap=True)
    if art.missing():
        pytest.skip(f"artifacts incomplete: missing {art.missing()}")
    return art


# acceptance report ----------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}  {detail}")
