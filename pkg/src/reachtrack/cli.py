"""Command-line entry point: solve, classify, simulate, export-slice, oracle-diff."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import geometry as geo
from . import pipeline
from .analysis import GameArtifacts, StaleArtifactError, classify
from .control import AdversarialAttacker, ConstantPolicy, ControllerConfig, GoalSeekingAttacker, ReachTrackDefender
from .dynamics import JointState9, model_for
from .grid import ScalarField, read_field, read_meta
from .hji import SolveConfig, solve_reach
from .oracle import OracleConfig, calibrated_tolerance, oracle_reach
from .sim import SimConfig, run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INDETERMINATE = 3
EXIT_STALE = 4
EXIT_DEPENDENCY = 5

AXIS_LABELS = {
    "vertical_tracking": geo.REL_VERTICAL_AXES,
    "vertical_game": geo.VERTICAL_AXES,
    "horizontal_tracking": geo.REL_HORIZONTAL_AXES,
    "horizontal_game": geo.HORIZONTAL_AXES,
    "attacker_reach": ("x_A", "y_A"),
}


def _scenario(args, out: Path | None = None) -> geo.Scenario:
    if getattr(args, "scenario", None):
        sc = geo.Scenario.load(args.scenario)
    elif out is not None and (out / "scenario.json").exists():
        sc = geo.Scenario.load(out / "scenario.json")
    else:
        sc = geo.reference_scenario()
    if getattr(args, "paper_scale", False):
        sc = sc.paper_scale()
    return sc


def _emit(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    out = Path(args.out)
    stage = pipeline.STAGES[args.kind]
    sc = _scenario(args, out)
    if args.grid:
        counts = pipeline.parse_counts(args.grid)
        if len(counts) != sc.grid(stage.grid).ndim:
            raise ValueError(f"--grid needs {sc.grid(stage.grid).ndim} counts for {args.kind}")
        sc = sc.with_counts(stage.grid, counts)
    art = GameArtifacts.load(out, sc, strict=False) if (out / "scenario.json").exists() else GameArtifacts(sc)
    cfg = pipeline.stage_config(stage, args.horizon, args.cfl, args.tol)
    try:
        sol = pipeline.run_stage(args.kind, sc, art, cfg)
    except pipeline.MissingDependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    art.save(out, names=stage.produces)
    summary = {
        "stage": args.kind,
        "scenario_hash": sc.physics_digest(),
        "grid": list(sc.grid(stage.grid).counts),
        **sol.metadata(),
        "config": cfg.to_dict(),
    }
    vals = sol.field.values
    if args.kind == "vertical-tracking":
        summary["min_value"] = float(vals.min())
        summary["capture_set_nonempty"] = bool(vals.min() <= sc.d_z)
    elif args.kind == "horizontal-tracking":
        summary["min_value"] = float(vals.min())
        summary["capture_set_nonempty"] = bool(vals.min() <= sc.d_h)
    elif args.kind == "vertical-game":
        summary["defender_region_fraction"] = float(np.mean(vals <= 0.0))
    elif args.kind == "horizontal-game":
        summary["defender_region_fraction"] = float(np.mean(vals > 0.0))
    elif args.kind == "attacker-reach":
        summary["reachable_fraction"] = float(np.mean(np.isfinite(art.t_goal.times)))
    _emit(summary, None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# state files


def read_states(path: str) -> list[JointState9]:
    """JSON list of 9-vectors (or objects with ``p_D``, ``v_D``, ``p_A``), or CSV with 9 columns."""
    p = Path(path)
    text = p.read_text()
    if not text.strip():
        return []
    if p.suffix.lower() == ".csv":
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        return [JointState9.from_array([float(v) for v in r[:9]]) for r in rows]
    data = json.loads(text)
    out = []
    for item in data:
        if isinstance(item, dict):
            out.append(JointState9(item["p_D"], item["v_D"], item["p_A"]))
        else:
            out.append(JointState9.from_array(item))
    return out


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def sample_states(sc: geo.Scenario, n: int, rng: np.random.Generator) -> list[JointState9]:
    """Uniform states over the horizontal arena and vertical game box, outside obstacles."""
    dh = sc.domains["horizontal_game"]
    dz = sc.domains["vertical_game"]
    states = []
    while len(states) < n:
        pd = rng.uniform(dh.lo[0:2], dh.hi[0:2])
        pa = rng.uniform(dh.lo[4:6], dh.hi[4:6])
        if sc.obstacle_distance(pd) <= 0 or sc.obstacle_distance(pa) <= 0:
            continue
        v = rng.uniform(dh.lo[2:4], dh.hi[2:4])
        z = rng.uniform(dz.lo, dz.hi)
        states.append(JointState9.assemble([pd[0], pd[1], v[0], v[1], pa[0], pa[1]], z))
    return states


def _load_artifacts(args) -> GameArtifacts:
    out = Path(args.out)
    sc = geo.Scenario.load(args.scenario) if args.scenario else None
    return GameArtifacts.load(out, sc)


# ---------------------------------------------------------------------------
# classify


def cmd_classify(args) -> int:
    art = _load_artifacts(args)
    if args.states:
        states = read_states(args.states)
    else:
        states = sample_states(art.scenario, args.sample, np.random.default_rng(args.seed))
    results = [classify(s, art, args.delta) for s in states]
    payload = {
        "scenario_hash": art.scenario.physics_digest(),
        "seed": args.seed,
        "results": [{"state": s.to_json(), **r.to_json()} for s, r in zip(states, results)],
    }
    _emit(payload, args.output)
    if args.strict and any(r.verdict.value == "Indeterminate" for r in results):
        return EXIT_INDETERMINATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    art = _load_artifacts(args)
    sc = art.scenario
    states = read_states(args.states) if args.states else sample_states(sc, args.sample, np.random.default_rng(args.seed))
    cfg = SimConfig(dt=args.dt, duration=args.duration, post_terminal=args.post_terminal)
    log_dir = Path(args.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(states):
        if args.defender == "reach-track":
            art.require("phi_h", "phi_z", "v_h", "v_z")
            defender = ReachTrackDefender(art, ControllerConfig(hysteresis=args.hysteresis))
        else:
            defender = ConstantPolicy()
        if args.attacker == "adversarial":
            attacker = AdversarialAttacker(art)
        elif args.attacker == "goal":
            attacker = GoalSeekingAttacker(art)
        else:
            attacker = ConstantPolicy()
        traj = run(sc, s, defender, attacker, cfg, art)
        csv_path, _ = traj.save(log_dir / f"traj_{i:04d}.csv")
        rows.append({"index": i, "outcome": traj.outcome, "t": traj.outcome_time, "log": str(csv_path)})
    summary = {"scenario_hash": sc.physics_digest(), "seed": args.seed, "runs": rows,
               "counts": {k: sum(r["outcome"] == k for r in rows) for k in ("DefenderWins", "AttackerWins", "Timeout")}}
    (log_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{'run':>5}  {'outcome':<13} {'t':>7}")
    for r in rows:
        t = "-" if r["t"] is None else f"{r['t']:.2f}"
        print(f"{r['index']:>5}  {r['outcome']:<13} {t:>7}")
    print(json.dumps(summary["counts"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-slice


def export_slice(fld: ScalarField, fixes: dict[int, float]) -> tuple[list[int], dict[int, tuple[int, float]], np.ndarray]:
    """Fix all but two axes at their nearest nodes.

    Returns the free axes, the snapped ``{axis: (index, coordinate)}`` and
    rows of ``(coord1, coord2, value)`` (or ``(coord, value)`` for 1-D fields).
    """
    nd = fld.spec.ndim
    for k in fixes:
        if not 0 <= k < nd:
            raise ValueError(f"axis {k} out of range for a {nd}-D field")
    free = [k for k in range(nd) if k not in fixes]
    if len(free) != min(2, nd):
        raise ValueError(f"fix exactly {nd - min(2, nd)} axes (got {len(fixes)})")
    snapped = {}
    index: list = []
    for k in range(nd):
        if k in fixes:
            ax = fld.spec.axis(k)
            i = int(np.argmin(np.abs(ax - fixes[k])))
            snapped[k] = (i, float(ax[i]))
            index.append(i)
        else:
            index.append(slice(None))
    sl = fld.values[tuple(index)]
    grids = np.meshgrid(*[fld.spec.axis(k) for k in free], indexing="ij")
    rows = np.column_stack([g.ravel() for g in grids] + [sl.ravel()])
    return free, snapped, rows


def _parse_fix(text: str, labels) -> tuple[int, float]:
    key, _, val = text.partition("=")
    if not _:
        raise ValueError(f"bad --fix {text!r}; expected axis=value")
    key = key.strip()
    if key.isdigit():
        k = int(key)
    elif labels and key in labels:
        k = list(labels).index(key)
    else:
        raise ValueError(f"unknown axis {key!r}; known: {', '.join(labels or [])}")
    return k, float(val)


def cmd_export_slice(args) -> int:
    fld = read_field(args.field)
    meta = read_meta(args.field)
    labels = AXIS_LABELS.get(meta.get("grid_name", ""), tuple(f"x{k}" for k in range(fld.spec.ndim)))
    fixes = dict(_parse_fix(f, labels) for f in args.fix)
    free, snapped, rows = export_slice(fld, fixes)
    header = [labels[k] for k in free] + ["value"]
    dest = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(dest)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    finally:
        if args.output:
            dest.close()
    snaps = {labels[k]: {"index": i, "value": v, "requested": fixes[k]} for k, (i, v) in snapped.items()}
    print(json.dumps({"snapped": snaps, "rows": int(len(rows))}), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-diff


def set_displacement(a: ScalarField, b: ScalarField, level: float = 0.0) -> float:
    """Hausdorff distance (metres in state space) between the node sets ``{a <= level}`` and ``{b <= level}``."""
    A = a.values <= level
    B = b.values <= level
    if not A.any() and not B.any():
        return 0.0
    if not A.any() or not B.any():
        return float("inf")
    h = a.spec.spacing
    dB = distance_transform_edt(~B, sampling=h)
    dA = distance_transform_edt(~A, sampling=h)
    return float(max(dB[A].max(), dA[B].max()))


def oracle_diff(sc: geo.Scenario, counts=(31, 21, 31), horizon: float = 2.0, oracle_cfg: OracleConfig | None = None,
                cfl: float = 0.9) -> dict:
    """Classic vertical game on a coarse grid: level-set solver vs semi-Lagrangian oracle."""
    d = sc.domains["vertical_game"]
    spec = geo.Domain(d.lo, d.hi, tuple(counts)).grid()
    model = model_for("vertical_game_3d", sc)
    l = geo.build_vertical_cost(sc, spec)
    a = solve_reach(model, l, SolveConfig(horizon=horizon, cfl=cfl, snapshot_every=None, log_every=0))
    ocfg = oracle_cfg or OracleConfig(horizon=horizon)
    o = oracle_reach(model, l, ocfg)
    diff = np.abs(a.field.values - o.field.values)
    # the classic cost |z_D - z_A| - d_z has gradient (1, 0, -1)
    tol = calibrated_tolerance(model, l, ocfg, horizon, lipschitz=float(np.sqrt(2.0)))
    return {
        "grid": list(counts), "horizon": horizon,
        "max_abs_diff": float(diff.max()), "mean_abs_diff": float(diff.mean()),
        "boundary_displacement": set_displacement(a.field, o.field),
        "tolerance": tol, "oracle_dt": o.dt, "hji_dt": a.dt,
        "hji": a.field, "oracle": o.field,
    }


def cmd_oracle_diff(args) -> int:
    sc = _scenario(args)
    counts = pipeline.parse_counts(args.grid) if args.grid else (31, 21, 31)
    res = oracle_diff(sc, counts, args.horizon if args.horizon is not None else 2.0,
                      cfl=args.cfl if args.cfl is not None else 0.9)
    if args.out:
        from .grid import write_field

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_field(out / "oracle_vertical.hjvf", res["oracle"], {"source": "oracle"})
        write_field(out / "hji_vertical.hjvf", res["hji"], {"source": "hji"})
    report = {k: v for k, v in res.items() if k not in ("hji", "oracle")}
    report["within_tolerance"] = bool(report["max_abs_diff"] <= report["tolerance"]["bound"])
    _emit(report, None)
    if args.strict and not report["within_tolerance"]:
        return 1
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reachtrack", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress as JSON lines")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default="artifacts"):
        p.add_argument("--scenario", help="scenario JSON (default: stored copy or the reference scenario)")
        p.add_argument("--out", default=out_default, help="artifact directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="run one solve stage")
    p.add_argument("kind", choices=list(pipeline.STAGES))
    common(p)
    p.add_argument("--grid", help="node counts, e.g. 240x200")
    p.add_argument("--horizon", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--paper-scale", action="store_true", help="use the full-resolution grids")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", help="classify joint states with the sufficient conditions")
    common(p)
    p.add_argument("--states", help="JSON or CSV file of 9-D states")
    p.add_argument("--sample", type=int, default=100, help="random states when --states is absent")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--output")
    p.add_argument("--strict", action="store_true", help=f"exit {EXIT_INDETERMINATE} if any verdict is Indeterminate")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="closed-loop simulations")
    common(p)
    p.add_argument("--states")
    p.add_argument("--sample", type=int, default=10)
    p.add_argument("--defender", choices=("reach-track", "zero"), default="reach-track")
    p.add_argument("--attacker", choices=("adversarial", "goal", "zero"), default="adversarial")
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--post-terminal", type=float, default=0.0)
    p.add_argument("--hysteresis", type=float, default=0.0)
    p.add_argument("--log-dir", default="trajectories")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-slice", help="2-D slice of a stored field as CSV")
    p.add_argument("field")
    p.add_argument("--fix", action="append", default=[], help="axis=value (name or index); repeatable")
    p.add_argument("--output")
    p.set_defaults(func=cmd_export_slice)

    p = sub.add_parser("oracle-diff", help="compare the level-set solver with the brute-force oracle")
    p.add_argument("--scenario")
    p.add_argument("--grid", help="vertical game node counts (default 31x21x31)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--out", help="also write both fields here")
    p.add_argument("--strict", action="store_true", help="exit 1 if the difference exceeds the bound")
    p.set_defaults(func=cmd_oracle_diff, paper_scale=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except StaleArtifactError as exc:
        print(f"error: stale artifacts: {exc}", file=sys.stderr)
        return EXIT_STALE
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
