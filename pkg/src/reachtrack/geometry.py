"""Signed-distance set algebra, scenario description and cost fields.

Sets follow the usual implicit convention: negative inside, positive outside,
zero on the boundary.  Union is a pointwise min, intersection a max and
complement a negation; composed sets are sign-correct but not re-distanced.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .grid import GridSpec, ScalarField, interpolate

# Stand-in for "no obstacle anywhere": finite so every cost field stays finite.
FAR = 1.0e6


class ImplicitSet:
    """Base class; subclasses implement :meth:`evaluate` on (..., dim) arrays."""

    dim: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, point) -> float | np.ndarray:
        pts = np.asarray(point, dtype=np.float64)
        if pts.shape[-1] != self.dim:
            raise ValueError(f"set expects {self.dim}-D points, got {pts.shape[-1]}")
        out = self.evaluate(pts)
        return float(out) if pts.ndim == 1 else out

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError

    def __or__(self, other: ImplicitSet) -> Union:
        return Union([self, other])

    def __and__(self, other: ImplicitSet) -> Intersection:
        return Intersection([self, other])

    def __invert__(self) -> Complement:
        return Complement(self)


def eval_signed(s: ImplicitSet, point) -> float | np.ndarray:
    return s(point)


@dataclass(frozen=True, eq=False)
class HalfSpace(ImplicitSet):
    """``{x : normal . x <= offset}``."""

    normal: tuple[float, ...]
    offset: float

    def __post_init__(self) -> None:
        n = tuple(float(v) for v in self.normal)
        if np.linalg.norm(n) == 0:
            raise ValueError("half-space normal must be non-zero")
        object.__setattr__(self, "normal", n)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal)
        return (points @ n - self.offset) / np.linalg.norm(n)

    def to_json(self) -> dict[str, Any]:
        return {"op": "halfspace", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Box(ImplicitSet):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi on every axis")
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        q = np.maximum(np.asarray(self.lo) - points, points - np.asarray(self.hi))
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def to_json(self) -> dict[str, Any]:
        return {"op": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True, eq=False)
class Ball(ImplicitSet):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - np.asarray(self.center), axis=-1) - self.radius

    def to_json(self) -> dict[str, Any]:
        op = "circle" if self.dim == 2 else "sphere"
        return {"op": op, "center": list(self.center), "radius": self.radius}


def Circle(center: Sequence[float], radius: float) -> Ball:
    if len(center) != 2:
        raise ValueError("circle center must be 2-D")
    return Ball(tuple(center), radius)


def Sphere(center: Sequence[float], radius: float) -> Ball:
    if len(center) != 3:
        raise ValueError("sphere center must be 3-D")
    return Ball(tuple(center), radius)


@dataclass(frozen=True, eq=False)
class Cylinder(ImplicitSet):
    """Infinite vertical cylinder over 3-D points, axis through ``center`` (x, y)."""

    center: tuple[float, float]
    radius: float
    dim = 3

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points[..., :2] - np.asarray(self.center), axis=-1) - self.radius

    def to_json(self) -> dict[str, Any]:
        return {"op": "cylinder", "center": list(self.center), "radius": self.radius}


class _Composite(ImplicitSet):
    op = ""

    def __init__(self, children: Sequence[ImplicitSet]) -> None:
        children = list(children)
        if not children:
            raise ValueError(f"{self.op} needs at least one operand")
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise ValueError(f"{self.op} operands have mixed dimensions {sorted(dims)}")
        self.children = children
        self.dim = dims.pop()

    def to_json(self) -> dict[str, Any]:
        return {"op": self.op, "args": [c.to_json() for c in self.children]}


class Union(_Composite):
    op = "union"

    def evaluate(self, points):
        return np.minimum.reduce([c.evaluate(points) for c in self.children])


class Intersection(_Composite):
    op = "intersection"

    def evaluate(self, points):
        return np.maximum.reduce([c.evaluate(points) for c in self.children])


class Complement(ImplicitSet):
    def __init__(self, child: ImplicitSet) -> None:
        self.child = child
        self.dim = child.dim

    def evaluate(self, points):
        return -self.child.evaluate(points)

    def to_json(self) -> dict[str, Any]:
        return {"op": "complement", "arg": self.child.to_json()}


def set_from_json(data: dict[str, Any]) -> ImplicitSet:
    op = data["op"]
    if op == "halfspace":
        return HalfSpace(tuple(data["normal"]), float(data["offset"]))
    if op == "box":
        return Box(tuple(data["lo"]), tuple(data["hi"]))
    if op == "circle":
        return Circle(data["center"], float(data["radius"]))
    if op == "sphere":
        return Sphere(data["center"], float(data["radius"]))
    if op == "cylinder":
        return Cylinder(tuple(float(v) for v in data["center"]), float(data["radius"]))
    if op == "union":
        return Union([set_from_json(a) for a in data["args"]])
    if op == "intersection":
        return Intersection([set_from_json(a) for a in data["args"]])
    if op == "complement":
        return Complement(set_from_json(data["arg"]))
    raise ValueError(f"unknown set operator {op!r}")


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class Domain:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]

    def grid(self) -> GridSpec:
        return GridSpec(self.counts, self.lo, self.hi)

    def to_json(self) -> dict[str, Any]:
        return {"lo": list(self.lo), "hi": list(self.hi), "counts": list(self.counts)}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Domain:
        return cls(tuple(float(v) for v in d["lo"]), tuple(float(v) for v in d["hi"]),
                   tuple(int(v) for v in d["counts"]))


# Axis orders:
#   vertical_tracking   (z_rel, v_z_D)
#   vertical_game       (z_D, v_z_D, z_A)
#   horizontal_tracking (x_rel, y_rel, v_x_D, v_y_D)
#   horizontal_game     (x_D, y_D, v_x_D, v_y_D, x_A, y_A)
#   attacker_reach      (x_A, y_A)
DEFAULT_DOMAINS: dict[str, Domain] = {
    # Finer than the +-10 m / 240 x 100 layout of PAPER_SCALE_DOMAINS: a
    # first-order scheme needs ~0.04 m cells before the tracking set at
    # d_z = 1 survives a 20 s horizon.  |z_rel| > 5 never matters for it.
    "vertical_tracking": Domain((-5.0, -4.0), (5.0, 4.0), (240, 200)),
    "vertical_game": Domain((-10.0, -4.0, -10.0), (10.0, 4.0, 10.0), (121, 61, 121)),
    "horizontal_tracking": Domain((-3.0, -3.0, -6.0, -6.0), (3.0, 3.0, 6.0, 6.0), (41, 41, 31, 31)),
    "horizontal_game": Domain(
        (0.0, 0.0, -6.0, -6.0, 0.0, 0.0), (45.0, 25.0, 6.0, 6.0, 45.0, 25.0), (45, 25, 7, 7, 45, 25)
    ),
    "attacker_reach": Domain((0.0, 0.0), (45.0, 25.0), (181, 101)),
}

PAPER_SCALE_DOMAINS: dict[str, Domain] = {
    "vertical_tracking": Domain((-10.0, -4.0), (10.0, 4.0), (240, 100)),
    "horizontal_tracking": Domain((-3.0, -3.0, -6.0, -6.0), (3.0, 3.0, 6.0, 6.0), (60, 60, 75, 75)),
    "horizontal_game": Domain(
        (0.0, 0.0, -6.0, -6.0, 0.0, 0.0), (45.0, 25.0, 6.0, 6.0, 45.0, 25.0), (85, 45, 8, 7, 85, 45)
    ),
}


@dataclass(frozen=True)
class Scenario:
    """Game geometry plus agent parameters.

    ``target`` and ``obstacles`` are 2-D sets over horizontal coordinates.
    ``obstacle_inflation`` shrinks the defender's obstacle clearance in the
    horizontal game by a fixed margin (0 disables it); it is the conservative
    option for the obstacle-free horizontal tracking set.
    """

    target: ImplicitSet
    obstacles: tuple[ImplicitSet, ...] = ()
    d_h: float = 3.0
    d_z: float = 1.0
    kx: float = 0.7
    ky: float = 0.7
    kz: float = 1.5
    UhD: float = 6.0
    UhA: float = 3.0
    UzD: float = 4.0
    UzA: float = 2.0
    K: float = 1000.0
    domains: dict[str, Domain] = field(default_factory=lambda: dict(DEFAULT_DOMAINS))
    obstacle_inflation: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.d_h <= 0 or self.d_z <= 0:
            raise ValueError("capture radii must be positive")
        if min(self.UhD, self.UhA, self.UzD, self.UzA) <= 0:
            raise ValueError("speed bounds must be positive")
        if min(self.kx, self.ky, self.kz) <= 0:
            raise ValueError("velocity gains must be positive")
        if self.K <= self.d_h:
            raise ValueError("obstacle penalty K must exceed d_h")
        for s in (self.target, *self.obstacles):
            if s.dim != 2:
                raise ValueError("target and obstacles must be sets over (x, y) only")
        merged = dict(DEFAULT_DOMAINS)
        merged.update(self.domains)
        object.__setattr__(self, "domains", merged)

    @property
    def obstacle_set(self) -> ImplicitSet | None:
        if not self.obstacles:
            return None
        return self.obstacles[0] if len(self.obstacles) == 1 else Union(self.obstacles)

    def target_distance(self, xy: np.ndarray) -> np.ndarray:
        return self.target.evaluate(np.asarray(xy, dtype=np.float64))

    def obstacle_distance(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        obs = self.obstacle_set
        if obs is None:
            return np.full(xy.shape[:-1], FAR)
        return obs.evaluate(xy)

    def grid(self, name: str) -> GridSpec:
        return self.domains[name].grid()

    def paper_scale(self) -> Scenario:
        """Copy using the full-resolution grids (hours of compute for the 6-D game)."""
        domains = dict(self.domains)
        domains.update(PAPER_SCALE_DOMAINS)
        return _replace(self, domains=domains)

    def with_domain(self, name: str, domain: Domain) -> Scenario:
        domains = dict(self.domains)
        domains[name] = domain
        return _replace(self, domains=domains)

    def with_counts(self, name: str, counts: Sequence[int]) -> Scenario:
        d = self.domains[name]
        domains = dict(self.domains)
        domains[name] = Domain(d.lo, d.hi, tuple(int(c) for c in counts))
        return _replace(self, domains=domains)

    def to_json(self) -> dict[str, Any]:
        return {
            "target": self.target.to_json(),
            "obstacles": [o.to_json() for o in self.obstacles],
            "d_h": self.d_h,
            "d_z": self.d_z,
            "gains": {"kx": self.kx, "ky": self.ky, "kz": self.kz},
            "bounds": {"UhD": self.UhD, "UhA": self.UhA, "UzD": self.UzD, "UzA": self.UzA},
            "K": self.K,
            "obstacle_inflation": self.obstacle_inflation,
            "domains": {k: v.to_json() for k, v in sorted(self.domains.items())},
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> Scenario:
        gains = data.get("gains", {})
        bounds = data.get("bounds", {})
        domains = {k: Domain.from_json(v) for k, v in data.get("domains", {}).items()}
        return cls(
            target=set_from_json(data["target"]),
            obstacles=tuple(set_from_json(o) for o in data.get("obstacles", [])),
            d_h=float(data.get("d_h", 3.0)),
            d_z=float(data.get("d_z", 1.0)),
            kx=float(gains.get("kx", 0.7)),
            ky=float(gains.get("ky", 0.7)),
            kz=float(gains.get("kz", 1.5)),
            UhD=float(bounds.get("UhD", 6.0)),
            UhA=float(bounds.get("UhA", 3.0)),
            UzD=float(bounds.get("UzD", 4.0)),
            UzA=float(bounds.get("UzA", 2.0)),
            K=float(data.get("K", 1000.0)),
            domains=domains,
            obstacle_inflation=float(data.get("obstacle_inflation", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    def digest(self) -> str:
        """Stable hash of the scenario content, grids included."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def physics_digest(self) -> str:
        """Hash of everything except the grids (geometry, gains, bounds)."""
        data = self.to_json()
        del data["domains"]
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _replace(s: Scenario, **kw) -> Scenario:
    import dataclasses

    return dataclasses.replace(s, **kw)


def reference_scenario() -> Scenario:
    """Desk-scale reference game: target behind the wall ``x <= 3`` plus two obstacles."""
    return Scenario(
        target=HalfSpace((1.0, 0.0), 3.0),
        obstacles=(Circle((18.0, 7.0), 2.5), Box((26.0, 14.0), (30.0, 20.0))),
    )


# ---------------------------------------------------------------------------
# cost fields

HORIZONTAL_AXES = ("x_D", "y_D", "v_x_D", "v_y_D", "x_A", "y_A")
VERTICAL_AXES = ("z_D", "v_z_D", "z_A")
REL_HORIZONTAL_AXES = ("x_rel", "y_rel", "v_x_D", "v_y_D")
REL_VERTICAL_AXES = ("z_rel", "v_z_D")


def _check_arity(grid: GridSpec, n: int, what: str) -> None:
    if grid.ndim != n:
        raise ValueError(f"{what} expects a {n}-D grid, got {grid.ndim}-D")


def _rel_lookup(field: ScalarField, pts: np.ndarray, rel_norm: np.ndarray) -> np.ndarray:
    # Beyond the relative-state box the tracking value is bounded below by the distance itself.
    vals, _ = interpolate(field, pts)
    return np.maximum(vals, rel_norm)


def build_horizontal_costs(
    scenario: Scenario,
    grid6: GridSpec,
    capture_set_field: ScalarField | None = None,
    variant: str = "classic",
) -> tuple[ScalarField, ScalarField]:
    """Reach cost ``l`` and avoid cost ``g`` for the 6-D horizontal game.

    ``variant="invariant"`` replaces the distance-based capture margin with
    ``V_h(x_rel, v_D) - d_h`` read from ``capture_set_field``.
    """
    _check_arity(grid6, 6, "horizontal game")
    if variant not in ("classic", "invariant"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "invariant":
        if capture_set_field is None:
            raise ValueError("invariant variant needs the horizontal tracking field")
        _check_arity(capture_set_field.spec, 4, "horizontal tracking field")

    xd, yd, vx, vy, xa, ya = (grid6.axis(k) for k in range(6))
    XD, YD = np.meshgrid(xd, yd, indexing="ij")
    XA, YA = np.meshgrid(xa, ya, indexing="ij")
    pd = np.stack([XD, YD], axis=-1)
    pa = np.stack([XA, YA], axis=-1)
    obs_d = scenario.obstacle_distance(pd) - scenario.obstacle_inflation  # (nxd, nyd)
    tgt_a = scenario.target_distance(pa)  # (nxa, nya)
    obs_a = scenario.obstacle_distance(pa)

    shape = grid6.shape
    l = np.minimum(obs_d[:, :, None, None, None, None], tgt_a[None, None, None, None, :, :])
    l = np.broadcast_to(l, shape)

    g = np.empty(shape)
    not_target = -tgt_a[None, None, None, :, :]
    for i in range(shape[0]):
        dx = xd[i] - xa  # (nxa,)
        dy = yd[:, None, None] - ya[None, None, :]  # (nyd, 1, nya)
        dist = np.sqrt(dx[None, :, None] ** 2 + dy**2)  # (nyd, nxa, nya)
        if variant == "classic":
            margin = np.broadcast_to(dist[:, None, None, :, :], (shape[1], shape[2], shape[3], shape[4], shape[5]))
            margin = margin - scenario.d_h
        else:
            VX, VY = np.meshgrid(vx, vy, indexing="ij")
            rel_x = np.broadcast_to(dx[None, :, None], dist.shape)
            rel_y = np.broadcast_to(dy, dist.shape)
            full = (shape[1], shape[2], shape[3], shape[4], shape[5])
            RX = np.broadcast_to(rel_x[:, None, None, :, :], full)
            RY = np.broadcast_to(rel_y[:, None, None, :, :], full)
            VVX = np.broadcast_to(VX[None, :, :, None, None], full)
            VVY = np.broadcast_to(VY[None, :, :, None, None], full)
            D = np.broadcast_to(dist[:, None, None, :, :], full)
            pts = np.stack([RX.ravel(), RY.ravel(), VVX.ravel(), VVY.ravel()], axis=-1)
            margin = _rel_lookup(capture_set_field, pts, D.ravel()).reshape(full) - scenario.d_h
        inner = np.maximum(margin, not_target)
        g[i] = -np.minimum(inner, obs_a[None, None, None, :, :])
    return ScalarField(grid6, l), ScalarField(grid6, g, copy=False)


def build_vertical_cost(
    scenario: Scenario,
    grid3: GridSpec,
    capture_set_field: ScalarField | None = None,
    variant: str = "classic",
) -> ScalarField:
    """Reach cost of the vertical game over (z_D, v_z_D, z_A)."""
    _check_arity(grid3, 3, "vertical game")
    ZD, VZ, ZA = grid3.meshgrid()
    zrel = ZD - ZA
    if variant == "classic":
        return ScalarField(grid3, np.abs(zrel) - scenario.d_z, copy=False)
    if variant != "invariant":
        raise ValueError(f"unknown variant {variant!r}")
    if capture_set_field is None:
        raise ValueError("invariant variant needs the vertical tracking field")
    _check_arity(capture_set_field.spec, 2, "vertical tracking field")
    pts = np.stack([zrel.ravel(), VZ.ravel()], axis=-1)
    v = _rel_lookup(capture_set_field, pts, np.abs(zrel).ravel())
    return ScalarField(grid3, v.reshape(grid3.shape) - scenario.d_z, copy=False)


def build_tracking_cost_h(
    scenario: Scenario, grid4: GridSpec, attacker_anchor: Sequence[float] | None = None
) -> ScalarField:
    """Tracking distance ``max(|rel|, o_h)`` over (x_rel, y_rel, v_x_D, v_y_D).

    With ``attacker_anchor=None`` the obstacle penalty is dropped.  With an
    anchor, the defender position is taken as ``anchor + rel`` and nodes whose
    defender lies inside an obstacle cost ``K``.
    """
    _check_arity(grid4, 4, "horizontal tracking")
    xr, yr = grid4.axis(0), grid4.axis(1)
    XR, YR = np.meshgrid(xr, yr, indexing="ij")
    l_rel = np.sqrt(XR**2 + YR**2)
    if attacker_anchor is not None:
        pd = np.stack([XR + attacker_anchor[0], YR + attacker_anchor[1]], axis=-1)
        o_h = np.where(scenario.obstacle_distance(pd) <= 0.0, scenario.K, 0.0)
        l_rel = np.maximum(l_rel, o_h)
    out = np.broadcast_to(l_rel[:, :, None, None], grid4.shape)
    return ScalarField(grid4, out)


def build_tracking_cost_z(grid2: GridSpec) -> ScalarField:
    """Vertical tracking distance ``|z_rel|`` over (z_rel, v_z_D)."""
    _check_arity(grid2, 2, "vertical tracking")
    Z, _ = grid2.meshgrid()
    return ScalarField(grid2, np.abs(Z), copy=False)


def build_attacker_reach_costs(scenario: Scenario, grid2: GridSpec) -> tuple[ScalarField, ScalarField]:
    """Reach cost (target) and avoid cost (obstacles) for the attacker alone."""
    _check_arity(grid2, 2, "attacker reach")
    X, Y = grid2.meshgrid()
    p = np.stack([X, Y], axis=-1)
    l = scenario.target_distance(p)
    g = -scenario.obstacle_distance(p)
    return ScalarField(grid2, l, copy=False), ScalarField(grid2, g, copy=False)
