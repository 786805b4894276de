"""Brute-force discrete game solver used to cross-check the level-set solver.

Semi-Lagrangian value iteration: each node is advected one step under every
pair of discretized controls, the value is read back by multilinear
interpolation (linear extrapolation outside the box), and the players
optimize over the resulting table in the order defender-outer,
attacker-inner.  Nothing here shares code with the finite-difference solver
beyond the model definition and grid geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .dynamics import DynamicsModel
from .grid import ScalarField
from .hji import cfl_timestep


class NodeCapError(ValueError):
    """Grid too large for brute-force value iteration."""


@dataclass(frozen=True)
class OracleConfig:
    disk_angles: int = 37
    interval_points: int = 11
    dt: float | None = None
    horizon: float | None = None
    tol: float = 1e-3
    max_iter: int = 200_000
    node_cap: int = 100_000
    cfl: float = 0.9

    def __post_init__(self) -> None:
        if self.disk_angles < 3 or self.interval_points < 2:
            raise ValueError("control sets too coarse")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.tol <= 0 or self.node_cap <= 0:
            raise ValueError("tol and node_cap must be positive")


@dataclass
class OracleResult:
    field: ScalarField
    dt: float
    iterations: int
    horizon: float
    converged: bool


def control_set(dim: int, U: float, cfg: OracleConfig) -> np.ndarray:
    """Discretized control ball: interval samples in 1-D, boundary angles plus centre in 2-D."""
    if dim == 0:
        return np.zeros((1, 0))
    if dim == 1:
        return np.linspace(-U, U, cfg.interval_points).reshape(-1, 1)
    if dim == 2:
        th = np.linspace(0.0, 2.0 * np.pi, cfg.disk_angles, endpoint=False)
        ring = U * np.stack([np.cos(th), np.sin(th)], axis=1)
        return np.vstack([np.zeros((1, 2)), ring])
    raise ValueError("control dimension above 2 is not supported")


def oracle_timestep(model: DynamicsModel, spec, cfg: OracleConfig) -> float:
    if cfg.dt is not None:
        return float(cfg.dt)
    return 0.5 * cfl_timestep(model.dissipation_bounds(spec), spec.spacing, cfg.cfl)


def _iterate(model: DynamicsModel, l: ScalarField, cfg: OracleConfig, combine) -> OracleResult:
    spec = l.spec
    if spec.size > cfg.node_cap:
        raise NodeCapError(f"{spec.size} nodes exceeds the oracle cap of {cfg.node_cap}")
    if spec.ndim != model.ndim:
        raise ValueError(f"{model.name} expects a {model.ndim}-D grid")
    dt = oracle_timestep(model, spec, cfg)
    axes = [spec.axis(k) for k in range(spec.ndim)]
    X = np.stack([m.ravel() for m in spec.meshgrid()], axis=1)
    base = X + dt * (X @ model.A.T)
    UD = control_set(model.B_D.shape[1], model.U_D, cfg)
    UA = control_set(model.B_A.shape[1], model.U_A, cfg)
    offD = dt * UD @ model.B_D.T if model.B_D.shape[1] else np.zeros((1, spec.ndim))
    offA = dt * UA @ model.B_A.T if model.B_A.shape[1] else np.zeros((1, spec.ndim))
    optD = np.max if model.role_D > 0 else np.min
    optA = np.max if model.role_A > 0 else np.min
    lv = l.values.ravel().copy()
    V = lv.copy()
    n_iter = 0
    tau = 0.0
    converged = False
    target = cfg.horizon
    while True:
        if target is not None and tau >= target - 1e-12:
            break
        if n_iter >= cfg.max_iter:
            break
        step = dt if target is None else min(dt, target - tau)
        if step < dt:
            # Final partial step: rescale the advection.
            scale = step / dt
            b = X + scale * (base - X)
            oD, oA = scale * offD, scale * offA
        else:
            b, oD, oA = base, offD, offA
        interp = RegularGridInterpolator(axes, V.reshape(spec.shape), method="linear",
                                         bounds_error=False, fill_value=None)
        best_D = None
        for d in oD:
            pts = (b + d)[None, :, :] + oA[:, None, :]
            q = interp(pts.reshape(-1, spec.ndim)).reshape(len(oA), -1)
            inner = optA(q, axis=0)
            best_D = inner if best_D is None else (np.maximum(best_D, inner) if optD is np.max
                                                   else np.minimum(best_D, inner))
        new = combine(lv, best_D)
        change = float(np.max(np.abs(new - V))) / step
        V = new
        tau += step
        n_iter += 1
        if target is None and change < cfg.tol:
            converged = True
            break
    return OracleResult(ScalarField(spec, V.reshape(spec.shape), copy=False), dt, n_iter, tau, converged)


def oracle_reach(model: DynamicsModel, l: ScalarField, cfg: OracleConfig | None = None) -> OracleResult:
    return _iterate(model, l, cfg or OracleConfig(), np.minimum)


def oracle_max_tracking(model: DynamicsModel, l: ScalarField, cfg: OracleConfig | None = None) -> OracleResult:
    return _iterate(model, l, cfg or OracleConfig(), np.maximum)


def oracle_solve_reach(model: DynamicsModel, l: ScalarField, cfg: OracleConfig | None = None) -> ScalarField:
    """``V <- min(l, opt_D opt_A V(x + dt f))`` to the horizon or convergence."""
    return oracle_reach(model, l, cfg).field


def oracle_solve_max_tracking(model: DynamicsModel, l: ScalarField, cfg: OracleConfig | None = None) -> ScalarField:
    """``V <- max(l, opt_D opt_A V(x + dt f))`` to the horizon or convergence."""
    return oracle_max_tracking(model, l, cfg).field


def calibrated_tolerance(model: DynamicsModel, l: ScalarField, cfg: OracleConfig, horizon: float,
                         lipschitz: float) -> dict[str, float]:
    """Error budget for comparing oracle and level-set values.

    ``2 * (control gap + dt term + one cell)``, each term scaled by the
    Lipschitz constant of the value (per unit of Euclidean state distance):

    * control gap: per unit time the discretized ball loses at most
      ``U (1 - cos(pi / n))`` of its support function; accumulated over the
      horizon.  Interval sets contain both endpoints, so their gap is zero.
    * dt term: ``dt * max |f|`` over the grid box.
    * cell: the grid's cell diagonal.
    """
    spec = l.spec
    dt = oracle_timestep(model, spec, cfg)
    gap_rate = 0.0
    for B, U in ((model.B_D, model.U_D), (model.B_A, model.U_A)):
        if B.shape[1] == 2:
            gap_rate += U * (1.0 - np.cos(np.pi / cfg.disk_angles)) * np.linalg.norm(B, 2)
    corners = np.array(np.meshgrid(*[(a, b) for a, b in zip(spec.lo, spec.hi)], indexing="ij")).reshape(spec.ndim, -1).T
    fmax = float(np.max(np.linalg.norm(corners @ model.A.T, axis=1)))
    for B, U in ((model.B_D, model.U_D), (model.B_A, model.U_A)):
        if B.shape[1]:
            fmax += U * np.linalg.norm(B, 2)
    cell = float(np.linalg.norm(spec.spacing))
    parts = {
        "control_gap": lipschitz * gap_rate * horizon,
        "dt_term": lipschitz * dt * fmax,
        "cell": lipschitz * cell,
    }
    parts["bound"] = 2.0 * (parts["control_gap"] + parts["dt_term"] + parts["cell"])
    return parts

