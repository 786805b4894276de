"""Sub-system dynamics, optimal Hamiltonians and feedback controls.

Every model in this package has the form

    xdot = A x + B_D u_D + B_A u_A,    |u_D| <= U_D,  |u_A| <= U_A

with each player's control set a Euclidean ball (a disk for horizontal
velocity commands, an interval for vertical ones).  The optimal Hamiltonian
therefore has the closed form

    H(x, p) = p . A x + s_D U_D |B_D^T p| + s_A U_A |B_A^T p|

where ``s = +1`` for the player maximizing the Hamiltonian and ``-1`` for the
minimizer.  The optimizers are ``u* = s U a / |a|`` with ``a = B^T p`` (zero
when ``a`` vanishes).  Because the two control terms are additively
separable, the max-min and min-max orders give the same value.

Role table (who maximizes H):

================== =========== ===========
model              defender    attacker
================== =========== ===========
horizontal_game_6d max         min
vertical_game_3d   min         max
rel_vertical_2d    min         max
rel_horizontal_4d  min         max
attacker_reach_2d  (absent)    min
================== =========== ===========

Written out, e.g. for the 6-D horizontal game with p = (p1..p6):

    H = p1 vx + p2 vy - kx p3 vx - ky p4 vy
        + U_hD |(kx p3, ky p4)| - U_hA |(p5, p6)|
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import GridSpec

DEFENDER = "defender"
ATTACKER = "attacker"
MAXIMIZE = 1
MINIMIZE = -1

_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class DynamicsModel:
    name: str
    state_labels: tuple[str, ...]
    A: np.ndarray
    B_D: np.ndarray
    B_A: np.ndarray
    U_D: float
    U_A: float
    role_D: int
    role_A: int
    velocity_axes: tuple[int, ...] = field(default=())

    @property
    def ndim(self) -> int:
        return len(self.state_labels)

    def _player(self, player: str) -> tuple[np.ndarray, float, int]:
        if player == DEFENDER:
            return self.B_D, self.U_D, self.role_D
        if player == ATTACKER:
            return self.B_A, self.U_A, self.role_A
        raise ValueError(f"unknown player {player!r}")

    def control_dim(self, player: str) -> int:
        return self._player(player)[0].shape[1]

    def drift(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.A.T

    def flow(self, x, u_D, u_A, check: bool = True) -> np.ndarray:
        """State derivative for (batches of) states and controls."""
        x = np.asarray(x, dtype=np.float64)
        u_D = np.asarray(u_D, dtype=np.float64)
        u_A = np.asarray(u_A, dtype=np.float64)
        if check:
            for u, player in ((u_D, DEFENDER), (u_A, ATTACKER)):
                B, U, _ = self._player(player)
                if B.shape[1] and np.any(np.linalg.norm(np.atleast_1d(u), axis=-1) > U + _BOUND_TOL):
                    raise ValueError(f"{player} control exceeds its bound {U}")
        out = self.drift(x)
        if self.B_D.shape[1]:
            out = out + u_D @ self.B_D.T
        if self.B_A.shape[1]:
            out = out + u_A @ self.B_A.T
        return out

    def control_coefficients(self, p, player: str) -> np.ndarray:
        """``a = B^T p``: the vector the player's control is dotted with."""
        B, _, _ = self._player(player)
        return np.asarray(p, dtype=np.float64) @ B

    def hamiltonian(self, p, x) -> np.ndarray | float:
        """Optimal Hamiltonian, vectorized over leading dimensions."""
        p = np.asarray(p, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        H = np.sum(p * self.drift(x), axis=-1)
        for player in (DEFENDER, ATTACKER):
            B, U, role = self._player(player)
            if B.shape[1]:
                H = H + role * U * np.linalg.norm(p @ B, axis=-1)
        return H

    def optimal_control(self, p, player: str) -> np.ndarray:
        B, U, role = self._player(player)
        a = np.asarray(p, dtype=np.float64) @ B
        return optimal_ball_control(a, U, role)

    def dissipation_bounds(self, grid: GridSpec) -> np.ndarray:
        """Per-axis bound on |dH/dp_i| over the grid box and admissible controls."""
        if grid.ndim != self.ndim:
            raise ValueError(f"{self.name} expects a {self.ndim}-D grid, got {grid.ndim}-D")
        lo = np.array(grid.lo)
        hi = np.array(grid.hi)
        alpha = np.empty(self.ndim)
        for i in range(self.ndim):
            row = self.A[i]
            top = np.sum(np.maximum(row * lo, row * hi))
            bottom = np.sum(np.minimum(row * lo, row * hi))
            alpha[i] = max(abs(top), abs(bottom))
            for B, U in ((self.B_D, self.U_D), (self.B_A, self.U_A)):
                if B.shape[1]:
                    alpha[i] += U * np.linalg.norm(B[i])
        return alpha

    def kernel_arrays(self) -> tuple:
        """Plain arrays consumed by the compiled solver sweep."""
        return (
            np.ascontiguousarray(self.A, dtype=np.float64),
            np.ascontiguousarray(self.B_D, dtype=np.float64).reshape(self.ndim, -1),
            np.ascontiguousarray(self.B_A, dtype=np.float64).reshape(self.ndim, -1),
            float(self.U_D),
            float(self.U_A),
            float(self.role_D),
            float(self.role_A),
        )


def optimal_ball_control(a, U: float, role: int) -> np.ndarray:
    """Optimizer of ``a . u`` over ``|u| <= U``: ``role * U * a / |a|``, zero when ``a == 0``."""
    a = np.asarray(a, dtype=np.float64)
    norm = np.linalg.norm(a, axis=-1, keepdims=True)
    safe = np.where(norm > 0.0, norm, 1.0)
    u = np.where(norm > 0.0, role * U * a / safe, 0.0)
    # Guard against the norm landing a few ulps above U.
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    return np.where(n > U, u * (U / np.where(n > 0, n, 1.0)), u)


# ---------------------------------------------------------------------------
# the five models


def horizontal_game_6d(kx: float, ky: float, UhD: float, UhA: float) -> DynamicsModel:
    """(x_D, y_D, v_x_D, v_y_D, x_A, y_A); defender maximizes, attacker minimizes."""
    A = np.zeros((6, 6))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    A[2, 2] = -kx
    A[3, 3] = -ky
    B_D = np.zeros((6, 2))
    B_D[2, 0] = kx
    B_D[3, 1] = ky
    B_A = np.zeros((6, 2))
    B_A[4, 0] = 1.0
    B_A[5, 1] = 1.0
    return DynamicsModel(
        "horizontal_game_6d", ("x_D", "y_D", "v_x_D", "v_y_D", "x_A", "y_A"),
        A, B_D, B_A, UhD, UhA, MAXIMIZE, MINIMIZE, velocity_axes=(2, 3),
    )


def vertical_game_3d(kz: float, UzD: float, UzA: float) -> DynamicsModel:
    """(z_D, v_z_D, z_A); defender minimizes, attacker maximizes."""
    A = np.array([[0.0, 1.0, 0.0], [0.0, -kz, 0.0], [0.0, 0.0, 0.0]])
    B_D = np.array([[0.0], [kz], [0.0]])
    B_A = np.array([[0.0], [0.0], [1.0]])
    return DynamicsModel(
        "vertical_game_3d", ("z_D", "v_z_D", "z_A"), A, B_D, B_A, UzD, UzA,
        MINIMIZE, MAXIMIZE, velocity_axes=(1,),
    )


def rel_vertical_2d(kz: float, UzD: float, UzA: float) -> DynamicsModel:
    """(z_rel = z_D - z_A, v_z_D); defender minimizes, attacker maximizes."""
    A = np.array([[0.0, 1.0], [0.0, -kz]])
    B_D = np.array([[0.0], [kz]])
    B_A = np.array([[-1.0], [0.0]])
    return DynamicsModel(
        "rel_vertical_2d", ("z_rel", "v_z_D"), A, B_D, B_A, UzD, UzA,
        MINIMIZE, MAXIMIZE, velocity_axes=(1,),
    )


def rel_horizontal_4d(kx: float, ky: float, UhD: float, UhA: float) -> DynamicsModel:
    """(x_rel, y_rel, v_x_D, v_y_D) with rel = defender - attacker."""
    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    A[2, 2] = -kx
    A[3, 3] = -ky
    B_D = np.zeros((4, 2))
    B_D[2, 0] = kx
    B_D[3, 1] = ky
    B_A = np.zeros((4, 2))
    B_A[0, 0] = -1.0
    B_A[1, 1] = -1.0
    return DynamicsModel(
        "rel_horizontal_4d", ("x_rel", "y_rel", "v_x_D", "v_y_D"), A, B_D, B_A, UhD, UhA,
        MINIMIZE, MAXIMIZE, velocity_axes=(2, 3),
    )


def attacker_reach_2d(UhA: float) -> DynamicsModel:
    """Attacker alone, (x_A, y_A); it minimizes."""
    return DynamicsModel(
        "attacker_reach_2d", ("x_A", "y_A"), np.zeros((2, 2)), np.zeros((2, 0)),
        np.eye(2), 0.0, UhA, MAXIMIZE, MINIMIZE,
    )


MODEL_IDS = ("horizontal_game_6d", "vertical_game_3d", "rel_vertical_2d", "rel_horizontal_4d", "attacker_reach_2d")


def model_for(name: str, scenario) -> DynamicsModel:
    """Build a named model from a scenario's gains and speed bounds."""
    s = scenario
    if name == "horizontal_game_6d":
        return horizontal_game_6d(s.kx, s.ky, s.UhD, s.UhA)
    if name == "vertical_game_3d":
        return vertical_game_3d(s.kz, s.UzD, s.UzA)
    if name == "rel_vertical_2d":
        return rel_vertical_2d(s.kz, s.UzD, s.UzA)
    if name == "rel_horizontal_4d":
        return rel_horizontal_4d(s.kx, s.ky, s.UhD, s.UhA)
    if name == "attacker_reach_2d":
        return attacker_reach_2d(s.UhA)
    raise ValueError(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# joint state and projections


@dataclass(frozen=True)
class JointState9:
    p_D: tuple[float, float, float]
    v_D: tuple[float, float, float]
    p_A: tuple[float, float, float]

    def __post_init__(self) -> None:
        for name in ("p_D", "v_D", "p_A"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3 or not all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([*self.p_D, *self.v_D, *self.p_A])

    @classmethod
    def from_array(cls, a: Sequence[float]) -> JointState9:
        a = [float(v) for v in a]
        if len(a) != 9:
            raise ValueError("joint state has 9 components")
        return cls(tuple(a[0:3]), tuple(a[3:6]), tuple(a[6:9]))

    def horizontal(self) -> np.ndarray:
        """(x_D, y_D, v_x_D, v_y_D, x_A, y_A)."""
        return np.array([self.p_D[0], self.p_D[1], self.v_D[0], self.v_D[1], self.p_A[0], self.p_A[1]])

    def vertical(self) -> np.ndarray:
        """(z_D, v_z_D, z_A)."""
        return np.array([self.p_D[2], self.v_D[2], self.p_A[2]])

    def rel_vertical(self) -> np.ndarray:
        """(z_D - z_A, v_z_D)."""
        return np.array([self.p_D[2] - self.p_A[2], self.v_D[2]])

    def rel_horizontal(self) -> np.ndarray:
        """(x_D - x_A, y_D - y_A, v_x_D, v_y_D)."""
        return np.array([self.p_D[0] - self.p_A[0], self.p_D[1] - self.p_A[1], self.v_D[0], self.v_D[1]])

    @classmethod
    def assemble(cls, horizontal: Sequence[float], vertical: Sequence[float]) -> JointState9:
        h = [float(v) for v in horizontal]
        z = [float(v) for v in vertical]
        return cls((h[0], h[1], z[0]), (h[2], h[3], z[1]), (h[4], h[5], z[2]))

    def to_json(self) -> list[float]:
        return [float(v) for v in self.as_array()]
