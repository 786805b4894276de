"""Rectilinear grids, node-sampled scalar fields and point queries.

Values are stored C-contiguous (last axis fastest) in float64.  Point
queries use multilinear interpolation; queries outside the bounding box are
clamped onto it and reported through a ``clamped`` flag instead of raising.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numba
import numpy as np

HJVF_MAGIC = b"HJVF"
HJVF_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned rectilinear grid with uniform spacing per axis."""

    counts: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if not (len(counts) == len(lo) == len(hi)) or not counts:
            raise ValueError("counts, lo and hi must have the same non-zero length")
        for c, a, b in zip(counts, lo, hi):
            if c < 3:
                raise ValueError(f"each axis needs at least 3 nodes, got {c}")
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"axis bounds must satisfy lo < hi, got [{a}, {b}]")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=np.int64))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (c - 1) for a, b, c in zip(self.lo, self.hi, self.counts))

    def axis(self, k: int) -> np.ndarray:
        """Node coordinates ``lo + i * spacing`` along axis ``k``."""
        return self.lo[k] + np.arange(self.counts[k]) * self.spacing[k]

    def coordinate(self, index: Sequence[int]) -> np.ndarray:
        return np.array([self.lo[k] + int(i) * self.spacing[k] for k, i in enumerate(index)])

    def cell_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the node at or immediately below ``point`` on every axis."""
        out = []
        for k, x in enumerate(point):
            t = (float(x) - self.lo[k]) / self.spacing[k]
            i = int(np.floor(t + 1e-9))
            out.append(min(max(i, 0), self.counts[k] - 1))
        return tuple(out)

    def flat_index(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.counts))

    def meshgrid(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis(k) for k in range(self.ndim)), indexing="ij")

    def contains(self, point: Sequence[float]) -> bool:
        return all(a <= float(x) <= b for x, a, b in zip(point, self.lo, self.hi))

    def to_dict(self) -> dict[str, Any]:
        return {"counts": list(self.counts), "lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GridSpec:
        return cls(tuple(data["counts"]), tuple(data["lo"]), tuple(data["hi"]))


class ScalarField:
    """Values of a function sampled at every node of a :class:`GridSpec`.

    ``values`` is a read-only C-contiguous array of shape ``spec.shape``;
    ``values.ravel()`` gives the flat row-major layout.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values: np.ndarray, copy: bool = True) -> None:
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != spec.size:
            raise ValueError(f"expected {spec.size} values, got {arr.size}")
        if copy:
            arr = np.array(arr, dtype=np.float64, order="C")
        arr = np.ascontiguousarray(arr).reshape(spec.shape)
        arr.flags.writeable = False
        self.spec = spec
        self.values = arr

    def __repr__(self) -> str:
        return f"ScalarField(shape={self.spec.shape})"

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> ScalarField:
        return cls(spec, fn(*spec.meshgrid()))

    def interpolate(self, point: Sequence[float]) -> float:
        return interpolate(self, point)[0]

    def gradient(self, point: Sequence[float]) -> np.ndarray:
        return gradient_at(self, point)[0]


# ---------------------------------------------------------------------------
# finite differences


def one_sided_derivatives(field: ScalarField, axis: int) -> tuple[ScalarField, ScalarField]:
    """Left and right first differences along ``axis``.

    Edge nodes use a linearly extrapolated ghost value, so both one-sided
    differences coincide there.
    """
    spec = field.spec
    if not 0 <= axis < spec.ndim:
        raise IndexError(f"axis {axis} out of range for a {spec.ndim}-D grid")
    v = field.values
    h = spec.spacing[axis]
    d = np.diff(v, axis=axis) / h
    first = np.take(d, [0], axis=axis)
    last = np.take(d, [-1], axis=axis)
    d_minus = np.concatenate([first, d], axis=axis)
    d_plus = np.concatenate([d, last], axis=axis)
    return ScalarField(spec, d_minus), ScalarField(spec, d_plus)


# ---------------------------------------------------------------------------
# point queries


def _prepare_points(spec: GridSpec, points) -> tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != spec.ndim:
        raise ValueError(f"points must have {spec.ndim} components, got {pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("query point has non-finite components")
    return np.ascontiguousarray(pts), single


def _grid_arrays(spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.array(spec.counts, dtype=np.int64),
        np.array(spec.lo, dtype=np.float64),
        np.array(spec.spacing, dtype=np.float64),
    )


@numba.njit(cache=True)
def _locate(x, lo, h, n):
    hi = lo + (n - 1) * h
    clamped = False
    if x < lo:
        x = lo
        clamped = True
    elif x > hi:
        x = hi
        clamped = True
    t = (x - lo) / h
    i = int(np.floor(t))
    if i > n - 2:
        i = n - 2
    if i < 0:
        i = 0
    return i, t - i, clamped


@numba.njit(cache=True)
def _strides(shape):
    nd = shape.shape[0]
    s = np.empty(nd, dtype=np.int64)
    acc = 1
    for k in range(nd - 1, -1, -1):
        s[k] = acc
        acc *= shape[k]
    return s


@numba.njit(cache=True)
def _interp_kernel(vals, shape, lo, h, pts, out, clamped):
    nd = shape.shape[0]
    strides = _strides(shape)
    base = np.empty(nd, dtype=np.int64)
    frac = np.empty(nd)
    for m in range(pts.shape[0]):
        flag = False
        for k in range(nd):
            i, t, c = _locate(pts[m, k], lo[k], h[k], shape[k])
            base[k] = i
            frac[k] = t
            flag = flag or c
        acc = 0.0
        for corner in range(1 << nd):
            w = 1.0
            off = 0
            for k in range(nd):
                if (corner >> k) & 1:
                    w *= frac[k]
                    off += (base[k] + 1) * strides[k]
                else:
                    w *= 1.0 - frac[k]
                    off += base[k] * strides[k]
            if w != 0.0:
                acc += w * vals[off]
        out[m] = acc
        clamped[m] = flag


@numba.njit(cache=True)
def _node_central_diff(vals, shape, strides, h, node, idx, k):
    i = idx[k]
    s = strides[k]
    if i == 0:
        return (vals[node + s] - vals[node]) / h[k]
    if i == shape[k] - 1:
        return (vals[node] - vals[node - s]) / h[k]
    return (vals[node + s] - vals[node - s]) / (2.0 * h[k])


@numba.njit(cache=True)
def _grad_kernel(vals, shape, lo, h, pts, out, clamped):
    nd = shape.shape[0]
    strides = _strides(shape)
    base = np.empty(nd, dtype=np.int64)
    frac = np.empty(nd)
    idx = np.empty(nd, dtype=np.int64)
    for m in range(pts.shape[0]):
        flag = False
        for k in range(nd):
            i, t, c = _locate(pts[m, k], lo[k], h[k], shape[k])
            base[k] = i
            frac[k] = t
            flag = flag or c
        for k in range(nd):
            out[m, k] = 0.0
        for corner in range(1 << nd):
            w = 1.0
            node = 0
            for k in range(nd):
                if (corner >> k) & 1:
                    w *= frac[k]
                    idx[k] = base[k] + 1
                else:
                    w *= 1.0 - frac[k]
                    idx[k] = base[k]
                node += idx[k] * strides[k]
            if w == 0.0:
                continue
            for k in range(nd):
                out[m, k] += w * _node_central_diff(vals, shape, strides, h, node, idx, k)
        clamped[m] = flag


def interpolate(field: ScalarField, points) -> tuple[Any, Any]:
    """Multilinear interpolation of ``field`` at one point or an (m, ndim) batch.

    Returns ``(value, clamped)``; for a batch both are arrays.
    """
    pts, single = _prepare_points(field.spec, points)
    shape, lo, h = _grid_arrays(field.spec)
    out = np.empty(pts.shape[0])
    clamped = np.zeros(pts.shape[0], dtype=np.bool_)
    _interp_kernel(field.values.reshape(-1), shape, lo, h, pts, out, clamped)
    if single:
        return float(out[0]), bool(clamped[0])
    return out, clamped


def gradient_at(field: ScalarField, points) -> tuple[Any, Any]:
    """Gradient of ``field`` at one point or an (m, ndim) batch.

    Node gradients are central differences (one-sided at the edges), blended
    multilinearly to the query point.  They are computed on the fly from the
    enclosing corners, which gives the same numbers as precomputing every node
    gradient with ``np.gradient(..., edge_order=1)`` and interpolating those,
    without materialising ``ndim`` extra copies of a large field.
    """
    pts, single = _prepare_points(field.spec, points)
    shape, lo, h = _grid_arrays(field.spec)
    out = np.empty(pts.shape)
    clamped = np.zeros(pts.shape[0], dtype=np.bool_)
    _grad_kernel(field.values.reshape(-1), shape, lo, h, pts, out, clamped)
    if single:
        return out[0], bool(clamped[0])
    return out, clamped


def interpolate_many(field: ScalarField, points: np.ndarray, chunk: int = 1_000_000) -> np.ndarray:
    """Clamped interpolation of a large batch, processed in chunks; flags dropped."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        out[start : start + chunk] = interpolate(field, points[start : start + chunk])[0]
    return out


# ---------------------------------------------------------------------------
# HJVF binary format


def write_field(path: str | Path, field: ScalarField, meta: dict[str, Any] | None = None) -> Path:
    """Write ``field`` as HJVF (little-endian) plus an optional ``.meta.json`` sidecar."""
    path = Path(path)
    spec = field.spec
    with open(path, "wb") as fh:
        fh.write(HJVF_MAGIC)
        fh.write(struct.pack("<II", HJVF_VERSION, spec.ndim))
        for c, a, b in zip(spec.counts, spec.lo, spec.hi):
            fh.write(struct.pack("<Qdd", c, a, b))
        field.values.astype("<f8", copy=False).reshape(-1).tofile(fh)
    if meta is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _read_header(fh) -> tuple[GridSpec, int]:
    magic = fh.read(4)
    if magic != HJVF_MAGIC:
        raise ValueError(f"not an HJVF file (magic {magic!r})")
    version, ndim = struct.unpack("<II", fh.read(8))
    if version != HJVF_VERSION:
        raise ValueError(f"unsupported HJVF version {version}")
    counts, lo, hi = [], [], []
    for _ in range(ndim):
        c, a, b = struct.unpack("<Qdd", fh.read(24))
        counts.append(c)
        lo.append(a)
        hi.append(b)
    return GridSpec(tuple(counts), tuple(lo), tuple(hi)), fh.tell()


def read_field(path: str | Path, mmap: bool = False) -> ScalarField:
    """Read an HJVF file.  ``mmap=True`` maps the payload read-only."""
    path = Path(path)
    with open(path, "rb") as fh:
        spec, offset = _read_header(fh)
    if mmap:
        values = np.memmap(path, dtype="<f8", mode="r", offset=offset, shape=(spec.size,))
        field = ScalarField.__new__(ScalarField)
        field.spec = spec
        field.values = np.asarray(values).reshape(spec.shape)
        return field
    values = np.fromfile(path, dtype="<f8", offset=offset)
    if values.size != spec.size:
        raise ValueError(f"truncated HJVF payload: {values.size} of {spec.size} values")
    return ScalarField(spec, values.astype(np.float64, copy=False), copy=False)


def read_meta(path: str | Path) -> dict[str, Any]:
    side = sidecar_path(path)
    if not side.exists():
        return {}
    return json.loads(side.read_text())


# ---------------------------------------------------------------------------
# crossing-time fields


@numba.njit(cache=True)
def _time_kernel(vals, shape, lo, h, pts, out):
    nd = shape.shape[0]
    strides = _strides(shape)
    base = np.empty(nd, dtype=np.int64)
    frac = np.empty(nd)
    for m in range(pts.shape[0]):
        for k in range(nd):
            i, t, _ = _locate(pts[m, k], lo[k], h[k], shape[k])
            base[k] = i
            frac[k] = t
        acc = 0.0
        for corner in range(1 << nd):
            w = 1.0
            off = 0
            for k in range(nd):
                if (corner >> k) & 1:
                    w *= frac[k]
                    off += (base[k] + 1) * strides[k]
                else:
                    w *= 1.0 - frac[k]
                    off += base[k] * strides[k]
            if w != 0.0:
                v = vals[off]
                if v == np.inf:
                    acc = np.inf
                    break
                acc += w * v
        out[m] = acc


class TimeField:
    """Earliest zero-crossing horizon per node; ``inf`` marks nodes that never cross."""

    __slots__ = ("spec", "times")

    def __init__(self, spec: GridSpec, times: np.ndarray) -> None:
        arr = np.array(times, dtype=np.float64).reshape(spec.shape)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ValueError("crossing times must be non-negative (inf allowed)")
        arr.flags.writeable = False
        self.spec = spec
        self.times = arr

    def __repr__(self) -> str:
        return f"TimeField(shape={self.spec.shape})"

    def query(self, points) -> tuple[Any, Any]:
        """Interpolated time; any contributing corner at ``inf`` gives ``inf``."""
        pts, single = _prepare_points(self.spec, points)
        shape, lo, h = _grid_arrays(self.spec)
        out = np.empty(pts.shape[0])
        _time_kernel(self.times.reshape(-1), shape, lo, h, pts, out)
        clamped = np.array([not self.spec.contains(p) for p in pts])
        if single:
            return float(out[0]), bool(clamped[0])
        return out, clamped

    def as_field(self) -> ScalarField:
        """View as a ScalarField (``inf`` preserved) for HJVF storage."""
        f = ScalarField.__new__(ScalarField)
        f.spec = self.spec
        f.values = self.times
        return f
