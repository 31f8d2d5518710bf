"""Scalar fields on uniform grids over boxes.

Values are stored as ``values[k, j, i]`` for the node
``(lo.x + i*hx, lo.y + j*hy, lo.z + k*hz)``, so a C-order ravel is x-fastest.
Outside the box a field evaluates to its exterior plateau ``K``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .group import Point, as_points

_MAGIC = "HHFIELD1"


@dataclass(frozen=True)
class BoxDomain:
    lo: Point
    hi: Point

    def __post_init__(self):
        lo = Point(*map(float, self.lo))
        hi = Point(*map(float, self.hi))
        if not all(np.isfinite(lo + hi)):
            raise ValueError("box corners must be finite")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo < hi componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, half: float) -> "BoxDomain":
        return cls((-half, -half, -half), (half, half, half))

    def contains(self, p, tol: float = 0.0) -> np.ndarray:
        p = as_points(p)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((p >= lo) & (p <= hi), axis=-1)


@dataclass(frozen=True)
class SliceSpec:
    axis: str
    value: float

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"slice axis must be x, y or z, got {self.axis!r}")


class HorizGrad(NamedTuple):
    x1: np.ndarray
    x2: np.ndarray
    clamped: np.ndarray


@dataclass(frozen=True, eq=False)
class GridField:
    """Immutable node field with exterior plateau ``K``."""

    domain: BoxDomain
    dims: tuple
    values: np.ndarray = dc_field(repr=False)
    K: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise ValueError(f"dims must be three integers >= 2, got {self.dims}")
        vals = np.array(self.values, dtype=np.float64, order="C")
        nx, ny, nz = dims
        if vals.size != nx * ny * nz:
            raise ValueError(f"expected {nx * ny * nz} values, got {vals.size}")
        vals = vals.reshape(nz, ny, nx)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if not np.isfinite(self.K):
            raise ValueError("K must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "K", float(self.K))

    # geometry -------------------------------------------------------------
    @property
    def spacing(self) -> np.ndarray:
        lo, hi = np.asarray(self.domain.lo), np.asarray(self.domain.hi)
        return (hi - lo) / (np.asarray(self.dims) - 1)

    def axes(self):
        lo, h = np.asarray(self.domain.lo), self.spacing
        return tuple(lo[a] + h[a] * np.arange(self.dims[a]) for a in range(3))

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``(nz, ny, nx, 3)``."""
        xs, ys, zs = self.axes()
        Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def _geom(self):
        return (np.asarray(self.domain.lo, dtype=np.float64),
                np.asarray(self.domain.hi, dtype=np.float64),
                self.spacing.astype(np.float64),
                np.asarray(self.dims, dtype=np.int64))

    def with_values(self, values, K: float | None = None) -> "GridField":
        return GridField(self.domain, self.dims, values, self.K if K is None else K)

    def __call__(self, p):
        return eval_field(self, p)


def build_field(domain: BoxDomain, dims, generator: Callable, K: float,
                coercive: bool = False) -> GridField:
    """Sample ``generator`` at the grid nodes.

    ``generator`` receives an array of points ``(..., 3)`` and must return
    matching values.  With ``coercive`` the values are clipped to ``<= K``.
    """
    shell = GridField(domain, dims, np.zeros(int(np.prod(dims))), K)
    vals = np.asarray(generator(shell.nodes()), dtype=np.float64)
    vals = np.broadcast_to(vals, shell.values.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("generator produced non-finite values")
    if coercive:
        vals = np.minimum(vals, K)
    return shell.with_values(vals)


def eval_field(field: GridField, p) -> np.ndarray | float:
    """Trilinear interpolation; ``field.K`` outside the box."""
    pts = as_points(p)
    flat = np.ascontiguousarray(pts.reshape(-1, 3))
    out = np.empty(flat.shape[0])
    lo, _, h, n = field._geom()
    _kernels.interp_many(field.values, lo, h, n, field.K, flat, out)
    if pts.ndim == 1:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def _partial(field, pts, axis, step):
    h = field.spacing[axis]
    lo = np.asarray(field.domain.lo)[axis]
    hi = np.asarray(field.domain.hi)[axis]
    c = pts[..., axis]
    fwd_ok = c + step <= hi + 1e-12 * (hi - lo)
    bwd_ok = c - step >= lo - 1e-12 * (hi - lo)
    e = np.zeros(3)
    e[axis] = step
    up = np.where(fwd_ok[..., None], pts + e, pts)
    dn = np.where(bwd_ok[..., None], pts - e, pts)
    span = np.where(fwd_ok, step, 0.0) + np.where(bwd_ok, step, 0.0)
    d = (eval_field(field, up) - eval_field(field, dn)) / np.maximum(span, 1e-300)
    d = np.where(span > 0, d, 0.0)
    return d, ~(fwd_ok & bwd_ok)


def horiz_grad(field: GridField, p) -> HorizGrad:
    """``(X1 u, X2 u)`` from central differences of ``u_x, u_y, u_z``.

    Steps equal the grid spacing.  Within one cell of the boundary the
    differences turn one-sided and ``clamped`` is set.
    """
    pts = as_points(p)
    h = field.spacing
    ux, cx = _partial(field, pts, 0, h[0])
    uy, cy = _partial(field, pts, 1, h[1])
    uz, cz = _partial(field, pts, 2, h[2])
    x, y = pts[..., 0], pts[..., 1]
    return HorizGrad(ux - 0.5 * y * uz, uy + 0.5 * x * uz, cx | cy | cz)


def sublevel_extract(field: GridField, level: float, strict: bool) -> np.ndarray:
    """Coordinates ``(m, 3)`` of nodes below (or at) ``level``."""
    mask = sublevel_mask(field, level, strict)
    return field.nodes()[mask]


def sublevel_mask(field: GridField, level: float, strict: bool) -> np.ndarray:
    v = field.values
    return v < level if strict else v <= level


def _check_compatible(a: GridField, b: GridField):
    if a.dims != b.dims or a.domain != b.domain:
        raise ValueError("fields live on different grids")


def linf_diff(a: GridField, b: GridField) -> float:
    _check_compatible(a, b)
    return float(np.max(np.abs(a.values - b.values)))


def save(field: GridField, path) -> None:
    nx, ny, nz = field.dims
    nums = [*field.domain.lo, *field.domain.hi, field.K]
    header = f"{_MAGIC} {nx} {ny} {nz} " + " ".join(repr(float(v)) for v in nums) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(field.values.astype("<f8").tobytes(order="C"))
    os.replace(tmp, path)


def load(path) -> GridField:
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    try:
        parts = header.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise ValueError(f"{path}: malformed field header") from exc
    if len(parts) != 11 or parts[0] != _MAGIC:
        raise ValueError(f"{path}: malformed field header")
    try:
        nx, ny, nz = (int(v) for v in parts[1:4])
        nums = [float(v) for v in parts[4:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed field header") from exc
    if len(payload) != 8 * nx * ny * nz:
        raise ValueError(f"{path}: expected {8 * nx * ny * nz} data bytes, found {len(payload)}")
    vals = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return GridField(BoxDomain(nums[0:3], nums[3:6]), (nx, ny, nz), vals, nums[6])


def slice_nodes(field: GridField, spec: SliceSpec):
    """Nodes and values on the grid plane nearest ``spec``."""
    a = "xyz".index(spec.axis)
    lo, hi = field.domain.lo[a], field.domain.hi[a]
    if not lo <= spec.value <= hi:
        raise ValueError(f"slice {spec.axis}={spec.value} lies outside [{lo}, {hi}]")
    idx = int(round((spec.value - lo) / field.spacing[a]))
    nodes = field.nodes()
    sel = [slice(None)] * 3
    sel[2 - a] = idx
    return nodes[tuple(sel)].reshape(-1, 3), field.values[tuple(sel)].ravel()


def export_slice(field: GridField, spec: SliceSpec, path) -> int:
    pts, vals = slice_nodes(field, spec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "value"])
        for p, v in zip(pts, vals):
            w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), repr(float(v))])
    return len(vals)


def interpolation_error(field: GridField) -> np.ndarray:
    """Node estimate of trilinear interpolation error.

    Sum over axes of |second difference| / 8, the leading term of the
    one-dimensional linear interpolation error bound.
    """
    v = field.values
    e = np.zeros_like(v)
    for ax in range(3):
        d2 = np.zeros_like(v)
        sl = [slice(None)] * 3
        sl[ax] = slice(1, -1)
        lo = [slice(None)] * 3
        lo[ax] = slice(0, -2)
        hi = [slice(None)] * 3
        hi[ax] = slice(2, None)
        d2[tuple(sl)] = np.abs(v[tuple(hi)] - 2.0 * v[tuple(sl)] + v[tuple(lo)])
        # copy the neighbour estimate onto the end layers
        first = [slice(None)] * 3
        first[ax] = 0
        second = [slice(None)] * 3
        second[ax] = 1
        last = [slice(None)] * 3
        last[ax] = -1
        prev = [slice(None)] * 3
        prev[ax] = -2
        d2[tuple(first)] = d2[tuple(second)]
        d2[tuple(last)] = d2[tuple(prev)]
        e += d2 / 8.0
    return e
