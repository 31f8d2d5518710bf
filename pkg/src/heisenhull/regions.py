"""Bounded regions described analytically.

Every primitive knows its exact membership and its *column intervals*: for a
vertical line over ``(x, y)`` the z-intervals it meets.  Column intervals are
what the distance fields and boundary clouds are built from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .group import as_points, dilate


class Primitive:
    #: max number of z-intervals per column
    n_intervals = 1

    def contains(self, p, closed: bool = False) -> np.ndarray:
        raise NotImplementedError

    def column_intervals(self, x, y):
        """Arrays ``lo, hi`` of shape ``x.shape + (n_intervals,)``; NaN = none."""
        raise NotImplementedError

    def bounds(self):
        raise NotImplementedError

    def dilated(self, lam: float) -> "Primitive":
        raise NotImplementedError(f"{type(self).__name__} does not support dilation")


def _cmp(a, b, closed):
    return a <= b if closed else a < b


@dataclass(frozen=True)
class GaugeBall(Primitive):
    """``{p : |c^-1 p| < radius}``."""

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def _twist(self, x, y):
        cx, cy, cz = self.center
        return cz + 0.5 * (cx * y - x * cy)

    def contains(self, p, closed=False):
        p = as_points(p)
        cx, cy, _ = self.center
        r2 = (p[..., 0] - cx) ** 2 + (p[..., 1] - cy) ** 2
        gz = p[..., 2] - self._twist(p[..., 0], p[..., 1])
        return _cmp(r2 * r2 + 16.0 * gz * gz, self.radius ** 4, closed)

    def column_intervals(self, x, y):
        cx, cy, _ = self.center
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        rem = self.radius ** 4 - r2 * r2
        w = np.sqrt(np.where(rem >= 0, rem, np.nan)) / 4.0
        mid = self._twist(x, y)
        return (mid - w)[..., None], (mid + w)[..., None]

    def bounds(self):
        cx, cy, cz = self.center
        R = self.radius
        tw = 0.5 * R * np.hypot(cx, cy)
        return (np.array([cx - R, cy - R, cz - R * R / 4 - tw]),
                np.array([cx + R, cy + R, cz + R * R / 4 + tw]))

    def dilated(self, lam):
        return GaugeBall(tuple(dilate(lam, self.center)), lam * self.radius)


@dataclass(frozen=True)
class Cylinder(Primitive):
    """Vertical circular cylinder ``|(x, y)| < radius, z0 < z < z1``."""

    radius: float
    z0: float
    z1: float

    def __post_init__(self):
        if not (self.radius > 0 and self.z1 > self.z0):
            raise ValueError("cylinder needs radius > 0 and z1 > z0")

    def contains(self, p, closed=False):
        p = as_points(p)
        r2 = p[..., 0] ** 2 + p[..., 1] ** 2
        return (_cmp(r2, self.radius ** 2, closed) & _cmp(self.z0, p[..., 2], closed)
                & _cmp(p[..., 2], self.z1, closed))

    def column_intervals(self, x, y):
        inside = x * x + y * y <= self.radius ** 2
        lo = np.where(inside, self.z0, np.nan)
        hi = np.where(inside, self.z1, np.nan)
        return lo[..., None], hi[..., None]

    def bounds(self):
        r = self.radius
        return np.array([-r, -r, self.z0]), np.array([r, r, self.z1])

    def dilated(self, lam):
        return Cylinder(lam * self.radius, lam * lam * self.z0, lam * lam * self.z1)


@dataclass(frozen=True)
class Box(Primitive):
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p, closed=False):
        p = as_points(p)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all(_cmp(lo, p, closed) & _cmp(p, hi, closed), axis=-1)

    def column_intervals(self, x, y):
        inside = ((x >= self.lo[0]) & (x <= self.hi[0])
                  & (y >= self.lo[1]) & (y <= self.hi[1]))
        lo = np.where(inside, self.lo[2], np.nan)
        hi = np.where(inside, self.hi[2], np.nan)
        return lo[..., None], hi[..., None]

    def bounds(self):
        return np.asarray(self.lo), np.asarray(self.hi)


def DiskStack(r: float, R: float, t: float, thickness: float):
    """Two coaxial cylinders: radius ``r`` over ``(-thickness, 0)`` and radius
    ``R`` over ``(t, t + thickness)``."""
    if not t > 0:
        raise ValueError("stack height t must be positive")
    return (Cylinder(r, -thickness, 0.0), Cylinder(R, t, t + thickness))


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """Union of primitives, open by default."""

    primitives: tuple
    open: bool = True

    def __post_init__(self):
        flat = []
        for prim in self.primitives:
            if isinstance(prim, (tuple, list)):
                flat.extend(prim)
            else:
                flat.append(prim)
        if not flat:
            raise ValueError("a region needs at least one primitive")
        for prim in flat:
            if not isinstance(prim, Primitive):
                raise TypeError(f"not a region primitive: {prim!r}")
        object.__setattr__(self, "primitives", tuple(flat))

    @classmethod
    def of(cls, *prims, open: bool = True) -> "RegionSpec":
        return cls(tuple(prims), open)

    def contains(self, p) -> np.ndarray:
        p = as_points(p)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for prim in self.primitives:
            out |= prim.contains(p, closed=not self.open)
        return out

    def bounds(self):
        los, his = zip(*(prim.bounds() for prim in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)

    def column_intervals(self, x, y):
        """Merged column intervals, arrays ``(..., M)`` plus a count array."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        los, his = zip(*(prim.column_intervals(x, y) for prim in self.primitives))
        lo = np.concatenate(los, axis=-1)
        hi = np.concatenate(his, axis=-1)
        return merge_columns(lo, hi)

    def dilated(self, lam: float) -> "RegionSpec":
        return RegionSpec(tuple(p.dilated(lam) for p in self.primitives), self.open)

    def union(self, other: "RegionSpec") -> "RegionSpec":
        return RegionSpec(self.primitives + other.primitives, self.open and other.open)


def merge_columns(lo, hi):
    """Sort and merge interval lists per column; NaN entries are dropped."""
    shape = lo.shape[:-1]
    M = lo.shape[-1]
    lo2 = np.ascontiguousarray(lo.reshape(-1, M))
    hi2 = np.ascontiguousarray(hi.reshape(-1, M))
    valid = np.isfinite(lo2) & np.isfinite(hi2) & (hi2 >= lo2)
    order = np.argsort(np.where(valid, lo2, np.inf), axis=1, kind="stable")
    lo2 = np.take_along_axis(np.where(valid, lo2, np.inf), order, axis=1)
    hi2 = np.take_along_axis(np.where(valid, hi2, -np.inf), order, axis=1)
    cnt = valid.sum(axis=1)
    out_cnt = np.empty(len(cnt), dtype=np.int64)
    for c in np.flatnonzero(cnt > 1):
        out_cnt[c] = _kernels.merge_intervals(lo2[c], hi2[c], cnt[c])
    single = cnt <= 1
    out_cnt[single] = cnt[single]
    return lo2.reshape(shape + (M,)), hi2.reshape(shape + (M,)), out_cnt.reshape(shape)


@dataclass(frozen=True, eq=False)
class LeftNeighborhood(Primitive):
    """Points within left-invariant gauge distance ``eps`` of ``inner``.

    Membership and column intervals come from the boundary cloud of
    ``inner`` sampled at lattice spacing ``sigma``.
    """

    inner: RegionSpec
    eps: float
    sigma: float = 0.01
    n_intervals: int = 16

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("neighbourhood radius must be positive")

    @cached_property
    def _cloud(self):
        from .distance import boundary_cloud

        return boundary_cloud(self.inner, self.sigma)

    def contains(self, p, closed=False):
        p = as_points(p)
        inside = self.inner.contains(p)
        d = self._cloud.distance(p.reshape(-1, 3), metric="left",
                                 cap=2 * self.eps).reshape(p.shape[:-1])
        return inside | _cmp(d, self.eps, closed)

    def column_intervals(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        flat_x = np.ascontiguousarray(x.reshape(-1))
        flat_y = np.ascontiguousarray(y.reshape(-1))
        b_lo, b_hi, b_cnt = self.inner.column_intervals(flat_x, flat_y)
        lo, hi, cnt = self._cloud.neighborhood_columns(
            flat_x, flat_y, self.eps, b_lo, b_hi, b_cnt, self.n_intervals)
        lo = np.where(np.arange(self.n_intervals) < cnt[:, None], lo, np.nan)
        hi = np.where(np.arange(self.n_intervals) < cnt[:, None], hi, np.nan)
        return lo.reshape(x.shape + (-1,)), hi.reshape(x.shape + (-1,))

    def bounds(self):
        lo, hi = self.inner.bounds()
        R = np.max(np.abs(np.concatenate([lo[:2], hi[:2]])))
        e = self.eps
        pad = np.array([e, e, e * e / 4 + 0.5 * e * np.sqrt(2) * R])
        return lo - pad, hi + pad
