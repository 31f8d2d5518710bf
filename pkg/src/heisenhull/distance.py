"""Gauge distances to regions through clouds of vertical boundary segments.

A region's boundary is approximated on a square lattice of columns with
spacing ``sigma``: every end point of a column interval is a point element,
and where two neighbouring columns differ the difference becomes a vertical
segment halfway between them.  Distances to vertical segments have a closed
form in either metric because the optimal height is a clamp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .group import as_points


@dataclass(frozen=True, eq=False)
class BoundaryCloud:
    elements: np.ndarray  # (N, 4): x, y, z0, z1
    bin_size: float

    def __post_init__(self):
        el = np.ascontiguousarray(self.elements, dtype=np.float64)
        if el.ndim != 2 or el.shape[1] != 4 or len(el) == 0:
            raise ValueError("boundary cloud is empty")
        object.__setattr__(self, "elements", el)
        bsz = float(self.bin_size)
        x0 = el[:, 0].min() - 1e-9
        y0 = el[:, 1].min() - 1e-9
        nbx = int((el[:, 0].max() - x0) // bsz) + 1
        nby = int((el[:, 1].max() - y0) // bsz) + 1
        bi = np.minimum(((el[:, 0] - x0) // bsz).astype(np.int64), nbx - 1)
        bj = np.minimum(((el[:, 1] - y0) // bsz).astype(np.int64), nby - 1)
        b = bj * nbx + bi
        order = np.argsort(b, kind="stable")
        counts = np.bincount(b, minlength=nbx * nby)
        start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        zlo = np.full(nbx * nby, np.inf)
        zhi = np.full(nbx * nby, -np.inf)
        np.minimum.at(zlo, b, el[:, 2])
        np.maximum.at(zhi, b, el[:, 3])
        object.__setattr__(self, "_bins", (order, start, zlo, zhi, x0, y0, bsz, nbx, nby))

    def __len__(self):
        return len(self.elements)

    def distance(self, points, metric: str = "right", cap: float = np.inf) -> np.ndarray:
        """Gauge distance from each point to the cloud.

        Values above ``cap`` are only guaranteed to exceed ``cap``.
        """
        if metric not in ("left", "right"):
            raise ValueError(f"metric must be 'left' or 'right', got {metric!r}")
        pts = as_points(points).reshape(-1, 3)
        out = np.empty(len(pts))
        order, start, zlo, zhi, x0, y0, bsz, nbx, nby = self._bins
        el = self.elements
        _kernels.cloud_distance(
            np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
            np.ascontiguousarray(pts[:, 2]), el[:, 0].copy(), el[:, 1].copy(),
            el[:, 2].copy(), el[:, 3].copy(), order, start, zlo, zhi, x0, y0, bsz,
            nbx, nby, metric == "right", float(cap), out)
        return out

    def neighborhood_columns(self, cx, cy, eps, base_lo, base_hi, base_cnt, max_out):
        n = len(cx)
        out_lo = np.full((n, max_out), np.nan)
        out_hi = np.full((n, max_out), np.nan)
        out_cnt = np.zeros(n, dtype=np.int64)
        order, start, _, _, x0, y0, bsz, nbx, nby = self._bins
        el = self.elements
        M = base_lo.shape[-1]
        _kernels.neighborhood_columns(
            np.ascontiguousarray(cx), np.ascontiguousarray(cy), el[:, 0].copy(),
            el[:, 1].copy(), el[:, 2].copy(), el[:, 3].copy(), order, start, x0, y0,
            bsz, nbx, nby, float(eps), np.ascontiguousarray(base_lo.reshape(n, M)),
            np.ascontiguousarray(base_hi.reshape(n, M)),
            np.ascontiguousarray(base_cnt.reshape(n)), max_out, out_lo, out_hi, out_cnt)
        return out_lo, out_hi, out_cnt


def column_lattice(region, sigma: float):
    """Axes of a column lattice on multiples of ``sigma`` covering ``region``."""
    lo, hi = region.bounds()
    i0 = int(np.floor(lo[0] / sigma)) - 2
    i1 = int(np.ceil(hi[0] / sigma)) + 2
    j0 = int(np.floor(lo[1] / sigma)) - 2
    j1 = int(np.ceil(hi[1] / sigma)) + 2
    return np.arange(i0, i1 + 1) * sigma, np.arange(j0, j1 + 1) * sigma


def boundary_cloud(region, sigma: float, bin_size: float | None = None) -> BoundaryCloud:
    if not sigma > 0:
        raise ValueError("lattice spacing must be positive")
    xs, ys = column_lattice(region, sigma)
    X, Y = np.meshgrid(xs, ys)
    lo, hi, cnt = region.column_intervals(X, Y)
    lo = np.ascontiguousarray(np.where(np.isfinite(lo), lo, 0.0))
    hi = np.ascontiguousarray(np.where(np.isfinite(hi), hi, 0.0))
    el = _kernels.staircase_elements(xs, ys, lo, hi, np.ascontiguousarray(cnt),
                                     len(xs), len(ys))
    if len(el) == 0:
        raise ValueError("region has an empty boundary sample at this resolution")
    if bin_size is None:
        bin_size = max(8 * sigma, 0.02)
    return BoundaryCloud(el, bin_size)


def signed_distance(region, points, sigma: float, metric: str = "right",
                    cap: float = np.inf, cloud: BoundaryCloud | None = None):
    """Negative distance to the complement inside, distance to the set outside."""
    pts = as_points(points)
    flat = pts.reshape(-1, 3)
    if cloud is None:
        cloud = boundary_cloud(region, sigma)
    d = cloud.distance(flat, metric=metric, cap=cap)
    inside = region.contains(flat)
    return np.where(inside, -d, d).reshape(pts.shape[:-1])
