"""H-convex hulls of sets through envelopes of defining functions.

For an open bounded ``E`` with defining function ``f`` (negative exactly on
``E``, equal to ``K`` near the box boundary), the hull is the strict zero
sublevel set of the quasiconvex envelope of ``f``; closed sets use the
non-strict sublevel.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from . import _kernels
from .direct import ScanParams, t_iterate
from .distance import BoundaryCloud, boundary_cloud
from .grid import BoxDomain, GridField, interpolation_error, sublevel_mask
from .group import as_points, dilate
from .hj import HamiltonianParams, SolveParams, pde_envelope
from .regions import Box, LeftNeighborhood, RegionSpec


def _shell(domain: BoxDomain, dims, K: float) -> GridField:
    return GridField(domain, dims, np.zeros(int(np.prod(dims))), K)


def _default_sigma(grid: GridField) -> float:
    return float(grid.spacing.min()) / 4.0


def _check_inside(region: RegionSpec, domain: BoxDomain):
    lo, hi = region.bounds()
    if np.any(lo <= np.asarray(domain.lo)) or np.any(hi >= np.asarray(domain.hi)):
        raise ValueError("region must lie strictly inside the domain")


def psi_field(region: RegionSpec, domain: BoxDomain, dims, sigma: float | None = None) -> GridField:
    """``-d(p, complement of E)`` in the right-invariant gauge metric, 0 off ``E``."""
    if not region.open:
        raise ValueError("psi_field needs an open region")
    _check_inside(region, domain)
    grid = _shell(domain, dims, 0.0)
    cloud = boundary_cloud(region, sigma or _default_sigma(grid))
    nodes = grid.nodes().reshape(-1, 3)
    inside = region.contains(nodes)
    vals = np.zeros(len(nodes))
    if inside.any():
        vals[inside] = -cloud.distance(nodes[inside], metric="right")
    return grid.with_values(vals)


def defining_function(region: RegionSpec, domain: BoxDomain, K: float, dims,
                      sigma: float | None = None) -> GridField:
    """``min(K, signed right-invariant distance to E)`` on the grid.

    Raises if the plateau ``K`` is not reached on the boundary node layer,
    reporting how much clearance is missing.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    _check_inside(region, domain)
    grid = _shell(domain, dims, K)
    cloud = boundary_cloud(region, sigma or _default_sigma(grid))
    nodes = grid.nodes().reshape(-1, 3)
    inside = region.contains(nodes)
    d = cloud.distance(nodes, metric="right", cap=K)
    vals = np.minimum(K, np.where(inside, -d, d))
    if not region.open:
        # closed sets keep their boundary nodes in the non-strict sublevel
        vals = np.where(inside, np.minimum(vals, 0.0), vals)
    out = grid.with_values(vals)
    from .hj import boundary_layer

    layer = out.values[boundary_layer(out.values.shape)]
    if np.any(layer < K):
        short = float(K - layer.min())
        raise ValueError(
            f"the boundary layer comes within {float(layer.min()):.4g} of the region; "
            f"enlarge the domain or lower K by at least {short:.4g}")
    return out


@dataclass
class HullResult:
    envelope: GridField
    hull_mask: np.ndarray
    defining: GridField
    K: float
    method: str
    report: object = None
    region_mask: np.ndarray = dc_field(default=None, repr=False)

    @property
    def hull_nodes(self) -> np.ndarray:
        return self.envelope.nodes()[self.hull_mask]

    def to_csv(self, path) -> None:
        write_points(self.hull_nodes, path)


def write_points(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for p in np.asarray(points).reshape(-1, 3):
            w.writerow([repr(float(v)) for v in p])


def envelope(f: GridField, method: str = "direct", scan: ScanParams = ScanParams(),
             max_iter: int = 50, tol_fix: float = 1e-6,
             hparams: HamiltonianParams = HamiltonianParams(),
             sp: SolveParams = SolveParams()):
    """Quasiconvex envelope by either route; returns ``(field, report)``."""
    if method == "direct":
        env, _, rep = t_iterate(f, scan, max_iter=max_iter, tol_fix=tol_fix)
    elif method == "pde":
        env, rep = pde_envelope(f, hparams, sp)
    else:
        raise ValueError(f"method must be 'direct' or 'pde', got {method!r}")
    return env, rep


def hull_compute(region: RegionSpec, domain: BoxDomain, K: float, dims,
                 method: str = "direct", sigma: float | None = None, **solver) -> HullResult:
    f = defining_function(region, domain, K, dims, sigma)
    env, rep = envelope(f, method, **solver)
    mask = sublevel_mask(env, 0.0, strict=region.open)
    return HullResult(env, mask, f, K, method, rep, sublevel_mask(f, 0.0, strict=region.open))


def gauge_ball_stencil(delta: float, step: float, n_z: int = 5) -> np.ndarray:
    """Group elements ``g`` with ``|g| <= delta``: a square lattice of spacing
    ``step`` in the disk of radius ``delta``, ``n_z`` heights per column
    (always including the top and bottom of the ball)."""
    k = int(np.ceil(delta / step))
    ax = np.arange(-k, k + 1) * step
    gx, gy = (a.ravel() for a in np.meshgrid(ax, ax))
    r2 = gx * gx + gy * gy
    keep = r2 <= delta * delta
    gx, gy, r2 = gx[keep], gy[keep], r2[keep]
    w = np.sqrt(np.maximum(delta ** 4 - r2 * r2, 0.0)) / 4.0
    t = np.linspace(-1.0, 1.0, max(int(n_z), 2))
    g = np.stack([np.repeat(gx, len(t)), np.repeat(gy, len(t)),
                  (w[:, None] * t).ravel()], axis=-1)
    return np.unique(g, axis=0)


def supconv_interior(domain, points, delta: float) -> np.ndarray:
    """True where the whole right ball of radius ``delta`` about a point lies in the box.

    Outside this set the sup-convolution reads the plateau ``K`` from beyond
    the box, which reflects the truncation rather than ``u``.
    """
    p = np.asarray(points, dtype=float)
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    # for q = g p: |q_xy - p_xy| <= delta and |q_z - p_z| <= delta^2/4 + delta |p_xy| / 2
    rz = delta ** 2 / 4 + delta * np.hypot(p[..., 0], p[..., 1]) / 2
    ok = np.ones(p.shape[:-1], dtype=bool)
    for ax in range(2):
        ok &= (p[..., ax] - delta >= lo[ax]) & (p[..., ax] + delta <= hi[ax])
    return ok & (p[..., 2] - rz >= lo[2]) & (p[..., 2] + rz <= hi[2])


def sup_convolution(field: GridField, delta: float, step: float | None = None,
                    n_z: int = 5) -> GridField:
    """``u^delta(p) = max u(q)`` over the closed right-invariant ball ``|p q^-1| <= delta``.

    The ball is sampled by a fixed stencil of group elements ``g`` (so
    ``q = g p``) and ``u`` is read through the trilinear interpolant; each
    ``p -> u(g p)`` is a left translate of ``u``.  ``step`` defaults to half
    the horizontal grid spacing.  Points outside the box read the plateau
    ``K``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if delta < float(field.spacing.min()):
        warnings.warn("delta is below the grid spacing; the ball barely reaches "
                      "neighbouring nodes", stacklevel=2)
    lo, _, h, n = field._geom()
    g = gauge_ball_stencil(float(delta), float(step or min(h[0], h[1]) / 2), n_z)
    out = np.empty_like(field.values)
    _kernels.supconv_kernel(field.values, lo, h, n, field.K, g, out)
    return field.with_values(out)


def supconv_error(field: GridField, delta: float) -> np.ndarray:
    """Interpolation error estimate for ``sup_convolution(field, delta)``.

    The sup-convolution reads ``field`` through its interpolant, so it
    inherits that error from every point of the ball.  Per node this is the
    larger of the result's own estimate and the source estimate maximised
    over a box covering all right balls of radius ``delta``.
    """
    lo, hi = np.asarray(field.domain.lo), np.asarray(field.domain.hi)
    h = field.spacing
    r_max = float(np.hypot(np.abs([lo[0], hi[0]]).max(), np.abs([lo[1], hi[1]]).max()))
    kx = int(np.ceil(delta / h[0] - 1e-9))
    ky = int(np.ceil(delta / h[1] - 1e-9))
    kz = int(np.ceil((delta ** 2 / 4 + delta * r_max / 2) / h[2] - 1e-9))
    inherited = ndimage.maximum_filter(interpolation_error(field),
                                       size=(2 * kz + 1, 2 * ky + 1, 2 * kx + 1), mode="nearest")
    own = interpolation_error(sup_convolution(field, delta))
    return np.maximum(own, inherited)


def point_cloud(points, bin_size: float | None = None) -> BoundaryCloud:
    pts = as_points(points).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("point set is empty")
    el = np.column_stack([pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 2]])
    if bin_size is None:
        span = np.ptp(pts[:, :2], axis=0).max() if len(pts) > 1 else 1.0
        bin_size = max(span / max(np.sqrt(len(pts)) / 4, 1.0), 1e-3)
    return BoundaryCloud(el, bin_size)


def set_distance(A, B, metric: str = "right") -> float:
    """``min d(a, b)`` over the two finite sets (``d(a, b)`` with ``a`` first)."""
    return float(point_cloud(B).distance(A, metric=metric).min())


def hausdorff(A, B, metric: str = "left") -> float:
    """Hausdorff distance between finite point sets."""
    A = as_points(A).reshape(-1, 3)
    B = as_points(B).reshape(-1, 3)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("Hausdorff distance needs nonempty sets")
    ab = point_cloud(B).distance(A, metric=metric).max()
    ba = point_cloud(A).distance(B, metric=metric).max()
    return float(max(ab, ba))


def sublevel_cloud(field: GridField, level: float = 0.0, strict: bool = True,
                   sigma: float | None = None) -> BoundaryCloud:
    """Boundary cloud of the sublevel set of the *interpolated* field.

    Columns sit on multiples of ``sigma`` (default half the horizontal grid
    spacing); along each column the interval end points are exact roots of
    the trilinear interpolant.
    """
    lo, hi, h, n = field._geom()
    sig = float(sigma or min(h[0], h[1]) / 2)
    xs = np.arange(np.ceil(lo[0] / sig), np.floor(hi[0] / sig) + 1) * sig
    ys = np.arange(np.ceil(lo[1] / sig), np.floor(hi[1] / sig) + 1) * sig
    X, Y = np.meshgrid(xs, ys)
    m = 16
    out_lo = np.zeros((X.size, m))
    out_hi = np.zeros((X.size, m))
    cnt = np.zeros(X.size, dtype=np.int64)
    _kernels.sublevel_columns(field.values, lo, h, n, float(level), bool(strict),
                              X.ravel(), Y.ravel(), out_lo, out_hi, cnt)
    el = _kernels.staircase_elements(xs, ys, out_lo.reshape(len(ys), len(xs), m),
                                     out_hi.reshape(len(ys), len(xs), m),
                                     cnt.reshape(len(ys), len(xs)), len(xs), len(ys))
    if len(el) == 0:
        raise ValueError("the sublevel set is empty")
    return BoundaryCloud(el, max(8 * sig, 0.02))


def level_set_hausdorff(a: GridField, b: GridField, level: float = 0.0, strict: bool = True,
                        metric: str = "left", sigma: float | None = None) -> float:
    """Hausdorff distance between the sublevel sets of two interpolated fields.

    Distances are measured from boundary points and nodes of one set to the
    boundary cloud of the other (zero for points inside it).  Unlike
    :func:`hausdorff` on node sets this is free of the vertical node spacing,
    which the gauge metric amplifies to ``2 sqrt(h_z)``.
    """
    ca = sublevel_cloud(a, level, strict, sigma)
    cb = sublevel_cloud(b, level, strict, sigma)

    def one_way(src_field, src_cloud, dst_field, dst_cloud):
        el = src_cloud.elements
        pts = np.concatenate([el[:, [0, 1, 2]], el[:, [0, 1, 3]],
                              src_field.nodes()[sublevel_mask(src_field, level, strict)]])
        vals = dst_field(pts)
        inside = vals < level if strict else vals <= level
        out = pts[~inside]
        return float(dst_cloud.distance(out, metric=metric).max()) if len(out) else 0.0

    return max(one_way(a, ca, b, cb), one_way(b, cb, a, ca))


def _sample_region(region, n, rng):
    lo, hi = region.bounds()
    out, need = [], n
    for _ in range(1000):
        if need <= 0:
            break
        cand = rng.uniform(lo, hi, size=(max(4 * need, 256), 3))
        cand = cand[region.contains(cand)][:need]
        out.append(cand)
        need -= len(cand)
    if need > 0:
        raise ValueError("could not sample points inside the region")
    return np.concatenate(out)


def inclusion_margins(D: RegionSpec, E: RegionSpec, domain: BoxDomain, K: float, dims,
                      method: str = "direct", sigma: float | None = None,
                      n_check: int = 2000, seed: int = 0, **solver):
    """Right-invariant gaps before and after taking hulls.

    ``rhs`` is the smallest distance from a node of ``D`` to a node outside
    ``E``; ``lhs`` is the same for the computed hulls.
    """
    rng = np.random.default_rng(seed)
    samples = _sample_region(D, n_check, rng)
    if not np.all(E.contains(samples)):
        raise ValueError("D is not contained in E")
    hd = hull_compute(D, domain, K, dims, method, sigma, **solver)
    he = hull_compute(E, domain, K, dims, method, sigma, **solver)
    nodes = hd.envelope.nodes()
    rhs = set_distance(nodes[hd.region_mask], nodes[~he.region_mask], "right")
    lhs = set_distance(nodes[hd.hull_mask], nodes[~he.hull_mask], "right")
    return lhs, rhs


@dataclass
class StarProbeReport:
    connected: bool
    contained: dict
    clearance: dict
    gaps: list
    star_shaped: bool

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "hausdorff_gap"])
            for eps, gap in self.gaps:
                w.writerow([repr(float(eps)), repr(float(gap))])


def star_stability_probe(region: RegionSpec, lambdas, eps_list, domain: BoxDomain, K: float,
                         dims, method: str = "direct", sigma: float | None = None,
                         n_samples: int = 4000, seed: int = 0, neighborhood_sigma=None,
                         **solver) -> StarProbeReport:
    """Star-shapedness sampling plus hull gaps under neighbourhood growth."""
    rng = np.random.default_rng(seed)
    grid = _shell(domain, dims, K)
    sig = sigma or _default_sigma(grid)
    inside = region.contains(grid.nodes())
    _, ncomp = ndimage.label(inside, structure=np.ones((3, 3, 3)))
    connected = ncomp == 1
    pts = _sample_region(region, n_samples, rng)
    cloud = boundary_cloud(region, sig)
    contained, clearance = {}, {}
    for lam in lambdas:
        if not 0 <= lam < 1:
            raise ValueError("dilation factors must lie in [0, 1)")
        q = dilate(lam, pts)
        ok = region.contains(q)
        contained[lam] = bool(ok.all())
        clearance[lam] = float(cloud.distance(q[ok], metric="left").min()) if ok.any() else 0.0
    star = connected and all(contained.values()) and all(c > 0 for c in clearance.values())
    gaps = []
    if eps_list:
        base = hull_compute(region, domain, K, dims, method, sig, **solver)
        for eps in eps_list:
            nb = RegionSpec((LeftNeighborhood(region, float(eps), neighborhood_sigma or sig),),
                            region.open)
            hn = hull_compute(nb, domain, K, dims, method, sig, **solver)
            gaps.append((float(eps), level_set_hausdorff(base.envelope, hn.envelope, 0.0,
                                                         region.open, "left")))
    return StarProbeReport(connected, contained, clearance, gaps, star)


def barrier(f: GridField, sigma: float | None = None) -> GridField:
    """Quasiconvex minorant ``K - w(d(p))`` of a field with plateau ``K``.

    ``d(p)`` is the right-invariant distance to the outside of the box and
    ``w(r)`` the largest drop ``K - f(q)`` among nodes with ``d(q) <= r``.
    """
    lo, hi = np.asarray(f.domain.lo), np.asarray(f.domain.hi)
    box = RegionSpec.of(Box(tuple(lo), tuple(hi)))
    cloud = boundary_cloud(box, sigma or _default_sigma(f))
    d = cloud.distance(f.nodes().reshape(-1, 3), metric="right")
    drop = f.K - f.values.ravel()
    order = np.argsort(d, kind="stable")
    w_sorted = np.maximum.accumulate(drop[order])
    # nodes at equal distance share the largest drop among them
    ds = d[order]
    last = np.searchsorted(ds, ds, side="right") - 1
    w = np.empty_like(drop)
    w[order] = w_sorted[last]
    return f.with_values(f.K - w)
