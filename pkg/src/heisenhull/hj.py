"""Nonlocal Hamilton-Jacobi route to the quasiconvex envelope.

The scheme iterates ``u_n + H(p, u_n, grad_H u_n) = u_{n-1}`` from ``u_0 = f``,
where ``H`` is the supremum of ``<grad_H u(p), (p^-1 xi)_h>`` over points
``xi`` of the horizontal plane through ``p`` with ``u(xi) < u(p)``.

The horizontal plane is scanned on a polar grid: ``n_theta`` full-circle
directions, each with ``n_rho`` radii up to the point where the ray leaves the
box.  Two discretisations of the directional slope are available:

``"upwind"`` (default)
    one-sided difference ``(u(p) - u(p - e d)) / e`` against the ray, one cell
    long.  The resulting scheme is monotone, and it lowers points (such as
    the centre of a symmetric hump) where the centred gradient vanishes.
``"central"``
    the centred horizontal gradient dotted with the ray direction.

Each inner sweep solves the scalar equation ``v + H(v) = g(p)`` exactly at one
node with its neighbours frozen, then relaxes towards that root.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .grid import GridField, build_field, horiz_grad
from .group import as_points, gauge
from .report import SchemeReport

_STENCILS = ("upwind", "central")


@dataclass(frozen=True)
class HamiltonianParams:
    n_theta: int = 16
    n_rho: int = 24
    eps_strict: float | None = None
    use_nonstrict: bool = False
    stencil: str = "upwind"

    def __post_init__(self):
        if int(self.n_theta) < 8:
            raise ValueError("n_theta must be at least 8")
        if int(self.n_rho) < 2:
            raise ValueError("n_rho must be at least 2")
        if self.eps_strict is not None and self.eps_strict < 0:
            raise ValueError("eps_strict must be nonnegative")
        if self.stencil not in _STENCILS:
            raise ValueError(f"stencil must be one of {_STENCILS}, got {self.stencil!r}")

    def directions(self):
        th = 2.0 * np.pi * np.arange(int(self.n_theta)) / int(self.n_theta)
        return th, np.cos(th), np.sin(th)

    def eps_for(self, field: GridField) -> float:
        if self.eps_strict is not None:
            return float(self.eps_strict)
        v = field.values
        return 1e-9 * max(float(v.max() - v.min()), 1.0)


@dataclass(frozen=True)
class SolveParams:
    omega_relax: float = 0.8
    tol_inner: float = 1e-6
    max_inner: int = 200
    tol_outer: float = 1e-6
    max_outer: int = 50
    K: float | None = None

    def __post_init__(self):
        if not 0 < self.omega_relax <= 1:
            raise ValueError("omega_relax must lie in (0, 1]")
        if not (self.tol_inner > 0 and self.tol_outer > 0):
            raise ValueError("tolerances must be positive")
        if int(self.max_inner) < 1 or int(self.max_outer) < 1:
            raise ValueError("iteration caps must be positive")


class SublevelDirs(NamedTuple):
    points: np.ndarray  # (m, 3)
    h_coords: np.ndarray  # (m, 2)


class InnerReport(NamedTuple):
    iterations: int
    residual: float
    converged: bool
    seconds: float


def _ray_exit(field, p, d):
    lo = np.asarray(field.domain.lo)
    hi = np.asarray(field.domain.hi)
    with np.errstate(divide="ignore"):
        t = np.where(d > 0, (hi - p) / d, np.where(d < 0, (lo - p) / d, np.inf))
    return max(float(t.min()), 0.0)


def sublevel_dirs(field: GridField, p, level: float,
                  params: HamiltonianParams = HamiltonianParams()) -> SublevelDirs:
    """Polar samples of the horizontal plane through ``p`` below ``level``."""
    p = as_points(p)
    if not bool(field.domain.contains(p)):
        raise ValueError("p must lie inside the domain")
    eps = params.eps_for(field)
    th, cos_t, sin_t = params.directions()
    pts, hs = [], []
    k = np.arange(1, int(params.n_rho) + 1)
    for c, s in zip(cos_t, sin_t):
        d = np.array([c, s, 0.5 * (p[0] * s - p[1] * c)])
        L = _ray_exit(field, p, d)
        if L <= 0:
            continue
        rho = L * k / int(params.n_rho)
        xi = p + rho[:, None] * d
        val = field(xi)
        keep = val <= level + eps if params.use_nonstrict else val < level - eps
        pts.append(xi[keep])
        hs.append(np.stack([rho[keep] * c, rho[keep] * s], axis=-1))
    if not pts:
        return SublevelDirs(np.empty((0, 3)), np.empty((0, 2)))
    return SublevelDirs(np.concatenate(pts), np.concatenate(hs))


def hamiltonian_at(field: GridField, p, params: HamiltonianParams = HamiltonianParams(),
                   value: float | None = None) -> float:
    """Discrete Hamiltonian at ``p`` (nonnegative; 0 for an empty sublevel)."""
    p = as_points(p)
    if not bool(field.domain.contains(p)):
        raise ValueError("p must lie inside the domain")
    _, cos_t, sin_t = params.directions()
    lo, hi, h, n = field._geom()
    gx, gy, _ = horiz_grad(field, p)
    u_p = float(field(p)) if value is None else float(value)
    return float(_kernels.hamiltonian_point(
        field.values, u_p, lo, hi, h, n, field.K, p[0], p[1], p[2], float(gx),
        float(gy), cos_t, sin_t, int(params.n_rho), params.eps_for(field),
        params.stencil == "upwind", bool(params.use_nonstrict)))


def hamiltonian_field(field: GridField, params: HamiltonianParams = HamiltonianParams(),
                      nonstrict: bool | None = None) -> np.ndarray:
    """Discrete Hamiltonian at every interior node (0 on the boundary layer)."""
    _, cos_t, sin_t = params.directions()
    lo, hi, h, n = field._geom()
    out = np.empty_like(field.values)
    ns = params.use_nonstrict if nonstrict is None else nonstrict
    _kernels.hamiltonian_field(field.values, lo, hi, h, n, field.K, cos_t, sin_t,
                               int(params.n_rho), params.eps_for(field),
                               params.stencil == "upwind", bool(ns), out)
    return out


def boundary_layer(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[0, :, :] = mask[-1, :, :] = True
    mask[:, 0, :] = mask[:, -1, :] = True
    mask[:, :, 0] = mask[:, :, -1] = True
    return mask


def check_coercive(g: GridField, K: float | None = None) -> float:
    """Validate ``g = K`` on the boundary layer and ``g <= K``; returns ``K``."""
    K = g.K if K is None else float(K)
    if np.any(g.values[boundary_layer(g.values.shape)] != K):
        raise ValueError(f"field must equal K={K} on the boundary node layer")
    if np.any(g.values > K):
        raise ValueError(f"field exceeds K={K}")
    return K


def solve_step(g: GridField, params: HamiltonianParams = HamiltonianParams(),
               sp: SolveParams = SolveParams()):
    """Solve ``u + H(u) = g`` with ``u = K`` on the boundary layer.

    Damped Gauss-Seidel over the eight lexicographic sweep orders.  Returns
    ``(u, InnerReport)``; ``converged`` is False if ``max_inner`` ran out.
    """
    K = check_coercive(g, sp.K)
    if K != g.K:
        g = g.with_values(g.values, K)
    _, cos_t, sin_t = params.directions()
    lo, hi, h, n = g._geom()
    eps = params.eps_for(g)
    u = np.array(g.values)
    gv = g.values
    t0 = time.perf_counter()
    res = np.inf
    it = 0
    for it in range(1, int(sp.max_inner) + 1):
        res = _kernels.gs_sweep(u, gv, lo, hi, h, n, K, cos_t, sin_t, int(params.n_rho),
                                eps, float(sp.omega_relax), params.stencil == "upwind",
                                (it - 1) % 8)
        if res <= sp.tol_inner:
            break
    rep = InnerReport(it, float(res), bool(res <= sp.tol_inner), time.perf_counter() - t0)
    return g.with_values(u), rep


def pde_envelope(f: GridField, params: HamiltonianParams = HamiltonianParams(),
                 sp: SolveParams = SolveParams()):
    """Outer iteration ``u_n = solve_step(u_{n-1})`` from ``u_0 = f``.

    Returns ``(envelope, SchemeReport)``.  Raises ``RuntimeError`` if an
    iterate rises above its predecessor by more than ``1e-9``.
    """
    check_coercive(f, sp.K)
    report = SchemeReport()
    prev = f
    inner_ok = True
    for outer in range(1, int(sp.max_outer) + 1):
        t0 = time.perf_counter()
        cur, inner = solve_step(prev, params, sp)
        diff = cur.values - prev.values
        mono = float(max(0.0, diff.max()))
        change = float(np.max(np.abs(diff)))
        report.add(outer, inner.iterations, inner.residual, change, mono,
                   time.perf_counter() - t0)
        inner_ok &= inner.converged
        if mono > 1e-9:
            raise RuntimeError(f"outer iterate {outer} rose by {mono:.3e}; the scheme "
                               "must be nonincreasing")
        prev = cur
        if change <= sp.tol_outer:
            report.converged = True
            break
    if not report.converged:
        report.flags.append(f"no outer fixed point within {sp.max_outer} iterations")
    if not inner_ok:
        report.flags.append("some inner solves hit max_inner")
    return prev, report


def supersolution_residual(u: GridField, g: GridField,
                           params: HamiltonianParams = HamiltonianParams()) -> float:
    """``max(0, g - u - H_nonstrict[u])`` over interior nodes."""
    if u.dims != g.dims or u.domain != g.domain:
        raise ValueError("fields live on different grids")
    H = hamiltonian_field(u, params, nonstrict=True)
    r = (g.values - u.values - H)[~boundary_layer(u.values.shape)]
    return float(max(0.0, r.max())) if r.size else 0.0


def subsolution_residual(u: GridField, g: GridField,
                         params: HamiltonianParams = HamiltonianParams()) -> float:
    """``max(0, u + H_strict[u] - g)`` over interior nodes."""
    if u.dims != g.dims or u.domain != g.domain:
        raise ValueError("fields live on different grids")
    H = hamiltonian_field(u, params, nonstrict=False)
    r = (u.values + H - g.values)[~boundary_layer(u.values.shape)]
    return float(max(0.0, r.max())) if r.size else 0.0


def capped_field(domain, dims, raw, K: float, R: float, collar_width: float = 0.3) -> GridField:
    """Boundary-compatible version of a raw generator.

    ``min(K, max(raw, K + L (|p| - R)))`` with ``L = (K - min raw) / collar_width``
    equals ``K`` outside the gauge ball ``B_R(0)``, which must fit in the box.
    """
    if not (R > 0 and collar_width > 0):
        raise ValueError("R and collar_width must be positive")
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    ext = np.array([R, R, R * R / 4.0])
    if np.any(-ext <= lo) or np.any(ext >= hi):
        raise ValueError(f"gauge ball of radius {R} does not fit strictly inside the domain")
    base = build_field(domain, dims, raw, K)
    L = (K - float(base.values.min())) / collar_width
    if L <= 0:
        raise ValueError("raw field must dip below K somewhere")
    ramp = K + L * (gauge(base.nodes()) - R)
    vals = np.minimum(K, np.maximum(base.values, ramp))
    return base.with_values(vals)
