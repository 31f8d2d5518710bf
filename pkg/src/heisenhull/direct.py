"""The convexification operator ``T`` and sampling-based convexity checkers.

``T[f](w)`` is the infimum of ``max(f(p), f(q))`` over horizontal segments
``[p, q]`` through ``w``.  Every such segment lies on one horizontal line
through ``w``, so the search reduces to one angle per line: along each line
the best pair takes the running minimum on either side of ``w``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .grid import GridField, interpolation_error
from .group import as_points, horiz_direction, in_horiz_plane
from .report import SchemeReport


@dataclass(frozen=True)
class ScanParams:
    n_theta: int = 32
    n_s: int = 32
    tol_violation: float = 1e-6
    tol_plane: float = 1e-9
    n_refine: int = 0

    def __post_init__(self):
        if int(self.n_theta) < 4:
            raise ValueError("n_theta must be at least 4")
        if int(self.n_s) < 2:
            raise ValueError("n_s must be at least 2")
        if int(self.n_refine) < 0:
            raise ValueError("n_refine must be nonnegative")
        if self.tol_violation < 0 or self.tol_plane < 0:
            raise ValueError("tolerances must be nonnegative")

    def angles(self):
        th = np.pi * np.arange(int(self.n_theta)) / int(self.n_theta)
        return th, np.cos(th), np.sin(th)


class ViolationWitness(NamedTuple):
    p: np.ndarray
    q: np.ndarray
    w: np.ndarray
    u_p: float
    u_q: float
    u_w: float
    margin: float


WITNESS_COLUMNS = ("px", "py", "pz", "qx", "qy", "qz", "wx", "wy", "wz",
                   "up", "uq", "uw", "margin")


def write_witnesses(witnesses, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WITNESS_COLUMNS)
        for wit in witnesses:
            w.writerow([repr(float(v)) for v in
                        (*wit.p, *wit.q, *wit.w, wit.u_p, wit.u_q, wit.u_w, wit.margin)])


def t_step(field: GridField, scan: ScanParams = ScanParams()) -> GridField:
    """One application of ``T`` at every node.

    Rays are clipped to the box and sampled at most one cell apart per axis,
    always including the node itself and the exit point.  With
    ``scan.n_refine > 0`` each node also bisects the angle around its best
    line that many times; the extra lines depend on the field, so exact
    monotonicity of the operator holds only for ``n_refine = 0``.
    """
    _, cos_t, sin_t = scan.angles()
    lo, hi, h, n = field._geom()
    out = np.empty_like(field.values)
    fmin = min(float(field.values.min()), field.K)
    _kernels.t_step_kernel(field.values, lo, hi, h, n, field.K, cos_t, sin_t, fmin,
                           int(scan.n_refine), out)
    return field.with_values(out)


def t_iterate(field: GridField, scan: ScanParams = ScanParams(), max_iter: int = 50,
              tol_fix: float = 1e-6):
    """Apply ``T`` until successive iterates differ by at most ``tol_fix``.

    Returns ``(envelope, iterations, report)``; ``report.converged`` is False
    when ``max_iter`` ran out first.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    report = SchemeReport()
    cur = field
    for it in range(1, max_iter + 1):
        t0 = time.perf_counter()
        nxt = t_step(cur, scan)
        diff = cur.values - nxt.values
        change = float(np.max(np.abs(diff)))
        mono = float(max(0.0, -diff.min()))
        report.add(it, 1, 0.0, change, mono, time.perf_counter() - t0)
        cur = nxt
        if change <= tol_fix:
            report.converged = True
            break
    if not report.converged:
        report.flags.append(f"no fixed point within {max_iter} iterations")
    return cur, report.iterations, report


def check_field_hquasiconvex(field: GridField, scan: ScanParams = ScanParams(),
                             err_factor: float = 2.0, stride: int = 1,
                             max_witnesses: int | None = None, err=None) -> list:
    """Search horizontal lines through the nodes for quasiconvexity failures.

    A node ``w`` fails when both sides of some line through it reach values
    below ``u(w)`` by more than ``tol_violation`` plus ``err_factor`` times the
    local interpolation error estimate.  ``err`` replaces that per-node
    estimate (default :func:`interpolation_error` of the field).  Witnesses
    come sorted by decreasing excess; an empty list means nothing was found
    at this sampling.
    """
    _, cos_t, sin_t = scan.angles()
    lo, hi, h, n = field._geom()
    shape = field.values.shape
    excess = np.empty(shape)
    tidx = np.empty(shape, dtype=np.int64)
    s_m = np.zeros(shape)
    s_p = np.zeros(shape)
    m_m = np.zeros(shape)
    m_p = np.zeros(shape)
    if err is None:
        err = interpolation_error(field)
    else:
        err = np.ascontiguousarray(err, dtype=np.float64)
        if err.shape != shape:
            raise ValueError(f"err must have shape {shape}, got {err.shape}")
    _kernels.check_kernel(field.values, err, lo, hi, h, n, field.K, cos_t, sin_t,
                          int(scan.n_s), float(scan.tol_violation), float(err_factor),
                          int(stride), excess, tidx, s_m, s_p, m_m, m_p)
    flat = np.flatnonzero(tidx.ravel() >= 0)
    flat = flat[np.argsort(-excess.ravel()[flat], kind="stable")]
    if max_witnesses is not None:
        flat = flat[:max_witnesses]
    nodes = field.nodes().reshape(-1, 3)
    theta, _, _ = scan.angles()
    out = []
    for f in flat:
        w = nodes[f]
        d = horiz_direction(w, theta[tidx.ravel()[f]])
        p = w + s_m.ravel()[f] * d
        q = w + s_p.ravel()[f] * d
        up, uq, uw = m_m.ravel()[f], m_p.ravel()[f], field.values.ravel()[f]
        out.append(ViolationWitness(p, q, w, float(up), float(uq), float(uw),
                                    float(uw - max(up, uq))))
    return out


def monotone_compose(field: GridField, g: Callable) -> GridField:
    """Apply a nondecreasing ``g`` node by node (the plateau becomes ``g(K)``)."""
    vals = np.unique(np.append(field.values.ravel(), field.K))
    gv = np.asarray(g(vals), dtype=np.float64)
    if gv.shape != vals.shape:
        raise ValueError("g must map arrays elementwise")
    if np.any(np.diff(gv) < 0):
        raise ValueError("g is not nondecreasing on the field's value range")
    out = np.asarray(g(field.values), dtype=np.float64)
    return GridField(field.domain, field.dims, out, float(g(np.array([field.K]))[0]))


def check_set_hconvex(region, scan: ScanParams = ScanParams(), sample_count: int = 2000,
                      seed: int = 0, max_witnesses: int | None = None,
                      chunk: int = 64) -> list:
    """Look for horizontal segments with both ends in ``region`` leaving it.

    Base points ``p`` are drawn uniformly from the region by rejection from
    its bounding box.  On every horizontal line through ``p`` the membership
    is sampled on ``n_s`` points per side up to the bounding box; a sampled
    point ``q`` in the region beyond a sampled gap ``w`` gives a witness.
    """
    rng = np.random.default_rng(seed)
    lo, hi = region.bounds()
    base = []
    need = int(sample_count)
    tries = 0
    while need > 0:
        cand = rng.uniform(lo, hi, size=(max(4 * need, 256), 3))
        cand = cand[region.contains(cand)]
        base.append(cand[:need])
        need -= len(base[-1])
        tries += 1
        if tries > 200 and not sum(len(b) for b in base):
            raise ValueError("could not sample points inside the region")
    pts = np.concatenate(base)
    theta, cos_t, sin_t = scan.angles()
    n_s = int(scan.n_s)
    frac = np.arange(1, n_s + 1) / n_s
    witnesses = []
    for c0 in range(0, len(pts), chunk):
        P = pts[c0:c0 + chunk]
        # direction vectors (m, t, 3)
        D = np.stack([np.broadcast_to(cos_t, (len(P), len(theta))),
                      np.broadcast_to(sin_t, (len(P), len(theta))),
                      0.5 * (P[:, 0:1] * sin_t - P[:, 1:2] * cos_t)], axis=-1)
        ext = _line_box_extent(P[:, None, :], D, lo, hi)
        for side, s_end in ((1, ext[1]), (0, ext[0])):
            S = s_end[..., None] * frac  # (m, t, n_s)
            Q = P[:, None, None, :] + S[..., None] * D[:, :, None, :]
            inside = region.contains(Q)
            # first gap followed by a member further out
            gap = ~inside
            first_gap = np.where(gap.any(-1), gap.argmax(-1), n_s)
            later_in = inside & (np.arange(n_s) > first_gap[..., None])
            hit = later_in.any(-1)
            for m, t in zip(*np.nonzero(hit)):
                k_out = first_gap[m, t]
                k_in = int(np.argmax(later_in[m, t]))
                p = P[m]
                q = Q[m, t, k_in]
                w = Q[m, t, k_out]
                witnesses.append(ViolationWitness(p, q, w, 0.0, 0.0, 1.0, 1.0))
                if max_witnesses is not None and len(witnesses) >= max_witnesses:
                    return _verify(witnesses, scan)
    return _verify(witnesses, scan)


def _verify(witnesses, scan):
    return [w for w in witnesses
            if bool(in_horiz_plane(w.p, w.q, max(scan.tol_plane, 1e-9 * (1 + np.abs(w.q).max()))))]


def _line_box_extent(P, D, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - P) / D
        t1 = (hi - P) / D
    a = np.where(np.abs(D) > 1e-300, np.minimum(t0, t1), -np.inf)
    b = np.where(np.abs(D) > 1e-300, np.maximum(t0, t1), np.inf)
    return np.minimum(a.max(-1), 0.0), np.maximum(b.min(-1), 0.0)

