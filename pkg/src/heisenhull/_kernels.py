"""Compiled inner loops shared by the grid, envelope and hull modules.

Fields are stored as ``values[k, j, i]`` (x fastest).  Geometry is passed as
``lo``/``hi``/``h`` float arrays of length 3 and ``n`` as an int array.
"""

import numpy as np
from numba import njit, prange

_SNAP = 1e-9


@njit(cache=True, inline="always")
def _axis(f, n):
    r = np.floor(f + 0.5)
    if abs(f - r) < _SNAP:
        f = r
    if f < 0.0:
        f = 0.0
    elif f > n - 1:
        f = n - 1.0
    i = int(f)
    if i > n - 2:
        i = n - 2
    return i, f - i


@njit(cache=True)
def interp(v, lo, h, n, K, x, y, z):
    fx = (x - lo[0]) / h[0]
    fy = (y - lo[1]) / h[1]
    fz = (z - lo[2]) / h[2]
    if (fx < -_SNAP or fy < -_SNAP or fz < -_SNAP or fx > n[0] - 1 + _SNAP
            or fy > n[1] - 1 + _SNAP or fz > n[2] - 1 + _SNAP):
        return K
    i, tx = _axis(fx, n[0])
    j, ty = _axis(fy, n[1])
    k, tz = _axis(fz, n[2])
    sx = 1.0 - tx
    sy = 1.0 - ty
    sz = 1.0 - tz
    c00 = v[k, j, i] * sx + v[k, j, i + 1] * tx
    c10 = v[k, j + 1, i] * sx + v[k, j + 1, i + 1] * tx
    c01 = v[k + 1, j, i] * sx + v[k + 1, j, i + 1] * tx
    c11 = v[k + 1, j + 1, i] * sx + v[k + 1, j + 1, i + 1] * tx
    c0 = c00 * sy + c10 * ty
    c1 = c01 * sy + c11 * ty
    return c0 * sz + c1 * tz


@njit(cache=True)
def corner_max(e, lo, h, n, x, y, z):
    """Max of a node field over the corners of the cell containing a point."""
    fx = (x - lo[0]) / h[0]
    fy = (y - lo[1]) / h[1]
    fz = (z - lo[2]) / h[2]
    i, _ = _axis(fx, n[0])
    j, _ = _axis(fy, n[1])
    k, _ = _axis(fz, n[2])
    m = e[k, j, i]
    for dk in range(2):
        for dj in range(2):
            for di in range(2):
                val = e[k + dk, j + dj, i + di]
                if val > m:
                    m = val
    return m


@njit(parallel=True, cache=True)
def interp_many(v, lo, h, n, K, pts, out):
    for m in prange(pts.shape[0]):
        out[m] = interp(v, lo, h, n, K, pts[m, 0], pts[m, 1], pts[m, 2])


@njit(cache=True, inline="always")
def ray_extent(x, y, z, dx, dy, dz, lo, hi):
    """Parameter interval of the line ``p + s d`` inside the box."""
    s_lo = -np.inf
    s_hi = np.inf
    p = (x, y, z)
    d = (dx, dy, dz)
    for a in range(3):
        if abs(d[a]) > 1e-300:
            t0 = (lo[a] - p[a]) / d[a]
            t1 = (hi[a] - p[a]) / d[a]
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > s_lo:
                s_lo = t0
            if t1 < s_hi:
                s_hi = t1
    if s_lo > 0.0:
        s_lo = 0.0
    if s_hi < 0.0:
        s_hi = 0.0
    return s_lo, s_hi


@njit(cache=True, inline="always")
def cell_step(dx, dy, dz, h):
    """Largest ``ds`` that moves at most one cell along every axis."""
    m = abs(dx) / h[0]
    q = abs(dy) / h[1]
    if q > m:
        m = q
    q = abs(dz) / h[2]
    if q > m:
        m = q
    return 1.0 / m


@njit(cache=True)
def _side_min(v, lo, h, n, K, x, y, z, dx, dy, dz, s_end, ds, start, stop_at):
    """Running min of the field along ``s = 0 .. s_end`` (``s_end`` may be < 0).

    Stops early once the running min is ``<= stop_at``.
    """
    m = start
    if s_end == 0.0:
        return m
    sgn = 1.0 if s_end > 0.0 else -1.0
    length = abs(s_end)
    kk = 1
    while True:
        s = kk * ds
        last = False
        if s >= length:
            s = length
            last = True
        s *= sgn
        val = interp(v, lo, h, n, K, x + s * dx, y + s * dy, z + s * dz)
        if val < m:
            m = val
        if m <= stop_at or last:
            return m
        kk += 1


@njit(cache=True)
def _line_value(v, lo, hi, h, n, K, x, y, z, fw, c, s, fmin, best):
    """``max`` of the two one-sided minima along one line, pruned by ``best``.

    Returns a value ``>= best`` whenever the line cannot beat ``best``.
    """
    dz = 0.5 * (x * s - y * c)
    s_lo, s_hi = ray_extent(x, y, z, c, s, dz, lo, hi)
    ds = cell_step(c, s, dz, h)
    m_minus = _side_min(v, lo, h, n, K, x, y, z, c, s, dz, s_lo, ds, fw, fmin)
    if m_minus >= best:
        return m_minus
    m_plus = _side_min(v, lo, h, n, K, x, y, z, c, s, dz, s_hi, ds, fw, m_minus)
    return m_minus if m_minus > m_plus else m_plus


@njit(parallel=True, cache=True)
def t_step_kernel(v, lo, hi, h, n, K, cos_t, sin_t, fmin, n_refine, out):
    nx, ny, nz = n[0], n[1], n[2]
    total = nx * ny * nz
    nt = cos_t.shape[0]
    for idx in prange(total):
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // (nx * ny)
        x = lo[0] + i * h[0]
        y = lo[1] + j * h[1]
        z = lo[2] + k * h[2]
        fw = v[k, j, i]
        best = fw
        t_best = -1
        if best > fmin:
            for t in range(nt):
                val = _line_value(v, lo, hi, h, n, K, x, y, z, fw, cos_t[t], sin_t[t],
                                  fmin, best)
                if val < best:
                    best = val
                    t_best = t
                    if best <= fmin:
                        break
            if n_refine > 0 and best > fmin:
                # local bisection in angle around the best coarse line
                if t_best < 0:
                    t_best = 0
                centre = np.pi * t_best / nt
                delta = np.pi / nt
                for _ in range(n_refine):
                    delta *= 0.5
                    moved = centre
                    for sg in (-1.0, 1.0):
                        th = centre + sg * delta
                        val = _line_value(v, lo, hi, h, n, K, x, y, z, fw, np.cos(th),
                                          np.sin(th), fmin, best)
                        if val < best:
                            best = val
                            moved = th
                    centre = moved
                    if best <= fmin:
                        break
        out[k, j, i] = best


@njit(cache=True)
def _side_argmin(v, lo, h, n, K, x, y, z, dx, dy, dz, s_end, n_s, start):
    m = start
    arg = 0.0
    if s_end == 0.0:
        return m, arg
    for kk in range(1, n_s + 1):
        s = s_end * kk / n_s
        val = interp(v, lo, h, n, K, x + s * dx, y + s * dy, z + s * dz)
        if val < m:
            m = val
            arg = s
    return m, arg


@njit(parallel=True, cache=True)
def check_kernel(v, err, lo, hi, h, n, K, cos_t, sin_t, n_s, tol, err_factor,
                 stride, excess, theta_idx, s_minus, s_plus, m_minus_out, m_plus_out):
    """Largest quasiconvexity violation through every checked node."""
    nx, ny, nz = n[0], n[1], n[2]
    total = nx * ny * nz
    nt = cos_t.shape[0]
    for idx in prange(total):
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // (nx * ny)
        excess[k, j, i] = -np.inf
        theta_idx[k, j, i] = -1
        if i % stride != 0 or j % stride != 0 or k % stride != 0:
            continue
        x = lo[0] + i * h[0]
        y = lo[1] + j * h[1]
        z = lo[2] + k * h[2]
        fw = v[k, j, i]
        for t in range(nt):
            c = cos_t[t]
            s = sin_t[t]
            dz = 0.5 * (x * s - y * c)
            s_lo, s_hi = ray_extent(x, y, z, c, s, dz, lo, hi)
            mm, am = _side_argmin(v, lo, h, n, K, x, y, z, c, s, dz, s_lo, n_s, fw)
            if mm >= fw:
                continue
            mp, ap = _side_argmin(v, lo, h, n, K, x, y, z, c, s, dz, s_hi, n_s, fw)
            top = mm if mm > mp else mp
            margin = fw - top
            if margin <= 0.0:
                continue
            e1 = corner_max(err, lo, h, n, x + am * c, y + am * s, z + am * dz)
            e2 = corner_max(err, lo, h, n, x + ap * c, y + ap * s, z + ap * dz)
            e = e1 if e1 > e2 else e2
            ex = margin - (tol + err_factor * e)
            if ex > 0.0 and ex > excess[k, j, i]:
                excess[k, j, i] = ex
                theta_idx[k, j, i] = t
                s_minus[k, j, i] = am
                s_plus[k, j, i] = ap
                m_minus_out[k, j, i] = mm
                m_plus_out[k, j, i] = mp


# --- nonlocal Hamiltonian -------------------------------------------------


@njit(cache=True, inline="always")
def _central_grad(u, h, n, i, j, k, x, y):
    nx, ny, nz = n[0], n[1], n[2]
    if 0 < i < nx - 1:
        ux = (u[k, j, i + 1] - u[k, j, i - 1]) / (2.0 * h[0])
    elif i == 0:
        ux = (u[k, j, 1] - u[k, j, 0]) / h[0]
    else:
        ux = (u[k, j, i] - u[k, j, i - 1]) / h[0]
    if 0 < j < ny - 1:
        uy = (u[k, j + 1, i] - u[k, j - 1, i]) / (2.0 * h[1])
    elif j == 0:
        uy = (u[k, 1, i] - u[k, 0, i]) / h[1]
    else:
        uy = (u[k, j, i] - u[k, j - 1, i]) / h[1]
    if 0 < k < nz - 1:
        uz = (u[k + 1, j, i] - u[k - 1, j, i]) / (2.0 * h[2])
    elif k == 0:
        uz = (u[1, j, i] - u[0, j, i]) / h[2]
    else:
        uz = (u[k, j, i] - u[k - 1, j, i]) / h[2]
    return ux - 0.5 * y * uz, uy + 0.5 * x * uz


@njit(cache=True)
def local_root(u, g_p, lo, hi, h, n, K, i, j, k, cos_t, sin_t, n_rho, eps, upwind):
    """Smallest ``v`` with ``v + H(v) >= g_p`` at node ``(i, j, k)``.

    ``H(v)`` is the discrete strict-sublevel Hamiltonian with neighbours frozen
    at the current values of ``u``.
    """
    x = lo[0] + i * h[0]
    y = lo[1] + j * h[1]
    z = lo[2] + k * h[2]
    best = g_p
    if not upwind:
        gx, gy = _central_grad(u, h, n, i, j, k, x, y)
    for t in range(cos_t.shape[0]):
        c = cos_t[t]
        s = sin_t[t]
        dz = 0.5 * (x * s - y * c)
        s_lo, s_hi = ray_extent(x, y, z, c, s, dz, lo, hi)
        if s_hi <= 0.0:
            continue
        step = cell_step(c, s, dz, h)
        if upwind:
            if -s_lo < step:
                continue
            b = interp(u, lo, h, n, K, x - step * c, y - step * s, z - step * dz)
            if b >= best:
                continue
        else:
            slope = gx * c + gy * s
            if slope <= 0.0:
                continue
        for kk in range(n_rho, 0, -1):
            rho = s_hi * kk / n_rho
            if upwind:
                cc = rho / step
                vv = (g_p + cc * b) / (1.0 + cc)
            else:
                vv = g_p - rho * slope
            if vv >= best:
                break
            a = interp(u, lo, h, n, K, x + rho * c, y + rho * s, z + rho * dz)
            tau = a + eps
            r = tau if tau > vv else vv
            if r < best:
                best = r
    if best > K:
        best = K
    return best


@njit(cache=True)
def gs_sweep(u, g, lo, hi, h, n, K, cos_t, sin_t, n_rho, eps, omega, upwind, order):
    """One Gauss-Seidel pass over interior nodes; returns max |root - u|."""
    nx, ny, nz = n[0], n[1], n[2]
    res = 0.0
    fx = order & 1
    fy = (order >> 1) & 1
    fz = (order >> 2) & 1
    for kk in range(1, nz - 1):
        k = nz - 1 - kk if fz else kk
        for jj in range(1, ny - 1):
            j = ny - 1 - jj if fy else jj
            for ii in range(1, nx - 1):
                i = nx - 1 - ii if fx else ii
                r = local_root(u, g[k, j, i], lo, hi, h, n, K, i, j, k,
                               cos_t, sin_t, n_rho, eps, upwind)
                d = abs(r - u[k, j, i])
                if d > res:
                    res = d
                new = (1.0 - omega) * u[k, j, i] + omega * r
                if new > g[k, j, i]:
                    new = g[k, j, i]
                u[k, j, i] = new
    return res


@njit(cache=True)
def hamiltonian_point(u, u_p, lo, hi, h, n, K, x, y, z, gx, gy, cos_t, sin_t,
                      n_rho, eps, upwind, nonstrict):
    """Discrete Hamiltonian at an arbitrary point with value ``u_p``."""
    best = 0.0
    for t in range(cos_t.shape[0]):
        c = cos_t[t]
        s = sin_t[t]
        dz = 0.5 * (x * s - y * c)
        s_lo, s_hi = ray_extent(x, y, z, c, s, dz, lo, hi)
        if s_hi <= 0.0:
            continue
        step = cell_step(c, s, dz, h)
        if upwind:
            if -s_lo < step:
                continue
            b = interp(u, lo, h, n, K, x - step * c, y - step * s, z - step * dz)
            slope = (u_p - b) / step
        else:
            slope = gx * c + gy * s
        if slope <= 0.0:
            continue
        for kk in range(n_rho, 0, -1):
            rho = s_hi * kk / n_rho
            if rho * slope <= best:
                break
            a = interp(u, lo, h, n, K, x + rho * c, y + rho * s, z + rho * dz)
            if nonstrict:
                active = a <= u_p + eps
            else:
                active = a < u_p - eps
            if active:
                best = rho * slope
                break
    return best


@njit(parallel=True, cache=True)
def hamiltonian_field(u, lo, hi, h, n, K, cos_t, sin_t, n_rho, eps, upwind,
                      nonstrict, out):
    nx, ny, nz = n[0], n[1], n[2]
    total = nx * ny * nz
    for idx in prange(total):
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // (nx * ny)
        if i == 0 or j == 0 or k == 0 or i == nx - 1 or j == ny - 1 or k == nz - 1:
            out[k, j, i] = 0.0
            continue
        x = lo[0] + i * h[0]
        y = lo[1] + j * h[1]
        z = lo[2] + k * h[2]
        gx, gy = _central_grad(u, h, n, i, j, k, x, y)
        out[k, j, i] = hamiltonian_point(u, u[k, j, i], lo, hi, h, n, K, x, y, z,
                                         gx, gy, cos_t, sin_t, n_rho, eps, upwind,
                                         nonstrict)


# --- sup-convolution --------------------------------------------------------


@njit(parallel=True, cache=True)
def supconv_kernel(v, lo, h, n, K, g, out):
    """``out(p) = max_g u(g p)`` over a fixed stencil ``g`` of the gauge ball."""
    nx, ny, nz = n[0], n[1], n[2]
    total = nx * ny * nz
    for idx in prange(total):
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // (nx * ny)
        x = lo[0] + i * h[0]
        y = lo[1] + j * h[1]
        z = lo[2] + k * h[2]
        m = v[k, j, i]
        for t in range(g.shape[0]):
            gx = g[t, 0]
            gy = g[t, 1]
            val = interp(v, lo, h, n, K, x + gx, y + gy, z + g[t, 2] + 0.5 * (gx * y - x * gy))
            if val > m:
                m = val
        out[k, j, i] = m


# --- distances to clouds of vertical segments -------------------------------


@njit(cache=True, inline="always")
def seg_gauge(px, py, pz, qx, qy, z0, z1, right):
    """Gauge distance from a point to the vertical segment ``(qx, qy, [z0, z1])``.

    ``right`` selects ``|p q^-1|``; otherwise ``|p^-1 q|``.
    """
    gx = px - qx
    gy = py - qy
    if right:
        c = pz - 0.5 * (px * qy - qx * py)
    else:
        c = pz - 0.5 * (qx * py - px * qy)
    zs = c
    if zs < z0:
        zs = z0
    elif zs > z1:
        zs = z1
    gz = c - zs
    r2 = gx * gx + gy * gy
    return np.sqrt(np.sqrt(r2 * r2 + 16.0 * gz * gz))


@njit(parallel=True, cache=True)
def cloud_distance(px, py, pz, ex, ey, ez0, ez1, order, bin_start, bin_zlo, bin_zhi,
                   bx0, by0, bsz, nbx, nby, right, cap, out):
    """Min gauge distance from each query point to a binned segment cloud.

    Elements are sorted into ``nbx * nby`` square bins of side ``bsz``.  Rings
    of bins grow around the query until the horizontal lower bound passes the
    best distance (or ``cap``); single bins are skipped when a bound combining
    horizontal offset and the twisted vertical gap already exceeds it.
    """
    sgn = -1.0 if right else 1.0
    for m in prange(px.shape[0]):
        x = px[m]
        y = py[m]
        z = pz[m]
        bi = int(np.floor((x - bx0) / bsz))
        bj = int(np.floor((y - by0) / bsz))
        best = np.inf
        ring = 0
        max_ring = max(abs(bi), abs(bi - nbx), abs(bj), abs(bj - nby)) + 1
        while ring <= max_ring:
            lower = (ring - 1) * bsz
            if lower > best or lower > cap:
                break
            for dj in range(-ring, ring + 1):
                jj = bj + dj
                if jj < 0 or jj >= nby:
                    continue
                edge = abs(dj) == ring
                step = 1 if edge else 2 * ring
                di = -ring
                while di <= ring:
                    ii = bi + di
                    if 0 <= ii < nbx:
                        b = jj * nbx + ii
                        if bin_start[b + 1] > bin_start[b]:
                            x0 = bx0 + ii * bsz
                            y0 = by0 + jj * bsz
                            hx = max(0.0, x0 - x, x - x0 - bsz)
                            hy = max(0.0, y0 - y, y - y0 - bsz)
                            hd2 = hx * hx + hy * hy
                            c_lo = np.inf
                            c_hi = -np.inf
                            for cxq in (x0, x0 + bsz):
                                for cyq in (y0, y0 + bsz):
                                    cv = z + sgn * 0.5 * (x * cyq - cxq * y)
                                    c_lo = min(c_lo, cv)
                                    c_hi = max(c_hi, cv)
                            gap = max(0.0, bin_zlo[b] - c_hi, c_lo - bin_zhi[b])
                            lb4 = hd2 * hd2 + 16.0 * gap * gap
                            if lb4 < best ** 4:
                                for q in range(bin_start[b], bin_start[b + 1]):
                                    e = order[q]
                                    d = seg_gauge(x, y, z, ex[e], ey[e], ez0[e], ez1[e], right)
                                    if d < best:
                                        best = d
                    if step == 0:
                        break
                    di += step
            ring += 1
        out[m] = best


# --- column-interval bookkeeping --------------------------------------------


@njit(cache=True)
def merge_intervals(lo, hi, count):
    """Sort and merge ``count`` intervals in place; returns the new count."""
    for a in range(1, count):
        kl = lo[a]
        kh = hi[a]
        b = a - 1
        while b >= 0 and lo[b] > kl:
            lo[b + 1] = lo[b]
            hi[b + 1] = hi[b]
            b -= 1
        lo[b + 1] = kl
        hi[b + 1] = kh
    if count == 0:
        return 0
    w = 0
    for a in range(1, count):
        if lo[a] <= hi[w]:
            if hi[a] > hi[w]:
                hi[w] = hi[a]
        else:
            w += 1
            lo[w] = lo[a]
            hi[w] = hi[a]
    return w + 1


@njit(cache=True)
def staircase_elements(cx, cy, lo, hi, cnt, nx, ny):
    """Boundary segments for a lattice of column interval sets.

    ``lo``/``hi`` have shape ``(ny, nx, M)`` with ``cnt`` merged intervals per
    column.  Interval end points become point elements; where neighbouring
    columns differ, the symmetric difference becomes vertical segments placed
    halfway between the two columns.
    """
    cap = 16
    out = np.empty((cap, 4))
    m = 0
    buf_lo = np.empty(64)
    buf_hi = np.empty(64)
    for j in range(ny):
        for i in range(nx):
            for a in range(cnt[j, i]):
                for zz in (lo[j, i, a], hi[j, i, a]):
                    if m >= cap:
                        cap *= 2
                        tmp = np.empty((cap, 4))
                        tmp[:m] = out[:m]
                        out = tmp
                    out[m, 0] = cx[i]
                    out[m, 1] = cy[j]
                    out[m, 2] = zz
                    out[m, 3] = zz
                    m += 1
            for nb in range(2):
                i2 = i + 1 if nb == 0 else i
                j2 = j if nb == 0 else j + 1
                if i2 >= nx or j2 >= ny:
                    continue
                mx = 0.5 * (cx[i] + cx[i2])
                my = 0.5 * (cy[j] + cy[j2])
                # collect end points of both sets; parity sweep gives the xor
                ne = 0
                for a in range(cnt[j, i]):
                    buf_lo[ne] = lo[j, i, a]
                    buf_hi[ne] = 1.0
                    ne += 1
                    buf_lo[ne] = hi[j, i, a]
                    buf_hi[ne] = -1.0
                    ne += 1
                for a in range(cnt[j2, i2]):
                    buf_lo[ne] = lo[j2, i2, a]
                    buf_hi[ne] = 2.0
                    ne += 1
                    buf_lo[ne] = hi[j2, i2, a]
                    buf_hi[ne] = -2.0
                    ne += 1
                if ne == 0:
                    continue
                idx = np.argsort(buf_lo[:ne], kind="mergesort")
                in1 = False
                in2 = False
                start = 0.0
                for q in range(ne):
                    e = idx[q]
                    zz = buf_lo[e]
                    was = in1 != in2
                    tag = buf_hi[e]
                    if tag == 1.0:
                        in1 = True
                    elif tag == -1.0:
                        in1 = False
                    elif tag == 2.0:
                        in2 = True
                    else:
                        in2 = False
                    now = in1 != in2
                    if now and not was:
                        start = zz
                    elif was and not now and zz > start:
                        if m >= cap:
                            cap *= 2
                            tmp = np.empty((cap, 4))
                            tmp[:m] = out[:m]
                            out = tmp
                        out[m, 0] = mx
                        out[m, 1] = my
                        out[m, 2] = start
                        out[m, 3] = zz
                        m += 1
    return out[:m]


@njit(cache=True)
def neighborhood_columns(cx, cy, ex, ey, ez0, ez1, order, bin_start, bx0, by0,
                         bsz, nbx, nby, eps, base_lo, base_hi, base_cnt, max_out,
                         out_lo, out_hi, out_cnt):
    """Column intervals of the left eps-neighbourhood of a segment cloud.

    Columns are given as flat coordinate arrays ``cx, cy``.  A segment
    ``(qx, qy, [z0, z1])`` at horizontal offset ``r < eps`` reaches every
    ``pz`` within ``sqrt(eps^4 - r^4) / 4`` of the twisted segment.  The
    ``base_*`` intervals (the set itself) are merged in.
    """
    rb = int(np.ceil(eps / bsz)) + 1
    e4 = eps ** 4
    cap = 4096
    lo = np.empty(cap)
    hi = np.empty(cap)
    for col in range(cx.shape[0]):
        x = cx[col]
        y = cy[col]
        c = 0
        for a in range(base_cnt[col]):
            lo[c] = base_lo[col, a]
            hi[c] = base_hi[col, a]
            c += 1
        bi = int(np.floor((x - bx0) / bsz))
        bj = int(np.floor((y - by0) / bsz))
        for jj in range(bj - rb, bj + rb + 1):
            if jj < 0 or jj >= nby:
                continue
            for ii in range(bi - rb, bi + rb + 1):
                if ii < 0 or ii >= nbx:
                    continue
                b = jj * nbx + ii
                for q in range(bin_start[b], bin_start[b + 1]):
                    e = order[q]
                    gx = ex[e] - x
                    gy = ey[e] - y
                    r2 = gx * gx + gy * gy
                    rem = e4 - r2 * r2
                    if rem <= 0.0:
                        continue
                    w = np.sqrt(rem) / 4.0
                    tw = 0.5 * (ex[e] * y - x * ey[e])
                    if c >= cap:
                        c = merge_intervals(lo, hi, c)
                        if c >= cap // 2:
                            cap *= 2
                            lo2 = np.empty(cap)
                            hi2 = np.empty(cap)
                            lo2[:c] = lo[:c]
                            hi2[:c] = hi[:c]
                            lo = lo2
                            hi = hi2
                    lo[c] = ez0[e] + tw - w
                    hi[c] = ez1[e] + tw + w
                    c += 1
        c = merge_intervals(lo, hi, c)
        if c > max_out:
            c = max_out
        out_cnt[col] = c
        for a in range(c):
            out_lo[col, a] = lo[a]
            out_hi[col, a] = hi[a]


@njit(cache=True)
def sublevel_columns(v, lo, h, n, level, strict, cx, cy, out_lo, out_hi, out_cnt):
    """z-intervals of ``{interpolant < level}`` (or ``<=``) over columns.

    Along a vertical line the trilinear interpolant is piecewise linear in z,
    so the interval end points are exact roots of the interpolant.
    """
    nx, ny, nz = n[0], n[1], n[2]
    max_out = out_lo.shape[1]
    for c in range(cx.shape[0]):
        out_cnt[c] = 0
        fx = (cx[c] - lo[0]) / h[0]
        fy = (cy[c] - lo[1]) / h[1]
        if fx < -1e-9 or fy < -1e-9 or fx > nx - 1 + 1e-9 or fy > ny - 1 + 1e-9:
            continue
        i0, tx = _axis(fx, nx)
        j0, ty = _axis(fy, ny)
        inside = False
        start = 0.0
        prev = 0.0
        for k in range(nz):
            w = ((1 - ty) * ((1 - tx) * v[k, j0, i0] + tx * v[k, j0, i0 + 1])
                 + ty * ((1 - tx) * v[k, j0 + 1, i0] + tx * v[k, j0 + 1, i0 + 1]))
            now = w < level if strict else w <= level
            z = lo[2] + k * h[2]
            if k == 0:
                if now:
                    start = z
            elif now != inside:
                zc = z - h[2] + h[2] * (level - prev) / (w - prev)
                if now:
                    start = zc
                elif out_cnt[c] < max_out:
                    out_lo[c, out_cnt[c]] = start
                    out_hi[c, out_cnt[c]] = zc
                    out_cnt[c] += 1
            inside = now
            prev = w
        if inside and out_cnt[c] < max_out:
            out_lo[c, out_cnt[c]] = start
            out_hi[c, out_cnt[c]] = lo[2] + (nz - 1) * h[2]
            out_cnt[c] += 1
