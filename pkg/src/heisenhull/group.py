"""Arithmetic in the first Heisenberg group.

Points are arrays whose last axis has length 3, ``(x, y, z)``; every function
broadcasts over leading axes.  Horizontal vectors ``(a, b)`` stand for the
element ``(a, b, 0)`` of the horizontal plane through the identity.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Point(NamedTuple):
    x: float
    y: float
    z: float


class HorizontalVec(NamedTuple):
    a: float
    b: float


def as_points(p) -> np.ndarray:
    """Convert ``p`` to a float array with a trailing axis of length 3."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"points need a trailing axis of length 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def _split(p):
    p = as_points(p)
    return p[..., 0], p[..., 1], p[..., 2]


def mul(p, q) -> np.ndarray:
    """Group product ``p . q``."""
    xp, yp, zp = _split(p)
    xq, yq, zq = _split(q)
    return np.stack(
        [xp + xq, yp + yq, zp + zq + 0.5 * (xp * yq - xq * yp)], axis=-1
    )


def inv(p) -> np.ndarray:
    return -as_points(p)


def gauge(p) -> np.ndarray:
    """Koranyi gauge ``((x^2 + y^2)^2 + 16 z^2)^(1/4)``."""
    x, y, z = _split(p)
    r2 = x * x + y * y
    return np.sqrt(np.sqrt(r2 * r2 + 16.0 * z * z))


def dist_left(p, q) -> np.ndarray:
    """Left-invariant gauge distance ``|p^-1 . q|``."""
    return gauge(mul(inv(p), q))


def dist_right(p, q) -> np.ndarray:
    """Right-invariant gauge distance ``|p . q^-1|``."""
    return gauge(mul(p, inv(q)))


def dilate(lam: float, p) -> np.ndarray:
    if lam < 0:
        raise ValueError("dilation factor must be nonnegative")
    x, y, z = _split(p)
    return np.stack([lam * x, lam * y, lam * lam * z], axis=-1)


def horiz_point(p, w) -> np.ndarray:
    """The point ``p . (a, b, 0)`` of the horizontal plane through ``p``."""
    w = np.asarray(w, dtype=np.float64)
    h = np.stack([w[..., 0], w[..., 1], np.zeros_like(w[..., 0])], axis=-1)
    return mul(p, h)


def in_horiz_plane(p, q, tol: float = 0.0) -> np.ndarray:
    """Whether ``q`` lies in the horizontal plane through ``p`` (to ``tol``)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    xp, yp, zp = _split(p)
    xq, yq, zq = _split(q)
    defect = zq - zp - 0.5 * (xp * (yq - yp) - (xq - xp) * yp)
    return np.abs(defect) <= tol


def horiz_line(p, theta, s) -> np.ndarray:
    """Point at signed horizontal length ``s`` along direction ``theta`` from ``p``.

    For fixed ``theta`` the curve is a Euclidean straight line and any two of
    its points are horizontal to each other.
    """
    s = np.asarray(s, dtype=np.float64)
    w = np.stack([s * np.cos(theta), s * np.sin(theta)], axis=-1)
    return horiz_point(p, w)


def horiz_direction(p, theta) -> np.ndarray:
    """Euclidean velocity ``d/ds`` of :func:`horiz_line` (constant along the line)."""
    xp, yp, _ = _split(p)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack(
        [np.broadcast_to(c, xp.shape), np.broadcast_to(s, xp.shape),
         0.5 * (xp * s - yp * c)],
        axis=-1,
    )


def horizontal_coords(p, xi) -> np.ndarray:
    """Horizontal part of ``p^-1 . xi``."""
    return (as_points(xi) - as_points(p))[..., :2]
