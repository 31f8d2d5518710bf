import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenhull.distance import boundary_cloud, signed_distance
from heisenhull.group import dist_left, dist_right
from heisenhull.regions import (
    Box, Cylinder, DiskStack, GaugeBall, LeftNeighborhood, RegionSpec, merge_columns,
)

BALL = RegionSpec.of(GaugeBall((0, 0, 0), 1.0))


def test_primitive_validation():
    with pytest.raises(ValueError):
        GaugeBall((0, 0, 0), 0)
    with pytest.raises(ValueError):
        DiskStack(1, 1, 0, 0.1)
    with pytest.raises(ValueError):
        RegionSpec(())
    with pytest.raises(TypeError):
        RegionSpec.of("ball")


def test_membership_examples():
    assert BALL.contains((0, 0, 0))
    assert not BALL.contains((1, 0, 0))
    assert RegionSpec.of(GaugeBall(), open=False).contains((1, 0, 0))
    off = GaugeBall((1, 0, 0), 0.5)
    # the ball around c is c times the ball around 0
    assert off.contains((1, 0.2, 0.1), closed=False)
    stack = RegionSpec.of(DiskStack(1, 2, 1, 0.2))
    assert stack.contains((0.5, 0, -0.1)) and stack.contains((1.5, 0, 1.1))
    assert not stack.contains((0, 0, 0.5)) and not stack.contains((1.5, 0, -0.1))
    assert RegionSpec.of(Box((-1, -1, -1), (1, 1, 1))).contains((0.9, -0.9, 0))


def test_bounds_cover_members():
    rng = np.random.default_rng(0)
    for prim in (GaugeBall((0.5, -0.3, 0.2), 0.8), Cylinder(1.0, 0.0, 0.5),
                 Box((0, 0, 0), (1, 2, 3))):
        lo, hi = prim.bounds()
        pts = rng.uniform(lo - 1, hi + 1, (20000, 3))
        inside = pts[prim.contains(pts)]
        assert len(inside) and np.all(inside >= lo) and np.all(inside <= hi)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), st.floats(-1, 1))
def test_column_intervals_match_membership(x, y, z):
    E = RegionSpec.of(GaugeBall((0.3, 0, 0), 0.7), Cylinder(0.5, 0.1, 0.4))
    lo, hi, cnt = E.column_intervals(np.array([x]), np.array([y]))
    inside = any(lo[0, k] < z < hi[0, k] for k in range(cnt[0]))
    on_edge = any(min(abs(z - lo[0, k]), abs(z - hi[0, k])) < 1e-12 for k in range(cnt[0]))
    if not on_edge:
        assert inside == bool(E.contains((x, y, z)))


def test_merge_columns():
    lo = np.array([[0.5, 0.0, np.nan, 2.0]])
    hi = np.array([[1.5, 1.0, np.nan, 3.0]])
    mlo, mhi, cnt = merge_columns(lo, hi)
    assert cnt[0] == 2
    np.testing.assert_array_equal(mlo[0, :2], [0.0, 2.0])
    np.testing.assert_array_equal(mhi[0, :2], [1.5, 3.0])


def test_dilation():
    d = BALL.dilated(0.5)
    assert d.contains((0.45, 0, 0)) and not d.contains((0.55, 0, 0))
    with pytest.raises(NotImplementedError):
        LeftNeighborhood(BALL, 0.1).dilated(0.5)


def _ball_boundary(n=400):
    # dense sample of the unit gauge sphere
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    phi = np.linspace(-np.pi / 2, np.pi / 2, n)
    T, P = np.meshgrid(th, phi)
    r = np.sqrt(np.cos(P))
    return np.stack([r * np.cos(T), r * np.sin(T), np.sin(P) / 4], -1).reshape(-1, 3)


@pytest.mark.parametrize("metric", ["left", "right"])
def test_ball_distance_against_brute_force(metric):
    bd = _ball_boundary()
    dist = dist_left if metric == "left" else dist_right
    pts = np.array([[0, 0, 0], [0.5, 0, 0], [0.2, 0.3, 0.1], [1.2, 0, 0], [0, 0.5, 0.5],
                    [0.3, -0.4, -0.3]])
    cloud = boundary_cloud(BALL, 0.01)
    got = signed_distance(BALL, pts, 0.01, metric, cloud=cloud)
    ref = np.array([dist(p, bd).min() for p in pts]) * np.where(BALL.contains(pts), -1, 1)
    # the gauge is only 1/2-Holder in z, so lattice error scales like sqrt(sigma)
    np.testing.assert_allclose(got, ref, atol=0.03)
    assert got[0] == pytest.approx(-1, abs=0.01)


def test_cap_and_metric_validation():
    cloud = boundary_cloud(BALL, 0.05)
    far = cloud.distance(np.array([[3.0, 0, 0]]), cap=0.5)
    assert far[0] > 0.5
    with pytest.raises(ValueError):
        cloud.distance(np.zeros((1, 3)), metric="up")
    with pytest.raises(ValueError):
        boundary_cloud(BALL, 0)


def test_left_neighborhood():
    N = LeftNeighborhood(BALL, 0.2, sigma=0.02)
    assert N.contains((1.1, 0, 0))
    assert not N.contains((1.3, 0, 0))
    assert N.contains((0, 0, 0))
    lo, hi = N.bounds()
    assert np.all(lo[:2] < -1.19) and np.all(hi[:2] > 1.19) and lo[2] < -0.25 < 0.25 < hi[2]
    x = np.array([0.0, 1.1, 1.3])
    clo, chi = N.column_intervals(x, np.zeros(3))
    # column over the origin reaches beyond the ball poles (|z| = 1/4)
    assert np.nanmin(clo[0]) < -0.25 and np.nanmax(chi[0]) > 0.25
    assert np.isfinite(clo[1]).any() and not np.isfinite(clo[2]).any()
