import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heisenhull.direct import (
    ScanParams, check_field_hquasiconvex, check_set_hconvex, monotone_compose, t_iterate,
    t_step, write_witnesses,
)
from heisenhull.grid import BoxDomain, GridField, build_field
from heisenhull.group import gauge, in_horiz_plane
from heisenhull.regions import DiskStack, GaugeBall, RegionSpec

SLAB = BoxDomain((-2, -2, -3), (2, 2, 3))
SCAN = ScanParams(n_theta=16, n_s=16)


def hump(p):
    return np.abs(1 - p[..., 2] ** 2)


@pytest.fixture(scope="module")
def hump_field():
    return build_field(SLAB, (21, 21, 31), hump, K=8)


def closed_form_t1(p):
    z = p[..., 2]
    axis = (p[..., 0] == 0) & (p[..., 1] == 0)
    return np.where(np.abs(z) >= 1, z ** 2 - 1, np.where(axis, 1 - z ** 2, 0.0))


def test_scan_params_validation():
    with pytest.raises(ValueError):
        ScanParams(n_theta=3)
    with pytest.raises(ValueError):
        ScanParams(n_s=1)
    th, c, s = ScanParams(n_theta=4).angles()
    np.testing.assert_allclose(th, [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4])


def test_t_step_examples(hump_field):
    t = t_step(hump_field, SCAN)
    assert t((1, 0, 0)) == pytest.approx(0, abs=1e-12)
    assert t((0, 0, 0.5)) == pytest.approx(0.75, abs=0.02)
    assert t((0, 0, 2)) == pytest.approx(3)


def test_t_step_constant_and_gauge():
    c = build_field(BoxDomain.cube(1), (7, 7, 7), lambda p: 0.3, K=0.3)
    assert np.array_equal(t_step(c, SCAN).values, c.values)
    g = build_field(BoxDomain.cube(1), (15, 15, 15), gauge, K=2)
    assert np.abs(t_step(g, SCAN).values - g.values).max() < 0.1


def test_t_iterate_examples(hump_field):
    q, it, rep = t_iterate(hump_field, SCAN, max_iter=3, tol_fix=1e-6)
    assert it == 3 and len(rep.records) == 3
    assert all(r.mono_violation == 0 for r in rep.records)
    assert q((0.5, 0.5, 0.5)) == pytest.approx(0, abs=1e-12)
    assert q((0, 0, 0.5)) == pytest.approx(0, abs=1e-12)
    g = build_field(BoxDomain.cube(1), (9, 9, 9), lambda p: 0.5, K=0.5)
    _, it, rep = t_iterate(g, SCAN)
    assert it == 1 and rep.converged


def test_t_iterate_flags_nonconvergence(hump_field):
    _, _, rep = t_iterate(hump_field, SCAN, max_iter=1, tol_fix=1e-9)
    assert not rep.converged and rep.flags
    with pytest.raises(ValueError):
        t_iterate(hump_field, SCAN, max_iter=0)


small = arrays(np.float64, (4, 4, 4), elements=st.floats(-1, 1))


@settings(max_examples=25, deadline=None)
@given(small, arrays(np.float64, (4, 4, 4), elements=st.floats(0, 1)))
def test_t_is_nonincreasing_and_monotone(v, bump):
    f = GridField(BoxDomain.cube(1), (4, 4, 4), v, K=1)
    g = f.with_values(v + bump)
    tf, tg = t_step(f, SCAN), t_step(g, SCAN)
    assert np.all(tf.values <= f.values)
    assert np.all(tf.values <= tg.values)


def test_checker_finds_axis_witness():
    f = build_field(SLAB, (21, 21, 31), closed_form_t1, K=8)
    ws = check_field_hquasiconvex(f, ScanParams(n_theta=8, n_s=16))
    assert ws
    on_axis = [w for w in ws if np.allclose(w.w, (0, 0, 0.4))]
    assert on_axis and on_axis[0].margin == pytest.approx(1 - 0.16)
    for w in ws[:20]:
        assert in_horiz_plane(w.p, w.q, 1e-9)
        assert w.margin > 0 and w.u_w == pytest.approx(f(w.w))


def test_checker_constant_and_envelope(hump_field, tmp_path):
    c = build_field(BoxDomain.cube(1), (5, 5, 5), lambda p: 1.0, K=1)
    assert check_field_hquasiconvex(c, SCAN) == []
    q, _, _ = t_iterate(hump_field, SCAN, max_iter=50)
    assert check_field_hquasiconvex(q, SCAN) == []
    assert check_field_hquasiconvex(monotone_compose(q, lambda s: np.maximum(s, 0)), SCAN) == []
    ws = check_field_hquasiconvex(hump_field, SCAN, max_witnesses=3)
    assert len(ws) == 3
    write_witnesses(ws, tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "px,py,pz,qx,qy,qz,wx,wy,wz,up,uq,uw,margin" and len(lines) == 4


def test_monotone_compose_examples(hump_field):
    assert np.array_equal(monotone_compose(hump_field, lambda s: s).values, hump_field.values)
    shifted = monotone_compose(hump_field, lambda s: s + 3)
    np.testing.assert_array_equal(shifted.values, hump_field.values + 3)
    assert shifted.K == hump_field.K + 3
    with pytest.raises(ValueError):
        monotone_compose(hump_field, lambda s: -s)


@pytest.mark.parametrize("r,R,t,convex", [(1, 1, 1, True), (2, 2, 1, False)])
def test_disk_stack_examples(r, R, t, convex):
    E = RegionSpec.of(DiskStack(r, R, t, 0.2))
    ws = check_set_hconvex(E, ScanParams(n_theta=32, n_s=32), sample_count=400)
    assert (ws == []) == convex
    for w in ws[:10]:
        assert E.contains(w.p) and E.contains(w.q) and not E.contains(w.w)


def test_gauge_ball_is_hconvex():
    E = RegionSpec.of(GaugeBall((0, 0, 0), 1.0))
    assert check_set_hconvex(E, SCAN, sample_count=300) == []
