import numpy as np
import pytest

from heisenhull.grid import BoxDomain, build_field
from heisenhull.group import gauge
from heisenhull.hj import (
    HamiltonianParams, SolveParams, boundary_layer, capped_field, check_coercive,
    hamiltonian_at, hamiltonian_field, pde_envelope, solve_step, subsolution_residual,
    sublevel_dirs, supersolution_residual,
)

CUBE = BoxDomain.cube(1.0)
BIG = BoxDomain.cube(3.0)
HP = HamiltonianParams()
FAST = SolveParams(omega_relax=1.0, tol_inner=1e-6, tol_outer=1e-3)


def hump(p):
    return np.abs(1 - p[..., 2] ** 2)


@pytest.fixture(scope="module")
def capped():
    return capped_field(BIG, (21, 21, 21), hump, K=3.0, R=2.5)


@pytest.fixture(scope="module")
def capped_gauge():
    return capped_field(BIG, (21, 21, 21), gauge, K=3.0, R=2.5)


def test_param_validation():
    with pytest.raises(ValueError):
        HamiltonianParams(n_theta=4)
    with pytest.raises(ValueError):
        HamiltonianParams(n_rho=1)
    with pytest.raises(ValueError):
        HamiltonianParams(stencil="weno")
    with pytest.raises(ValueError):
        SolveParams(omega_relax=0)
    with pytest.raises(ValueError):
        SolveParams(tol_inner=0)


def test_sublevel_dirs_examples():
    const = build_field(CUBE, (11, 11, 11), lambda p: 1.0, K=1)
    assert len(sublevel_dirs(const, (0, 0, 0), 1.0).points) == 0
    lin = build_field(CUBE, (11, 11, 11), lambda p: p[..., 0], K=2)
    d = sublevel_dirs(lin, (0, 0, 0), 0.0)
    assert len(d.points) and np.all(d.h_coords[:, 0] < 0)
    par = build_field(CUBE, (21, 21, 21), lambda p: -p[..., 0] ** 2, K=0)
    d = sublevel_dirs(par, (0.5, 0, 0), par((0.5, 0, 0)))
    assert d.points[:, 0].min() == pytest.approx(-1, abs=1e-9)
    assert d.h_coords[:, 0].min() == pytest.approx(-1.5, abs=1e-9)
    with pytest.raises(ValueError):
        sublevel_dirs(par, (2, 0, 0), 0.0)


def test_hamiltonian_examples():
    const = build_field(CUBE, (11, 11, 11), lambda p: 1.0, K=1)
    assert hamiltonian_at(const, (0.1, 0.2, 0.3)) == 0
    lin = build_field(CUBE, (21, 21, 21), lambda p: p[..., 0], K=2)
    assert hamiltonian_at(lin, (0, 0, 0)) < 0.1
    par = build_field(CUBE, (41, 41, 41), lambda p: -p[..., 0] ** 2, K=0)
    # the one-cell upwind slope is first order: 1.5 * (1 + h)
    assert hamiltonian_at(par, (0.5, 0, 0)) == pytest.approx(1.5, abs=0.1)
    central = HamiltonianParams(stencil="central")
    assert hamiltonian_at(par, (0.5, 0, 0), central) == pytest.approx(1.5, abs=0.01)
    assert np.all(hamiltonian_field(par) >= 0)


def test_check_coercive(capped):
    assert check_coercive(capped) == 3.0
    bad = build_field(BIG, (5, 5, 5), lambda p: 0.0, K=1)
    with pytest.raises(ValueError):
        check_coercive(bad)
    with pytest.raises(ValueError):
        solve_step(bad)


def test_capped_field_layout(capped):
    assert np.all(capped.values[boundary_layer(capped.values.shape)] == 3.0)
    assert capped.values.max() == 3.0
    assert capped((0, 0, 0.6)) == pytest.approx(0.64)
    with pytest.raises(ValueError):
        capped_field(BIG, (5, 5, 5), hump, K=3.0, R=3.5)


def test_solve_step_on_quasiconvex_input(capped_gauge):
    u, rep = solve_step(capped_gauge, HP, FAST)
    assert rep.converged
    # only the steep collar is touched, through interpolation error
    inner = gauge(capped_gauge.nodes()) < 2.5 - 0.3
    assert np.abs(u.values - capped_gauge.values)[inner].max() <= FAST.tol_inner


def test_solve_step_properties(capped):
    u, rep = solve_step(capped, HP, FAST)
    assert rep.converged and rep.residual <= FAST.tol_inner
    assert np.all(u.values <= capped.values)
    assert np.all(u.values[boundary_layer(u.values.shape)] == 3.0)
    assert u((0, 0, 0.6)) < capped((0, 0, 0.6)) - 0.05
    assert supersolution_residual(u, capped, HP) <= 2 * FAST.tol_inner
    # comparison: a lower right-hand side gives a lower solution
    lower = capped.with_values(np.where(boundary_layer(capped.values.shape), 3.0,
                                        capped.values - 0.2 * (capped.values < 3)))
    v, _ = solve_step(lower, HP, FAST)
    assert np.all(v.values <= u.values + 2 * FAST.tol_inner)


def test_residual_examples():
    g = build_field(BIG, (7, 7, 7), lambda p: 2.0, K=2)
    assert supersolution_residual(g, g) == 0
    assert subsolution_residual(g, g) == 0
    assert supersolution_residual(g.with_values(g.values - 1), g) == pytest.approx(1)


def test_pde_envelope_quasiconvex_input():
    flat = build_field(BIG, (9, 9, 9), lambda p: 2.0, K=2)
    u, rep = pde_envelope(flat, HP, FAST)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_array_equal(u.values, flat.values)


OUTER = SolveParams(omega_relax=1.0, tol_inner=1e-5, tol_outer=1e-2, max_outer=40)


@pytest.fixture(scope="module")
def envelope_run(capped):
    return pde_envelope(capped, HP, OUTER)


def test_pde_envelope_monotone_and_plateau(capped, envelope_run, tmp_path):
    u, rep = envelope_run
    assert rep.converged
    assert all(r.mono_violation <= 1e-9 for r in rep.records)
    assert u((0, 0, 0.6)) < 0.5
    plateau = capped.values == 3.0
    assert np.all(u.values[plateau & boundary_layer(u.values.shape)] == 3.0)
    rep.to_csv(tmp_path / "r.csv")
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header.startswith("outer,")


def test_translation_equivariance(capped, envelope_run):
    shifted = capped.with_values(capped.values + 0.1, K=3.1)
    u, _ = envelope_run
    v, _ = pde_envelope(shifted, HP, OUTER)
    assert np.abs(v.values - u.values - 0.1).max() <= 2 * OUTER.tol_outer
