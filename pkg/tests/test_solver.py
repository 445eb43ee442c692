import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from necklab.domain import make_grid
from necklab.lab.runner import phase_noise
from necklab.solver import (DiscreteMap, SweepError, SweepStep, constant_map, continuation_sweep,
                            dirichlet_energy, energy_difference, harmonic_equation_residual,
                            neck_boundary_data, neck_initial_map, resample, solve_harmonic, stiffness_apply,
                            sup_norm, tension_residual, theta_wrap_map, winding_map)
from necklab.target import Sphere

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


def _torus(n_t=32, n_th=8, T=8 * np.pi):
    return make_grid("torus", n_t, n_th, t_total=T)


def test_shape_and_dirichlet_validation():
    g = _torus()
    with pytest.raises(ValueError):
        DiscreteMap(g, np.zeros((3, 3, 3)))
    with pytest.raises(ValueError):
        DiscreteMap(g, winding_map(g, 1).values, bc=np.zeros((2, 8, 3)))


@pytest.mark.parametrize("w", [1, 2, 3])
def test_winding_energy_matches_discrete_closed_form(w):
    g = _torus(40, 8)
    u = winding_map(g, w)
    a = 2 * np.pi * w / g.length
    # every t-edge has chord 2 sin(a h/2); c_t = h_theta/h_t
    expected = g.n_t * g.n_theta * (g.h_theta / g.h_t) * 4 * np.sin(a * g.h_t / 2) ** 2
    assert dirichlet_energy(u) == pytest.approx(expected, rel=1e-13)
    assert sup_norm(tension_residual(u)) < 1e-12


def test_constant_map_is_trivially_harmonic():
    u = constant_map(_torus())
    assert dirichlet_energy(u) == 0.0
    assert sup_norm(harmonic_equation_residual(u)) == 0.0


def test_theta_wrap_energy():
    g = _torus(16, 16, 5.0)
    u = theta_wrap_map(g)
    expected = g.n_t * g.n_theta * (g.h_t / g.h_theta) * 4 * np.sin(g.h_theta / 2) ** 2
    assert dirichlet_energy(u) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stiffness_symmetric_and_energy(seed):
    rng = np.random.default_rng(seed)
    for g in (_torus(12, 8, 3.0), make_grid("cylinder", 9, 8, t_min=0.0, t_max=2.0)):
        U, V = rng.normal(size=(2,) + g.shape + (3,))
        assert np.sum(V * stiffness_apply(g, U)) == pytest.approx(np.sum(U * stiffness_apply(g, V)))
        u = DiscreteMap(g, Sphere().project(U))
        assert np.sum(u.values * stiffness_apply(g, u.values)) == pytest.approx(dirichlet_energy(u))
        d = 1e-3 * V
        direct = dirichlet_energy(u.with_values(u.values + d)) - dirichlet_energy(u)
        assert energy_difference(u, d) == pytest.approx(direct, rel=1e-8, abs=1e-12)


def test_stiffness_kills_affine_profiles_in_interior():
    g = make_grid("cylinder", 11, 8, t_min=0.0, t_max=1.0)
    U = np.zeros(g.shape + (3,))
    U[..., 0] = 3.0 * g.t[:, None] - 1.0
    assert np.abs(stiffness_apply(g, U)[1:-1]).max() < 1e-12


def test_solver_energy_monotone_and_constraint(rng):
    g = _torus(32, 8)
    u0 = phase_noise(winding_map(g, 2), 5e-2, rng)
    u, rep = solve_harmonic(u0, tol=1e-10, record_energies=True)
    assert rep.converged and rep.residual <= 1e-10
    e = np.array(rep.energies)
    assert np.all(np.diff(e) <= 1e-12 * e[0])
    assert u.constraint_error() < 1e-13
    assert rep.energy == pytest.approx(dirichlet_energy(winding_map(g, 2)), rel=1e-9)


def test_solver_errors_and_budget(rng):
    u0 = phase_noise(winding_map(_torus(), 1), 1e-1, rng)
    with pytest.raises(ValueError):
        solve_harmonic(u0, tol=0.0)
    u, rep = solve_harmonic(u0, tol=1e-12, max_iter=3)
    assert not rep.converged and rep.iterations == 3


def test_dirichlet_neck_converges_to_geodesic_profile():
    g = make_grid("cylinder", 33, 8, t_min=0.0, t_max=4 * np.pi)
    p = np.array([1.0, 0, 0])
    q = np.array([np.cos(2.0), np.sin(2.0), 0])
    bc = neck_boundary_data(g, p, q)
    u0 = neck_initial_map(g, bc)
    u, rep = solve_harmonic(u0, tol=1e-10)
    assert rep.converged
    assert np.array_equal(u.values[0], bc[0]) and np.array_equal(u.values[-1], bc[1])
    assert np.abs(u.values[..., 2]).max() < 1e-8  # stays on the great circle through p, q
    ang = np.unwrap(np.arctan2(u.values[:, 0, 1], u.values[:, 0, 0]))
    assert np.allclose(ang, 2.0 * g.s_coordinate(), atol=1e-8)


def test_resample_and_sweep(rng):
    g1, g2 = _torus(32, 8), _torus(64, 8, 16 * np.pi)
    u = winding_map(g1, 2)
    v = resample(u, g2)
    assert np.abs(v.values - winding_map(g2, 2).values).max() < 0.1
    out = continuation_sweep(phase_noise(u, 1e-2, rng), [SweepStep(g1), SweepStep(g2)], tol=1e-10)
    assert [r.converged for _, r in out] == [True, True]
    with pytest.raises(SweepError) as info:
        continuation_sweep(phase_noise(u, 1e-1, rng), [SweepStep(g1)], tol=1e-12, max_iter=2)
    assert info.value.step == 0 and len(info.value.partial) == 1
