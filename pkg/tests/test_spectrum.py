import json

import numpy as np
import pytest

import oracles
from necklab.domain import collar_for_length, collar_params, make_grid
from necklab.solver import constant_map, dirichlet_energy, energy_difference, winding_map
from necklab.spectrum import (SpectrumReport, TangentField, WeightField, assemble_jacobi, frak_profile,
                              jacobi_spectrum, rayleigh_neck_test, second_variation, solve_spectrum,
                              weight_frak, weight_omega, winding_oracle)
from necklab.target import Sphere

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


@pytest.mark.parametrize("w,n_t,n_th", [(1, 32, 8), (2, 64, 16), (3, 48, 8)])
def test_discrete_oracle_exact(w, n_t, n_th):
    T = 8 * np.pi
    u = winding_map(make_grid("torus", n_t, n_th, t_total=T), w)
    ev = jacobi_spectrum(u, mode="full").eigenvalues
    ref = np.array([x[0] for x in winding_oracle(T, w, ceiling=2.0, discrete=(n_t, n_th))])
    assert np.max(np.abs(ev[:ref.size] - ref)) < 1e-12
    assert ev[ref.size] >= 2.0 - 1e-12


def test_continuum_oracle_lowest_modes():
    modes = winding_oracle(8 * np.pi, 2, ceiling=0.07)
    assert tuple(m[0] for m in modes[:6]) == pytest.approx(oracles.WINDING_8PI_W2_LOWEST)
    assert modes[6][0] == pytest.approx(oracles.WINDING_8PI_W2_NEXT)


def test_alpha_one_degeneracy():
    """L = 4 pi, w = 2: the |q| = 1 normal modes sit exactly at zero in the continuum."""
    modes = winding_oracle(4 * np.pi, 2, ceiling=1e-9)
    zeros = [m for m in modes if abs(m[0]) < 1e-12]
    assert len(zeros) == 5
    assert sum(m[0] < -1e-12 for m in modes) == 3


def test_constant_map_counts():
    u = constant_map(make_grid("torus", 16, 8, t_total=4.0))
    rep = jacobi_spectrum(u)
    assert (rep.index, rep.nullity, rep.extended) == oracles.CONSTANT_COUNTS


def test_hessian_matches_energy_second_derivative(rng):
    g = make_grid("torus", 24, 8, t_total=8 * np.pi)
    u = winding_map(g, 2)
    S = Sphere()
    W = TangentField.from_coords(u, rng.normal(size=g.shape + (2,))).values
    eps = 1e-4

    def de(e):
        return energy_difference(u, S.project(u.values + e * W) - u.values)

    second = (de(eps) + de(-eps)) / eps**2
    assert second == pytest.approx(2 * second_variation(u, W), rel=1e-6)
    system = assemble_jacobi(u)
    assert system.quadratic_form(W) == pytest.approx(second_variation(u, W), rel=1e-12)
    assert np.allclose(system.to_field(system.to_coords(W)), W)


def test_weights_and_sylvester(rng):
    T = 6 * np.pi
    g = make_grid("torus", 64, 8, t_total=T)
    p = collar_for_length(T)
    om = weight_omega(g, p)
    assert om.values.min() > 0
    u = winding_map(g, 1)
    base = jacobi_spectrum(u)
    for wt in (om, weight_frak(g, p, 0.25, extend=True), WeightField(rng.uniform(0.5, 3.0, g.shape))):
        rep = jacobi_spectrum(u, wt)
        assert (rep.index, rep.nullity) == (base.index, base.nullity)
    with pytest.raises(ValueError):
        weight_frak(g, p, 0.25)
    with pytest.raises(ValueError):
        WeightField(np.zeros(g.shape))


def test_frak_profile_examples():
    p = collar_for_length(20.0)
    sigma = 0.25
    lo, hi = p.t_range
    g = make_grid("cylinder", 201, 8, t_min=lo, t_max=hi)
    frak = weight_frak(g, p, sigma).values[:, 0]
    om = weight_omega(g, p).values[:, 0]
    assert np.all(frak >= om)
    eps = p.eps(sigma)
    assert frak[0] == pytest.approx(1 + eps**p.beta + 1 / (sigma * p.T) ** 2)
    with pytest.raises(ValueError):
        frak_profile([lo], p, 0.5)


def test_omega_examples():
    p = collar_for_length(20.0)
    lo, hi = p.t_range
    g = make_grid("cylinder", 21, 8, t_min=0.0, t_max=20.0)
    om = weight_omega(g, p).values[:, 0]
    mid = np.log(1 / np.sqrt(p.delta))  # e^{-t} = sqrt(delta)
    at_mid = weight_omega(make_grid("cylinder", 9, 8, t_min=lo, t_max=2 * mid - lo), p).values[4, 0]
    assert at_mid == pytest.approx(2 * (np.sqrt(p.delta) / p.eta) ** p.beta + 1 / p.T**2)
    thick = 1 + (p.delta / p.eta**2) ** p.beta + 1 / p.T**2
    assert om[0] == pytest.approx(thick) and om[-1] == pytest.approx(thick)
    # continuous across the collar ends
    edge = weight_omega(make_grid("cylinder", 9, 8, t_min=lo - 1e-9, t_max=lo + 1e-9), p).values[:, 0]
    assert np.ptp(edge) < 1e-8
    # T = 1 plug-in: thick value 1 + e^{-1/2} + 1
    q = collar_params(2 * np.pi**2 / 3)
    assert q.T == pytest.approx(1.0)
    val = weight_omega(make_grid("torus", 8, 8, t_total=0.5), q).values[0, 0]
    assert val == pytest.approx(2.6065, abs=1e-4)


def test_auto_mode_agrees_with_full():
    g = make_grid("torus", 64, 16, t_total=8 * np.pi)
    u = winding_map(g, 2)
    full = jacobi_spectrum(u, mode="full")
    low = jacobi_spectrum(u, mode="lowest", k=12)
    assert np.allclose(low.eigenvalues, full.eigenvalues[:12], atol=1e-9)
    assert (low.index, low.nullity) == (full.index, full.nullity) == (3, 3)
    assert low.ceiling == pytest.approx(low.eigenvalues[-1])


def test_report_roundtrip_and_warning():
    rep = SpectrumReport.from_eigenvalues([0.5, -1.0, 1e-6, 2.0], 1e-4)
    assert (rep.index, rep.nullity, rep.extended) == (1, 1, 2)
    back = SpectrumReport.from_dict(json.loads(rep.to_json()))
    assert np.array_equal(back.eigenvalues, rep.eigenvalues) and back.ceiling == np.inf
    with pytest.warns(RuntimeWarning, match="ambiguous"):
        SpectrumReport.from_eigenvalues([5e-4], 1e-4)
    with pytest.raises(ValueError):
        system = assemble_jacobi(winding_map(make_grid("torus", 16, 8, t_total=5.0), 1))
        system.M[0] = 0.0
        solve_spectrum(system)


def test_rayleigh_test_validation():
    T = 8 * np.pi
    u = winding_map(make_grid("torus", 64, 8, t_total=T), 1)
    res = rayleigh_neck_test(u, collar_for_length(T), 0.25, trials=10)
    assert res["ratios"].shape == (10,) and res["min_ratio"] > 0
    with pytest.raises(ValueError):
        rayleigh_neck_test(u, collar_for_length(T), 0.25, trials=0)
