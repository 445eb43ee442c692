import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from necklab.domain import (BETA_MAX, annulus_chart, annulus_chart_inverse, collar_for_length, collar_params,
                            junction_regions, make_grid, rescale_to_unit, unit_to_radius)


def test_collar_formulas():
    p = collar_params(0.5, rho=2.0, beta=0.4)
    assert p.eta == pytest.approx(np.exp(-np.pi / 2))
    assert p.delta == pytest.approx(np.exp(-2 * np.pi**2 / 0.5))
    assert p.T == pytest.approx(np.log(p.eta**2 / p.delta))
    assert p.t_range == pytest.approx((np.pi / 2, 4 * np.pi**2 - np.pi / 2))
    assert p.t_outer - p.t_inner == pytest.approx(p.T)


@pytest.mark.parametrize("kwargs", [
    {"l": 0.0}, {"l": -1.0}, {"l": 1.0, "rho": 0.0},
    {"l": 1.0, "beta": 0.0}, {"l": 1.0, "beta": BETA_MAX},
    {"l": 100.0},  # delta >= eta^2: no room for a collar
])
def test_collar_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        collar_params(**kwargs)


def test_collar_for_length_spans_whole_cylinder():
    p = collar_for_length(8 * np.pi)
    assert p.t_inner == pytest.approx(1.0)
    assert p.t_outer == pytest.approx(8 * np.pi - 1.0)
    assert p.T == pytest.approx(8 * np.pi - 2.0)


@given(st.floats(0.0, 40.0), st.floats(0.0, 2 * np.pi - 1e-9))
def test_annulus_chart_roundtrip(t, theta):
    x = annulus_chart(t, theta)
    t2, th2 = annulus_chart_inverse(x)
    assert t2 == pytest.approx(t, abs=1e-9)
    assert np.angle(np.exp(1j * (th2 - theta))) == pytest.approx(0.0, abs=1e-9)


def test_unit_rescaling_endpoints_and_errors():
    p = collar_for_length(6 * np.pi)
    assert rescale_to_unit(p.eta, p) == pytest.approx(0.0)
    assert rescale_to_unit(p.delta / p.eta, p) == pytest.approx(1.0)
    s = np.linspace(0, 1, 7)
    assert rescale_to_unit(unit_to_radius(s, p), p) == pytest.approx(s)
    with pytest.raises(ValueError):
        rescale_to_unit(2 * p.eta, p)


@pytest.mark.parametrize("kind,kw", [
    ("torus", {"t_total": 5.0}), ("cylinder", {"t_min": 1.0, "t_max": 6.0}),
    ("collar", {"params": collar_for_length(7.0)}),
])
def test_cell_areas_sum_to_cylinder_area(kind, kw):
    g = make_grid(kind, 24, 12, **kw)
    assert g.cell_areas().sum() == pytest.approx(2 * np.pi * g.length)
    assert g.shape == (24, 12)
    assert g.s_coordinate()[0] == 0.0


def test_periodic_spacing_excludes_duplicate_row():
    g = make_grid("torus", 64, 16, t_total=8 * np.pi)
    assert g.h_t == pytest.approx(np.pi / 8)
    assert g.t[-1] == pytest.approx(8 * np.pi - g.h_t)
    assert not g.boundary_rows().any()
    c = make_grid("cylinder", 9, 8, t_min=0, t_max=8)
    assert c.h_t == 1.0 and c.boundary_rows().sum() == 2


@pytest.mark.parametrize("args,kw", [
    (("torus", 4, 16), {"t_total": 1.0}), (("torus", 16, 16), {}),
    (("cylinder", 16, 16), {"t_min": 2.0, "t_max": 1.0}), (("collar", 16, 16), {}),
    (("disk", 16, 16), {}),
])
def test_make_grid_errors(args, kw):
    with pytest.raises(ValueError):
        make_grid(*args, **kw)


@pytest.mark.parametrize("sigma", [0.1, 0.25, 0.5])
def test_junction_bands(sigma):
    p = collar_for_length(10 * np.pi)
    outer, inner = junction_regions(p, sigma)
    assert outer.length == pytest.approx(sigma * p.T) == inner.length
    # outer band in radii: [eps eta, eta]; inner band: [delta/eta, delta/(eps eta)]
    assert np.exp(-outer.t_hi) == pytest.approx(outer.eps * p.eta)
    assert np.exp(-inner.t_lo) == pytest.approx(p.delta / (inner.eps * p.eta))
    assert outer.eps == pytest.approx(np.exp(-sigma * p.T))
    t = np.array([outer.t_lo, outer.t_hi])
    assert outer.contains(t).all() and not outer.contains(t, strict=True).any()


@pytest.mark.parametrize("sigma", [0.0, -0.1, 0.6])
def test_junction_sigma_range(sigma):
    with pytest.raises(ValueError):
        junction_regions(collar_for_length(10.0), sigma)
