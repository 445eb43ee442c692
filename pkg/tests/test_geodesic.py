import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from necklab.geodesic import (GeodesicSegment, conjugate_points, conjugate_zeros, default_nodes,
                              geodesic_second_variation, segment_spectrum)
from necklab.target import Sphere


def _sin_field(seg):
    s = seg.arclength()
    normal = np.cross(seg.start, seg.tangent)
    return np.sin(np.pi * s / seg.length)[:, None] * normal


@pytest.mark.parametrize("L", [np.pi / 2, np.pi, 2.0, 3 * np.pi])
def test_second_variation_of_sine_field(L):
    seg = GeodesicSegment.along(L, n_samples=4001)
    q = geodesic_second_variation(seg, _sin_field(seg))
    assert q == pytest.approx(oracles.q_sin_normal(L), abs=2e-5 * max(1.0, L))


def test_second_variation_zero_field_and_errors():
    seg = GeodesicSegment.along(2.0)
    assert geodesic_second_variation(seg, np.zeros((seg.n_samples, 3))) == 0.0
    v = np.ones((seg.n_samples, 3))
    with pytest.raises(ValueError, match="vanish"):
        geodesic_second_variation(seg, v)
    with pytest.raises(ValueError, match="shape"):
        geodesic_second_variation(seg, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        GeodesicSegment.along(-1.0)


def test_segment_samples_are_unit_speed():
    seg = GeodesicSegment.along(5.0)
    x = seg.samples()
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)
    assert np.allclose(np.linalg.norm(seg.velocity(), axis=1), 1.0)
    assert np.allclose(x[-1], seg.end)
    assert seg.n_samples == default_nodes(5.0) + 1 == 81


def test_spectrum_examples():
    half = segment_spectrum(GeodesicSegment.along(np.pi / 2))
    assert half.meta["normal"][0] == pytest.approx(oracles.GEODESIC_HALF_PI_LOWEST_NORMAL, rel=1e-3)
    assert (half.meta["normal_index"], half.meta["normal_nullity"]) == (0, 0)
    four = segment_spectrum(GeodesicSegment.along(4 * np.pi))
    assert (four.index, four.nullity, four.extended) == (3, 1, 4)
    assert min(four.meta["tangential"]) > 0
    one = segment_spectrum(GeodesicSegment.along(np.pi))
    assert (one.meta["normal_index"], one.meta["normal_nullity"]) == oracles.GEODESIC_PI


def test_branches_match_closed_form():
    L = 3.3
    rep = segment_spectrum(GeodesicSegment.along(L), n_modes=5, n_nodes=2000)
    k = np.arange(1, 6)
    assert np.allclose(rep.meta["normal"], (k * np.pi / L) ** 2 - 1, rtol=1e-4)
    assert np.allclose(rep.meta["tangential"], (k * np.pi / L) ** 2, rtol=1e-4)


def test_higher_sphere_multiplicity():
    rep = segment_spectrum(GeodesicSegment.along(2.5 * np.pi, Sphere(3)))
    assert rep.meta["normal_directions"] == 2
    assert rep.index == 2 * rep.meta["normal_index"] == 4
    assert rep.dimension == 1


@pytest.mark.parametrize("L,count", [(np.pi / 2, 0), (2.5 * np.pi, 2), (4 * np.pi, 3)])
def test_conjugate_examples(L, count):
    res = conjugate_zeros(GeodesicSegment.along(L))
    assert res.count == count
    assert res.endpoint_conjugate == (L == 4 * np.pi)
    assert np.allclose(res.zeros[:count], np.pi * np.arange(1, count + 1), atol=1e-8)


def test_shooting_limit_and_degenerate_length():
    with pytest.raises(ValueError, match="64"):
        conjugate_points(GeodesicSegment.along(64 * np.pi + 1))
    assert conjugate_points(GeodesicSegment.along(0.0)) == 0
    assert segment_spectrum(GeodesicSegment.along(0.0)).eigenvalues.size == 0
    with pytest.raises(ValueError):
        segment_spectrum(GeodesicSegment.along(1.0), n_modes=0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 6 * np.pi))
def test_morse_index_theorem(L):
    if abs(L - np.pi * round(L / np.pi)) < 0.05:
        return
    seg = GeodesicSegment.along(L)
    assert conjugate_points(seg) == segment_spectrum(seg).meta["normal_index"] == oracles.conjugate_count(L)
