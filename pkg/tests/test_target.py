import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from necklab.target import Sphere, make_target

vec3 = arrays(np.float64, 3, elements=st.floats(-1, 1))


def _unit(v):
    n = np.linalg.norm(v)
    return None if n < 1e-3 else v / n


@settings(max_examples=60)
@given(vec3, vec3, vec3)
def test_projector_and_forms(p, x, y):
    p = _unit(p)
    if p is None:
        return
    S = Sphere(2)
    P = S.tangent_projector(p)
    assert np.allclose(P @ P, P) and np.allclose(P, P.T)
    assert np.allclose(P @ p, 0)
    X, Y = P @ x, P @ y
    A = S.second_form(p, X, Y)
    assert np.allclose(P @ A, 0, atol=1e-12)  # normal valued
    nu = 0.7 * p
    W = S.weingarten(p, nu)
    assert (W @ X) @ Y == pytest.approx(nu @ A, abs=1e-12)


def test_shape_potential_is_gradient_norm_times_projector(rng):
    S = Sphere(2)
    p = S.project(rng.normal(size=3))
    G = rng.normal(size=(2, 3)) @ S.tangent_projector(p)
    U = S.shape_potential(p, G)
    assert np.allclose(U, np.sum(G * G) * S.tangent_projector(p))
    assert np.allclose(S.shape_potential(p, np.zeros((0, 3))), 0)


def test_geodesics_distance_and_log(rng):
    S = Sphere(3)
    p = S.project(rng.normal(size=4))
    v = S.tangent_basis(p)[:, 0]
    for s in [0.1, 1.0, 2.5, np.pi - 1e-3]:
        q = S.geodesic_point(p, v, s)
        assert np.linalg.norm(q) == pytest.approx(1.0)
        assert S.distance(p, q) == pytest.approx(s, abs=1e-9)
        assert np.allclose(S.log_map(p, q), s * v, atol=1e-8)
    assert S.distance(p, p) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(S.sectional_curvature(np.stack([p, p])), 1.0)


@settings(max_examples=40)
@given(vec3)
def test_tangent_basis_orthonormal(p):
    p = _unit(p)
    if p is None:
        return
    S = Sphere(2)
    E = S.tangent_basis(p)
    assert np.allclose(E.T @ E, np.eye(2), atol=1e-10)
    assert np.allclose(p @ E, 0, atol=1e-10)


def test_batched_points():
    S = Sphere(2)
    x = np.random.default_rng(0).normal(size=(5, 4, 3))
    p = S.project(x)
    assert np.allclose(np.linalg.norm(p, axis=-1), 1.0)
    assert S.tangent_basis(p).shape == (5, 4, 3, 2)
    assert S.on_manifold_error(p).max() < 1e-15


def test_errors():
    with pytest.raises(ValueError):
        Sphere(2).project(np.zeros(3))
    with pytest.raises(ValueError):
        make_target("torus")
    with pytest.raises(ValueError):
        make_target("sphere", 0)
    assert make_target("Sphere", 3) == Sphere(3)
