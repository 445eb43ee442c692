"""Embedded target manifolds.  Only the round sphere is implemented.

Conventions (used consistently by the solver and the Jacobi operator):

* ``second_form(p, X, Y) = <X, Y> p``, so the harmonic-map equation reads
  ``-Delta u = |grad u|^2 u`` and ``<A(du, du), A(w, w)> = |du|^2 |w|^2``.
* ``weingarten(p, nu)`` is the tangent endomorphism ``S`` with
  ``(S X) . Y = nu . A(X, Y)`` for a normal vector ``nu``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TargetManifold:
    """Interface of an embedded target ``N^n`` in ``R^m``.

    Point and vector arguments carry the ambient coordinate on the last axis
    and may have arbitrary leading (batch) axes.
    """

    ambient_dim: int
    intrinsic_dim: int

    def project(self, x):
        raise NotImplementedError

    def tangent_projector(self, p):
        raise NotImplementedError

    def second_form(self, p, X, Y):
        raise NotImplementedError

    def weingarten(self, p, nu):
        raise NotImplementedError

    def shape_potential(self, p, G):
        """``S`` with ``(S X) . Y = sum_i A(G_i, G_i) . A(X, Y)``.

        ``G`` has shape ``(..., k, m)``: ``k`` gradient components at ``p``.
        """
        p = np.asarray(p, dtype=float)
        G = np.asarray(G, dtype=float)
        if G.shape[-2] == 0:
            return np.zeros(p.shape + (p.shape[-1],))
        pk = np.broadcast_to(p[..., None, :], G.shape)
        nu = self.second_form(pk, G, G).sum(axis=-2)
        return self.weingarten(p, nu)

    def geodesic_point(self, p, v, s):
        raise NotImplementedError

    def distance(self, p, q):
        raise NotImplementedError

    def sectional_curvature(self, p):
        raise NotImplementedError

    def on_manifold_error(self, x):
        """Distance of ``x`` from the manifold (per point)."""
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def tangent_basis(self, p):
        """Orthonormal tangent frame at ``p``, shape ``(..., m, n)``.

        Gram-Schmidt on the projected ambient axes, taken in order of
        increasing alignment with the normal space.  The ordering makes the
        frame a deterministic function of ``p``.
        """
        p = np.asarray(p, dtype=float)
        P = self.tangent_projector(p)
        m, n = self.ambient_dim, self.intrinsic_dim
        # columns of P are projected axes; least normal component first
        lengths = np.linalg.norm(P, axis=-2)
        order = np.argsort(-lengths, axis=-1, kind="stable")
        axes = np.take_along_axis(P, order[..., None, :], axis=-1)
        basis = np.zeros(p.shape[:-1] + (m, n))
        for k in range(n):
            v = axes[..., :, k].copy()
            for j in range(k):
                e = basis[..., :, j]
                v -= np.sum(v * e, axis=-1, keepdims=True) * e
            nv = np.linalg.norm(v, axis=-1, keepdims=True)
            if np.any(nv < 1e-8):
                raise np.linalg.LinAlgError("rank-deficient tangent basis")
            basis[..., :, k] = v / nv
        return basis


@dataclass(frozen=True)
class Sphere(TargetManifold):
    """Unit sphere ``S^n`` in ``R^{n+1}``."""

    n: int = 2

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def intrinsic_dim(self) -> int:
        return self.n

    def project(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(r == 0):
            raise ValueError("cannot project the zero vector onto the sphere")
        return x / r

    def tangent_projector(self, p):
        p = np.asarray(p, dtype=float)
        return np.eye(p.shape[-1]) - p[..., :, None] * p[..., None, :]

    def second_form(self, p, X, Y):
        p = np.asarray(p, dtype=float)
        return np.sum(np.asarray(X) * np.asarray(Y), axis=-1, keepdims=True) * p

    def weingarten(self, p, nu):
        p = np.asarray(p, dtype=float)
        c = np.sum(np.asarray(nu) * p, axis=-1)
        return c[..., None, None] * self.tangent_projector(p)

    def geodesic_point(self, p, v, s):
        p, v = np.asarray(p, dtype=float), np.asarray(v, dtype=float)
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * p + np.sin(s) * v

    def distance(self, p, q):
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        # atan2 form is accurate for nearby and nearly antipodal points
        cross = np.linalg.norm(p - np.sum(p * q, axis=-1, keepdims=True) * q, axis=-1)
        return np.arctan2(cross, np.sum(p * q, axis=-1))

    def log_map(self, p, q):
        """Tangent vector at ``p`` pointing to ``q`` with length ``distance(p, q)``."""
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        w = q - np.sum(p * q, axis=-1, keepdims=True) * p
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        d = self.distance(p, q)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(nw > 0, d * w / np.where(nw > 0, nw, 1.0), 0.0)
        return out

    def sectional_curvature(self, p):
        return np.ones(np.shape(p)[:-1])


def make_target(name: str, dim: int = 2) -> TargetManifold:
    """Target lookup by scenario name."""
    if name.lower() == "sphere":
        if dim < 1:
            raise ValueError("sphere dimension must be >= 1")
        return Sphere(dim)
    raise ValueError(f"unknown target {name!r}; only 'sphere' is available")
