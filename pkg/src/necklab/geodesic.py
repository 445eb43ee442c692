"""Morse index and nullity of constant-speed geodesic segments.

Two independent routes: the Dirichlet spectrum of the 1D Jacobi operator
(finite differences) and conjugate-point counting by shooting the scalar
Jacobi equation ``J'' + K J = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .spectrum import SpectrumReport
from .target import Sphere, TargetManifold

MAX_SHOOTING_LENGTH = 64 * np.pi
C_NULL_1D = 0.5


@dataclass(frozen=True)
class GeodesicSegment:
    """Unit-speed geodesic ``s -> exp_p(s v)`` for ``s`` in ``[0, length]``."""

    start: np.ndarray
    tangent: np.ndarray
    length: float
    target: TargetManifold = field(default_factory=Sphere)
    n_samples: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("segment length must be non-negative")
        if self.n_samples == 0:
            object.__setattr__(self, "n_samples", default_nodes(self.length) + 1)

    @property
    def end(self) -> np.ndarray:
        return self.target.geodesic_point(self.start, self.tangent, self.length)

    def arclength(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_samples)

    def samples(self) -> np.ndarray:
        return self.target.geodesic_point(self.start, self.tangent, self.arclength())

    def velocity(self) -> np.ndarray:
        s = self.arclength()[:, None]
        return -np.sin(s) * self.start + np.cos(s) * self.tangent

    @classmethod
    def along(cls, length: float, target: TargetManifold | None = None, **kwargs) -> "GeodesicSegment":
        """Segment of the given length on the first great circle of ``target``."""
        target = target or Sphere(2)
        e = np.eye(target.ambient_dim)
        return cls(e[0], e[1], float(length), target, **kwargs)


def default_nodes(length: float) -> int:
    """Number of intervals: ``max(64, 16 L)``."""
    return int(max(64, np.ceil(16 * length)))


def geodesic_second_variation(seg: GeodesicSegment, v: np.ndarray, *, atol: float = 1e-12) -> float:
    """Trapezoidal ``int |v'|^2 - A(g', g') . A(v, v)`` for ``v`` sampled at ``seg.arclength()``.

    ``v'`` is the ambient derivative, taken by differencing consecutive
    samples (midpoint rule on each interval).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (seg.n_samples, seg.target.ambient_dim):
        raise ValueError(f"expected field of shape {(seg.n_samples, seg.target.ambient_dim)}")
    if np.linalg.norm(v[0]) > atol or np.linalg.norm(v[-1]) > atol:
        raise ValueError("variation must vanish at both endpoints")
    if seg.length == 0:
        return 0.0
    h = seg.length / (seg.n_samples - 1)
    g = seg.samples()
    gd = seg.velocity()
    kinetic = np.sum(np.diff(v, axis=0) ** 2) / h
    A_gg = seg.target.second_form(g, gd, gd)
    A_vv = seg.target.second_form(g, v, v)
    pot = np.sum(A_gg * A_vv, axis=-1)
    weights = np.full(seg.n_samples, h)
    weights[[0, -1]] = h / 2
    return float(kinetic - np.sum(weights * pot))


def _branch_potentials(seg: GeodesicSegment) -> tuple[float, float]:
    """``(normal, tangential)`` potentials of the 1D Jacobi operator in a parallel frame.

    In frame coordinates the form reads ``int f'^2 + c f^2``; for a normal
    parallel field ``c = -A(g', g') . A(e, e)``, for the tangential one the
    ambient derivative of ``g'`` adds ``|A(g', g')|^2``.
    """
    p, v = seg.start, seg.tangent
    tgt = seg.target
    A_gg = tgt.second_form(p, v, v)
    P = tgt.tangent_projector(p)
    normals = P - np.outer(v, v)
    w, U = np.linalg.eigh(normals)
    e = U[:, np.argmax(w)]
    c_normal = -float(A_gg @ tgt.second_form(p, e, e))
    c_tan = float(A_gg @ A_gg) - float(A_gg @ tgt.second_form(p, v, v))
    return c_normal, c_tan


def segment_spectrum(seg: GeodesicSegment, n_modes: int = 16, zero_tol: float | None = None,
                     n_nodes: int | None = None) -> SpectrumReport:
    """Lowest Dirichlet eigenvalues of the 1D Jacobi operator on both branches.

    On ``S^n`` with unit speed these approximate ``(k pi/L)^2 - 1`` (normal,
    multiplicity ``n - 1``) and ``(k pi/L)^2`` (tangential).  ``meta``
    carries the per-branch lists and the index/nullity of a single normal
    direction.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    N = n_nodes or default_nodes(seg.length)
    h = seg.length / N
    if zero_tol is None:
        zero_tol = C_NULL_1D * h**2
    if N < 2 or seg.length == 0:
        return SpectrumReport.from_eigenvalues([], zero_tol, dimension=1)
    # Dirichlet second difference on the N-1 interior nodes
    d = np.full(N - 1, 2.0 / h**2)
    e = np.full(N - 2, -1.0 / h**2)
    k = min(n_modes, N - 1)
    lap = scipy.linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))
    c_normal, c_tan = _branch_potentials(seg)
    normal = lap + c_normal
    tangential = lap + c_tan
    n_normal = seg.target.intrinsic_dim - 1
    all_ev = np.concatenate([np.repeat(normal, n_normal), tangential])
    # a true zero mode sits at about -h^2/12 = zero_tol/6, so only a narrow band is suspicious
    rep = SpectrumReport.from_eigenvalues(all_ev, zero_tol, dimension=1, warn_factor=2.0)
    nrm = SpectrumReport.from_eigenvalues(normal, zero_tol, dimension=1, warn_factor=2.0)
    rep.meta.update({
        "length": float(seg.length), "n_nodes": int(N),
        "normal": [float(x) for x in normal], "tangential": [float(x) for x in tangential],
        "normal_index": nrm.index, "normal_nullity": nrm.nullity,
        "normal_directions": int(n_normal),
    })
    return rep


@dataclass(frozen=True)
class ConjugateResult:
    count: int
    endpoint_conjugate: bool
    zeros: tuple[float, ...]


def conjugate_zeros(seg: GeodesicSegment, rtol: float = 1e-10, atol: float = 1e-12,
                    endpoint_tol: float = 1e-6) -> ConjugateResult:
    """Shoot ``J'' + K(g(s)) J = 0, J(0) = 0, J'(0) = 1`` and locate the zeros of ``J``.

    Zeros within ``endpoint_tol`` of ``L`` are reported as an endpoint
    conjugate point (a nullity contribution), not counted.
    """
    L = seg.length
    if L > MAX_SHOOTING_LENGTH:
        raise ValueError(f"segment length {L:.3f} exceeds the shooting limit 64 pi")
    if L == 0:
        return ConjugateResult(0, False, ())
    tgt = seg.target

    def rhs(s, y):
        K = float(tgt.sectional_curvature(tgt.geodesic_point(seg.start, seg.tangent, s)))
        return [y[1], -K * y[0]]

    def hit(s, y):
        return y[0]
    hit.terminal = False

    pad = 10 * endpoint_tol * max(1.0, L)
    sol = solve_ivp(rhs, (0.0, L + pad), [0.0, 1.0], method="DOP853", rtol=rtol, atol=atol,
                    events=hit, max_step=0.25)
    if sol.status != 0:
        raise RuntimeError(f"Jacobi shooting failed: {sol.message}")
    zeros = [float(z) for z in sol.t_events[0] if z > 1e-9]
    interior = [z for z in zeros if z < L - endpoint_tol * max(1.0, L)]
    endpoint = any(abs(z - L) <= endpoint_tol * max(1.0, L) for z in zeros)
    return ConjugateResult(len(interior), endpoint, tuple(zeros))


def conjugate_points(seg: GeodesicSegment) -> int:
    """Number of conjugate points of ``seg.start`` in the open interval ``(0, L)``."""
    return conjugate_zeros(seg).count
