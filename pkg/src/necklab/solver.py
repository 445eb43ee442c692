"""Discrete harmonic maps from flat cylinders and tori into an embedded target.

The discretisation is the 5-point graph Laplacian on a uniform ``(t, theta)``
grid with trapezoidal end cells.  All operators below derive from the edge
energy::

    E_h(u) = sum_{t-edges} (h_theta/h_t) |u_i - u_j|^2
           + sum_{theta-edges} w_row (h_t/h_theta) |u_i - u_j|^2

so that ``grad E_h = -2 a Delta_h u`` with ``a`` the dual-cell areas.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .domain import CylinderGrid, make_grid
from .target import Sphere, TargetManifold

log = logging.getLogger(__name__)


@dataclass
class DiscreteMap:
    """Grid-sampled map ``u: grid -> N``.

    ``values`` has shape ``(n_t, n_theta, m)``.  ``bc`` is ``None`` for tori
    and free cylinders; for Dirichlet cylinders it fixes the two end rows
    (``bc[0]`` at ``t_min``, ``bc[1]`` at ``t_max``, each ``(n_theta, m)``).
    """

    grid: CylinderGrid
    values: np.ndarray
    target: TargetManifold = field(default_factory=Sphere)
    bc: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (self.target.ambient_dim,)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        if self.bc is not None:
            if self.grid.t_periodic:
                raise ValueError("Dirichlet data needs an open cylinder")
            self.bc = np.asarray(self.bc, dtype=float)
            self.values[0] = self.bc[0]
            self.values[-1] = self.bc[1]

    @property
    def fixed_rows(self) -> np.ndarray:
        """Rows held fixed by Dirichlet data."""
        if self.bc is None:
            return np.zeros(self.grid.n_t, dtype=bool)
        return self.grid.boundary_rows()

    def with_values(self, values) -> "DiscreteMap":
        return replace(self, values=np.array(values, dtype=float))

    def copy(self) -> "DiscreteMap":
        return self.with_values(self.values.copy())

    def constraint_error(self) -> float:
        return float(np.max(self.target.on_manifold_error(self.values)))


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    energy: float
    residual: float
    converged: bool
    energies: tuple[float, ...] = ()


def _edge_weights(grid: CylinderGrid) -> tuple[float, np.ndarray]:
    c_t = grid.h_theta / grid.h_t
    c_theta = grid.row_weights() * grid.h_t / grid.h_theta
    return c_t, c_theta


def dirichlet_energy(u: DiscreteMap) -> float:
    """Finite-difference approximation of ``int |grad u|^2``."""
    U, grid = u.values, u.grid
    c_t, c_theta = _edge_weights(grid)
    d_theta = np.roll(U, -1, axis=1) - U
    e = np.sum(c_theta[:, None] * np.sum(d_theta**2, axis=-1))
    if grid.t_periodic:
        d_t = np.roll(U, -1, axis=0) - U
    else:
        d_t = np.diff(U, axis=0)
    return float(e + c_t * np.sum(d_t**2))


def _edge_differences(grid: CylinderGrid, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d_theta = np.roll(U, -1, axis=1) - U
    d_t = np.roll(U, -1, axis=0) - U if grid.t_periodic else np.diff(U, axis=0)
    return d_t, d_theta


def energy_difference(u: DiscreteMap, delta: np.ndarray) -> float:
    """``E_h(u + delta) - E_h(u)`` summed edge by edge.

    Working with the increment keeps the difference accurate far below the
    rounding level of ``E_h`` itself, which the line search relies on near
    convergence.
    """
    c_t, c_theta = _edge_weights(u.grid)
    dt0, dth0 = _edge_differences(u.grid, u.values)
    dt1, dth1 = _edge_differences(u.grid, delta)
    de_t = np.sum(dt1 * (2 * dt0 + dt1))
    de_th = np.sum(c_theta[:, None] * np.sum(dth1 * (2 * dth0 + dth1), axis=-1))
    return float(c_t * de_t + de_th)


def _sphere_step(u: DiscreteMap, lap: np.ndarray, r: np.ndarray, tau: float
                 ) -> tuple[np.ndarray, float]:
    """Increment ``project(u + tau r) - u`` and its exact energy change on the sphere.

    The first-order part of the change is evaluated with the tangent/normal
    split done analytically (``u`` unit, ``r`` tangent), so rounding-level
    normal components of ``r`` cannot swamp the ``O(tau |r|^2)`` decrease.
    """
    a = u.grid.cell_areas()[..., None]
    q = tau**2 * np.sum(r * r, axis=-1, keepdims=True)
    rho = np.sqrt(1.0 + q)
    shrink = q / (rho * (1.0 + rho))
    delta = tau * r / rho - u.values * shrink
    delta[u.fixed_rows] = 0.0
    radial = np.sum(lap * u.values, axis=-1, keepdims=True)
    free = ~u.fixed_rows
    first = -2.0 * np.sum((a * (np.sum(r * r, axis=-1, keepdims=True) * tau / rho
                                - radial * shrink))[free])
    K_delta = stiffness_apply(u.grid, delta)
    return delta, float(first + np.sum(delta * K_delta))


def stiffness_apply(grid: CylinderGrid, U: np.ndarray) -> np.ndarray:
    """``K U`` with ``K`` the graph Laplacian of the edge energy (``U^T K U = E_h``)."""
    c_t, c_theta = _edge_weights(grid)
    cth = c_theta.reshape((-1, 1) + (1,) * (U.ndim - 2))
    out = cth * (2 * U - np.roll(U, -1, axis=1) - np.roll(U, 1, axis=1))
    if grid.t_periodic:
        out = out + c_t * (2 * U - np.roll(U, -1, axis=0) - np.roll(U, 1, axis=0))
    else:
        d = np.diff(U, axis=0)
        out = out.copy()
        out[:-1] -= c_t * d
        out[1:] += c_t * d
    return out


def laplacian(u: DiscreteMap) -> np.ndarray:
    """5-point Laplacian ``Delta_h u`` (ambient vector per node)."""
    return -stiffness_apply(u.grid, u.values) / u.grid.cell_areas()[..., None]


def central_gradient(grid: CylinderGrid, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(d_t U, d_theta U)`` by centred differences (one-sided on open ends)."""
    d_theta = (np.roll(U, -1, axis=1) - np.roll(U, 1, axis=1)) / (2 * grid.h_theta)
    if grid.t_periodic:
        d_t = (np.roll(U, -1, axis=0) - np.roll(U, 1, axis=0)) / (2 * grid.h_t)
    else:
        d_t = np.gradient(U, grid.h_t, axis=0)
    return d_t, d_theta


def tension_residual(u: DiscreteMap) -> np.ndarray:
    """Tangential part ``P_u Delta_h u`` of the discrete Laplacian; zero on fixed rows."""
    lap = laplacian(u)
    P = u.target.tangent_projector(u.values)
    r = np.einsum("...ij,...j->...i", P, lap)
    r[u.fixed_rows] = 0.0
    return r


def harmonic_equation_residual(u: DiscreteMap) -> np.ndarray:
    """Full residual ``Delta_h u + A_u(grad_c u, grad_c u)`` with centred gradients.

    Unlike :func:`tension_residual` this does not vanish identically on
    linear-phase maps, whose discrete Laplacian is exactly normal; it is
    the quantity whose ``O(h^2)`` decay is measured on those families.
    """
    lap = laplacian(u)
    d_t, d_theta = central_gradient(u.grid, u.values)
    A = u.target.second_form(u.values, d_t, d_t) + u.target.second_form(u.values, d_theta, d_theta)
    r = lap + A
    r[u.fixed_rows] = 0.0
    return r


def sup_norm(field: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(field, axis=-1))) if field.size else 0.0


def solve_harmonic(init: DiscreteMap, tol: float = 1e-9, max_iter: int = 200_000,
                   step: float | None = None, armijo: float = 1e-4,
                   shrink: float = 0.5, record_energies: bool = False,
                   callback: Callable[[int, DiscreteMap], None] | None = None,
                   ) -> tuple[DiscreteMap, SolveReport]:
    """Projected gradient descent ``u <- project(u + tau P_u Delta_h u)``.

    The trial step is a Barzilai-Borwein estimate (``step`` for the first
    iteration, default ``h_min^2/4``) and is backtracked until the Armijo
    condition on ``E_h`` holds, so accepted energies never increase.
    Terminates when ``sup |P_u Delta_h u| <= tol``.  On ``max_iter`` the
    best iterate is returned with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = init.copy()
    u.values[...] = u.target.project(u.values)
    grid = u.grid
    sphere = isinstance(u.target, Sphere)
    areas = grid.cell_areas()[..., None]
    h_min = min(grid.h_t, grid.h_theta)
    tau0 = step if step is not None else 0.25 * h_min**2
    tau = tau0
    energy = dirichlet_energy(u)
    energies = [energy] if record_energies else []
    lap = laplacian(u)
    r = tension_residual(u)
    res = sup_norm(r)
    it = 0
    prev_x = prev_g = None
    while res > tol and it < max_iter:
        g = -2.0 * areas * r  # constrained gradient of E_h
        if prev_x is not None:
            s = u.values - prev_x
            y = g - prev_g
            sy = float(np.sum(s * y))
            if sy > 0:
                tau_bb = float(np.sum(s * s)) / sy
                tau = float(np.clip(2.0 * areas.max() * tau_bb, 1e-3 * tau0, 1e4 * tau0))
        slope = 2.0 * float(np.sum(areas * r * r))
        accepted = False
        for _ in range(60):
            if sphere:
                delta, de = _sphere_step(u, lap, r, tau)
            else:
                delta = u.target.project(u.values + tau * r) - u.values
                delta[u.fixed_rows] = 0.0
                de = energy_difference(u, delta)
            if de <= -armijo * tau * slope:
                accepted = True
                break
            tau *= shrink
        if not accepted:
            log.warning("line search failed at iteration %d (residual %.3e)", it, res)
            break
        prev_x, prev_g = u.values, g
        u = u.with_values(u.target.project(u.values + delta))
        energy = energy + de
        if record_energies:
            energies.append(energy)
        lap = laplacian(u)
        r = tension_residual(u)
        res = sup_norm(r)
        it += 1
        if callback is not None:
            callback(it, u)
    report = SolveReport(it, dirichlet_energy(u), res, res <= tol, tuple(energies))
    if not report.converged:
        log.warning("solver stopped after %d iterations, residual %.3e > tol %.1e", it, res, tol)
    return u, report


def resample(u: DiscreteMap, grid: CylinderGrid, bc: np.ndarray | None = None) -> DiscreteMap:
    """Transfer ``u`` to ``grid`` by linear interpolation in ``s = (t - t_min)/L``.

    ``theta`` resolution must agree (or be an integer multiple/divisor) since
    maps are interpolated row-wise in ``s`` and periodically in ``theta``.
    """
    src = u.grid
    U = u.values
    th_src = src.theta
    th_dst = grid.theta
    if src.n_theta != grid.n_theta:
        ext = np.concatenate([U, U[:, :1]], axis=1)
        thx = np.append(th_src, 2 * np.pi)
        U = np.stack([
            np.stack([np.interp(th_dst, thx, ext[i, :, k]) for k in range(U.shape[-1])], axis=-1)
            for i in range(U.shape[0])
        ])
    s_src = src.s_coordinate()
    s_dst = grid.s_coordinate()
    if src.t_periodic:
        s_src = np.append(s_src, 1.0)
        U = np.concatenate([U, U[:1]], axis=0)
    out = np.empty(grid.shape + (U.shape[-1],))
    for j in range(grid.n_theta):
        for k in range(U.shape[-1]):
            out[:, j, k] = np.interp(s_dst, s_src, U[:, j, k])
    out = u.target.project(out)
    return DiscreteMap(grid, out, u.target, bc)


@dataclass(frozen=True)
class SweepStep:
    grid: CylinderGrid
    bc: np.ndarray | None = None


class SweepError(RuntimeError):
    def __init__(self, step: int, report: SolveReport, partial: list):
        super().__init__(f"solver did not converge at sweep step {step} "
                         f"(residual {report.residual:.3e} after {report.iterations} iterations)")
        self.step = step
        self.report = report
        self.partial = partial


def continuation_sweep(init: DiscreteMap, steps: Sequence[SweepStep], *, tol: float = 1e-9,
                       max_iter: int = 200_000, raise_on_failure: bool = True,
                       solve: Callable | None = None,
                       ) -> list[tuple[DiscreteMap, SolveReport]]:
    """Solve along a degeneration schedule, warm-starting each step in ``s``.

    ``init`` seeds the first step (it is resampled onto ``steps[0].grid``).
    ``solve`` overrides the per-step solver (``solve(u0, idx) -> (u, report)``),
    which the lab uses to plug in its cache.
    """
    out: list[tuple[DiscreteMap, SolveReport]] = []
    prev = init
    for idx, st in enumerate(steps):
        u0 = resample(prev, st.grid, st.bc)
        if solve is None:
            u, rep = solve_harmonic(u0, tol=tol, max_iter=max_iter)
        else:
            u, rep = solve(u0, idx)
        out.append((u, rep))
        if not rep.converged and raise_on_failure:
            raise SweepError(idx, rep, out)
        prev = u
    return out


# --- closed-form families -------------------------------------------------

def winding_map(grid: CylinderGrid, w: int, target: TargetManifold | None = None) -> DiscreteMap:
    """``u(t, theta) = (cos a t, sin a t, 0, ...)`` with ``a = 2 pi w / L``."""
    target = target or Sphere(2)
    a = 2 * np.pi * w / grid.length
    T, _ = grid.mesh()
    U = np.zeros(grid.shape + (target.ambient_dim,))
    U[..., 0] = np.cos(a * (T - grid.t_min))
    U[..., 1] = np.sin(a * (T - grid.t_min))
    return DiscreteMap(grid, U, target)


def theta_wrap_map(grid: CylinderGrid, target: TargetManifold | None = None) -> DiscreteMap:
    """Equator map ``u(t, theta) = (cos theta, sin theta, 0)``."""
    target = target or Sphere(2)
    _, TH = grid.mesh()
    U = np.zeros(grid.shape + (target.ambient_dim,))
    U[..., 0] = np.cos(TH)
    U[..., 1] = np.sin(TH)
    return DiscreteMap(grid, U, target)


def constant_map(grid: CylinderGrid, point=None, target: TargetManifold | None = None) -> DiscreteMap:
    target = target or Sphere(2)
    if point is None:
        point = np.eye(target.ambient_dim)[-1]
    U = np.broadcast_to(np.asarray(point, dtype=float), grid.shape + (target.ambient_dim,)).copy()
    return DiscreteMap(grid, U, target)


def neck_boundary_data(grid: CylinderGrid, p, q, wobble: float = 0.0,
                       target: TargetManifold | None = None) -> np.ndarray:
    """Dirichlet rows near ``p`` and ``q``.

    With ``wobble = 0`` each end circle maps to a single point.  A positive
    ``wobble`` replaces the points by small loops ``project(p + wobble (cos theta a + sin theta b))``
    with ``a, b`` a tangent frame, which gives the angular derivative something to decay.
    """
    target = target or Sphere(2)
    th = grid.theta
    rows = []
    for pt in (p, q):
        pt = target.project(np.asarray(pt, dtype=float))
        if wobble:
            E = target.tangent_basis(pt)
            loop = pt + wobble * (np.cos(th)[:, None] * E[:, 0] + np.sin(th)[:, None] * E[:, 1 % E.shape[1]])
            rows.append(target.project(loop))
        else:
            rows.append(np.broadcast_to(pt, (grid.n_theta, target.ambient_dim)).copy())
    return np.stack(rows)


def neck_initial_map(grid: CylinderGrid, bc: np.ndarray, target: TargetManifold | None = None,
                     bulge: float = 0.3) -> DiscreteMap:
    """Projected straight-line interpolation between the end rows plus a normal bulge.

    The bulge (along the axis least aligned with the end points) makes the
    initial profile neither a geodesic nor constant speed.
    """
    target = target or Sphere(2)
    s = grid.s_coordinate()[:, None, None]
    U = (1 - s) * bc[0][None] + s * bc[1][None]
    mid = target.project(bc[0].mean(axis=0) + bc[1].mean(axis=0))
    axis = np.eye(target.ambient_dim)[np.argmin(np.abs(mid))]
    axis = axis - np.dot(axis, mid) * mid
    axis /= np.linalg.norm(axis)
    U = U + bulge * np.sin(np.pi * s) * axis
    return DiscreteMap(grid, target.project(U), target, bc)


__all__ = [
    "DiscreteMap", "SolveReport", "SweepStep", "SweepError", "dirichlet_energy", "laplacian",
    "stiffness_apply", "central_gradient", "tension_residual", "harmonic_equation_residual",
    "solve_harmonic", "resample", "continuation_sweep", "winding_map", "theta_wrap_map",
    "constant_map", "neck_boundary_data", "neck_initial_map", "make_grid", "sup_norm",
]
