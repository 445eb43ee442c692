"""Second variation, collar weights and the weighted Jacobi eigenproblem.

The Jacobi form is assembled in per-node orthonormal tangent coordinates::

    Q_h(w) = w^T K w - sum_i a_i <S_i w_i, w_i>

with ``K`` the stiffness of the discrete Dirichlet energy and ``S_i`` the
shape operator of the target evaluated at ``u_i``.  ``M = diag(weight * a)``
turns it into the generalized problem ``A x = lambda M x``, whose inertia
does not depend on the (positive) weight.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import CollarParams, CylinderGrid, JunctionRegion, junction_regions
from .solver import DiscreteMap, central_gradient, laplacian, stiffness_apply

log = logging.getLogger(__name__)

C_NULL = 0.01
SIGMA_MAX = 0.45
DENSE_MAX_DOF = 1500


# --- fields -----------------------------------------------------------------

@dataclass
class TangentField:
    """Ambient vector per node, tangent to the target along ``base``."""

    base: DiscreteMap
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.base.values.shape:
            raise ValueError("tangent field shape does not match its base map")

    @classmethod
    def from_coords(cls, base: DiscreteMap, coords: np.ndarray) -> "TangentField":
        """Build from frame coordinates of shape ``(n_t, n_theta, n)``."""
        E = base.target.tangent_basis(base.values)
        return cls(base, np.einsum("...mk,...k->...m", E, coords))

    def coords(self) -> np.ndarray:
        E = self.base.target.tangent_basis(self.base.values)
        return np.einsum("...mk,...m->...k", E, self.values)

    def tangency_error(self) -> float:
        P = self.base.target.tangent_projector(self.base.values)
        normal = self.values - np.einsum("...ij,...j->...i", P, self.values)
        return float(np.max(np.linalg.norm(normal, axis=-1)))


@dataclass(frozen=True)
class WeightField:
    values: np.ndarray
    kind: Literal["omega", "frak_w", "uniform"] = "uniform"

    def __post_init__(self):
        if not np.all(np.asarray(self.values) > 0):
            raise ValueError("weights must be strictly positive")


def uniform_weight(grid: CylinderGrid) -> WeightField:
    return WeightField(np.ones(grid.shape), "uniform")


def _collar_mask(grid: CylinderGrid, p: CollarParams) -> np.ndarray:
    t = grid.t
    lo, hi = p.t_range
    tol = 1e-12 * max(1.0, abs(hi))
    return (t >= lo - tol) & (t <= hi + tol)


def weight_omega(grid: CylinderGrid, p: CollarParams) -> WeightField:
    """Normalization weight: power decay from both collar ends plus a ``1/T^2`` floor.

    ``(e^{-t}/eta)^beta = exp(-beta (t - t_in))`` and
    ``(delta/(eta e^{-t}))^beta = exp(-beta (t_out - t))``; outside the
    collar the constant boundary value ``1 + (delta/eta^2)^beta + 1/T^2``.
    """
    t = grid.t
    lo, hi = p.t_range
    b, T = p.beta, p.T
    inside = _collar_mask(grid, p)
    tc = np.clip(t, lo, hi)
    w = np.where(inside,
                 np.exp(-b * (tc - lo)) + np.exp(-b * (hi - tc)) + 1.0 / T**2,
                 1.0 + np.exp(-b * T) + 1.0 / T**2)
    return WeightField(np.repeat(w[:, None], grid.n_theta, axis=1), "omega")


def frak_profile(t, p: CollarParams, sigma: float) -> np.ndarray:
    """Three-branch weight on the collar at flat coordinates ``t``."""
    if not 0.0 < sigma <= SIGMA_MAX:
        raise ValueError(f"sigma must lie in (0, {SIGMA_MAX}] to stay clear of the (1-2 sigma)^-2 pole")
    t = np.asarray(t, dtype=float)
    lo, hi = p.t_range
    b, T = p.beta, p.T
    w = sigma * T
    outer = t <= lo + w
    inner = t >= hi - w
    out_val = np.exp(-b * (t - lo)) + np.exp(-b * (lo + w - t)) + 1.0 / (sigma * T) ** 2
    mid_val = (np.exp(-b * (t - lo - w)) + np.exp(-b * (hi - w - t))
               + 1.0 / ((1 - 2 * sigma) * T) ** 2)
    in_val = np.exp(-b * (hi - w - t)) + np.exp(-b * (hi - t)) + 1.0 / (sigma * T) ** 2
    return np.where(outer, out_val, np.where(inner, in_val, mid_val))


def weight_frak(grid: CylinderGrid, p: CollarParams, sigma: float, *,
                extend: bool = False) -> WeightField:
    """Junction-adapted weight on the collar nodes of ``grid``.

    Off the collar the weight is undefined; with ``extend=True`` it is
    continued by its (common) value at the two collar ends, otherwise a
    grid reaching outside the collar is rejected.
    """
    inside = _collar_mask(grid, p)
    if not extend and not np.all(inside):
        raise ValueError("frak weight is only defined on the collar; pass extend=True")
    lo, hi = p.t_range
    w = frak_profile(np.clip(grid.t, lo, hi), p, sigma)
    return WeightField(np.repeat(w[:, None], grid.n_theta, axis=1), "frak_w")


# --- quadratic form and operator assembly --------------------------------------

PotentialMode = Literal["laplacian", "gradient"]


def _normal_forcing(u: DiscreteMap, potential: PotentialMode) -> np.ndarray:
    """Normal vector field ``A_u(grad u, grad u)`` as seen by the discrete form."""
    tgt = u.target
    if potential == "laplacian":
        # -Delta_h u = A(du, du) at a discrete critical point; this choice makes
        # Q_h the exact constrained Hessian of E_h, so symmetry zero modes stay exactly zero
        lap = laplacian(u)
        P = tgt.tangent_projector(u.values)
        return -(lap - np.einsum("...ij,...j->...i", P, lap))
    if potential == "gradient":
        d_t, d_th = central_gradient(u.grid, u.values)
        return tgt.second_form(u.values, d_t, d_t) + tgt.second_form(u.values, d_th, d_th)
    raise ValueError(f"unknown potential mode {potential!r}")


def shape_field(u: DiscreteMap, potential: PotentialMode = "laplacian") -> np.ndarray:
    """Per-node shape operator ``S_i``, shape ``(n_t, n_theta, m, m)``."""
    return u.target.weingarten(u.values, _normal_forcing(u, potential))


def second_variation(u: DiscreteMap, w: TangentField | np.ndarray,
                     potential: PotentialMode = "laplacian") -> float:
    """Discrete ``int |dw|^2 - <A(du, du), A(w, w)>``; fixed rows of ``w`` are ignored (set to 0)."""
    W = np.array(w.values if isinstance(w, TangentField) else w, dtype=float)
    W[u.fixed_rows] = 0.0
    S = shape_field(u, potential)
    a = u.grid.cell_areas()
    grad = float(np.sum(W * stiffness_apply(u.grid, W)))
    pot = np.einsum("...i,...ij,...j->...", W, S, W)
    free = ~u.fixed_rows
    return grad - float(np.sum((a * pot)[free]))


@dataclass
class JacobiSystem:
    """Assembled pencil ``(A, M)`` plus the bookkeeping to map back to fields."""

    A: sp.csr_matrix
    M: np.ndarray
    frames: np.ndarray
    free_rows: np.ndarray
    grid: CylinderGrid
    weight: WeightField

    @property
    def n_dof(self) -> int:
        return self.A.shape[0]

    def to_coords(self, field: np.ndarray) -> np.ndarray:
        """Ambient field ``(n_t, n_theta, m)`` to the dof vector."""
        c = np.einsum("...mk,...m->...k", self.frames, field[self.free_rows])
        return c.reshape(-1)

    def to_field(self, x: np.ndarray) -> np.ndarray:
        n = self.frames.shape[-1]
        c = x.reshape(self.frames.shape[:2] + (n,))
        out = np.zeros(self.grid.shape + (self.frames.shape[-2],))
        out[self.free_rows] = np.einsum("...mk,...k->...m", self.frames, c)
        return out

    def quadratic_form(self, field: np.ndarray) -> float:
        x = self.to_coords(field)
        return float(x @ (self.A @ x))

    def mass(self, field: np.ndarray) -> float:
        x = self.to_coords(field)
        return float(np.sum(self.M * x * x))


def _stiffness_matrix(grid: CylinderGrid) -> sp.csr_matrix:
    n_t, n_th = grid.shape
    idx = np.arange(n_t * n_th).reshape(n_t, n_th)
    c_t = grid.h_theta / grid.h_t
    c_th = grid.row_weights() * grid.h_t / grid.h_theta
    rows, cols, vals = [], [], []
    # theta edges
    i0 = idx.ravel()
    i1 = np.roll(idx, -1, axis=1).ravel()
    rows.append(i0); cols.append(i1); vals.append(np.repeat(c_th, n_th))
    # t edges
    if grid.t_periodic:
        j0, j1 = idx.ravel(), np.roll(idx, -1, axis=0).ravel()
    else:
        j0, j1 = idx[:-1].ravel(), idx[1:].ravel()
    rows.append(j0); cols.append(j1); vals.append(np.full(j0.size, c_t))
    r = np.concatenate(rows); c = np.concatenate(cols); v = np.concatenate(vals)
    W = sp.coo_matrix((v, (r, c)), shape=(idx.size, idx.size)).tocsr()
    W = W + W.T
    D = sp.diags(np.asarray(W.sum(axis=1)).ravel())
    return (D - W).tocsr()


def assemble_jacobi(u: DiscreteMap, weight: WeightField | None = None,
                    potential: PotentialMode = "laplacian") -> JacobiSystem:
    """Build ``A`` (symmetric, sparse) and the diagonal of ``M`` over tangent dofs."""
    grid = u.grid
    weight = weight or uniform_weight(grid)
    free = ~u.fixed_rows
    E_all = u.target.tangent_basis(u.values)
    n = E_all.shape[-1]
    K = _stiffness_matrix(grid)
    node_ids = np.arange(grid.n_nodes).reshape(grid.shape)
    free_ids = node_ids[free].ravel()
    pos = -np.ones(grid.n_nodes, dtype=int)
    pos[free_ids] = np.arange(free_ids.size)
    Kf = K[free_ids][:, free_ids].tocoo()
    E = E_all.reshape(-1, E_all.shape[-2], n)
    # block (i, j) = K_ij E_i^T E_j
    gi, gj = free_ids[Kf.row], free_ids[Kf.col]
    G = np.einsum("emk,eml->ekl", E[gi], E[gj]) * Kf.data[:, None, None]
    bi = (pos[gi][:, None, None] * n + np.arange(n)[None, :, None]).repeat(n, axis=2)
    bj = (pos[gj][:, None, None] * n + np.arange(n)[None, None, :]).repeat(n, axis=1)
    S = shape_field(u, potential).reshape(-1, E.shape[-2], E.shape[-2])[free_ids]
    a = grid.cell_areas().ravel()[free_ids]
    Sp = np.einsum("emk,emp,epl->ekl", E[free_ids], S, E[free_ids]) * a[:, None, None]
    di = (np.arange(free_ids.size)[:, None, None] * n + np.arange(n)[None, :, None]).repeat(n, axis=2)
    dj = (np.arange(free_ids.size)[:, None, None] * n + np.arange(n)[None, None, :]).repeat(n, axis=1)
    N = free_ids.size * n
    A = sp.coo_matrix(
        (np.concatenate([G.ravel(), -Sp.ravel()]),
         (np.concatenate([bi.ravel(), di.ravel()]), np.concatenate([bj.ravel(), dj.ravel()]))),
        shape=(N, N)).tocsr()
    A = (0.5 * (A + A.T)).tocsr()
    mvals = (np.asarray(weight.values).ravel()[free_ids] * a).repeat(n)
    frames = E_all[free]
    return JacobiSystem(A, mvals, frames, free, grid, weight)


# --- eigen-solve and bookkeeping ------------------------------------------------

@dataclass
class SpectrumReport:
    """Sorted eigenvalues and the inertia counts derived from them."""

    eigenvalues: np.ndarray
    zero_tol: float
    index: int
    nullity: int
    ceiling: float = np.inf
    dimension: int = 2
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def extended(self) -> int:
        return self.index + self.nullity

    @classmethod
    def from_eigenvalues(cls, eigenvalues, zero_tol: float, *, warn_factor: float = 10.0,
                         **kwargs) -> "SpectrumReport":
        """Classify sorted eigenvalues against ``zero_tol``.

        A ``RuntimeWarning`` is raised for eigenvalues within a factor
        ``warn_factor`` of the threshold on either side.
        """
        ev = np.sort(np.asarray(eigenvalues, dtype=float))
        index = int(np.sum(ev < -zero_tol))
        nullity = int(np.sum(np.abs(ev) <= zero_tol))
        ambiguous = ev[(np.abs(ev) > zero_tol / warn_factor) & (np.abs(ev) < warn_factor * zero_tol)]
        if ambiguous.size:
            warnings.warn(f"eigenvalues {ambiguous} lie within a factor {warn_factor:g} of zero_tol={zero_tol:.3g}; "
                          "index/nullity classification is ambiguous", RuntimeWarning, stacklevel=2)
        return cls(ev, zero_tol, index, nullity, **kwargs)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "zero_tol": float(self.zero_tol),
            "ceiling": None if not np.isfinite(self.ceiling) else float(self.ceiling),
            "index": self.index,
            "nullity": self.nullity,
            "extended_index": self.extended,
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumReport":
        ceiling = d.get("ceiling")
        return cls(np.asarray(d["eigenvalues"], dtype=float), d["zero_tol"], d["index"], d["nullity"],
                   ceiling=np.inf if ceiling is None else ceiling, dimension=d.get("dimension", 2),
                   meta=d.get("meta", {}))


def default_zero_tol(grid: CylinderGrid, c_null: float = C_NULL) -> float:
    return c_null * grid.h_max**2


def solve_spectrum(system: JacobiSystem, mode: Literal["full", "lowest", "auto"] = "auto", k: int = 24,
                   zero_tol: float | None = None, return_vectors: bool = False,
                   shift: float | None = None) -> SpectrumReport:
    """Generalized eigenvalues of ``A x = lambda M x``.

    ``full`` solves densely.  ``lowest`` returns the ``k`` smallest by
    shift-invert around a shift below the whole spectrum (a Gershgorin-type
    bound from the potential), so every eigenvalue below the reported
    ceiling is found.  ``auto`` solves densely up to ``DENSE_MAX_DOF``
    unknowns; above that it runs ``lowest`` and doubles ``k`` until the
    ceiling clears ``zero_tol``, so index and nullity are complete.
    """
    A, m = system.A, system.M
    N = A.shape[0]
    if zero_tol is None:
        zero_tol = default_zero_tol(system.grid)
    if np.any(m <= 0):
        raise ValueError("mass matrix must be positive")
    if mode == "auto":
        if N <= DENSE_MAX_DOF:
            mode = "full"
        else:
            while True:
                rep = solve_spectrum(system, "lowest", k, zero_tol, return_vectors, shift)
                if rep.ceiling > zero_tol or k >= N - 2:
                    return rep
                k = min(2 * k, N - 2)
    dinv = 1.0 / np.sqrt(m)
    B = sp.diags(dinv) @ A @ sp.diags(dinv)
    vecs = None
    try:
        if mode == "full" or k >= N - 1:
            Bd = B.toarray()
            if return_vectors:
                ev, y = scipy.linalg.eigh(Bd)
                vecs = dinv[:, None] * y
            else:
                ev = scipy.linalg.eigh(Bd, eigvals_only=True)
            ceiling = np.inf
        elif mode == "lowest":
            if shift is None:
                # inf spectrum >= -max(row-wise negative diagonal part) for a Laplacian-plus-potential pencil
                diag = B.diagonal()
                off = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(diag)
                shift = float(np.min(diag - off)) - 1.0
            ev, y = spla.eigsh(B.tocsc(), k=k, sigma=shift, which="LM")
            order = np.argsort(ev)
            ev, y = ev[order], y[:, order]
            if return_vectors:
                vecs = dinv[:, None] * y
            ceiling = float(ev[-1])
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except (np.linalg.LinAlgError, spla.ArpackError) as exc:
        raise np.linalg.LinAlgError(
            f"eigensolver failed ({exc}); cond(M) = {m.max() / m.min():.3e}") from exc
    rep = SpectrumReport.from_eigenvalues(ev, zero_tol, ceiling=ceiling, eigenvectors=vecs)
    rep.meta.update({"n_dof": int(N), "mode": mode, "weight": system.weight.kind,
                     "grid": [system.grid.n_t, system.grid.n_theta]})
    return rep


def extended_index(report: SpectrumReport) -> tuple[int, int, int]:
    """``(index, nullity, index + nullity)``."""
    return report.index, report.nullity, report.extended


def jacobi_spectrum(u: DiscreteMap, weight: WeightField | None = None, *, mode="auto", k: int = 24,
                    zero_tol: float | None = None, potential: PotentialMode = "laplacian",
                    return_vectors: bool = False) -> SpectrumReport:
    """Assemble and solve in one call."""
    system = assemble_jacobi(u, weight, potential)
    return solve_spectrum(system, mode=mode, k=k, zero_tol=zero_tol, return_vectors=return_vectors)


# --- winding-map oracle ------------------------------------------------------------

def winding_oracle(t_total: float, w: int, ceiling: float = 1.0, n: int = 2,
                   discrete: tuple[int, int] | None = None) -> list[tuple[float, int, int, str]]:
    """Enumerate Jacobi eigenvalues of the ``t``-winding map into ``S^n`` by Fourier modes.

    Returns ``(lambda, p, q, branch)`` for every mode with ``lambda < ceiling``
    (sorted).  With ``discrete=(n_t, n_theta)`` the continuum symbols
    ``k^2`` are replaced by the 5-point symbols ``4 sin^2(k h/2)/h^2``;
    (the tangential ``t``-symbol picks up a factor ``cos(a h_t)`` from the
rotating frame); ``q`` counts real modes (``cos`` and ``sin`` for ``q > 0``).
    """
    alpha = 2 * np.pi * w / t_total
    tan_t = 1.0
    if discrete is None:
        sym_t = lambda p: (2 * np.pi * p / t_total) ** 2  # noqa: E731
        sym_th = lambda q: float(q) ** 2  # noqa: E731
        pot = alpha**2
    else:
        n_t, n_th = discrete
        h_t, h_th = t_total / n_t, 2 * np.pi / n_th
        sym_t = lambda p: 4 * np.sin(np.pi * p / n_t) ** 2 / h_t**2  # noqa: E731
        sym_th = lambda q: 4 * np.sin(q * h_th / 2) ** 2 / h_th**2  # noqa: E731
        pot = sym_t(w)
        tan_t = np.cos(alpha * h_t)
    out = []
    pmax = int(np.ceil(t_total / (2 * np.pi) * np.sqrt(ceiling + pot))) + 2
    qmax = int(np.ceil(np.sqrt(ceiling + pot))) + 2
    if discrete is not None:
        pmax = min(pmax, discrete[0] // 2)
        qmax = min(qmax, discrete[1] // 2)
    for p in range(-pmax, pmax + 1):
        for q in range(0, qmax + 1):
            mult = 1 if q == 0 or (discrete is not None and 2 * q == discrete[1]) else 2
            base = sym_t(p) + sym_th(q)
            tang = tan_t * sym_t(p) + sym_th(q)
            for branch, lam, count in (("normal", base - pot, n - 1), ("tangential", tang, 1)):
                if lam < ceiling:
                    out.extend([(lam, p, q, branch)] * (mult * count))
    return sorted(out)


# --- neck positivity ----------------------------------------------------------------

def _random_region_field(rng: np.random.Generator, grid: CylinderGrid, region: JunctionRegion,
                         n: int, n_modes: int = 6) -> np.ndarray:
    """Smooth random frame coordinates supported strictly inside ``region``."""
    t = grid.t
    inside = region.contains(t, strict=True)
    s = np.where(inside, (t - region.t_lo) / region.length, 0.0)
    th = grid.theta
    c = np.zeros(grid.shape + (n,))
    for kk in range(1, n_modes + 1):
        for q in range(0, n_modes):
            amp = rng.normal(size=(2, n)) / (kk**2 + q**2)
            prof = np.sin(kk * np.pi * s)[:, None]
            c += prof[..., None] * (np.cos(q * th)[None, :, None] * amp[0]
                                    + np.sin(q * th)[None, :, None] * amp[1])
    c[~inside] = 0.0
    return c


def rayleigh_neck_test(u: DiscreteMap, p: CollarParams, sigma: float, trials: int = 1000, seed: int = 0,
                       side: Literal["outer", "inner", "both"] = "both",
                       potential: PotentialMode = "laplacian", scale: float = 1.0) -> dict:
    """Ratios ``Q_u(w) / int |w|^2 frak_w`` over random fields supported in a junction band.

    Each trial draws a smooth field vanishing outside one band (alternating
    sides for ``both``); all-zero draws are redrawn.  ``min_ratio`` is the
    empirical positivity constant.  ``scale`` multiplies every field; the
    ratios do not depend on it.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    regions = junction_regions(p, sigma)
    pick = {"outer": [regions[0]], "inner": [regions[1]], "both": list(regions)}[side]
    system = assemble_jacobi(u, uniform_weight(u.grid), potential)
    frak = frak_profile(np.clip(u.grid.t, *p.t_range), p, sigma)
    a = u.grid.cell_areas()
    n = u.target.intrinsic_dim
    E = u.target.tangent_basis(u.values)
    ratios = np.empty(trials)
    for i in range(trials):
        region = pick[i % len(pick)]
        while True:
            c = _random_region_field(rng, u.grid, region, n)
            if np.any(c != 0):
                break
        W = scale * np.einsum("...mk,...k->...m", E, c)
        num = system.quadratic_form(W)
        den = float(np.sum(a * frak[:, None] * np.sum(W * W, axis=-1)))
        ratios[i] = num / den
    return {"min_ratio": float(ratios.min()), "ratios": ratios}


def weighted_ratio(system: JacobiSystem, u: DiscreteMap, W: np.ndarray, weight: np.ndarray) -> float:
    """``Q(W) / int |W|^2 weight`` for a single ambient field."""
    a = u.grid.cell_areas()
    den = float(np.sum(a * weight * np.sum(W * W, axis=-1)))
    return system.quadratic_form(W) / den
