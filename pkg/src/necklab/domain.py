"""Flat degenerating geometry: collars, annulus charts and cylinder grids.

Everything lives on flat cylinders ``[t_min, t_max] x S^1`` (optionally
periodic in ``t``, i.e. a flat torus).  A collar of core length ``l`` with
thin/thick cutoff ``rho`` is the band ``[pi/rho, 2 pi^2/l - pi/rho] x S^1``;
under ``(t, theta) -> exp(-t)(cos theta, sin theta)`` it is conformal to the
annulus ``A(eta, delta) = B_eta \\ B_{delta/eta}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

BETA_MAX = float(np.log2(1.5))
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CollarParams:
    """Degeneration geometry of a single collar.

    Only ``l``, ``rho`` and ``beta`` are free; ``eta``, ``delta`` and ``T``
    are derived in :func:`collar_params`.
    """

    l: float
    rho: float
    beta: float
    eta: float
    delta: float
    T: float

    @property
    def t_inner(self) -> float:
        """Flat coordinate of the outer collar boundary, ``pi/rho``."""
        return np.pi / self.rho

    @property
    def t_outer(self) -> float:
        """Flat coordinate of the inner collar boundary, ``2 pi^2/l - pi/rho``."""
        return 2.0 * np.pi**2 / self.l - np.pi / self.rho

    @property
    def t_range(self) -> tuple[float, float]:
        return (self.t_inner, self.t_outer)

    def eps(self, sigma: float) -> float:
        """Junction ratio ``(delta/eta^2)**sigma``."""
        return float(np.exp(-sigma * self.T))


def collar_params(l: float, rho: float = np.pi, beta: float = 0.5) -> CollarParams:
    """Build a :class:`CollarParams` from the core length and cutoff.

    Raises
    ------
    ValueError
        If ``l`` or ``rho`` is not positive, if ``beta`` is outside
        ``(0, log2(3/2))`` or if the collar is not longer than its junctions
        (``delta >= eta**2``).
    """
    if not (l > 0 and rho > 0):
        raise ValueError(f"l and rho must be positive, got l={l}, rho={rho}")
    if not (0.0 < beta < BETA_MAX):
        raise ValueError(f"beta must lie in (0, log2(3/2)) = (0, {BETA_MAX:.5f}), got {beta}")
    log_eta = -np.pi / rho
    log_delta = -2.0 * np.pi**2 / l
    T = 2.0 * log_eta - log_delta
    if not T > 0:
        raise ValueError(
            f"delta = {np.exp(log_delta):.4g} >= eta^2 = {np.exp(2 * log_eta):.4g}: "
            "collar is not longer than its junctions"
        )
    return CollarParams(
        l=float(l), rho=float(rho), beta=float(beta),
        eta=float(np.exp(log_eta)), delta=float(np.exp(log_delta)), T=float(T),
    )


def collar_for_length(t_total: float, rho: float = np.pi, beta: float = 0.5) -> CollarParams:
    """Collar whose full cylinder ``[0, 2 pi^2/l]`` has length ``t_total``."""
    return collar_params(2.0 * np.pi**2 / t_total, rho, beta)


def annulus_chart(t, theta):
    """Map flat coordinates to the plane: ``exp(-t) (cos theta, sin theta)``."""
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r = np.exp(-t)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def annulus_chart_inverse(x):
    """Inverse of :func:`annulus_chart`; returns ``(t, theta)`` with theta in ``[0, 2 pi)``."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.mod(np.arctan2(x[..., 1], x[..., 0]), TWO_PI)
    return -np.log(r), theta


def rescale_to_unit(r, p: CollarParams, *, rtol: float = 1e-12):
    """Unit-cylinder coordinate ``s = (log eta - log r)/T`` of a radius in ``[delta/eta, eta]``."""
    r = np.asarray(r, dtype=float)
    lo, hi = p.delta / p.eta, p.eta
    if np.any(r < lo * (1 - rtol)) or np.any(r > hi * (1 + rtol)):
        raise ValueError(f"radius outside the collar band [{lo:.4g}, {hi:.4g}]")
    return (np.log(p.eta) - np.log(r)) / p.T


def unit_to_radius(s, p: CollarParams):
    """Inverse of :func:`rescale_to_unit`."""
    s = np.asarray(s, dtype=float)
    return np.exp(np.log(p.eta) - s * p.T)


@dataclass(frozen=True)
class CylinderGrid:
    """Uniform node grid on ``[t_min, t_max] x S^1``.

    Nodes are ``t_i = t_min + i h_t`` and ``theta_j = j h_theta``.  When
    ``t_periodic`` the last node is identified with the first and there are
    ``n_t`` distinct rows; otherwise both end rows are present and carry
    half cells.
    """

    t_min: float
    t_max: float
    n_t: int
    n_theta: int
    t_periodic: bool

    @property
    def t_range(self) -> tuple[float, float]:
        return (self.t_min, self.t_max)

    @property
    def length(self) -> float:
        return self.t_max - self.t_min

    @property
    def h_t(self) -> float:
        cells = self.n_t if self.t_periodic else self.n_t - 1
        return self.length / cells

    @property
    def h_theta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def h_max(self) -> float:
        return max(self.h_t, self.h_theta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_t, self.n_theta)

    @property
    def n_nodes(self) -> int:
        return self.n_t * self.n_theta

    @property
    def t(self) -> np.ndarray:
        return self.t_min + self.h_t * np.arange(self.n_t)

    @property
    def theta(self) -> np.ndarray:
        return self.h_theta * np.arange(self.n_theta)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(T, Theta)`` arrays of shape ``(n_t, n_theta)``."""
        return np.meshgrid(self.t, self.theta, indexing="ij")

    def row_weights(self) -> np.ndarray:
        """Trapezoidal weights in ``t`` (1 inside, 1/2 on open ends)."""
        w = np.ones(self.n_t)
        if not self.t_periodic:
            w[0] = w[-1] = 0.5
        return w

    def cell_areas(self) -> np.ndarray:
        """Dual-cell areas, shape ``(n_t, n_theta)``; they sum to ``2 pi (t_max - t_min)``."""
        a = self.row_weights() * self.h_t * self.h_theta
        return np.repeat(a[:, None], self.n_theta, axis=1)

    def boundary_rows(self) -> np.ndarray:
        """Boolean mask over rows on an open end (empty for tori)."""
        mask = np.zeros(self.n_t, dtype=bool)
        if not self.t_periodic:
            mask[0] = mask[-1] = True
        return mask

    def s_coordinate(self) -> np.ndarray:
        """Rows mapped to ``[0, 1]`` by ``s = (t - t_min)/(t_max - t_min)``."""
        return (self.t - self.t_min) / self.length


GridKind = Literal["torus", "collar", "cylinder"]


def make_grid(kind: GridKind, n_t: int, n_theta: int, *, t_total: float | None = None,
              params: CollarParams | None = None, t_min: float | None = None,
              t_max: float | None = None) -> CylinderGrid:
    """Build a uniform grid for a torus, a collar or an open cylinder.

    >>> make_grid("torus", 64, 16, t_total=8 * np.pi).h_t == 8 * np.pi / 64
    True
    """
    if n_t < 8 or n_theta < 8:
        raise ValueError(f"need n_t >= 8 and n_theta >= 8, got {n_t}x{n_theta}")
    if kind == "torus":
        if t_total is None or not t_total > 0:
            raise ValueError("torus needs a positive t_total")
        return CylinderGrid(0.0, float(t_total), n_t, n_theta, True)
    if kind == "collar":
        if params is None:
            raise ValueError("collar grid needs CollarParams")
        lo, hi = params.t_range
        return CylinderGrid(lo, hi, n_t, n_theta, False)
    if kind == "cylinder":
        if t_min is None or t_max is None or not t_max > t_min:
            raise ValueError(f"degenerate cylinder range [{t_min}, {t_max}]")
        return CylinderGrid(float(t_min), float(t_max), n_t, n_theta, False)
    raise ValueError(f"unknown grid kind {kind!r}")


@dataclass(frozen=True)
class JunctionRegion:
    """One connecting band of the collar, given as a ``t``-interval."""

    side: Literal["outer", "inner"]
    t_lo: float
    t_hi: float
    sigma: float
    eps: float

    @property
    def length(self) -> float:
        return self.t_hi - self.t_lo

    def contains(self, t, *, strict: bool = False):
        t = np.asarray(t)
        if strict:
            return (t > self.t_lo) & (t < self.t_hi)
        return (t >= self.t_lo) & (t <= self.t_hi)


def junction_regions(p: CollarParams, sigma: float) -> tuple[JunctionRegion, JunctionRegion]:
    """Outer band ``e^{-t} in [eps eta, eta]`` and inner band ``e^{-t} in [delta/eta, delta/(eps eta)]``.

    Each band has ``t``-length ``sigma * T``.
    """
    if not (0.0 < sigma <= 0.5):
        raise ValueError(f"sigma must lie in (0, 1/2], got {sigma}")
    eps = p.eps(sigma)
    width = sigma * p.T
    lo, hi = p.t_range
    outer = JunctionRegion("outer", lo, lo + width, sigma, eps)
    inner = JunctionRegion("inner", hi - width, hi, sigma, eps)
    return outer, inner
