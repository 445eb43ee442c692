"""Neck diagnostics of solved maps on collars and cylinders.

Length scale convention: the rescaled coordinate ``s`` runs over the whole
grid, ``s = (t - t_min)/(t_max - t_min)``, and the average length ``Lambda``
integrates over the whole grid as well.  On torus scenarios this is the
``eta -> 0`` reading of the collar, where the thick caps shrink to nothing.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .domain import CollarParams, CylinderGrid, junction_regions
from .geodesic import GeodesicSegment
from .solver import DiscreteMap, central_gradient, dirichlet_energy
from .target import Sphere

_TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class RescaledMap:
    """Samples ``v(s, theta) = u(t_min + s T, theta)`` on ``[0, 1] x S^1``.

    ``T`` is the ``t``-extent of the source grid, so ``|d_s v| = T |d_t u|``.
    """

    s: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    T: float
    periodic: bool = False
    target: Sphere = field(default_factory=Sphere)

    @classmethod
    def from_map(cls, u: DiscreteMap) -> "RescaledMap":
        g = u.grid
        return cls(g.s_coordinate(), g.theta, u.values.copy(), g.length, g.t_periodic, u.target)

    @property
    def h_s(self) -> float:
        return float(self.s[1] - self.s[0])

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """``(d_s v, d_theta v)`` by centred differences."""
        h_th = _TWO_PI / self.theta.size
        d_th = (np.roll(self.values, -1, axis=1) - np.roll(self.values, 1, axis=1)) / (2 * h_th)
        if self.periodic:
            d_s = (np.roll(self.values, -1, axis=0) - np.roll(self.values, 1, axis=0)) / (2 * self.h_s)
        else:
            d_s = np.gradient(self.values, self.h_s, axis=0)
        return d_s, d_th

    def band_mask(self, band: tuple[float, float]) -> np.ndarray:
        lo, hi = band
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError(f"band {band} is not a proper subinterval of [0, 1]")
        mask = (self.s >= lo - 1e-12) & (self.s <= hi + 1e-12)
        if not mask.any():
            raise ValueError(f"band {band} contains no grid rows")
        return mask


# --- averages and sup norms -----------------------------------------------------

def average_length_lambda(u: DiscreteMap, p: CollarParams | None = None, *,
                          collar_only: bool = False) -> float:
    """``(1/2 pi) int int |d_t u| dtheta dt``, the mean length of the ``t``-lines' images.

    Each ``t``-edge contributes the target distance between its endpoints,
    so the estimate is exact for maps tracing geodesics at constant speed.
    With ``collar_only`` the integral is restricted to ``p.t_range``.
    """
    g = u.grid
    U = u.values
    nxt = np.roll(U, -1, axis=0) if g.t_periodic else U[1:]
    cur = U if g.t_periodic else U[:-1]
    d = u.target.distance(cur, nxt)
    if collar_only:
        if p is None:
            raise ValueError("collar_only needs CollarParams")
        t0 = g.t if g.t_periodic else g.t[:-1]
        lo, hi = p.t_range
        keep = (t0 >= lo - 1e-12) & (t0 + g.h_t <= hi + 1e-12)
        d = d[keep]
    return float(np.sum(d) * g.h_theta / _TWO_PI)


@dataclass(frozen=True)
class BandStats:
    band: tuple[float, float]
    sup_dtheta: float
    sup_ds: float


def sup_norm_bands(ru: RescaledMap, bands) -> list[BandStats]:
    """``sup |d_theta v|`` and ``sup |d_s v|`` on each band ``[a, b]`` of ``s``."""
    bands = list(bands)
    if not bands:
        raise ValueError("no bands given")
    d_s, d_th = ru.derivatives()
    n_s = np.linalg.norm(d_s, axis=-1)
    n_th = np.linalg.norm(d_th, axis=-1)
    out = []
    for band in bands:
        m = ru.band_mask(tuple(band))
        out.append(BandStats((float(band[0]), float(band[1])), float(n_th[m].max()), float(n_s[m].max())))
    return out


# --- Lorentz norms ------------------------------------------------------------

@dataclass(frozen=True)
class LorentzNorms:
    L21: float
    L2inf: float
    L2: float

    def scaled(self, c: float) -> "LorentzNorms":
        return LorentzNorms(c * self.L21, c * self.L2inf, c * self.L2)


def lorentz_norms(values, areas) -> LorentzNorms:
    """Exact ``L^{2,1}``, ``L^{2,inf}`` and ``L^2`` norms of a step function.

    With ``mu(lam) = |{|f| >= lam}|``::

        L21   = 2 int_0^inf mu(lam)^{1/2} dlam
        L2inf = sup_lam lam mu(lam)^{1/2}

    ``mu`` is piecewise constant between consecutive sorted values, so the
    integral is a finite sum and the supremum is attained at a sample value.

    >>> lorentz_norms([3.0], [4.0])
    LorentzNorms(L21=12.0, L2inf=6.0, L2=6.0)
    """
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    a = np.asarray(areas, dtype=float).ravel()
    if v.shape != a.shape:
        raise ValueError(f"values and areas differ in size: {v.size} vs {a.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if np.any(a <= 0):
        raise ValueError("areas must be positive")
    if v.size == 0:
        return LorentzNorms(0.0, 0.0, 0.0)
    order = np.argsort(-v, kind="stable")
    v, a = v[order], a[order]
    A = np.cumsum(a)
    gaps = v - np.append(v[1:], 0.0)
    L21 = 2.0 * float(np.sum(gaps * np.sqrt(A)))
    # mu(v_k) counts every sample tied with v_k: use the last index of each tie group
    last = np.searchsorted(-v, -v, side="right") - 1
    L2inf = float(np.max(v * np.sqrt(A[last])))
    top = v[0]
    L2 = float(top * np.sqrt(np.sum((v / top) ** 2 * a))) if top > 0 else 0.0  # scaled against underflow
    return LorentzNorms(L21, L2inf, L2)


def _gradient_norm(u: DiscreteMap) -> np.ndarray:
    d_t, d_th = central_gradient(u.grid, u.values)
    return np.sqrt(np.sum(d_t**2 + d_th**2, axis=-1))


def _annulus_samples(u: DiscreteMap, rows: np.ndarray, t_ref: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(|grad u^#|, 1/|x|, area)`` on ``rows`` in annulus variables.

    Radii are measured relative to ``exp(-t_ref)``.  All three quantities
    pair into dilation-invariant expressions, so the choice only avoids
    under- and overflow.
    """
    g = u.grid
    r = np.exp(-(g.t[rows] - t_ref))[:, None]
    grad = _gradient_norm(u)[rows]
    area = g.cell_areas()[rows] * r**2
    inv = np.broadcast_to(1.0 / r, grad.shape)
    return grad / r, inv, area


def junction_quantization(u: DiscreteMap, p: CollarParams, sigma: float) -> dict[str, LorentzNorms]:
    """Lorentz norms of ``|grad u^#|`` on the two junction bands, keyed ``outer``/``inner``."""
    out = {}
    for region in junction_regions(p, sigma):
        rows = region.contains(u.grid.t)
        if not rows.any():
            raise ValueError(f"{region.side} junction band has no grid rows")
        f, _, area = _annulus_samples(u, rows, region.t_lo)
        out[region.side] = lorentz_norms(f, area)
    return out


def collar_rows(grid: CylinderGrid, p: CollarParams) -> np.ndarray:
    lo, hi = p.t_range
    return (grid.t >= lo - 1e-12) & (grid.t <= hi + 1e-12)


def lorentz_holder_check(u: DiscreteMap, p: CollarParams) -> dict:
    """Duality check ``int |grad u^#| / |x| <= L21(|grad u^#|) L2inf(1/|x|)`` on the collar.

    The left side equals ``2 pi Lambda`` (collar part).  ``ratio`` is
    left over right and stays below 1; ``C_fit`` is the constant in the
    weaker form ``Lambda/(2 pi) <= C L21 L2inf``.
    """
    rows = collar_rows(u.grid, p)
    f, inv, area = _annulus_samples(u, rows, p.t_inner)
    pairing = float(np.sum(f * inv * area))
    L21 = lorentz_norms(f, area).L21
    L2inf = lorentz_norms(inv, area).L2inf
    bound = L21 * L2inf
    lam = pairing / _TWO_PI
    return {
        "pairing": pairing, "L21": L21, "L2inf": L2inf,
        "ratio": pairing / bound if bound > 0 else 0.0,
        "C_fit": lam / _TWO_PI / bound if bound > 0 else 0.0,
    }


# --- pointwise decay ------------------------------------------------------------

@dataclass(frozen=True)
class PointwiseCheck:
    max_ratio: float
    argmax: tuple[int, int]
    angular_max_ratio: float


def pointwise_bound_check(u: DiscreteMap, p: CollarParams, lam: float | None = None) -> PointwiseCheck:
    """Largest ratio of ``|x|^2 |grad u^#|^2`` to the decay envelope at collar nodes (``C = 1``).

    The envelope is ``||grad u||_{L^2} [(|x|/eta)^beta + (delta/(|x| eta))^beta] + Lambda^2/T^2``.
    In flat variables ``|x|^2 |grad u^#|^2 = |grad u|^2`` and the bracket reads
    ``exp(-beta (t - t_inner)) + exp(-beta (t_outer - t))``.  The angular
    variant compares ``|d_theta u|^2`` with the bracket term alone.
    """
    g = u.grid
    rows = collar_rows(g, p)
    if lam is None:
        lam = average_length_lambda(u, p)
    d_t, d_th = central_gradient(g, u.values)
    lhs = np.sum(d_t**2 + d_th**2, axis=-1)[rows]
    ang = np.sum(d_th**2, axis=-1)[rows]
    t = g.t[rows][:, None]
    lo, hi = p.t_range
    energy = dirichlet_energy(u)
    bracket = np.sqrt(energy) * (np.exp(-p.beta * (t - lo)) + np.exp(-p.beta * (hi - t)))
    rhs = bracket + lam**2 / p.T**2
    ratio = lhs / rhs
    k = np.unravel_index(np.argmax(ratio), ratio.shape)
    row = int(np.flatnonzero(rows)[k[0]])
    ang_ratio = float(np.max(ang / bracket)) if np.all(bracket > 0) else float("inf")
    return PointwiseCheck(float(ratio[k]), (row, int(k[1])), ang_ratio)


# --- geodesic fit ---------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicFit:
    """Constant-speed great-circle fit of the theta-averaged profile on a band.

    ``speed`` is the angular speed in ``s``; ``segment`` covers the band,
    ``full_length`` extrapolates the arc to all of ``[0, 1]``.
    """

    segment: GeodesicSegment
    speed: float
    full_length: float
    residual: float
    residual_raw: float
    band: tuple[float, float]


def _c1_distance(values: np.ndarray, fit: np.ndarray, h: float) -> float:
    """``sup |values - fit| + sup |d(values) - d(fit)|`` along axis 0."""
    c0 = np.max(np.linalg.norm(values - fit, axis=-1))
    c1 = np.max(np.linalg.norm(np.gradient(values - fit, h, axis=0), axis=-1))
    return float(c0 + c1)


def fit_geodesic(ru: RescaledMap, band: tuple[float, float] = (0.25, 0.75),
                 degenerate_tol: float = 1e-10) -> GeodesicFit:
    """Fit ``cos(phi) e1 + sin(phi) e2`` with ``phi`` linear in ``s`` to the averaged profile.

    The plane ``(e1, e2)`` is the best-fitting plane through the origin
    (an SVD).  The phase is unwrapped and fitted by least squares, which
    handles arcs longer than a half turn.  Residuals are ``C^1`` distances
    on the band nodes, for the averaged profile and for every raw
    ``theta``-line.

    A profile that stays within ``degenerate_tol`` of one point, or whose
    theta-average vanishes, yields a zero-length segment; its residual is
    then the ``C^1`` distance to that point.
    """
    if not isinstance(ru.target, Sphere):
        raise NotImplementedError("geodesic fits are implemented for round spheres only")
    mask = ru.band_mask(band)
    s = ru.s[mask]
    raw = ru.values[mask]
    mean = raw.mean(axis=1)
    h = ru.h_s
    if np.min(np.linalg.norm(mean, axis=-1)) < 1e-6:
        # theta-lines cancel on average (e.g. maps wrapping theta): no meaningful profile
        profile = raw[:, 0]
        centre = raw[0, 0]
        spread = 0.0
    else:
        profile = ru.target.project(mean)
        centre = ru.target.project(profile.mean(axis=0))
        spread = float(np.max(ru.target.distance(profile, centre)))
    if spread < degenerate_tol:
        pt = centre
        fit = np.broadcast_to(pt, profile.shape)
        seg = GeodesicSegment(pt, ru.target.tangent_basis(pt)[:, 0], 0.0, ru.target,
                              n_samples=2)
        res = _c1_distance(profile, fit, h)
        res_raw = max(_c1_distance(raw[:, j], fit, h) for j in range(raw.shape[1]))
        return GeodesicFit(seg, 0.0, 0.0, res, res_raw, tuple(band))
    _, _, Vt = np.linalg.svd(profile, full_matrices=False)
    e1, e2 = Vt[0], Vt[1]
    phi = np.unwrap(np.arctan2(profile @ e2, profile @ e1))
    speed, phi0 = np.polyfit(s, phi, 1)
    if speed < 0:
        e2, phi, speed, phi0 = -e2, -phi, -speed, -phi0
    ang = phi0 + speed * s
    fit = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
    res = _c1_distance(profile, fit, h)
    res_raw = max(_c1_distance(raw[:, j], fit, h) for j in range(raw.shape[1]))
    a0 = phi0 + speed * s[0]
    start = np.cos(a0) * e1 + np.sin(a0) * e2
    tangent = -np.sin(a0) * e1 + np.cos(a0) * e2
    seg = GeodesicSegment(start, tangent, float(speed * (s[-1] - s[0])), ru.target)
    return GeodesicFit(seg, float(speed), float(speed), res, res_raw, tuple(band))


# --- bundle ---------------------------------------------------------------------

@dataclass
class NeckDiagnostics:
    lambda_estimate: float
    sup_dtheta: dict = field(default_factory=dict)
    sup_ds: dict = field(default_factory=dict)
    lorentz: dict = field(default_factory=dict)
    pointwise_ratio_max: float = 0.0
    angular_ratio_max: float = 0.0
    geodesic_fit: dict = field(default_factory=dict)
    lorentz_holder: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def flat_row(self) -> dict:
        """One-level dict with dotted keys, for CSV export."""
        row = {}

        def walk(prefix, obj):
            if isinstance(obj, dict):
                for k in sorted(obj):
                    walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
            else:
                row[prefix] = obj
        walk("", self.to_dict())
        return row


def _band_key(band) -> str:
    return f"{band[0]:g}-{band[1]:g}"


def compute_diagnostics(u: DiscreteMap, p: CollarParams, sigma: float = 0.25,
                        bands=((0.25, 0.75),), fit_band: tuple[float, float] = (0.25, 0.75)) -> NeckDiagnostics:
    """All neck diagnostics of one solved map."""
    ru = RescaledMap.from_map(u)
    lam = average_length_lambda(u)
    stats = sup_norm_bands(ru, bands)
    jq = junction_quantization(u, p, sigma)
    pw = pointwise_bound_check(u, p, lam)
    fit = fit_geodesic(ru, fit_band)
    return NeckDiagnostics(
        lambda_estimate=lam,
        sup_dtheta={_band_key(b.band): b.sup_dtheta for b in stats},
        sup_ds={_band_key(b.band): b.sup_ds for b in stats},
        lorentz={k: asdict(v) for k, v in jq.items()},
        pointwise_ratio_max=pw.max_ratio,
        angular_ratio_max=pw.angular_max_ratio,
        geodesic_fit={"length": fit.segment.length, "full_length": fit.full_length,
                      "residual": fit.residual, "residual_raw": fit.residual_raw,
                      "band": list(fit.band)},
        lorentz_holder=lorentz_holder_check(u, p),
    )


def diagnostics_csv(rows: list[dict]) -> str:
    """CSV text of flat rows (union of keys, sorted)."""
    keys = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
