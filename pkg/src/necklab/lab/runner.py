"""Degeneration sweeps: solve, spectra, diagnostics and the index inequalities."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..domain import CollarParams, CylinderGrid, collar_for_length, make_grid
from ..geodesic import GeodesicSegment, segment_spectrum
from ..neckstats import RescaledMap, compute_diagnostics, fit_geodesic
from ..solver import (DiscreteMap, SolveReport, constant_map, neck_boundary_data, neck_initial_map, resample,
                      solve_harmonic, theta_wrap_map, winding_map)
from ..spectrum import (SpectrumReport, WeightField, assemble_jacobi, default_zero_tol,
                        solve_spectrum, uniform_weight, weight_frak, weight_omega)
from ..target import Sphere
from .cache import MapCache, step_key
from .scenario import Scenario, StepSpec

log = logging.getLogger(__name__)

N_EIGS_KEPT = 12
CONSTANT_LIMIT_NOTE = ("torus winding family: the whole torus is collar, so the thick-part limit is the "
                       "constant map with Ind = 0 and Null = n (constant tangent fields)")
THICK_LIMIT_NOTE = ("Dirichlet neck family: each thick part [0, pi/rho] and [T - pi/rho, T] is solved "
                    "with the scenario boundary loop and the finest-step trace as Dirichlet data")


# --- ledger -----------------------------------------------------------------------

@dataclass
class StepRecord:
    step: int
    T: float
    t_total: float
    grid: tuple[int, int]
    index: int
    nullity: int
    extended: int
    index_uniform: int
    nullity_uniform: int
    energy: float
    lambda_estimate: float
    diagnostics_key: str
    eigenvalues: list = field(default_factory=list)
    zero_tol: float = 0.0
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def sylvester_ok(self) -> bool:
        return (self.index, self.nullity) == (self.index_uniform, self.nullity_uniform)


@dataclass
class IndexLedger:
    scenario: str
    digest: str
    family: str
    steps: list[StepRecord] = field(default_factory=list)
    limit: dict | None = None
    verdicts: dict | None = None
    complete: bool = True
    meta: dict = field(default_factory=dict)
    # run-dependent facts (cache hits, iterations actually performed); never serialized
    runtime: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("runtime")
        for s in d["steps"]:
            s["grid"] = list(s["grid"])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "IndexLedger":
        steps = [StepRecord(**{**s, "grid": tuple(s["grid"])}) for s in d.get("steps", [])]
        return cls(d["scenario"], d["digest"], d["family"], steps, d.get("limit"), d.get("verdicts"),
                   d.get("complete", True), d.get("meta", {}))

    @property
    def violated(self) -> bool:
        v = self.verdicts
        return bool(v) and not (v["upper"] and v["lower"])


def compute_verdicts(steps: list[dict], limit: dict | None) -> dict | None:
    """Index inequalities from stored integers only.

    ``upper``: ``Ind*(u_k) <= Ind*(u_inf) + Ind*(gamma)``; ``lower``:
    ``Ind(u_k) >= Ind(u_inf) + Ind(gamma)``; each must hold at every step.
    """
    if limit is None or not steps:
        return None
    u, g = limit["u_inf"], limit["gamma"]
    rhs_ext = u["extended"] + g["extended"]
    rhs_ind = u["index"] + g["index"]
    upper = [s["extended"] <= rhs_ext for s in steps]
    lower = [s["index"] >= rhs_ind for s in steps]
    return {
        "upper": all(upper), "lower": all(lower),
        "upper_steps": upper, "lower_steps": lower,
        "upper_equality": all(s["extended"] == rhs_ext for s in steps),
        "lower_equality": all(s["index"] == rhs_ind for s in steps),
        "rhs_extended": rhs_ext, "rhs_index": rhs_ind,
    }


def recompute_verdicts(ledger: dict) -> dict | None:
    """Verdicts re-derived from a serialized ledger."""
    return compute_verdicts(ledger.get("steps", []), ledger.get("limit"))


# --- building blocks --------------------------------------------------------------

def step_params(sc: Scenario, st: StepSpec) -> CollarParams:
    return collar_for_length(sc.t_total(st), sc.rho, sc.beta)


def neck_endpoints(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    m = sc.target_dim + 1
    p = np.zeros(m)
    q = np.zeros(m)
    p[0] = 1.0
    q[0], q[1] = np.cos(sc.distance), np.sin(sc.distance)
    return p, q


def step_grid(sc: Scenario, st: StepSpec) -> tuple[CylinderGrid, np.ndarray | None]:
    if sc.family == "neck":
        g = make_grid("cylinder", st.n_t, st.n_theta, t_min=0.0, t_max=sc.t_total(st))
        p, q = neck_endpoints(sc)
        return g, neck_boundary_data(g, p, q, sc.wobble, Sphere(sc.target_dim))
    return make_grid("torus", st.n_t, st.n_theta, t_total=sc.t_total(st)), None


def phase_noise(u: DiscreteMap, amp: float, rng: np.random.Generator) -> DiscreteMap:
    """Rotate every value about the last axis by a random angle.

    For maps into the equator this keeps the perturbation inside the
    equatorial circle, a flow-invariant set; normal noise would excite the
    unstable directions of the saddle.
    """
    if amp == 0:
        return u
    phi = amp * rng.standard_normal(u.grid.shape)
    V = u.values.copy()
    c, s = np.cos(phi), np.sin(phi)
    x, y = V[..., 0].copy(), V[..., 1].copy()
    V[..., 0], V[..., 1] = c * x - s * y, s * x + c * y
    return u.with_values(V)


def initial_map(sc: Scenario, grid: CylinderGrid, bc, rng: np.random.Generator) -> DiscreteMap:
    target = Sphere(sc.target_dim)
    if sc.family == "winding":
        return phase_noise(winding_map(grid, sc.w, target), sc.noise, rng)
    if sc.family == "theta_wrap":
        return phase_noise(theta_wrap_map(grid, target), sc.noise, rng)
    return neck_initial_map(grid, bc, target)


def make_weight(kind: str, grid: CylinderGrid, p: CollarParams, sigma: float) -> WeightField:
    if kind == "uniform":
        return uniform_weight(grid)
    if kind == "omega":
        return weight_omega(grid, p)
    if kind == "frak":
        return weight_frak(grid, p, sigma, extend=True)
    raise ValueError(f"unknown weight {kind!r}")


def robust_spectrum(u: DiscreteMap, weight: WeightField, zero_tol: float | None = None,
                    k: int = 24) -> SpectrumReport:
    """Spectrum with complete index and nullity (see ``solve_spectrum`` in auto mode)."""
    return solve_spectrum(assemble_jacobi(u, weight), mode="auto", k=k, zero_tol=zero_tol)


def _restrict(u: DiscreteMap, t_lo: float, t_hi: float, n_t: int) -> DiscreteMap:
    """Interpolate ``u`` in ``t`` onto an open cylinder ``[t_lo, t_hi]``; end rows become Dirichlet data."""
    g = make_grid("cylinder", n_t, u.grid.n_theta, t_min=t_lo, t_max=t_hi)
    out = np.empty(g.shape + (u.values.shape[-1],))
    for j in range(g.n_theta):
        for c in range(out.shape[-1]):
            out[:, j, c] = np.interp(g.t, u.grid.t, u.values[:, j, c])
    out = u.target.project(out)
    return DiscreteMap(g, out, u.target, np.stack([out[0], out[-1]]))


def _counts(rep: SpectrumReport) -> dict:
    return {"index": rep.index, "nullity": rep.nullity, "extended": rep.extended}


def limit_side(sc: Scenario, last: DiscreteMap, st: StepSpec, sigma: float, tol: float) -> dict:
    """Index data of the two limit objects, from the finest step."""
    fit = fit_geodesic(RescaledMap.from_map(last), (sigma, 1 - sigma))
    seg = GeodesicSegment.along(fit.full_length, Sphere(sc.target_dim))
    srep = segment_spectrum(seg)
    gamma = {**_counts(srep), "length": fit.full_length,
             "normal_index": srep.meta.get("normal_index", 0),
             "normal_nullity": srep.meta.get("normal_nullity", 0)}
    if sc.family == "winding":
        n = sc.target_dim
        cm = constant_map(last.grid, target=Sphere(n))
        crep = robust_spectrum(cm, uniform_weight(cm.grid), sc.zero_tol)
        u_inf = {**_counts(crep), "interpretation": CONSTANT_LIMIT_NOTE}
        return {"u_inf": u_inf, "gamma": gamma}
    p = step_params(sc, st)
    comps = []
    total = sc.t_total(st)
    for lo, hi in ((0.0, p.t_inner), (total - p.t_inner, total)):
        part = _restrict(last, lo, hi, 17)
        part, _ = solve_harmonic(part, tol=tol)
        comps.append(_counts(robust_spectrum(part, uniform_weight(part.grid), sc.zero_tol)))
    separate = {k: sum(c[k] for c in comps) for k in ("index", "nullity", "extended")}
    single = max(comps, key=lambda c: (c["extended"], c["index"]))
    u_inf = {**separate, "components": comps,
             "conventions": {"separate": separate, "single": dict(single)},
             "interpretation": THICK_LIMIT_NOTE + "; verdicts use the 'separate' convention"}
    return {"u_inf": u_inf, "gamma": gamma}


# --- driver --------------------------------------------------------------------------

def solve_step(sc: Scenario, idx: int, u0: DiscreteMap, cache: MapCache, digest: str
               ) -> tuple[DiscreteMap, SolveReport, bool]:
    key = step_key(digest, idx)
    hit = cache.load(key)
    if hit is not None:
        return hit[0], hit[1], True
    u, rep = solve_harmonic(u0, tol=sc.tol, max_iter=sc.max_iter)
    if rep.converged:
        cache.store(key, u, rep)
    return u, rep, False


def run_scenario(sc: Scenario, cache: MapCache | None = None) -> IndexLedger:
    """Run the whole schedule.  A non-converged step stops the sweep with ``complete=False``."""
    cache = cache or MapCache(None)
    digest = sc.digest()
    ledger = IndexLedger(sc.name, digest, sc.family,
                         meta={"weight": sc.weight, "sigma": sc.sigma, "beta": sc.beta, "rho": sc.rho,
                               "scenario_text": sc.to_text()})
    ledger.runtime.update(cached_steps=[], solver_iterations=0)
    rng = np.random.default_rng(sc.seed)
    prev = None
    last = None
    for idx, st in enumerate(sc.schedule):
        grid, bc = step_grid(sc, st)
        if prev is None or not sc.continuation:
            u0 = initial_map(sc, grid, bc, rng)
        else:
            u0 = resample(prev, grid, bc)
        u, rep, cached = solve_step(sc, idx, u0, cache, digest)
        ledger.runtime["cached_steps"].append(cached)
        ledger.runtime["solver_iterations"] += 0 if cached else rep.iterations
        p = step_params(sc, st)
        if not rep.converged:
            log.error("step %d (%s) did not converge: residual %.3e", idx, st.label(), rep.residual)
            ledger.complete = False
            ledger.meta["failed_step"] = idx
            break
        tol = sc.zero_tol if sc.zero_tol is not None else default_zero_tol(grid)
        main = robust_spectrum(u, make_weight(sc.weight, grid, p, sc.sigma), tol)
        uni = main if sc.weight == "uniform" else robust_spectrum(u, uniform_weight(grid), tol)
        diag = compute_diagnostics(u, p, sc.sigma, bands=((sc.sigma, 1 - sc.sigma), (0.25, 0.75)),
                                   fit_band=(0.25, 0.75))
        ledger.steps.append(StepRecord(
            step=idx, T=st.length, t_total=sc.t_total(st), grid=(st.n_t, st.n_theta),
            index=main.index, nullity=main.nullity, extended=main.extended,
            index_uniform=uni.index, nullity_uniform=uni.nullity,
            energy=rep.energy, lambda_estimate=diag.lambda_estimate,
            diagnostics_key=f"{digest[:12]}:{idx}",
            eigenvalues=[float(x) for x in uni.eigenvalues[:N_EIGS_KEPT]], zero_tol=float(tol),
            iterations=rep.iterations, residual=rep.residual, converged=rep.converged,
            diagnostics=diag.to_dict(),
        ))
        prev = last = u
    if last is not None and ledger.complete and sc.family != "theta_wrap":
        ledger.limit = limit_side(sc, last, sc.schedule[-1], 0.25, sc.tol)
        ledger.verdicts = recompute_verdicts(ledger.to_dict())
    elif sc.family == "theta_wrap":
        ledger.meta["control"] = "negative control: quantization hypotheses fail, no verdicts"
    ledger.runtime["cache"] = {"hits": cache.hits, "misses": cache.misses, "corrupt": cache.corrupt}
    return ledger
