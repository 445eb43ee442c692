"""Command line interface.

Exit codes: 0 success, 2 non-convergence, 3 an index inequality failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..geodesic import GeodesicSegment, conjugate_zeros, segment_spectrum
from ..neckstats import RescaledMap, compute_diagnostics, fit_geodesic
from ..target import Sphere
from .cache import MapCache
from .report import emit_report
from .runner import (IndexLedger, initial_map, make_weight, robust_spectrum, run_scenario, solve_step,
                     step_grid, step_params)
from .scenario import Scenario, ScenarioError, StepSpec, load_scenario, parse_grid, parse_length

EXIT_OK, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 2, 3
log = logging.getLogger("necklab")


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario)
    return sc.with_overrides(seed=args.seed, zero_tol=args.zero_tol, weight=getattr(args, "weight", None))


def _cache(args) -> MapCache:
    if args.no_cache:
        return MapCache(None)
    if args.cache:
        return MapCache(args.cache)
    return MapCache(Path(args.out) / "cache" if args.out else None)


def _single_step(sc: Scenario, args) -> Scenario:
    """Scenario reduced to one (cold-started) step, optionally on another grid."""
    if not sc.schedule:
        raise ScenarioError("scenario has an empty schedule")
    try:
        st = sc.schedule[args.step]
    except IndexError:
        raise ScenarioError(f"step {args.step} out of range (schedule has {len(sc.schedule)})") from None
    if args.grid:
        st = StepSpec(st.length, *parse_grid(args.grid))
    return replace(sc, schedule=(st,), continuation=False)


def _solve_one(sc: Scenario, args):
    import numpy as np

    st = sc.schedule[0]
    grid, bc = step_grid(sc, st)
    u0 = initial_map(sc, grid, bc, np.random.default_rng(sc.seed))
    u, rep, cached = solve_step(sc, 0, u0, _cache(args), sc.digest())
    return st, u, rep, cached


def _emit(payload: dict, args, name: str) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")


def cmd_solve(args) -> int:
    sc = _single_step(_scenario(args), args)
    st, u, rep, cached = _solve_one(sc, args)
    _emit({"step": st.label(), "iterations": rep.iterations, "energy": rep.energy, "residual": rep.residual,
           "converged": rep.converged, "cached": cached, "constraint_error": u.constraint_error()},
          args, "solve.json")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_spectrum(args) -> int:
    sc = _single_step(_scenario(args), args)
    st, u, rep, _ = _solve_one(sc, args)
    if not rep.converged:
        log.error("solve did not converge (residual %.3e)", rep.residual)
        return EXIT_NONCONVERGED
    w = make_weight(sc.weight, u.grid, step_params(sc, st), sc.sigma)
    spectrum_rep = robust_spectrum(u, w, sc.zero_tol)
    d = spectrum_rep.to_dict()
    d["eigenvalues"] = d["eigenvalues"][: args.n_eigs]
    _emit({"step": st.label(), **d}, args, "spectrum.json")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    if args.length is not None:
        length = parse_length(args.length)
    else:
        if not args.scenario:
            raise ScenarioError("geodesic needs --length or --scenario")
        sc = _single_step(_scenario(args), args)
        _, u, rep, _ = _solve_one(sc, args)
        if not rep.converged:
            return EXIT_NONCONVERGED
        length = fit_geodesic(RescaledMap.from_map(u), (0.25, 0.75)).full_length
    seg = GeodesicSegment.along(length, Sphere(args.dim))
    spectrum_rep = segment_spectrum(seg, n_modes=args.n_modes)
    cz = conjugate_zeros(seg)
    _emit({"length": length, "spectrum": spectrum_rep.to_dict(), "conjugate_points": cz.count,
           "endpoint_conjugate": cz.endpoint_conjugate, "zeros": list(cz.zeros)}, args, "geodesic.json")
    return EXIT_OK


def cmd_neckstats(args) -> int:
    sc = _single_step(_scenario(args), args)
    st, u, rep, _ = _solve_one(sc, args)
    if not rep.converged:
        return EXIT_NONCONVERGED
    diag = compute_diagnostics(u, step_params(sc, st), sc.sigma)
    _emit({"step": st.label(), **diag.to_dict()}, args, "neckstats.json")
    return EXIT_OK


def _finish(ledger: IndexLedger, args) -> int:
    if args.out:
        for p in emit_report(ledger, args.out):
            log.info("wrote %s", p)
    summary = {"scenario": ledger.scenario, "complete": ledger.complete,
               "steps": [(s.T, s.index, s.nullity, s.extended) for s in ledger.steps],
               "limit": None if ledger.limit is None else {k: {kk: v[kk] for kk in ("index", "nullity", "extended")}
                                                            for k, v in ledger.limit.items()},
               "verdicts": None if ledger.verdicts is None else
               {k: ledger.verdicts[k] for k in ("upper", "lower", "upper_equality", "lower_equality")}}
    print(json.dumps(summary, indent=1))
    if not ledger.complete:
        return EXIT_NONCONVERGED
    return EXIT_VIOLATION if ledger.violated else EXIT_OK


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    if args.cold:
        sc = replace(sc, continuation=False)
    ledger = run_scenario(sc, _cache(args))
    log.info("solver iterations this run: %d", ledger.runtime.get("solver_iterations", 0))
    return _finish(ledger, args)


def cmd_report(args) -> int:
    ledger = IndexLedger.from_dict(json.loads(Path(args.ledger).read_text()))
    return _finish(ledger, args)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; code 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="necklab", description=__doc__.splitlines()[0])
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)
    add = lambda name, help: sub.add_parser(name, help=help, parents=[shared])  # noqa: E731

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--zero-tol", type=float, help="override the zero-eigenvalue tolerance")
        p.add_argument("--cache", help="cache directory (default: <out>/cache)")
        p.add_argument("--no-cache", action="store_true")

    def single(p):
        p.add_argument("--step", type=int, default=0, help="schedule step index")
        p.add_argument("--grid", help="override the step grid, NxM")

    def weight(p):
        p.add_argument("--weight", choices=("uniform", "omega", "frak"))

    p = add("solve", "solve one schedule step")
    common(p), single(p)
    p.set_defaults(func=cmd_solve)
    p = add("spectrum", "Jacobi spectrum of one solved step")
    common(p), single(p), weight(p)
    p.add_argument("--n-eigs", type=int, default=12)
    p.set_defaults(func=cmd_spectrum)
    p = add("geodesic", "index of a geodesic segment")
    common(p, scenario_required=False), single(p)
    p.add_argument("--length", help="segment length, e.g. 4pi")
    p.add_argument("--dim", type=int, default=2, help="sphere dimension")
    p.add_argument("--n-modes", type=int, default=16)
    p.set_defaults(func=cmd_geodesic)
    p = add("neckstats", "neck diagnostics of one solved step")
    common(p), single(p)
    p.set_defaults(func=cmd_neckstats)
    p = add("sweep", "run the whole schedule and write the report")
    common(p), weight(p)
    p.add_argument("--cold", action="store_true", help="cold-start every step")
    p.set_defaults(func=cmd_sweep)
    p = add("report", "re-emit the report of a stored ledger")
    p.add_argument("--ledger", required=True, help="ledger JSON file")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"necklab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
