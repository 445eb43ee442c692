"""Scenario orchestration: sweeps, index ledgers, caching and reports."""
from .cache import MapCache
from .report import emit_report
from .runner import IndexLedger, StepRecord, compute_verdicts, recompute_verdicts, run_scenario
from .scenario import Scenario, ScenarioError, StepSpec, load_scenario, parse_scenario

__all__ = [
    "MapCache", "emit_report", "IndexLedger", "StepRecord", "compute_verdicts", "recompute_verdicts",
    "run_scenario", "Scenario", "ScenarioError", "StepSpec", "load_scenario", "parse_scenario",
]
