"""Scenario files: flat ``key = value`` text with an explicit format version.

Example::

    version = 1
    name = winding-w2
    family = winding
    w = 2
    schedule = 4pi:64x16, 8pi:128x16, 16pi:256x16

Schedule lengths are collar moduli ``T = log(eta^2/delta)`` by default, so
a step's cylinder has total length ``T + 2 pi/rho``; ``measure = total``
reads them as total lengths instead.  Lengths accept a ``pi`` suffix
(``4pi``, ``0.5pi``, ``pi``).  Comments start with ``#``.  The hash covers the parsed fields only, so comments and layout
do not invalidate caches but any parameter change does.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..domain import BETA_MAX, collar_for_length

FORMAT_VERSION = 1
FAMILIES = ("winding", "neck", "theta_wrap")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario."""


@dataclass(frozen=True)
class StepSpec:
    length: float
    n_t: int
    n_theta: int

    def label(self) -> str:
        return f"{format_length(self.length)}:{self.n_t}x{self.n_theta}"


@dataclass(frozen=True)
class Scenario:
    name: str
    family: str
    schedule: tuple[StepSpec, ...] = ()
    target: str = "sphere:2"
    w: int = 2
    distance: float = 2.0
    wobble: float = 0.01
    noise: float = 1e-2
    beta: float = 0.5
    sigma: float = 0.25
    rho: float = float(np.pi)
    zero_tol: float | None = None
    tol: float = 1e-11
    max_iter: int = 200_000
    seed: int = 0
    continuation: bool = True
    weight: str = "omega"
    measure: str = "collar"
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.version != FORMAT_VERSION:
            raise ScenarioError(f"unsupported scenario version {self.version} (expected {FORMAT_VERSION})")
        if self.family not in FAMILIES:
            raise ScenarioError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.weight not in ("uniform", "omega", "frak"):
            raise ScenarioError(f"unknown weight {self.weight!r}")
        if self.measure not in ("collar", "total"):
            raise ScenarioError(f"measure must be 'collar' or 'total', got {self.measure!r}")
        ts = [s.length for s in self.schedule]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError("schedule must be strictly increasing in T")
        if not 0 < self.beta < BETA_MAX:
            raise ScenarioError(f"beta must lie in (0, {BETA_MAX:.5f})")
        if self.family == "winding" and self.w < 1:
            raise ScenarioError("winding number must be >= 1")
        if self.family == "neck" and not 0 < self.distance < np.pi:
            raise ScenarioError("neck distance must lie in (0, pi)")
        for s in self.schedule:
            try:
                collar_for_length(self.t_total(s), self.rho, self.beta)
            except ValueError as exc:
                raise ScenarioError(f"step {s.label()}: {exc}") from None
            if s.n_t < 8 or s.n_theta < 8:
                raise ScenarioError(f"step {s.label()}: grid must be at least 8x8")
        name, _, dim = self.target.partition(":")
        if name != "sphere" or not (dim or "2").isdigit():
            raise ScenarioError(f"unsupported target {self.target!r}")

    def t_total(self, step: StepSpec) -> float:
        """Total cylinder length of a schedule step."""
        if self.measure == "collar":
            return step.length + 2 * np.pi / self.rho
        return step.length

    @property
    def target_dim(self) -> int:
        return int(self.target.partition(":")[2] or 2)

    def canonical(self) -> dict:
        d = asdict(self)
        d["schedule"] = [[float(s.length).hex(), s.n_t, s.n_theta] for s in self.schedule]
        for k, v in d.items():
            if isinstance(v, float):
                d[k] = v.hex()
        return d

    def digest(self) -> str:
        """sha256 of the canonical field encoding."""
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_text(self) -> str:
        lines = [f"version = {self.version}"]
        for f in fields(self):
            if f.name == "version":
                continue
            v = getattr(self, f.name)
            if f.name == "schedule":
                v = ", ".join(s.label() for s in v)
            elif v is None:
                continue
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif f.name == "rho":
                v = format_length(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_LENGTH = re.compile(r"^\s*([0-9.eE+-]*)\s*(\*?\s*pi)?\s*$")


def parse_length(text: str) -> float:
    """``"4pi" -> 4*pi``, ``"pi" -> pi``, ``"12.5" -> 12.5``."""
    m = _LENGTH.match(text)
    if not m or (not m.group(1) and not m.group(2)):
        raise ScenarioError(f"cannot parse length {text!r}")
    coef = float(m.group(1)) if m.group(1) else 1.0
    return coef * np.pi if m.group(2) else coef


def format_length(x: float) -> str:
    c = x / np.pi
    if abs(c - round(c, 6)) < 1e-12 and abs(round(c, 6) * np.pi - x) <= 1e-12 * max(1.0, x):
        c = round(c, 6)
        return "pi" if c == 1 else f"{c:g}pi"
    return repr(float(x))


def parse_grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise ScenarioError(f"grid must look like NxM, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def parse_schedule(text: str) -> tuple[StepSpec, ...]:
    out = []
    for item in filter(None, (x.strip() for x in text.split(","))):
        length, sep, grid = item.partition(":")
        if not sep:
            raise ScenarioError(f"schedule entry {item!r} must be T:NxM")
        out.append(StepSpec(parse_length(length), *parse_grid(grid)))
    return tuple(out)


def _convert(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(Scenario)}
    if name not in kinds:
        raise ScenarioError(f"unknown key {name!r}")
    if name == "schedule":
        return parse_schedule(raw)
    if name == "rho":
        return parse_length(raw)
    t = kinds[name]
    try:
        if t in ("int",):
            return int(raw)
        if t in ("float", "float | None"):
            return None if raw.lower() == "none" else float(raw)
        if t == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
    except ValueError:
        raise ScenarioError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_scenario(text: str) -> Scenario:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ScenarioError(f"line {lineno}: expected key = value")
        if key in values:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, val)
    if "version" not in values:
        raise ScenarioError("missing 'version' key")
    for req in ("name", "family"):
        if req not in values:
            raise ScenarioError(f"missing required key {req!r}")
    return Scenario(**values)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())
