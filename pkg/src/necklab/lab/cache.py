"""Content-addressed store for solved maps.

Each entry is an ``.npz`` archive plus a ``.sha256`` sidecar holding the
archive digest.  A digest mismatch or an unreadable archive counts as a miss.
"""
from __future__ import annotations

import hashlib
import io
import logging
import os
from pathlib import Path

import numpy as np

from ..domain import CylinderGrid
from ..solver import DiscreteMap, SolveReport
from ..target import Sphere

log = logging.getLogger(__name__)


def step_key(scenario_digest: str, step: int) -> str:
    return hashlib.sha256(f"{scenario_digest}:{step}".encode()).hexdigest()


class MapCache:
    """Directory-backed cache; ``root=None`` disables it."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0
        self.corrupt = 0

    def _paths(self, key: str) -> tuple[Path, Path]:
        assert self.root is not None
        return self.root / f"{key}.npz", self.root / f"{key}.sha256"

    def load(self, key: str) -> tuple[DiscreteMap, SolveReport] | None:
        if self.root is None:
            return None
        data_path, sum_path = self._paths(key)
        if not data_path.exists() or not sum_path.exists():
            self.misses += 1
            return None
        blob = data_path.read_bytes()
        if hashlib.sha256(blob).hexdigest() != sum_path.read_text().strip():
            log.warning("cache entry %s failed its checksum; recomputing", key[:12])
            self.corrupt += 1
            self.misses += 1
            return None
        try:
            with np.load(io.BytesIO(blob), allow_pickle=False) as z:
                g = z["grid"]
                grid = CylinderGrid(float(g[0]), float(g[1]), int(g[2]), int(g[3]), bool(g[4]))
                bc = z["bc"] if z["has_bc"] else None
                u = DiscreteMap(grid, z["values"], Sphere(int(z["dim"])), bc)
                r = z["report"]
                report = SolveReport(int(r[0]), float(r[1]), float(r[2]), bool(r[3]))
        except (KeyError, ValueError, OSError) as exc:
            log.warning("cache entry %s is unreadable (%s); recomputing", key[:12], exc)
            self.corrupt += 1
            self.misses += 1
            return None
        self.hits += 1
        return u, report

    def store(self, key: str, u: DiscreteMap, report: SolveReport) -> None:
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        g = u.grid
        buf = io.BytesIO()
        np.savez(buf, values=u.values,
                 grid=np.array([g.t_min, g.t_max, g.n_t, g.n_theta, float(g.t_periodic)]),
                 bc=u.bc if u.bc is not None else np.zeros(0), has_bc=np.array(u.bc is not None),
                 dim=np.array(u.target.intrinsic_dim),
                 report=np.array([report.iterations, report.energy, report.residual,
                                  float(report.converged)]))
        blob = buf.getvalue()
        data_path, sum_path = self._paths(key)
        tmp = data_path.with_suffix(".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, data_path)
        sum_path.write_text(hashlib.sha256(blob).hexdigest() + "\n")
