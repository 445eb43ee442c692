"""CSV, JSON and SVG output for index ledgers.  Output is byte-deterministic."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .runner import IndexLedger

CSV_COLUMNS = (
    "step", "T", "t_total", "n_t", "n_theta", "index", "nullity", "extended", "index_uniform",
    "nullity_uniform", "energy", "lambda", "fit_residual", "fit_residual_raw", "junction_L21_outer",
    "junction_L21_inner", "sup_dtheta_mid", "pointwise_ratio_max", "iterations", "residual",
)
FORMATS = ("csv", "json", "svg")


def ledger_rows(ledger: IndexLedger) -> list[dict]:
    rows = []
    for s in ledger.steps:
        d = s.diagnostics or {}
        fit = d.get("geodesic_fit", {})
        lor = d.get("lorentz", {})
        rows.append({
            "step": s.step, "T": repr(s.T), "t_total": repr(s.t_total), "n_t": s.grid[0], "n_theta": s.grid[1],
            "index": s.index, "nullity": s.nullity, "extended": s.extended,
            "index_uniform": s.index_uniform, "nullity_uniform": s.nullity_uniform,
            "energy": repr(s.energy), "lambda": repr(s.lambda_estimate),
            "fit_residual": repr(fit.get("residual", float("nan"))),
            "fit_residual_raw": repr(fit.get("residual_raw", float("nan"))),
            "junction_L21_outer": repr(lor.get("outer", {}).get("L21", float("nan"))),
            "junction_L21_inner": repr(lor.get("inner", {}).get("L21", float("nan"))),
            "sup_dtheta_mid": repr(d.get("sup_dtheta", {}).get("0.25-0.75", float("nan"))),
            "pointwise_ratio_max": repr(d.get("pointwise_ratio_max", float("nan"))),
            "iterations": s.iterations, "residual": repr(s.residual),
        })
    return rows


def ledger_csv(ledger: IndexLedger) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(ledger_rows(ledger))
    return buf.getvalue()


def ledger_svg(ledger: IndexLedger) -> str:
    """Three panels against ``T``: low eigenvalues, ``Lambda`` and the fit residual."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    T = [s.T for s in ledger.steps]
    with matplotlib.rc_context({"svg.hashsalt": "necklab", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
        ax = axes[0]
        n = min((len(s.eigenvalues) for s in ledger.steps), default=0)
        for j in range(min(n, 8)):
            ax.plot(T, [s.eigenvalues[j] for s in ledger.steps], marker="o", lw=1)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set(xlabel="T", ylabel="eigenvalue", title="lowest Jacobi eigenvalues")
        axes[1].plot(T, [s.lambda_estimate for s in ledger.steps], marker="o")
        axes[1].set(xlabel="T", ylabel="Lambda", title="average length")
        res = [s.diagnostics.get("geodesic_fit", {}).get("residual_raw", float("nan")) for s in ledger.steps]
        axes[2].plot(T, res, marker="o")
        if any(r > 0 for r in res):
            axes[2].set_yscale("log")
        axes[2].set(xlabel="T", ylabel="C1 residual", title="distance to geodesic")
        fig.suptitle(ledger.scenario)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_report(ledger: IndexLedger, out_dir: str | Path, formats=FORMATS) -> list[Path]:
    """Write ``<name>.csv``, ``<name>.json`` and ``<name>.svg`` into ``out_dir``.

    Raises
    ------
    OSError
        If ``out_dir`` cannot be created or written.
    """
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = ledger.scenario.replace("/", "_") or "ledger"
    writers = {"csv": ledger_csv, "json": lambda lg: lg.to_json() + "\n", "svg": ledger_svg}
    written = []
    for fmt in FORMATS:
        if fmt in formats:
            path = out / f"{stem}.{fmt}"
            path.write_text(writers[fmt](ledger))
            written.append(path)
    return written
