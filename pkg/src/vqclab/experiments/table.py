"""Result rows, deterministic CSV/JSON emission, and SVG figures."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import __version__ as CODE_VERSION
from .config import ExperimentConfig

CSV_HEADER = ("experiment", "n", "m", "model", "seed", "statistic", "value", "stderr")


@dataclass(frozen=True)
class Row:
    """One measured statistic.  ``seed=None`` marks an aggregate over seeds;
    ``n``/``m`` are ``None`` where they do not apply."""

    experiment: str
    n: int | None
    m: int | None
    model: str
    seed: int | None
    statistic: str
    value: float
    stderr: float = 0.0

    def __post_init__(self):
        if not self.stderr >= 0 or not math.isfinite(self.stderr):
            raise ValueError(f"stderr must be finite and nonnegative ({self.statistic}: {self.stderr})")

    def sort_key(self) -> tuple:
        none_first = lambda v: (-1 if v is None else v)  # noqa: E731
        # aggregates sort after per-seed rows of the same setting
        seed = math.inf if self.seed is None else self.seed
        return (self.experiment, self.model, none_first(self.n), none_first(self.m), self.statistic, seed)

    def csv_fields(self) -> list[str]:
        blank = lambda v: "" if v is None else str(v)  # noqa: E731
        return [self.experiment, blank(self.n), blank(self.m), self.model,
                "all" if self.seed is None else str(self.seed), self.statistic,
                repr(float(self.value)), repr(float(self.stderr))]


@dataclass
class ResultTable:
    rows: list[Row] = field(default_factory=list)
    config: ExperimentConfig | None = None

    def add(self, *args, **kwargs) -> Row:
        row = Row(*args, **kwargs)
        self.rows.append(row)
        return row

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    def sorted(self) -> "ResultTable":
        return ResultTable(sorted(self.rows, key=Row.sort_key), self.config)

    def select(self, statistic: str | None = None, model: str | None = None,
               aggregate: bool | None = None, **fixed) -> list[Row]:
        out = []
        for r in self.rows:
            if statistic is not None and r.statistic != statistic:
                continue
            if model is not None and r.model != model:
                continue
            if aggregate is not None and (r.seed is None) != aggregate:
                continue
            if any(getattr(r, k) != v for k, v in fixed.items()):
                continue
            out.append(r)
        return out

    def value(self, statistic: str, **fixed) -> float:
        hits = self.select(statistic, **fixed)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {statistic} {fixed}")
        return hits[0].value

    def manifest(self) -> dict:
        cfg = self.config
        return {
            "code_version": CODE_VERSION,
            "master_seed": None if cfg is None else cfg.master_seed,
            "config": None if cfg is None else cfg.to_dict(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.sorted().rows:
            writer.writerow(row.csv_fields())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"manifest": self.manifest(), "rows": [asdict(r) for r in self.sorted().rows]},
                          sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# figures


def _series(table: ResultTable):
    """(title, x label, y label, {series label: [(x, y, err)]}) for the table's experiment."""
    exp = table.rows[0].experiment if table.rows else (table.config.experiment if table.config else "")
    agg = [r for r in table.rows if r.seed is None]
    picks = {
        "fig4": ("var_x_mean", "m", "dataset size m", "Var_x f(x)  (mean ± sd over seeds)", "var_x_sd"),
        "concentration": ("output_var", "n", "qubits n", "Var_theta f", None),
        "tail": (None, "n", "qubits n", "exceedance frequency", None),
        "spread": ("spread_mean", "n", "qubits n", "max pairwise spread", "spread_sd"),
        "gradients": ("grad_var", "n", "qubits n", "Var of derivative", None),
        "design": ("choi_purity", "n", "qubits n", "mean Choi purity", None),
    }
    if exp not in picks:
        return None
    stat, axis, xlabel, ylabel, sd_stat = picks[exp]
    series: dict[str, list] = {}
    for r in agg:
        if exp == "tail":
            if not r.statistic.startswith("exceed_freq"):
                continue
            label = f"{r.model} {r.statistic.removeprefix('exceed_freq_')}"
        elif r.statistic != stat:
            continue
        else:
            label = r.model
        err = r.stderr
        if sd_stat is not None:
            sd = [s for s in agg if s.statistic == sd_stat and s.model == r.model and s.n == r.n and s.m == r.m]
            err = sd[0].value if sd else err
        series.setdefault(label, []).append((getattr(r, axis), r.value, err))
    return exp, xlabel, ylabel, {k: sorted(v) for k, v in sorted(series.items())}


def render_svg(table: ResultTable, path: Path) -> bool:
    """Line chart with error bars; returns False when the table has nothing to plot."""
    spec = _series(table)
    if spec is None or not spec[3]:
        return False
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    title, xlabel, ylabel, series = spec
    with matplotlib.rc_context({"svg.hashsalt": "vqclab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        for label, pts in series.items():
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=label)
        if all(y > 0 for pts in series.values() for _, y, _ in pts):
            ax.set_yscale("log")
        if title == "fig4":
            ax.set_xscale("log", base=2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return True


def emit_outputs(table: ResultTable, fmt: str, out_dir) -> list[Path]:
    """Write ``<experiment>.csv`` / ``.json`` / ``.svg`` plus a config manifest.

    ``svg`` writes the CSV alongside the figure.  Raises ``OSError`` when
    the directory cannot be written.
    """
    if fmt not in ("csv", "json", "svg"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"cannot write to {out}")
    name = table.config.experiment if table.config else (table.rows[0].experiment if table.rows else "results")
    written = []

    def write(suffix: str, text: str) -> None:
        path = out / f"{name}{suffix}"
        path.write_text(text)
        written.append(path)

    if fmt in ("csv", "svg"):
        write(".csv", table.to_csv())
    if fmt == "json":
        write(".json", table.to_json())
    if fmt == "svg":
        path = out / f"{name}.svg"
        if render_svg(table, path):
            written.append(path)
    if table.config is not None:
        write(".config.yaml", table.config.dump())
        write(".manifest.json", json.dumps(table.manifest(), sort_keys=True, indent=1))
    return written
