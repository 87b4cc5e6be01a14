"""Run artifacts (CSV series, JSON summary, SVG charts) and preset sweeps."""

from __future__ import annotations

import csv
import json
import logging
import math
import shutil
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import ScenarioConfig, StepMetrics, run_simulation, summarize
from .scenarios import DESK_SCALE, _SCHEMA, dumps, preset, preset_name
from .svg import line_chart

log = logging.getLogger(__name__)

PER_CATEGORY = {"prices.csv": ("price", "prices"),
                "utilization.csv": ("utilization", "utilization"),
                "xi.csv": ("xi", "xi")}


@dataclass
class RunArtifacts:
    out_dir: Path
    prices: Path
    utilization: Path
    xi: Path
    solver: Path
    market: Path
    timing: Path
    summary: Path
    plots: list


def _num(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def config_echo(cfg: ScenarioConfig) -> dict:
    out = {}
    for line in dumps(cfg).splitlines():
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


class _Writer:
    """Tracks created files so a failed emission can be rolled back."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.fresh = not out_dir.exists()
        self.created = []

    def path(self, name) -> Path:
        p = self.out_dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.created.append(p)
        return p

    def csv(self, name, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return p

    def text(self, name, text) -> Path:
        p = self.path(name)
        p.write_text(text, encoding="utf-8", newline="\n")
        return p

    def rollback(self):
        if self.fresh:
            shutil.rmtree(self.out_dir, ignore_errors=True)
            return
        for p in self.created:
            p.unlink(missing_ok=True)


def emit_reports(metrics: list[StepMetrics], out_dir, cfg: ScenarioConfig | None = None) -> RunArtifacts:
    """Write the CSV series, ``summary.json``, ``timing.json`` and SVG charts.

    Everything except ``timing.json`` (wall-clock solver time) is a pure
    function of the metric series, so repeated seeded runs give identical
    bytes.
    """
    out = Path(out_dir)
    w = _Writer(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, (col, attr) in PER_CATEGORY.items():
            rows = ((m.step, i + 1, _num(v)) for m in metrics for i, v in enumerate(getattr(m, attr)))
            paths[name] = w.csv(name, ["step", "category", col], rows)
        solver = w.csv("solver.csv", ["step", "priced", "accepted", "norm", "queries", "stage"],
                       ((m.step, int(m.priced), int(m.accepted), _num(m.residual_norm), m.queries, m.stage)
                        for m in metrics))
        market = w.csv("market.csv", ["step", "spend", "active_consumers", "active_providers"]
                       + [f"trades_{i + 1}" for i in range(len(metrics[0].prices) if metrics else 0)],
                       ([m.step, _num(m.spend), m.active_consumers, m.active_providers] + [int(t) for t in m.trades]
                        for m in metrics))
        timing = w.text("timing.json", json.dumps({"solver_millis": [m.solver_millis for m in metrics]}) + "\n")

        summary = summarize(metrics)
        doc = {"seed": cfg.seed if cfg else None,
               "config": config_echo(cfg) if cfg else None,
               "summary": summary.to_dict()}
        summary_path = w.text("summary.json", json.dumps(_json_safe(doc), indent=2) + "\n")

        plots = []
        if metrics:
            steps = [m.step for m in metrics]
            n = len(metrics[0].prices)
            for name, attr, ylabel in (("prices.svg", "prices", "price"),
                                       ("utilization.svg", "utilization", "utilization")):
                series = {f"CPU_{i + 1}": (steps, [getattr(m, attr)[i] for m in metrics]) for i in range(n)}
                plots.append(w.text(f"plots/{name}", line_chart(series, f"{ylabel} per category", "step", ylabel)))
            spend = np.cumsum([m.spend for m in metrics])
            plots.append(w.text("plots/spend.svg", line_chart({"total": (steps, spend)},
                                                              "cumulative consumer spend", "step", "budget spent")))
            plots.append(w.text("plots/solver.svg", line_chart(
                {"queries": (steps, [m.queries for m in metrics])}, "excess demand queries per step", "step", "queries")))
    except BaseException as e:
        w.rollback()
        if isinstance(e, OSError):
            raise OSError(f"writing reports to {out}: {e}") from e
        raise
    return RunArtifacts(out, paths["prices.csv"], paths["utilization.csv"], paths["xi.csv"], solver, market,
                        timing, summary_path, plots)


def read_series(path) -> np.ndarray:
    """Read a per-category CSV back into a (steps, categories) array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    if not rows:
        return np.zeros((0, 0))
    n = max(int(r[1]) for r in rows)
    return np.array([float(r[2]) for r in rows]).reshape(-1, n)


def simulate(cfg: ScenarioConfig, out_dir=None, on_step=None):
    """Run one scenario and optionally write its artifacts."""
    metrics, summary = run_simulation(cfg, on_step=on_step)
    artifacts = emit_reports(metrics, out_dir, cfg) if out_dir is not None else None
    return metrics, summary, artifacts


def parse_presets(selection) -> list[str]:
    """``"1..6"``, ``"one-cat,three-cat"`` or an iterable of names/numbers."""
    if isinstance(selection, str):
        if ".." in selection:
            lo, hi = selection.split("..", 1)
            items = list(range(int(lo), int(hi) + 1))
        else:
            items = [s for s in selection.split(",") if s.strip()]
    else:
        items = list(selection)
    return [preset_name(i) for i in items]


def run_sweep(presets, seeds, out_dir, desk_scale: int = DESK_SCALE, total_steps: int = 150,
              write_runs: bool = True) -> list[dict]:
    """Run every preset under seeds ``0..seeds-1`` and aggregate solver cost.

    Writes ``sweep.csv`` (one row per preset) and charts of queries, runtime
    and cumulative spend against the number of categories. A failing run is
    logged and counted; the sweep carries on.
    """
    names = parse_presets(presets)
    if len(names) < 2:
        raise ValueError("≥ 2 presets required")
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    if not seed_list:
        raise ValueError("at least one seed is required")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows, spend_curves = [], {}
    for name in names:
        queries, millis, norms, spends, failures = [], [], [], [], 0
        for seed in seed_list:
            cfg = preset(name, desk_scale, seed=seed, total_steps=total_steps)
            try:
                run_dir = out / name / f"seed-{seed}" if write_runs else None
                metrics, summary, _ = simulate(cfg, run_dir)
            except Exception:
                log.exception("sweep run %s seed %d failed", name, seed)
                failures += 1
                continue
            queries.append(summary.mean_queries)
            millis.append(summary.mean_millis)
            norms.append(summary.residual_mean)
            spends.append(np.cumsum([m.spend for m in metrics]))
        ok = len(queries)
        rows.append({
            "categories": preset(name, desk_scale).n_categories,
            "preset": name,
            "runs": ok,
            "failures": failures,
            "mean_queries": float(np.nanmean(queries)) if ok else math.nan,
            "mean_millis": float(np.nanmean(millis)) if ok else math.nan,
            "mean_residual": float(np.nanmean(norms)) if ok else math.nan,
        })
        if spends:
            spend_curves[name] = np.mean(spends, axis=0)

    w = _Writer(out)
    cols = ["categories", "preset", "runs", "failures", "mean_queries", "mean_millis", "mean_residual"]
    w.csv("sweep.csv", cols, ([r[c] if isinstance(r[c], (int, str)) else _num(r[c]) for c in cols] for r in rows))
    cats = [r["categories"] for r in rows]
    w.text("plots/queries.svg", line_chart({"queries": (cats, [r["mean_queries"] for r in rows])},
                                           "excess demand queries per step", "CPU categories", "queries"))
    w.text("plots/runtime.svg", line_chart({"runtime": (cats, [r["mean_millis"] for r in rows])},
                                           "equilibrium search runtime per step", "CPU categories", "milliseconds"))
    if spend_curves:
        w.text("plots/spend.svg", line_chart({k: (np.arange(len(v)), v) for k, v in spend_curves.items()},
                                             "cumulative budget spent", "step", "budget spent"))
    return rows
