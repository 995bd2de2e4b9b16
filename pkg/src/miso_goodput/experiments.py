"""Experiment presets, config parsing and the batch runner behind the CLI.

Each preset writes ``<preset>.csv`` (fixed column order, LF endings) and a
``<preset>.meta.json`` sidecar holding the full spec, so any run can be
repeated exactly.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .beamform import maxmin_design
from .channel import ScenarioConfig, generate
from .exceptions import ConfigError, IllConditionedChannelError
from .goodput import (
    DEFAULT_ETA,
    analytic_outages,
    choose_a,
    evaluate_design_goodput,
    expected_goodput_exp_a,
    goodput,
    mc_goodput,
    mc_outages,
    rate_grid,
    sweep_rate,
)

log = logging.getLogger(__name__)

PRESETS = ("fig1", "fig2", "fig3", "table1", "custom")
MAX_REDRAWS = 10
DEFAULT_A_GRID = [0.5] + [float(a) for a in range(1, 51)]

TABLE1_METHODS = (
    "analytic_best_rate",
    "heuristic_best_a_per_set",
    "best_fixed_a",
    "a_equals_1",
    "a_estimated",
    "maxmin_naive",
)


@dataclass
class ExperimentSpec:
    preset: str = "custom"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    n_channel_sets: int = 100
    eta: float = DEFAULT_ETA
    degree: int = 6
    a_grid: list = field(default_factory=lambda: list(DEFAULT_A_GRID))
    locus_a: list = field(default_factory=lambda: [float(a) for a in range(1, 21)])
    a_search: list = field(default_factory=lambda: [0.0, 100.0])
    rate_points: int = 64
    rate_low: float = 0.1
    rate_high: float = 4.0
    mc_samples: int = 2000
    output_path: str = "results"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.scenario, dict):
            self.scenario = ScenarioConfig.from_dict(self.scenario)
        try:
            for name in ("a_grid", "locus_a", "a_search"):
                setattr(self, name, [float(a) for a in getattr(self, name)])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{name}': must be a list of numbers") from exc
        self.validate()

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"invalid value for '{name}': {why}")

        if self.preset not in PRESETS:
            bad("preset", f"must be one of {', '.join(PRESETS)}")
        if int(self.n_channel_sets) != self.n_channel_sets or self.n_channel_sets < 1:
            bad("n_channel_sets", "must be an integer >= 1")
        if not 0 <= self.eta <= 1:
            bad("eta", "must lie in [0, 1]")
        if int(self.degree) != self.degree or self.degree < 1:
            bad("degree", "must be an integer >= 1")
        if not self.a_grid or any(a < 0 for a in self.a_grid):
            bad("a_grid", "must be a nonempty list of values >= 0")
        if any(a < 0 for a in self.locus_a):
            bad("locus_a", "values must be >= 0")
        if len(self.a_search) != 2 or not 0 <= self.a_search[0] < self.a_search[1]:
            bad("a_search", "must be [low, high] with 0 <= low < high")
        if self.rate_points < 2 or not 0 < self.rate_low < self.rate_high:
            bad("rate_points/rate_low/rate_high", "need >= 2 points and 0 < low < high")
        if self.mc_samples != 0 and self.mc_samples < 100:
            bad("mc_samples", "must be 0 (disabled) or >= 100")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scenario"] = self.scenario.to_dict()
        return out

    def scenario_for_preset(self) -> ScenarioConfig:
        if self.preset == "fig1":
            return self.scenario.replace(multicell=False)
        if self.preset in ("fig2", "fig3"):
            return self.scenario.replace(multicell=True)
        return self.scenario


_SPEC_KEYS = {f.name for f in fields(ExperimentSpec)}


def spec_from_dict(data) -> ExperimentSpec:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    unknown = sorted(set(data) - _SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    data = dict(data)
    if "scenario" in data:
        if not isinstance(data["scenario"], dict):
            raise ConfigError("invalid value for 'scenario': must be a mapping")
        data["scenario"] = ScenarioConfig.from_dict(data["scenario"])
    try:
        return ExperimentSpec(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ExperimentSpec:
    """Strict YAML parse; omitted keys take the default values."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"malformed config{where}: {exc.problem}") from exc
    return spec_from_dict(data)


def dump_config(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False)


def draw_scenario(config: ScenarioConfig, seed: int, index: int):
    """Scenario ``index`` of a batch, redrawn on ill-conditioned estimates.

    Returns ``(scenario, naive_design, redraws)``.
    """
    for attempt in range(MAX_REDRAWS + 1):
        sc = generate(config, np.random.SeedSequence([seed, index, attempt]))
        try:
            naive = maxmin_design(sc.h_est, sc.noise, sc.err_power, 0.0, sc.total_power)
        except IllConditionedChannelError:
            continue
        return sc, naive, attempt
    raise IllConditionedChannelError(f"scenario {index}: {MAX_REDRAWS} redraws were all ill-conditioned")


def _rate_grid(spec, gamma):
    return rate_grid(gamma, spec.rate_points, spec.rate_low, spec.rate_high)


def _table1_job(args):
    spec, config, index = args
    sc, naive, redraws = draw_scenario(config, spec.seed, index)
    claimed = naive.rate
    delivered = goodput(claimed, analytic_outages(sc, naive, naive.gamma, spec.degree), spec.eta)
    sweep = sweep_rate(sc, naive, _rate_grid(spec, naive.gamma), spec.eta, spec.degree)
    best_rate = max(p.goodput_per_user for p in sweep if not p.failed)
    per_a = [evaluate_design_goodput(sc, a, spec.eta, spec.degree).goodput_per_user for a in spec.a_grid]
    a_one = evaluate_design_goodput(sc, 1.0, spec.eta, spec.degree).goodput_per_user
    a_est = choose_a(sc, spec.eta, tuple(spec.a_search))[0]
    est = evaluate_design_goodput(sc, a_est, spec.eta, spec.degree).goodput_per_user
    return {
        "index": index,
        "redraws": redraws,
        "claimed": claimed,
        "delivered": delivered,
        "analytic_best_rate": best_rate,
        "per_a": per_a,
        "a_equals_1": a_one,
        "a_estimated": est,
        "a_star_estimated": a_est,
    }


def _fig3_job(args):
    spec, config, index = args
    sc, _, redraws = draw_scenario(config, spec.seed, index)
    rows = []
    for a in spec.a_grid:
        p = evaluate_design_goodput(sc, a, spec.eta, spec.degree)
        rows.append((p.rate, p.goodput_per_user, p.info["goodput_exp_a"]))
    return {"index": index, "redraws": redraws, "rows": rows}


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, items))
    else:
        results = [fn(item) for item in items]
    return sorted(results, key=lambda r: r["index"])


def table1_results(spec: ExperimentSpec, jobs=1):
    config = spec.scenario_for_preset()
    per_set = _map(_table1_job, [(spec, config, i) for i in range(spec.n_channel_sets)], jobs)
    per_a = np.array([r["per_a"] for r in per_set])
    mean_a = per_a.mean(axis=0)
    ibest = int(np.argmax(mean_a))

    def col(key):
        return float(np.mean([r[key] for r in per_set]))

    summary = {
        "analytic_best_rate": (col("analytic_best_rate"), None),
        "heuristic_best_a_per_set": (float(per_a.max(axis=1).mean()), None),
        "best_fixed_a": (float(mean_a[ibest]), spec.a_grid[ibest]),
        "a_equals_1": (col("a_equals_1"), 1.0),
        "a_estimated": (col("a_estimated"), col("a_star_estimated")),
        "maxmin_naive": (col("delivered"), 0.0),
    }
    return summary, col("claimed"), per_set, mean_a


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _run_table1(spec, out, jobs):
    summary, claimed, per_set, _ = table1_results(spec, jobs)
    redraws = sum(r["redraws"] for r in per_set)
    header = ["method", "goodput_mean", "claimed_rate_mean", "a", "n_sets", "redraws"]
    rows = []
    for m in TABLE1_METHODS:
        value, a = summary[m]
        rows.append([m, value, claimed if m == "maxmin_naive" else None, a, spec.n_channel_sets, redraws])
    write_csv(out, header, rows)
    return {"redraws": redraws}


def _run_fig3(spec, out, jobs):
    config = spec.scenario_for_preset()
    per_set = _map(_fig3_job, [(spec, config, i) for i in range(spec.n_channel_sets)], jobs)
    data = np.array([r["rows"] for r in per_set])  # sets x a x (rate, analytic, exp_a)
    mean = data.mean(axis=0)
    header = ["a", "rate_mean", "goodput_analytic_mean", "goodput_exp_a_mean", "n_sets"]
    rows = [[a, *mean[i], spec.n_channel_sets] for i, a in enumerate(spec.a_grid)]
    write_csv(out, header, rows)
    return {"redraws": sum(r["redraws"] for r in per_set)}


def _run_curve(spec, out, jobs):
    """Single-scenario goodput-vs-rate curve plus the heuristic locus."""
    config = spec.scenario_for_preset()
    sc, naive, redraws = draw_scenario(config, spec.seed, 0)
    K = sc.n_users
    grid = _rate_grid(spec, naive.gamma)
    analytic = sweep_rate(sc, naive, grid, spec.eta, spec.degree)
    use_mc = spec.mc_samples > 0
    mc = mc_goodput(sc, naive, grid, spec.eta, spec.mc_samples, spec.seed) if use_mc else None

    header = (
        ["kind", "a", "rate", "gamma", "goodput_analytic", "goodput_mc", "goodput_exp_a"]
        + [f"outage_analytic_{k}" for k in range(K)]
        + [f"outage_mc_{k}" for k in range(K)]
    )
    rows = []
    for i, p in enumerate(analytic):
        q = mc[i] if use_mc else None
        rows.append(
            ["rate_sweep", 0.0, p.rate, p.gamma, p.goodput_per_user, q.goodput_per_user if q else None, None]
            + list(p.outage)
            + (list(q.outage) if q else [None] * K)
        )
    rows.append(
        ["naive_claimed", 0.0, naive.rate, naive.gamma,
         goodput(naive.rate, analytic_outages(sc, naive, naive.gamma, spec.degree), spec.eta), None, None]
        + [None] * (2 * K)
    )
    for j, a in enumerate(spec.locus_a):
        design = maxmin_design(sc.h_est, sc.noise, sc.err_power, a, sc.total_power)
        delta = analytic_outages(sc, design, design.gamma, spec.degree)
        if use_mc:
            dmc = mc_outages(sc, design, design.gamma, spec.mc_samples, spec.seed, 0, len(grid) + j)
        rows.append(
            ["heuristic", a, design.rate, design.gamma, goodput(design.rate, delta, spec.eta),
             goodput(design.rate, dmc, spec.eta) if use_mc else None,
             expected_goodput_exp_a(design.rate, a, spec.eta)]
            + list(delta)
            + (list(dmc) if use_mc else [None] * K)
        )
    write_csv(out, header, rows)
    return {"redraws": redraws}


RUNNERS = {"fig1": _run_curve, "fig2": _run_curve, "fig3": _run_fig3, "table1": _run_table1, "custom": _run_table1}


def run(spec: ExperimentSpec, out_dir=None, jobs=1) -> Path:
    """Execute ``spec.preset``; returns the CSV path (metadata sits next to it)."""
    out_dir = Path(out_dir or spec.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{spec.preset}.csv"
    extra = RUNNERS[spec.preset](spec, csv_path, jobs)
    meta = {"spec": spec.to_dict(), "seed": spec.seed, "csv": csv_path.name, **extra}
    (out_dir / f"{spec.preset}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", csv_path)
    return csv_path
