"""Command-line front door: dataset ingestion, discovery and effect
workflows, and benchmark sweeps.

Every output artifact embeds the fully resolved configuration and the
master seed, and feeding that echo back through ``--config`` (or
``--scenario`` for benches) reproduces the artifact bit for bit.
"""

import argparse
import csv
import json
import math
import os
import secrets
import sys
from dataclasses import dataclass, fields as dataclass_fields, replace
from typing import Iterable, Optional

import numpy as np

from .discovery import ResampleConfig, resampled_pc_runs
from .exceptions import (
    ConfigError,
    DataError,
    GraphFormatError,
    NoValidGraphsError,
)
from .graphs import BackgroundKnowledge, TierOrder, write_dot, write_edge_list
from .inference import (
    ADJUST_PARENTS,
    ADJUST_TIER_BLOCK,
    c_star_heuristic,
    effect_union_report,
    screen,
)
from .simulation import (
    ScenarioConfig,
    read_bench_csv,
    run_scenario,
    sweep_c_star,
    write_bench_csv,
)
from .stats import DataMatrix, correlation_from_data

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NO_VALID_GRAPHS = 4

JOBS_ENV_VAR = "DISCOVERCI_JOBS"

PAPER_C_STAR_GRID = (0.006, 0.007, 0.008, 0.009, 0.01, 0.02, 0.03, 0.04)
DENSE_TIERS = (1, 1, 1, 2, 2, 2, 2, 2, 3, 3)

_PLOT_METRICS = (
    "coverage",
    "avg_length_union",
    "avg_length_hull",
    "kept_pct",
    "no_interval_pct",
)


# ---------------------------------------------------------------------------
# dataset CSV
# ---------------------------------------------------------------------------


def read_data_csv(source) -> DataMatrix:
    """Read a numeric CSV with a header row of variable names.

    ``source`` is a path or an open text file. Malformed cells raise a
    DataError naming the row (1-based, header is row 1) and column.
    """
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        try:
            with open(source, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as err:
            raise DataError(f"cannot read {source}: {err}") from None
    if not rows:
        raise DataError("empty input: no header row")
    names = [c.strip() for c in rows[0]]
    if len(names) < 2:
        raise DataError("need at least 2 columns")
    width = len(names)
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise DataError(f"row {r}: expected {width} cells, got {len(row)}")
        parsed = []
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"row {r}, column {names[c]!r}: cannot parse {cell.strip()!r}"
                    " as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"row {r}, column {names[c]!r}: non-finite value")
            parsed.append(v)
        values.append(parsed)
    if len(values) < 2:
        raise DataError("need at least 2 data rows")
    try:
        return DataMatrix(np.array(values), names)
    except ValueError as err:
        raise DataError(str(err)) from None


def write_data_csv(x: DataMatrix, fh) -> None:
    """Write a DataMatrix as CSV; 17 significant digits round-trip exactly."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(x.names)
    for row in x.values:
        w.writerow([format(v, ".17g") for v in row])


# ---------------------------------------------------------------------------
# name and spec parsing
# ---------------------------------------------------------------------------


def resolve_column(token: str, names) -> int:
    t = token.strip()
    if t in names:
        return list(names).index(t)
    if t.lstrip("+-").isdigit():
        i = int(t)
        if 0 <= i < len(names):
            return i
    raise ConfigError(f"unknown variable {t!r}; columns are: {', '.join(names)}")


def parse_tier_spec(spec: str, names) -> TierOrder:
    """Parse e.g. ``"A,B:1;C:2"``; every column must appear exactly once."""
    assign: dict[int, int] = {}
    for group in spec.split(";"):
        group = group.strip()
        if not group:
            continue
        head, sep, label = group.rpartition(":")
        if not sep:
            raise ConfigError(f"tier group {group!r} is missing ':<tier>'")
        try:
            tier = int(label)
        except ValueError:
            raise ConfigError(f"tier label {label!r} is not an integer") from None
        if tier < 1:
            raise ConfigError("tier labels are positive integers")
        for token in head.split(","):
            idx = resolve_column(token, names)
            if idx in assign:
                raise ConfigError(f"column {names[idx]!r} assigned to two tiers")
            assign[idx] = tier
    missing = [names[i] for i in range(len(names)) if i not in assign]
    if missing:
        raise ConfigError("tier spec misses columns: " + ", ".join(missing))
    return TierOrder(tuple(assign[i] for i in range(len(names))))


def format_tier_spec(tiers: TierOrder, names) -> str:
    """Canonical inverse of parse_tier_spec (tiers ascending, column order)."""
    groups: dict[int, list[str]] = {}
    for i, t in enumerate(tiers.tiers):
        groups.setdefault(t, []).append(names[i])
    return ";".join(f"{','.join(groups[t])}:{t}" for t in sorted(groups))


def parse_forbidden_edges(spec: str, names) -> list[tuple[int, int]]:
    out = []
    for item in spec.split(";"):
        item = item.strip()
        if not item:
            continue
        a, sep, b = item.partition("->")
        if not sep:
            raise ConfigError(f"forbidden edge {item!r} must use the form 'X->Y'")
        i, j = resolve_column(a, names), resolve_column(b, names)
        if i == j:
            raise ConfigError(f"forbidden edge {item!r} needs two distinct variables")
        out.append((i, j))
    return out


def parse_required_adjacencies(spec: str, names) -> list[tuple[int, int]]:
    """Parse ``"X-Y;Z-W"``; the leftmost '-' split where both sides resolve wins."""
    out = []
    for item in spec.split(";"):
        item = item.strip()
        if not item:
            continue
        pair = None
        pos = item.find("-")
        while pos != -1:
            a, b = item[:pos], item[pos + 1:]
            try:
                pair = (resolve_column(a, names), resolve_column(b, names))
                break
            except ConfigError:
                pos = item.find("-", pos + 1)
        if pair is None:
            raise ConfigError(
                f"required adjacency {item!r} must be 'X-Y' with known variables"
            )
        if pair[0] == pair[1]:
            raise ConfigError(f"required adjacency {item!r} needs two distinct variables")
        out.append(pair)
    return out


# ---------------------------------------------------------------------------
# run configuration (discover and effect)
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Resolved knobs shared by the discover and effect commands."""

    data: Optional[str] = None
    tiers: Optional[str] = None
    forbidden: Optional[str] = None
    required: Optional[str] = None
    exposure: Optional[str] = None
    outcome: Optional[str] = None
    gamma: float = 0.05
    nu: float = 0.025
    m: int = 50
    c_star: Optional[float] = None
    c_star_grid: Optional[tuple] = None
    max_adj: Optional[int] = None
    max_cond_size: Optional[int] = None
    truncation: Optional[float] = None
    half_factor: bool = True
    adjust_policy: str = ADJUST_PARENTS
    both_policies: bool = False
    validity: str = "strict"
    validity_scope: Optional[str] = None
    orient_mode: str = "standard"
    seed: Optional[int] = None
    format: str = "edgelist"


_RUN_KEYS = tuple(f.name for f in dataclass_fields(RunConfig))


def _load_config_file(path: str, allowed: Iterable[str]) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    allowed = set(allowed)
    # accept a previously emitted artifact directly: its resolved config
    # lives under the "config" key
    if not set(raw) <= allowed and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def merge_run_config(args) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data.update(_load_config_file(args.config, _RUN_KEYS))
    for key in _RUN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    grid = data.get("c_star_grid")
    if grid is not None:
        if isinstance(grid, str):
            grid = [p for p in grid.split(",") if p.strip()]
        try:
            data["c_star_grid"] = tuple(float(p) for p in grid)
        except (TypeError, ValueError):
            raise ConfigError(f"bad c_star_grid: {grid!r}") from None
        if not data["c_star_grid"]:
            raise ConfigError("c_star_grid must not be empty")
    try:
        return RunConfig(**data)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def echo_run_config(cfg: RunConfig) -> dict:
    d = {name: getattr(cfg, name) for name in _RUN_KEYS}
    if cfg.c_star_grid is not None:
        d["c_star_grid"] = list(cfg.c_star_grid)
    return d


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    drawn = secrets.randbits(63)
    print(f"seed: {drawn}", file=sys.stderr)
    return drawn


def _background(cfg: RunConfig, names) -> Optional[BackgroundKnowledge]:
    forb = parse_forbidden_edges(cfg.forbidden, names) if cfg.forbidden else []
    req = parse_required_adjacencies(cfg.required, names) if cfg.required else []
    scope = None
    if cfg.validity_scope:
        scope = frozenset(
            resolve_column(t, names) for t in cfg.validity_scope.split(",") if t.strip()
        )
        if len(scope) < 2:
            raise ConfigError("validity scope needs at least 2 variables")
    if not forb and not req and scope is None:
        return None
    return BackgroundKnowledge(
        forbidden_edges=forb, required_adjacencies=req, validity_scope=scope
    )


def _resample_config(cfg: RunConfig, c_star: float) -> ResampleConfig:
    try:
        return ResampleConfig(
            n_resamples=cfg.m,
            c_star=c_star,
            nu=cfg.nu,
            max_adj=cfg.max_adj,
            max_cond_size=cfg.max_cond_size,
            truncation=cfg.truncation,
            master_seed=cfg.seed,
            half_factor=cfg.half_factor,
            orient_mode=cfg.orient_mode,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def emit_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------


def cmd_discover(args) -> int:
    cfg = merge_run_config(args)
    if not cfg.data:
        raise ConfigError("discover needs --data")
    if cfg.c_star is None:
        raise ConfigError("discover needs --c-star")
    if cfg.format not in ("edgelist", "dot"):
        raise ConfigError(f"unknown graph format {cfg.format!r}")
    x = read_data_csv(cfg.data)
    names = x.names
    tiers = parse_tier_spec(cfg.tiers, names) if cfg.tiers else None
    bk = _background(cfg, names)
    cfg = replace(
        cfg,
        seed=resolve_seed(cfg.seed),
        max_adj=cfg.max_adj if cfg.max_adj is not None else x.d - 1,
        tiers=format_tier_spec(tiers, names) if tiers is not None else None,
    )
    batch = resampled_pc_runs(correlation_from_data(x), _resample_config(cfg, cfg.c_star), tiers=tiers, bk=bk)
    kept = screen(batch, level=cfg.validity, bk=bk, tiers=tiers)
    kept_set = set(kept)

    os.makedirs(args.out, exist_ok=True)
    writer = write_dot if cfg.format == "dot" else write_edge_list
    for i, g in enumerate(batch.graphs()):
        path = os.path.join(args.out, f"graph_{i:03d}.{cfg.format}")
        with open(path, "w") as fh:
            fh.write(writer(g, names))
    payload = {
        "config": echo_run_config(cfg),
        "columns": list(names),
        "threshold": batch.threshold,
        "shrinkage": batch.shrinkage,
        "test_bound": batch.test_bound,
        "valid": [i in kept_set for i in range(len(batch))],
        "kept_indices": list(kept),
        "batch_diagnostics": dict(batch.diagnostics),
        "runs": [
            {
                "tests_performed": r.diagnostics["tests_performed"],
                "cannot_test": r.diagnostics["cannot_test"],
                "levels": r.diagnostics["levels"],
                "flags": list(r.diagnostics["flags"]),
            }
            for r in batch.results
        ],
    }
    emit_json(payload, os.path.join(args.out, "diagnostics.json"))
    print(f"wrote {len(batch)} graphs to {args.out}; kept {len(kept)} of {len(batch)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# effect
# ---------------------------------------------------------------------------


def cmd_effect(args) -> int:
    cfg = merge_run_config(args)
    if not cfg.data:
        raise ConfigError("effect needs --data")
    if not cfg.exposure or not cfg.outcome:
        raise ConfigError("effect needs --exposure and --outcome")
    if (cfg.c_star is None) == (cfg.c_star_grid is None):
        raise ConfigError("give exactly one of --c-star and --c-star-grid")
    if cfg.adjust_policy not in (ADJUST_PARENTS, ADJUST_TIER_BLOCK):
        raise ConfigError(f"unknown adjust policy {cfg.adjust_policy!r}")
    if not 0.0 < cfg.nu < cfg.gamma < 1.0:
        raise ConfigError("need 0 < nu < gamma < 1")

    x = read_data_csv(cfg.data)
    names = x.names
    tiers = parse_tier_spec(cfg.tiers, names) if cfg.tiers else None
    bk = _background(cfg, names)
    exposure = resolve_column(cfg.exposure, names)
    outcome = resolve_column(cfg.outcome, names)
    if exposure == outcome:
        raise ConfigError("exposure and outcome must differ")
    if tiers is not None and tiers.tiers[exposure] > tiers.tiers[outcome]:
        raise ConfigError("exposure must not sit in a later tier than outcome")
    cfg = replace(
        cfg,
        seed=resolve_seed(cfg.seed),
        max_adj=cfg.max_adj if cfg.max_adj is not None else x.d - 1,
        tiers=format_tier_spec(tiers, names) if tiers is not None else None,
        exposure=names[exposure],
        outcome=names[outcome],
    )
    stats = correlation_from_data(x)

    heuristic_echo = None
    if cfg.c_star_grid is not None:
        heur = c_star_heuristic(
            stats,
            cfg.c_star_grid,
            _resample_config(cfg, cfg.c_star_grid[0]),
            tiers=tiers,
            bk=bk,
            validity_level=cfg.validity,
        )
        heuristic_echo = {
            "table": [[c, frac] for c, frac in heur.table],
            "chosen": heur.chosen,
        }
        if heur.chosen is None:
            emit_json(
                {
                    "config": echo_run_config(cfg),
                    "no_valid_graphs": True,
                    "kept_table": heuristic_echo["table"],
                },
                args.out,
            )
            return EXIT_NO_VALID_GRAPHS
        batch = heur.chosen_batch
    else:
        batch = resampled_pc_runs(stats, _resample_config(cfg, cfg.c_star), tiers=tiers, bk=bk)

    policies = (
        (ADJUST_PARENTS, ADJUST_TIER_BLOCK) if cfg.both_policies else (cfg.adjust_policy,)
    )
    reports = {}
    try:
        for policy in policies:
            rep = effect_union_report(
                x,
                batch,
                exposure,
                outcome,
                cfg.gamma,
                tiers=tiers,
                bk=bk,
                validity_level=cfg.validity,
                adjust_policy=policy,
            )
            reports[policy] = rep.to_json_dict()
    except NoValidGraphsError as err:
        payload = {
            "config": echo_run_config(cfg),
            "no_valid_graphs": True,
            "kept_table": [[c, frac] for c, frac in (err.kept_table or ())],
        }
        if heuristic_echo is not None:
            payload["heuristic"] = heuristic_echo
        emit_json(payload, args.out)
        return EXIT_NO_VALID_GRAPHS

    payload = {
        "config": echo_run_config(cfg),
        "exposure": names[exposure],
        "outcome": names[outcome],
        "alpha1": cfg.gamma - cfg.nu,
        "threshold": batch.threshold,
        "shrinkage": batch.shrinkage,
        "reports": reports,
    }
    if heuristic_echo is not None:
        payload["heuristic"] = heuristic_echo
    emit_json(payload, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "scenario",
    "d",
    "expected_neighbors",
    "n",
    "M",
    "n_resamples",
    "nu",
    "gamma",
    "max_adj",
    "exposure",
    "outcome",
    "replicates",
    "seed",
    "master_seed",
    "c_star",
    "c_star_grid",
    "tiers",
    "forbidden",
    "required",
    "half_factor",
    "max_cond_size",
    "truncation",
    "adjust_policy",
    "naive_alphas",
    "methods",
}


def _scenario_from_dict(raw: dict) -> ScenarioConfig:
    unknown = sorted(set(raw) - _SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    data = dict(raw)
    if "M" in data:
        data["n_resamples"] = data.pop("M")
    if "seed" in data:
        data["master_seed"] = data.pop("seed")
    if data.get("tiers") is not None:
        try:
            data["tiers"] = TierOrder(tuple(int(t) for t in data["tiers"]))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad tiers: {err}") from None
    forb = [tuple(p) for p in data.pop("forbidden", [])]
    req = [tuple(p) for p in data.pop("required", [])]
    if forb or req:
        data["bk"] = BackgroundKnowledge(
            forbidden_edges=forb, required_adjacencies=req
        )
    for key in ("c_star_grid", "naive_alphas", "methods"):
        if data.get(key) is not None:
            data[key] = tuple(data[key])
    try:
        return ScenarioConfig(**data)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def _scenario_echo(cfg: ScenarioConfig) -> dict:
    return {
        "scenario": cfg.scenario,
        "d": cfg.d,
        "expected_neighbors": cfg.expected_neighbors,
        "n": cfg.n,
        "M": cfg.n_resamples,
        "nu": cfg.nu,
        "gamma": cfg.gamma,
        "max_adj": cfg.max_adj,
        "exposure": cfg.exposure,
        "outcome": cfg.outcome,
        "replicates": cfg.replicates,
        "seed": cfg.master_seed,
        "c_star": cfg.c_star,
        "c_star_grid": list(cfg.c_star_grid) if cfg.c_star_grid else None,
        "tiers": list(cfg.tiers.tiers) if cfg.tiers else None,
        "forbidden": sorted(list(p) for p in cfg.bk.forbidden_edges) if cfg.bk else [],
        "required": sorted(list(p) for p in cfg.bk.required_adjacencies) if cfg.bk else [],
        "half_factor": cfg.half_factor,
        "max_cond_size": cfg.max_cond_size,
        "truncation": cfg.truncation,
        "adjust_policy": cfg.adjust_policy,
        "naive_alphas": list(cfg.naive_alphas),
        "methods": list(cfg.methods),
    }


def dense_scenario(seed: int, replicates: int, n_resamples: int = 50) -> ScenarioConfig:
    """The benchmark's dense default: 10 nodes, 7 expected neighbors."""
    return ScenarioConfig(
        scenario="dense",
        d=10,
        expected_neighbors=7.0,
        n=500,
        n_resamples=n_resamples,
        nu=0.025,
        gamma=0.05,
        max_adj=7,
        exposure=5,
        outcome=9,
        replicates=replicates,
        master_seed=seed,
        c_star=0.01,
        tiers=TierOrder(DENSE_TIERS),
        half_factor=False,
    )


def _jobs_from(args) -> int:
    if args.jobs is not None:
        jobs = args.jobs
    else:
        raw = os.environ.get(JOBS_ENV_VAR, "1")
        try:
            jobs = int(raw)
        except ValueError:
            raise ConfigError(f"{JOBS_ENV_VAR}={raw!r} is not an integer") from None
    if jobs < 1:
        raise ConfigError("jobs must be positive")
    return jobs


def cmd_bench(args) -> int:
    if (args.scenario is None) == (args.paper_fig is None):
        raise ConfigError("give exactly one of --scenario and --paper-fig")
    jobs = _jobs_from(args)
    seed = resolve_seed(args.seed) if args.paper_fig is not None else None

    if args.paper_fig == 1:
        replicates = args.replicates or 500
        base = dense_scenario(seed, replicates, n_resamples=50)
        sweep = {"c_star": list(PAPER_C_STAR_GRID)}
        records = sweep_c_star(base, PAPER_C_STAR_GRID, jobs=jobs)
    elif args.paper_fig == 3:
        replicates = args.replicates or 500
        base = dense_scenario(seed, replicates, n_resamples=50)
        sweep = {"M": [10, 50, 100], "n": [100, 1000]}
        records = []
        for m in sweep["M"]:
            records.extend(run_scenario(replace(base, n_resamples=m), jobs=jobs))
        for n in sweep["n"]:
            records.extend(run_scenario(replace(base, n=n), jobs=jobs))
    else:
        raw = _load_config_file(args.scenario, _SCENARIO_KEYS | {"sweep", "jobs"})
        sweep = raw.pop("sweep", None) or {}
        raw.pop("jobs", None)
        unknown = sorted(set(sweep) - {"c_star", "M", "n"})
        if unknown:
            raise ConfigError(f"unknown sweep axes: {', '.join(unknown)}")
        if args.replicates is not None:
            raw["replicates"] = args.replicates
        if args.seed is not None:
            raw["seed"] = args.seed
        if raw.get("seed") is None and raw.get("master_seed") is None:
            raw["seed"] = resolve_seed(None)
        base = _scenario_from_dict(raw)
        c_grid = [float(c) for c in sweep.get("c_star", [])]
        records = []
        for m in [int(v) for v in sweep.get("M", [])] or [base.n_resamples]:
            for n in [int(v) for v in sweep.get("n", [])] or [base.n]:
                point = replace(base, n_resamples=m, n=n)
                if c_grid:
                    records.extend(sweep_c_star(point, c_grid, jobs=jobs))
                else:
                    records.extend(run_scenario(point, jobs=jobs))

    with open(args.out, "w", newline="") as fh:
        write_bench_csv(records, fh)
    emit_json(
        {"config": {**_scenario_echo(base), "sweep": sweep}},
        args.out + ".config.json",
    )
    if args.svg:
        _write_svg_panels(records, args.svg, x_choice="auto")
    print(f"wrote {len(records)} benchmark rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot-data
# ---------------------------------------------------------------------------


def _record_axis_value(rec, axis: str):
    if axis == "c_star":
        return rec.c_star
    if axis == "M":
        return rec.n_resamples
    return rec.n


def _detect_axis(rows) -> str:
    for axis in ("c_star", "M", "n"):
        vals = {_record_axis_value(r, axis) for r in rows}
        vals.discard(None)
        if len(vals) > 1:
            return axis
    return "c_star"


def build_panels(records, x_choice: str = "auto") -> list:
    """Group benchmark rows into per-metric plot series.

    One panel per (scenario, metric); within a panel one series per
    method. Methods swept along the x axis contribute sorted points;
    methods with a single x-less row (the baselines of a sweep) carry a
    flat reference value instead.
    """
    panels = []
    scenarios = []
    for r in records:
        if r.scenario not in scenarios:
            scenarios.append(r.scenario)
    for scenario in scenarios:
        rows = [r for r in records if r.scenario == scenario]
        axis = _detect_axis(rows) if x_choice == "auto" else x_choice
        methods = []
        for r in rows:
            if r.method not in methods:
                methods.append(r.method)
        for metric in _PLOT_METRICS:
            series = []
            for method in methods:
                mrows = [r for r in rows if r.method == method]
                pts = []
                for r in mrows:
                    xv = _record_axis_value(r, axis)
                    yv = getattr(r, metric)
                    if xv is not None and not math.isnan(yv):
                        pts.append([xv, yv])
                pts.sort()
                if pts:
                    series.append({"method": method, "points": pts})
                else:
                    flat = [getattr(r, metric) for r in mrows]
                    flat = [v for v in flat if not math.isnan(v)]
                    if flat:
                        series.append({"method": method, "baseline": flat[0]})
            if series:
                panels.append(
                    {"scenario": scenario, "metric": metric, "x": axis, "series": series}
                )
    return panels


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def render_panel_svg(panel: dict) -> str:
    """A minimal self-contained line chart for one panel."""
    width, height = 640, 420
    left, right, top, bottom = 64, 20, 34, 46
    xs, ys = [], []
    for s in panel["series"]:
        for x, y in s.get("points", ()):
            xs.append(x)
            ys.append(y)
        if "baseline" in s:
            ys.append(s["baseline"])
    if not xs:
        xs = [0.0, 1.0]
    if not ys:
        ys = [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * (width - left - right)

    def py(y):
        return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)

    def num(v):
        return format(v, ".6g")

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="18" text-anchor="middle" font-size="14">'
        f'{panel["scenario"]}: {panel["metric"]} vs {panel["x"]}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}"'
        f' y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}"'
        f' stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(
            f'<text x="{num(px(xv))}" y="{height - bottom + 16}" text-anchor="middle">'
            f"{num(xv)}</text>"
        )
        out.append(
            f'<text x="{left - 6}" y="{num(py(yv) + 4)}" text-anchor="end">'
            f"{num(yv)}</text>"
        )
    out.append(
        f'<text x="{(left + width - right) // 2}" y="{height - 10}"'
        f' text-anchor="middle">{panel["x"]}</text>'
    )
    for k, s in enumerate(panel["series"]):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        if "points" in s:
            coords = " ".join(f"{num(px(x))},{num(py(y))}" for x, y in s["points"])
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}"'
                f' stroke-width="1.5"/>'
            )
            for x, y in s["points"]:
                out.append(
                    f'<circle cx="{num(px(x))}" cy="{num(py(y))}" r="2.5"'
                    f' fill="{color}"/>'
                )
        else:
            yy = num(py(s["baseline"]))
            out.append(
                f'<line x1="{left}" y1="{yy}" x2="{width - right}" y2="{yy}"'
                f' stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4"/>'
            )
        out.append(
            f'<text x="{width - right - 6}" y="{top + 14 + 16 * k}" text-anchor="end"'
            f' fill="{color}">{s["method"]}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _panel_filename(panel: dict) -> str:
    raw = f'{panel["scenario"]}_{panel["metric"]}'
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in raw)
    return safe + ".svg"


def _write_svg_panels(records, out_dir: str, x_choice: str) -> list:
    panels = build_panels(records, x_choice)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for panel in panels:
        path = os.path.join(out_dir, _panel_filename(panel))
        with open(path, "w") as fh:
            fh.write(render_panel_svg(panel))
        written.append(path)
    return written


def cmd_plot_data(args) -> int:
    try:
        with open(args.bench, newline="") as fh:
            records = read_bench_csv(fh)
    except OSError as err:
        raise DataError(f"cannot read {args.bench}: {err}") from None
    except ValueError as err:
        raise DataError(str(err)) from None
    panels = build_panels(records, args.x)
    payload = {"config": {"bench": args.bench, "x": args.x}, "panels": panels}
    emit_json(payload, args.out)
    if args.svg:
        _write_svg_panels(records, args.svg, args.x)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------


def _add_run_flags(sp, with_effect: bool) -> None:
    sp.add_argument("--config", help="JSON config (or a previously emitted report); flags override it")
    sp.add_argument("--data", help="input CSV with a header row of variable names")
    sp.add_argument("--tiers", help='temporal tiers, e.g. "A,B:1;C:2"; every column appears once')
    sp.add_argument("--forbidden", help='directed edges to forbid, e.g. "X->Y;Z->W"')
    sp.add_argument("--required", help='adjacencies every kept graph must contain, e.g. "X-Y"')
    sp.add_argument("--m", type=int, help="number of perturbed search runs (default 50)")
    sp.add_argument("--c-star", dest="c_star", type=float, help="scale of the shrinking rejection threshold")
    sp.add_argument("--nu", type=float, help="coverage budget spent on the search step (default 0.025)")
    sp.add_argument("--max-adj", dest="max_adj", type=int, help="assumed maximum node degree; sizes the test budget (default: columns - 1)")
    sp.add_argument("--max-cond-size", dest="max_cond_size", type=int, help="cap on conditioning set size (default: same as --max-adj)")
    sp.add_argument("--truncation", type=float, help="bound each perturbation to this many standard deviations")
    sp.add_argument("--half-factor", dest="half_factor", action=argparse.BooleanOptionalAction, default=None, help="use the finite-sample factor (n - |S| - 3) in the z statistic")
    sp.add_argument("--orient-mode", dest="orient_mode", choices=("standard", "majority"), help="collider orientation rule")
    sp.add_argument("--validity", choices=("strict", "basic"), help="screening level for kept graphs")
    sp.add_argument("--validity-scope", dest="validity_scope", help="comma-separated columns; validity is judged on this induced subgraph")
    sp.add_argument("--seed", type=int, help="master seed (drawn from system entropy and printed when omitted)")
    if with_effect:
        sp.add_argument("--exposure", help="exposure variable name")
        sp.add_argument("--outcome", help="outcome variable name")
        sp.add_argument("--gamma", type=float, help="total miscoverage level of the union interval (default 0.05)")
        sp.add_argument("--c-star-grid", dest="c_star_grid", help="comma-separated scales; picks the one keeping the fewest graphs")
        sp.add_argument("--adjust-policy", dest="adjust_policy", choices=(ADJUST_PARENTS, ADJUST_TIER_BLOCK), help="covariate adjustment rule")
        sp.add_argument("--both-policies", dest="both_policies", action="store_true", default=None, help="report both adjustment policies")
    else:
        sp.add_argument("--format", choices=("edgelist", "dot"), help="graph file format (default edgelist)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="discoverci",
        description="Union confidence intervals for causal effects after graph discovery.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="run the perturbed tiered search and write every graph")
    _add_run_flags(d, with_effect=False)
    d.add_argument("--out", required=True, help="output directory for graph files and diagnostics.json")
    d.set_defaults(func=cmd_discover)

    e = sub.add_parser("effect", help="full search, screen, estimate, and union-interval report")
    _add_run_flags(e, with_effect=True)
    e.add_argument("--out", help="report JSON path (stdout when omitted)")
    e.set_defaults(func=cmd_effect)

    b = sub.add_parser("bench", help="synthetic-scenario benchmark sweeps, one CSV row per method")
    b.add_argument("--scenario", help="scenario JSON (fields plus an optional sweep block)")
    b.add_argument("--paper-fig", dest="paper_fig", type=int, choices=(1, 3), help="preset: 1 = scale sweep on the dense scenario, 3 = run-count and sample-size sweeps")
    b.add_argument("--replicates", type=int, help="override the replicate count")
    b.add_argument("--seed", type=int, help="master seed (drawn from system entropy and printed when omitted)")
    b.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV_VAR} or 1); results do not depend on it")
    b.add_argument("--out", required=True, help="benchmark CSV path")
    b.add_argument("--svg", help="also render one SVG chart per metric into this directory")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot-data", help="group a benchmark CSV into plot-ready series")
    pl.add_argument("--bench", required=True, help="benchmark CSV produced by the bench command")
    pl.add_argument("--x", choices=("auto", "c_star", "M", "n"), default="auto", help="x axis (default: first one that varies)")
    pl.add_argument("--out", help="panel JSON path (stdout when omitted)")
    pl.add_argument("--svg", help="also render one SVG chart per panel into this directory")
    pl.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataError, GraphFormatError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except OSError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except NoValidGraphsError as err:
        print(f"no valid graphs: {err}", file=sys.stderr)
        return EXIT_NO_VALID_GRAPHS


if __name__ == "__main__":
    sys.exit(main())
