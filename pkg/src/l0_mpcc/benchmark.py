"""
Benchmark harness: a grid of synthetic least-squares cells, every configured
method per cell, metrics against a reference objective.

Outputs land in one folder, written the same way every run:

    results.csv / results.json / results.parquet   deterministic, no wall times
    timings.csv                                    wall times per cell x method
    manifest.json                                  config fingerprint, host, timestamps
    __SUCCESS                                      written last
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import socket
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd
from tqdm import tqdm

from . import __version__
from .errors import InvalidParameterError, ProblemFileError
from .instances import generate_lsr_instance
from .problem_file import load_schema, read_json
from .runners import METHODS, MethodSettings, SolverResult, run_method
from .storage import (
    _local_path,
    fingerprint,
    has_success_marker,
    mark_success,
    read_csv,
    write_csv_atomic,
    write_parquet_atomic,
    write_text,
)

logger = logging.getLogger(__name__)

CELL_KEY = ["p", "n", "k", "gamma", "seed"]
RESULT_COLUMNS = [
    *CELL_KEY,
    "method",
    "label",
    "objective",
    "fstar",
    "rdf",
    "abs_gap",
    "rdf_mode",
    "card",
    "kkt_res",
    "iters",
    "termination",
    "result",
]
# |f*| at or below this makes RDF undefined; the absolute gap is reported instead.
ZERO_REFERENCE = 1e-12


# ==================== Configuration ====================


@dataclass(frozen=True)
class Cell:
    p: int
    n: int
    k: int
    gamma: float
    seed: int
    K: float = 60.0
    noise: str = "ratio10"

    def key(self) -> dict:
        return {"p": self.p, "n": self.n, "k": self.k, "gamma": self.gamma, "seed": self.seed}


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: tuple[str, ...]
    cells: tuple[Cell, ...]
    reference: str | None = "oracle"
    settings: MethodSettings = field(default_factory=MethodSettings)
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.raw)


def _as_list(v) -> list:
    return v if isinstance(v, list) else [v]


def parse_config(raw: dict) -> BenchmarkConfig:
    try:
        jsonschema.validate(instance=raw, schema=load_schema("bench_config.schema.json"))
    except jsonschema.ValidationError as e:
        path = ".".join(str(part) for part in e.absolute_path) or "<root>"
        raise ProblemFileError(path, e.message) from None

    grid = raw["grid"]
    seeds = list(range(raw["seeds"])) if isinstance(raw["seeds"], int) else raw["seeds"]
    K = float(grid.get("K", 60.0))
    noise = grid.get("noise", "ratio10")
    cells = []
    for p, n, k, gamma, seed in itertools.product(
        _as_list(grid["p"]), _as_list(grid["n"]), _as_list(grid["k"]), _as_list(grid["gamma"]), seeds
    ):
        if k > n:
            raise ProblemFileError("grid.k", f"card k={k} exceeds n={n}")
        cells.append(Cell(p=p, n=n, k=k, gamma=float(gamma), seed=seed, K=K, noise=noise))

    methods = tuple(dict.fromkeys(raw["methods"]))
    reference = raw.get("reference", "oracle")
    if reference == "none":
        reference = None
    elif reference != "oracle" and reference not in methods:
        raise ProblemFileError("reference", f"'{reference}' is neither 'oracle', 'none' nor a configured method")

    try:
        settings = MethodSettings.from_dict(raw.get("settings", {}))
    except (InvalidParameterError, TypeError) as e:
        raise ProblemFileError("settings", str(e)) from None
    return BenchmarkConfig(methods=methods, cells=tuple(cells), reference=reference, settings=settings, raw=raw)


def load_config(path: str | Path) -> BenchmarkConfig:
    return parse_config(read_json(path))


# ==================== Metrics ====================


@dataclass(frozen=True)
class Metrics:
    objective: float
    rdf: float
    card: int
    kkt_res: float
    time_s: float
    iters: int
    abs_gap: float = math.nan
    # "relative" (rdf in percent), "absolute" (reference is zero), or "none".
    rdf_mode: str = "none"


def compute_metrics(result: SolverResult, reference_fstar: float | None) -> Metrics:
    """
    RDF = (F - F_ref) / |F_ref| * 100. The reference is the oracle f*, or the
    objective of another run for pairwise comparisons.
    """
    base = dict(
        objective=result.objective,
        card=result.card,
        kkt_res=result.kkt_res,
        time_s=result.wall_time,
        iters=result.iterations,
    )
    if reference_fstar is None or not math.isfinite(reference_fstar):
        return Metrics(rdf=math.nan, **base)
    gap = result.objective - reference_fstar
    if abs(reference_fstar) <= ZERO_REFERENCE:
        logger.warning("reference objective is zero; reporting the absolute gap %.3e", gap)
        return Metrics(rdf=math.nan, abs_gap=gap, rdf_mode="absolute", **base)
    return Metrics(rdf=100.0 * gap / abs(reference_fstar), abs_gap=gap, rdf_mode="relative", **base)


# ==================== Running ====================


@dataclass
class CellOutcome:
    rows: list[dict]
    timings: list[dict]


def _failed_row(cell: Cell, method: str, msg: str) -> dict:
    return {
        **cell.key(),
        "method": method,
        "label": method,
        "objective": math.nan,
        "fstar": math.nan,
        "rdf": math.nan,
        "abs_gap": math.nan,
        "rdf_mode": "none",
        "card": -1,
        "kkt_res": math.nan,
        "iters": 0,
        "termination": "error",
        "result": f"failure: {msg}",
    }


def run_cell(cell: Cell, methods: tuple[str, ...], settings: MethodSettings, reference: str | None) -> CellOutcome:
    """All methods on one instance; a failing method is recorded and the rest still run."""
    rows: list[dict] = []
    timings: list[dict] = []
    try:
        problem = generate_lsr_instance(cell.p, cell.n, cell.k, cell.K, cell.noise, cell.seed).to_problem(cell.gamma)
    except Exception as e:
        return CellOutcome(rows=[_failed_row(cell, m, str(e)) for m in methods], timings=[])

    settings = replace(settings, seed=cell.seed)
    results: dict[str, SolverResult] = {}
    errors: dict[str, str] = {}
    to_run = list(methods)
    if reference == "oracle" and "oracle" not in to_run:
        to_run.append("oracle")
    for method in to_run:
        try:
            results[method] = run_method(method, problem, settings)
        except Exception as e:
            logger.warning("cell %s method %s failed: %s", cell.key(), method, e)
            errors[method] = str(e)

    ref = results.get(reference) if reference else None
    ref_fstar = ref.objective if ref is not None else None

    for method in methods:
        if method in errors:
            rows.append(_failed_row(cell, method, errors[method]))
            continue
        res = results[method]
        met = compute_metrics(res, ref_fstar)
        row = {
            **cell.key(),
            "method": method,
            "label": res.label or method,
            **{k: v for k, v in asdict(met).items() if k != "time_s"},
            "fstar": math.nan if ref_fstar is None else ref_fstar,
            "termination": res.termination,
            "result": "success",
        }
        rows.append(row)
        timings.append({**cell.key(), "method": method, "time_s": met.time_s})
    return CellOutcome(rows=rows, timings=timings)


def _run_cell_job(args) -> CellOutcome:
    return run_cell(*args)


def _get_out_dir(out_dir: str | Path | None) -> Path:
    """
    Priority:
      1. Caller-provided out_dir
      2. L0_MPCC_OUT_DIR env var
    """
    od = out_dir or os.getenv("L0_MPCC_OUT_DIR")
    if not od:
        raise ValueError(
            "L0_MPCC_OUT_DIR is not set and no out_dir was provided.\n"
            "Set it in your environment/.env or pass --out-dir."
        )
    return _local_path(Path(od).expanduser())


@dataclass
class BenchmarkRun:
    results: pd.DataFrame
    timings: pd.DataFrame
    out_dir: Path

    @property
    def failures(self) -> int:
        return int((self.results["result"] != "success").sum())


def run_benchmark(config: BenchmarkConfig, out_dir: str | Path | None = None, jobs: int = 1, progress: bool = True) -> BenchmarkRun:
    if jobs < 1:
        raise InvalidParameterError(f"jobs must be positive, got {jobs}")
    out = _get_out_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    produced_at = datetime.now(timezone.utc).isoformat()
    logger.info("benchmark: %d cells x %d methods -> %s", len(config.cells), len(config.methods), out)

    job_args = [(cell, config.methods, config.settings, config.reference) for cell in config.cells]
    bar = dict(total=len(job_args), desc="Benchmark cells", disable=not progress)
    if jobs == 1:
        outcomes = [run_cell(*a) for a in tqdm(job_args, **bar)]
    else:
        # map() yields in submission order, so the merge is independent of scheduling.
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(tqdm(pool.map(_run_cell_job, job_args), **bar))

    results = pd.DataFrame([r for o in outcomes for r in o.rows], columns=RESULT_COLUMNS)
    timings = pd.DataFrame([t for o in outcomes for t in o.timings], columns=[*CELL_KEY, "method", "time_s"])

    write_csv_atomic(results, out / "results.csv")
    write_text(out, "results.json", _results_json(config, results))
    write_parquet_atomic(results, out / "results.parquet")
    write_csv_atomic(timings, out / "timings.csv")
    manifest = {
        "config_sha": config.fingerprint,
        "cells": len(config.cells),
        "methods": list(config.methods),
        "reference": config.reference,
        "rows": int(len(results)),
        "produced_at": produced_at,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "host": socket.gethostname(),
        "jobs": jobs,
        "version": __version__,
    }
    write_text(out, "manifest.json", json.dumps(manifest, indent=2))
    mark_success(out)
    return BenchmarkRun(results=results, timings=timings, out_dir=out)


def _plain(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _results_json(config: BenchmarkConfig, results: pd.DataFrame) -> str:
    records = [{k: _plain(v) for k, v in row.items()} for row in results.to_dict(orient="records")]
    payload = {"schema": 1, "config_sha": config.fingerprint, "config": config.raw, "rows": records}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ==================== Reading results ====================


def load_results(out_dir: str | Path) -> pd.DataFrame:
    """Result table of a finished run; folders without __SUCCESS are refused."""
    out = _local_path(out_dir)
    if not has_success_marker(out):
        raise FileNotFoundError(f"{out} has no __SUCCESS marker; the run is incomplete or failed")
    return read_csv(out / "results.csv")


def merge_reference(results: pd.DataFrame, method: str = "oracle") -> pd.DataFrame:
    """
    Attach `method`'s objective per cell as `ref_objective` and its RDF as
    `ref_rdf`, the pairwise convention (F_i - F_ref) / |F_ref| * 100.
    """
    ref = results[results["method"] == method][[*CELL_KEY, "objective"]].rename(
        columns={"objective": "ref_objective"}
    )
    df = results.merge(ref, on=CELL_KEY, how="left")
    denom = df["ref_objective"].abs()
    df["ref_rdf"] = np.where(denom > ZERO_REFERENCE, 100.0 * (df["objective"] - df["ref_objective"]) / denom, np.nan)
    return df


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Per (p, n, k, gamma, method): median and max RDF, mean card, failure count."""
    ok = results[results["result"] == "success"]
    grouped = ok.groupby(["p", "n", "k", "gamma", "method"], sort=True)
    table = grouped.agg(
        rdf_median=("rdf", "median"),
        rdf_max=("rdf", "max"),
        card_mean=("card", "mean"),
        iters_mean=("iters", "mean"),
        runs=("seed", "count"),
    ).reset_index()
    failed = (
        results[results["result"] != "success"]
        .groupby(["p", "n", "k", "gamma", "method"])
        .size()
        .rename("failures")
        .reset_index()
    )
    table = table.merge(failed, on=["p", "n", "k", "gamma", "method"], how="left")
    table["failures"] = table["failures"].fillna(0).astype(int)
    return table
