"""Benchmark orchestration: single runs, paired sweeps, outer-width tuning.

Every run is summarized as one ``RunMetrics`` row in a fixed, versioned CSV
schema (``CSV_COLUMNS``); all parameters are echoed so any row can be
reproduced from the row alone plus the input files.  Numeric formatting is
``repr`` of Python scalars, so identical runs serialize to identical bytes.
``wall_ms`` is wall-clock measurement and is the one column excluded from
reproducibility comparisons.

Recall definitions (both conditioned the same way):
    eligible queries     those with at least one exact neighbor within r.
    recall_strict        fraction of eligible queries whose output contains
                         a point within r.
    recall_cr            fraction of eligible queries whose output contains
                         a point within c*r (any output point qualifies,
                         since outputs are filtered at c*r).

Sweeps run both schemes per grid value with identical seeds, so hash
functions, offsets, and therefore searched buckets agree pairwise and any
difference in the ledgers is attributable to the distribution scheme.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .cluster import ClusterConfig, load_summary, run_job
from .core import LshParams
from .data_io import Dataset, GroundTruth, load_or_compute_ground_truth
from .errors import ParameterError
from .schemes import DataRecord, MatchResult, QueryRecord, Scheme

CSV_SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version",
    "scheme",
    "n",
    "n_q",
    "dim",
    "k",
    "w",
    "dparam",
    "l",
    "r",
    "c",
    "machines",
    "mapping",
    "probe_self",
    "seed",
    "data_messages",
    "query_messages",
    "data_bytes",
    "query_bytes",
    "mean_f_q",
    "max_f_q",
    "load_avg",
    "load_max",
    "distance_evals",
    "matches",
    "recall_strict",
    "recall_cr",
    "wall_ms",
]


@dataclass(frozen=True)
class RunMetrics:
    """One benchmark run, flattened to the CSV schema."""

    scheme: str
    n: int
    n_q: int
    dim: int
    k: int
    w: float
    dparam: float
    l: int
    r: float
    c: float
    machines: int
    mapping: str
    probe_self: bool
    seed: int
    data_messages: int
    query_messages: int
    data_bytes: int
    query_bytes: int
    mean_f_q: float
    max_f_q: int
    load_avg: float
    load_max: int
    distance_evals: int
    matches: int
    recall_strict: float
    recall_cr: float
    wall_ms: int

    def to_row(self) -> list[str]:
        values = [CSV_SCHEMA_VERSION] + [
            getattr(self, name) for name in CSV_COLUMNS[1:]
        ]
        out = []
        for v in values:
            if isinstance(v, bool):
                out.append("on" if v else "off")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


def records_from(dataset: Dataset, kind: str) -> list:
    if kind == "data":
        return [DataRecord(i, dataset.points[i]) for i in range(dataset.n)]
    return [QueryRecord(i, dataset.points[i]) for i in range(dataset.n)]


def compute_recalls(
    results: list[MatchResult], gt: GroundTruth, r: float
) -> tuple[float, float]:
    """(recall_strict, recall_cr); 0.0 for both when no query is eligible."""
    eligible = {qid for qid, found in gt.neighbors.items() if found}
    if not eligible:
        return 0.0, 0.0
    got_any: set[int] = set()
    got_strict: set[int] = set()
    for m in results:
        if m.query_id in eligible:
            got_any.add(m.query_id)
            if m.distance <= r:
                got_strict.add(m.query_id)
    return len(got_strict) / len(eligible), len(got_any) / len(eligible)


def execute_run(
    data: Dataset,
    queries: Dataset,
    scheme: Scheme | str,
    params: LshParams,
    cluster: ClusterConfig,
    seed: int,
    probe_self: bool = True,
    workers: int = 1,
    cache_dir=None,
    ground_truth: GroundTruth | None = None,
) -> tuple[RunMetrics, list[MatchResult]]:
    """Run one scheme once and summarize it as a metrics row."""
    scheme = Scheme(scheme)
    if ground_truth is None:
        ground_truth = load_or_compute_ground_truth(
            data, queries, params.r, cache_dir
        )
    data_recs = records_from(data, "data")
    query_recs = records_from(queries, "query")
    start = time.perf_counter()
    results, ledger, loads = run_job(
        data_recs,
        query_recs,
        scheme,
        params,
        cluster,
        seed,
        probe_self=probe_self,
        workers=workers,
    )
    wall_ms = int((time.perf_counter() - start) * 1000)
    recall_strict, recall_cr = compute_recalls(results, ground_truth, params.r)
    fan_outs = list(ledger.per_query_keys.values())
    mean_f_q = sum(fan_outs) / len(fan_outs) if fan_outs else 0.0
    max_f_q = max(fan_outs) if fan_outs else 0
    if loads:
        load_avg, load_max = load_summary(loads)
    else:
        load_avg, load_max = 0.0, 0
    metrics = RunMetrics(
        scheme=scheme.value,
        n=data.n,
        n_q=queries.n,
        dim=data.dim,
        k=params.k,
        w=params.w,
        dparam=params.outer_w,
        l=params.n_offsets,
        r=params.r,
        c=params.c,
        machines=cluster.num_machines,
        mapping=cluster.mapping_mode,
        probe_self=probe_self,
        seed=seed,
        data_messages=ledger.data_messages,
        query_messages=ledger.query_messages,
        data_bytes=ledger.data_bytes,
        query_bytes=ledger.query_bytes,
        mean_f_q=float(mean_f_q),
        max_f_q=int(max_f_q),
        load_avg=float(load_avg),
        load_max=int(load_max),
        distance_evals=sum(ld.num_distance_evals for ld in loads),
        matches=len(results),
        recall_strict=float(recall_strict),
        recall_cr=float(recall_cr),
        wall_ms=wall_ms,
    )
    return metrics, results


def write_metrics_csv(path, rows: list[RunMetrics], append: bool = False) -> None:
    """Write (or append) metrics rows; the header is written once."""
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.to_row())


def write_results_csv(path, results: list[MatchResult]) -> None:
    """Result pairs as CSV, already in canonical (query_id, point_id) order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "point_id", "distance"])
        for m in results:
            writer.writerow([m.query_id, m.point_id, repr(m.distance)])


SWEEP_VARIABLES = ("l", "dparam")


def run_sweep(
    data: Dataset,
    queries: Dataset,
    base_params: LshParams,
    cluster: ClusterConfig,
    seed: int,
    variable: str,
    values: list,
    probe_self: bool = True,
    workers: int = 1,
    cache_dir=None,
    schemes: tuple = (Scheme.SIMPLE, Scheme.LAYERED),
) -> list[RunMetrics]:
    """Grid over one variable, both schemes per value, shared seeds."""
    if variable not in SWEEP_VARIABLES:
        raise ParameterError(
            f"sweep variable must be one of {SWEEP_VARIABLES}, got {variable!r}"
        )
    if not values:
        raise ParameterError("sweep needs at least one grid value")
    gt = load_or_compute_ground_truth(data, queries, base_params.r, cache_dir)
    rows: list[RunMetrics] = []
    for value in values:
        if variable == "l":
            params = LshParams(
                dim=base_params.dim,
                k=base_params.k,
                w=base_params.w,
                outer_w=base_params.outer_w,
                r=base_params.r,
                c=base_params.c,
                n_offsets=int(value),
                n_points=base_params.n_points,
            )
        else:
            params = LshParams(
                dim=base_params.dim,
                k=base_params.k,
                w=base_params.w,
                outer_w=float(value),
                r=base_params.r,
                c=base_params.c,
                n_offsets=base_params.n_offsets,
                n_points=base_params.n_points,
            )
        for scheme in schemes:
            metrics, _ = execute_run(
                data,
                queries,
                scheme,
                params,
                cluster,
                seed,
                probe_self=probe_self,
                workers=workers,
                ground_truth=gt,
            )
            rows.append(metrics)
    return rows


TUNE_OBJECTIVES = ("weighted", "wall")


@dataclass(frozen=True)
class TuneStep:
    step: int
    dparam: float
    objective: float
    query_messages: int
    load_max: int
    wall_ms: int


def _objective_value(name: str, metrics: RunMetrics) -> float:
    if name == "wall":
        return float(metrics.wall_ms)
    # weighted: mean per-query fan-out plus max point load normalized by
    # the balanced load n / machines. Penalizes shuffle and skew together.
    balanced = metrics.n / metrics.machines if metrics.n else 1.0
    return metrics.mean_f_q + metrics.load_max / balanced


def tune_outer_width(
    data: Dataset,
    queries: Dataset,
    base_params: LshParams,
    cluster: ClusterConfig,
    seed: int,
    objective: str = "weighted",
    lo: float | None = None,
    hi: float | None = None,
    iterations: int = 10,
    probe_self: bool = True,
    workers: int = 1,
    cache_dir=None,
) -> tuple[float, list[TuneStep]]:
    """Golden-section search for the outer width, minimizing ``objective``.

    The default bracket is [sqrt(k)/4, 8 sqrt(k)], centered around the
    sqrt(k) scaling that balances per-query fan-out against machine load.
    Both endpoints are evaluated, so the returned width never scores worse
    than either endpoint.  With the (default) weighted objective the whole
    trace is deterministic given the seed.
    """
    if objective not in TUNE_OBJECTIVES:
        raise ParameterError(
            f"objective must be one of {TUNE_OBJECTIVES}, got {objective!r}"
        )
    if iterations < 1:
        raise ParameterError(f"iterations must be >= 1, got {iterations}")
    root_k = math.sqrt(base_params.k)
    if lo is None:
        lo = root_k / 4.0
    if hi is None:
        hi = 8.0 * root_k
    if not 0 < lo < hi:
        raise ParameterError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")

    gt = load_or_compute_ground_truth(data, queries, base_params.r, cache_dir)
    trace: list[TuneStep] = []
    cache: dict[float, float] = {}

    def evaluate(dparam: float) -> float:
        dparam = float(dparam)
        if dparam in cache:
            return cache[dparam]
        params = LshParams(
            dim=base_params.dim,
            k=base_params.k,
            w=base_params.w,
            outer_w=dparam,
            r=base_params.r,
            c=base_params.c,
            n_offsets=base_params.n_offsets,
            n_points=base_params.n_points,
        )
        metrics, _ = execute_run(
            data,
            queries,
            Scheme.LAYERED,
            params,
            cluster,
            seed,
            probe_self=probe_self,
            workers=workers,
            ground_truth=gt,
        )
        value = _objective_value(objective, metrics)
        cache[dparam] = value
        trace.append(
            TuneStep(
                step=len(trace),
                dparam=dparam,
                objective=value,
                query_messages=metrics.query_messages,
                load_max=metrics.load_max,
                wall_ms=metrics.wall_ms,
            )
        )
        return value

    evaluate(lo)
    evaluate(hi)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = evaluate(x1), evaluate(x2)
    for _ in range(iterations):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = evaluate(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = evaluate(x2)
    best = min(trace, key=lambda s: (s.objective, s.dparam))
    return best.dparam, trace


def write_tune_csv(path, trace: list[TuneStep]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "dparam", "objective", "query_messages", "load_max", "wall_ms"]
        )
        for s in trace:
            writer.writerow(
                [
                    s.step,
                    repr(s.dparam),
                    repr(s.objective),
                    s.query_messages,
                    s.load_max,
                    s.wall_ms,
                ]
            )
