"""Command-line front end.

Subcommands:
    gen      write a planted data/query pair as LSHV files
    run      one benchmark run, appending a metrics CSV row
    sweep    grid over l or dparam, both schemes per value, one CSV
    tune-d   golden-section search for the outer width

Options may come from an optional ``--config`` file of ``key=value`` lines
(keys are the long option names, ``#`` starts a comment); explicit flags
override the file, the file overrides built-in defaults.

Exit codes: 0 success, 2 parameter problems, 3 I/O or file-format problems,
4 internal integrity failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import (
    SWEEP_VARIABLES,
    TUNE_OBJECTIVES,
    execute_run,
    run_sweep,
    tune_outer_width,
    write_metrics_csv,
    write_results_csv,
    write_tune_csv,
)
from .cluster import ClusterConfig, MAPPING_MODES
from .core import LshParams
from .data_io import generate_planted, read_vectors, write_vectors
from .errors import FormatError, IntegrityError, ParameterError
from .probe import default_offset_count


def load_config(path) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ParameterError(
                f"{path}:{lineno}: expected key=value, got {s!r}"
            )
        key, value = s.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _to_bool(value: str) -> bool:
    if value in ("on", "true", "1"):
        return True
    if value in ("off", "false", "0"):
        return False
    raise ParameterError(f"expected on or off, got {value!r}")


class _Settings:
    """Merges flags over config-file values over defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, cast, default=None, required: bool = False):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None and name in self.config:
            raw = self.config[name]
            value = _to_bool(raw) if cast is bool else cast(raw)
        if value is None:
            value = default
        if value is None and required:
            raise ParameterError(f"missing required option --{name}")
        return value


def _grid(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ParameterError(f"bad grid {text!r}, expected comma-separated numbers")


def _build_params(s: _Settings, n: int, dim: int) -> tuple[LshParams, int, bool, int]:
    """(params, seed, probe_self, threads) shared by run/sweep/tune-d."""
    k = s.get("k", int, 10)
    w = s.get("w", float, 0.5)
    r = s.get("r", float, 0.3)
    c = s.get("c", float, 2.0)
    dparam = s.get("dparam", float, math.sqrt(k))
    l = s.get("l", int)
    if l is None:
        l = default_offset_count(n, c)
    seed = s.get("seed", int, 1)
    probe_self = s.get("probe-self", bool, True)
    threads = s.get("threads", int, 1)
    params = LshParams(
        dim=dim, k=k, w=w, outer_w=dparam, r=r, c=c, n_offsets=l, n_points=n
    )
    return params, seed, probe_self, threads


def _cluster(s: _Settings) -> ClusterConfig:
    return ClusterConfig(
        num_machines=s.get("machines", int, 16),
        mapping_mode=s.get("mapping", str, "modulo"),
        seed=s.get("seed", int, 1),
    )


def cmd_gen(args: argparse.Namespace) -> int:
    s = _Settings(args)
    data_path = s.get("data", str, required=True)
    query_path = s.get("queries", str, required=True)
    n = s.get("n", int, 10000)
    n_q = s.get("nq", int, 1000)
    dim = s.get("dim", int, 100)
    r = s.get("r", float, 0.3)
    seed = s.get("seed", int, 1)
    data, queries = generate_planted(n, n_q, dim, r, seed)
    write_vectors(data_path, data)
    write_vectors(query_path, queries)
    print(f"wrote {data_path} ({n} x {dim}) and {query_path} ({n_q} x {dim})")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    s = _Settings(args)
    data = read_vectors(s.get("data", str, required=True))
    queries = read_vectors(s.get("queries", str, required=True))
    scheme = s.get("scheme", str, "layered")
    out = s.get("out", str, required=True)
    params, seed, probe_self, threads = _build_params(s, data.n, data.dim)
    cluster = _cluster(s)
    cache_dir = s.get("cache-dir", str)
    metrics, results = execute_run(
        data,
        queries,
        scheme,
        params,
        cluster,
        seed,
        probe_self=probe_self,
        workers=threads,
        cache_dir=cache_dir,
    )
    write_metrics_csv(out, [metrics], append=True)
    results_path = s.get("results", str, f"{out}.results.csv")
    write_results_csv(results_path, results)
    print(
        f"{metrics.scheme}: {metrics.matches} matches,"
        f" recall_cr={metrics.recall_cr:.4f},"
        f" query_messages={metrics.query_messages},"
        f" load_max={metrics.load_max}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    s = _Settings(args)
    data = read_vectors(s.get("data", str, required=True))
    queries = read_vectors(s.get("queries", str, required=True))
    out = s.get("out", str, required=True)
    variable = s.get("sweep", str, required=True)
    grid_text = s.get("grid", str, required=True)
    values: list = _grid(grid_text)
    if variable == "l":
        values = [int(v) for v in values]
    params, seed, probe_self, threads = _build_params(s, data.n, data.dim)
    cluster = _cluster(s)
    cache_dir = s.get("cache-dir", str)
    rows = run_sweep(
        data,
        queries,
        params,
        cluster,
        seed,
        variable,
        values,
        probe_self=probe_self,
        workers=threads,
        cache_dir=cache_dir,
    )
    write_metrics_csv(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_tune_d(args: argparse.Namespace) -> int:
    s = _Settings(args)
    data = read_vectors(s.get("data", str, required=True))
    queries = read_vectors(s.get("queries", str, required=True))
    params, seed, probe_self, threads = _build_params(s, data.n, data.dim)
    cluster = _cluster(s)
    objective = s.get("objective", str, "weighted")
    lo = s.get("lo", float)
    hi = s.get("hi", float)
    iterations = s.get("iters", int, 10)
    cache_dir = s.get("cache-dir", str)
    best, trace = tune_outer_width(
        data,
        queries,
        params,
        cluster,
        seed,
        objective=objective,
        lo=lo,
        hi=hi,
        iterations=iterations,
        probe_self=probe_self,
        workers=threads,
        cache_dir=cache_dir,
    )
    out = s.get("out", str)
    if out:
        write_tune_csv(out, trace)
    print(f"best dparam {best!r} after {len(trace)} evaluations ({objective})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layered-lsh",
        description="Benchmark near-neighbor distribution schemes on a simulated cluster",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_scheme: bool = True):
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--data", help="LSHV data file")
        p.add_argument("--queries", help="LSHV query file")
        if with_scheme:
            p.add_argument("--scheme", choices=["simple", "layered"])
        p.add_argument("--k", type=int, help="concatenated inner hashes (default 10)")
        p.add_argument("--w", type=float, help="inner bucket width (default 0.5)")
        p.add_argument("--l", type=int, help="probe offsets per query")
        p.add_argument("--dparam", type=float, help="outer bucket width (default sqrt(k))")
        p.add_argument("--machines", type=int, help="machine count (default 16)")
        p.add_argument("--mapping", choices=list(MAPPING_MODES))
        p.add_argument("--probe-self", choices=["on", "off"], dest="probe_self_text")
        p.add_argument("--r", type=float, help="near radius (default 0.3)")
        p.add_argument("--c", type=float, help="approximation factor (default 2)")
        p.add_argument("--seed", type=int, help="global seed (default 1)")
        p.add_argument("--threads", type=int, help="reduce worker threads (default 1)")
        p.add_argument("--cache-dir", help="ground-truth cache directory")
        p.add_argument("--out", help="output CSV path")

    p_gen = sub.add_parser("gen", help="generate a planted workload")
    p_gen.add_argument("--config")
    p_gen.add_argument("--data", help="output LSHV data file")
    p_gen.add_argument("--queries", help="output LSHV query file")
    p_gen.add_argument("--n", type=int, help="data points (default 10000)")
    p_gen.add_argument("--nq", type=int, help="queries (default 1000)")
    p_gen.add_argument("--dim", type=int, help="dimensions (default 100)")
    p_gen.add_argument("--r", type=float, help="perturbation radius (default 0.3)")
    p_gen.add_argument("--seed", type=int, help="global seed (default 1)")
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run one scheme once")
    common(p_run)
    p_run.add_argument("--results", help="result pairs CSV (default <out>.results.csv)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid over l or dparam, both schemes")
    common(p_sweep)
    p_sweep.add_argument("--sweep", choices=list(SWEEP_VARIABLES), help="variable to sweep")
    p_sweep.add_argument("--grid", help="comma-separated grid values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_tune = sub.add_parser("tune-d", help="search the outer width")
    common(p_tune)
    p_tune.add_argument("--objective", choices=list(TUNE_OBJECTIVES))
    p_tune.add_argument("--lo", type=float, help="bracket low end (default sqrt(k)/4)")
    p_tune.add_argument("--hi", type=float, help="bracket high end (default 8 sqrt(k))")
    p_tune.add_argument("--iters", type=int, help="golden-section iterations (default 10)")
    p_tune.set_defaults(func=cmd_tune_d)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # argparse stores --probe-self as text; normalize to the bool the
    # settings resolver expects, keeping None for "not passed".
    text = getattr(args, "probe_self_text", None)
    setattr(args, "probe_self", None if text is None else _to_bool(text))
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return 3
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
