"""Command-line front end.

Subcommands:

* ``run <spec.json>``   execute the campaigns described by a spec file;
* ``bench <suite>``     run a desk-scale benchmark suite
                        (gp-figure3, screening-figure4, eps-table1);
* ``report <dir>``      aggregate traces/metrics in a directory;
* ``worker --listen``   serve as a remote proposal worker.

Exit codes: 0 success, 1 runtime abort (partial outputs retained),
2 validation failure. ``BATCHSCREEN_THREADS`` caps repetition-level
parallel execution and the threaded backend's pool size.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .benchmarks import OBJECTIVES, pool_for_objective, synthetic_library_pool
from .engine import (
    METHODS,
    CampaignConfig,
    CampaignTrace,
    GpSettings,
    PbpSettings,
    SerialBackend,
    run_campaign,
)
from .errors import BatchScreenError, CampaignAborted, SpecValidationError
from .harness import (
    SocketBackend,
    ThreadedBackend,
    parse_listen_address,
    serve_worker,
    shutdown_workers,
    thread_budget,
)
from .metrics import average_rank, read_metrics_csv, write_metrics_csv
from .pool import load_library
from .seeding import derive_seed

SUITES = ("gp-figure3", "screening-figure4", "eps-table1")

_OBJECTIVE_NAMES = tuple(OBJECTIVES) + ("gp-prior",)

_TOP_KEYS = {
    "name", "library", "objective", "sense", "grid_resolution", "n_points",
    "objective_seed", "methods", "surrogate", "batch_size", "n_iterations",
    "repetitions", "seed", "out", "backend", "epsilon", "n_fantasies",
    "fantasy_strategy", "constant_liar", "metric", "recall_fraction",
    "recall_threshold", "gp", "pbp",
}
_GP_KEYS = {f.name for f in dataclasses.fields(GpSettings)}
_PBP_KEYS = {f.name for f in dataclasses.fields(PbpSettings)}


@dataclass
class ExperimentSpec:
    """Validated campaign suite description.

    Exactly one of ``library`` (a candidate CSV) or ``objective`` (a built-in
    test function) provides the pool. Every method in ``methods`` runs
    ``repetitions`` times; repetition k of every method shares the seed
    derived from (master seed, k), so cross-method comparisons are paired.
    """

    methods: list[str]
    library: str | None = None
    objective: str | None = None
    sense: str = "maximize"
    grid_resolution: int = 100
    n_points: int = 50_000
    objective_seed: int = 0
    surrogate: str = "rfgp"
    batch_size: int = 1
    n_iterations: int = 1
    repetitions: int = 1
    seed: int = 0
    out: str = "runs"
    backend: str | dict = "serial"
    epsilon: float = 0.0
    n_fantasies: int = 10
    fantasy_strategy: str = "posterior-sample"
    constant_liar: float | None = None
    metric: str = "ir"
    recall_fraction: float = 0.01
    recall_threshold: float | None = None
    name: str = ""
    gp: GpSettings = field(default_factory=GpSettings)
    pbp: PbpSettings = field(default_factory=PbpSettings)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gp"] = dataclasses.asdict(self.gp)
        d["pbp"] = dict(dataclasses.asdict(self.pbp), hidden=list(self.pbp.hidden))
        return d

    def campaign_config(self, method: str, seed: int) -> CampaignConfig:
        return CampaignConfig(
            method=method,
            surrogate=self.surrogate,
            batch_size=self.batch_size,
            n_iterations=self.n_iterations,
            seed=seed,
            epsilon=self.epsilon,
            n_fantasies=self.n_fantasies,
            fantasy_strategy=self.fantasy_strategy,
            constant_liar=self.constant_liar,
            metric=self.metric,
            recall_fraction=self.recall_fraction,
            recall_threshold=self.recall_threshold,
            gp=self.gp,
            pbp=self.pbp,
        )


def _require(cond: bool, fld: str, message: str) -> None:
    if not cond:
        raise SpecValidationError(fld, message)


def parse_spec(raw: dict) -> ExperimentSpec:
    """Validate a raw spec dict; unknown keys are errors, not warnings."""
    _require(isinstance(raw, dict), "spec", "top level must be an object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, sorted(unknown)[0] if unknown else "", "unknown key")

    has_lib = raw.get("library") is not None
    has_obj = raw.get("objective") is not None
    _require(has_lib != has_obj, "library/objective", "exactly one must be given")
    if has_lib:
        _require(isinstance(raw["library"], str), "library", "must be a path string")
        _require(os.path.exists(raw["library"]), "library", f"file not found: {raw['library']}")
    if has_obj:
        _require(raw["objective"] in _OBJECTIVE_NAMES, "objective",
                 f"must be one of {', '.join(_OBJECTIVE_NAMES)}")

    methods = raw.get("methods")
    _require(isinstance(methods, list) and methods, "methods", "must be a non-empty list")
    for m in methods:
        _require(m in METHODS, "methods", f"unknown method {m!r}")
    _require(len(set(methods)) == len(methods), "methods", "duplicate entries")

    gp_raw = raw.get("gp", {})
    _require(isinstance(gp_raw, dict), "gp", "must be an object")
    unknown = set(gp_raw) - _GP_KEYS
    _require(not unknown, f"gp.{sorted(unknown)[0]}" if unknown else "", "unknown key")
    pbp_raw = raw.get("pbp", {})
    _require(isinstance(pbp_raw, dict), "pbp", "must be an object")
    unknown = set(pbp_raw) - _PBP_KEYS
    _require(not unknown, f"pbp.{sorted(unknown)[0]}" if unknown else "", "unknown key")
    if "hidden" in pbp_raw:
        pbp_raw = dict(pbp_raw, hidden=tuple(pbp_raw["hidden"]))

    backend = raw.get("backend", "serial")
    if isinstance(backend, str):
        _require(backend == "serial", "backend", "string form must be 'serial'")
    else:
        _require(isinstance(backend, dict) and len(backend) == 1, "backend",
                 "must be 'serial', {'threaded': n}, or {'socket': [addresses]}")
        key = next(iter(backend))
        _require(key in ("threaded", "socket"), "backend", f"unknown backend {key!r}")
        if key == "threaded":
            _require(isinstance(backend["threaded"], int) and backend["threaded"] >= 1,
                     "backend.threaded", "must be a positive integer")
        else:
            addrs = backend["socket"]
            _require(isinstance(addrs, list) and addrs, "backend.socket",
                     "must be a non-empty address list")
            for a in addrs:
                try:
                    parse_listen_address(a)
                except (ValueError, TypeError):
                    raise SpecValidationError("backend.socket", f"bad address {a!r}") from None

    kwargs = {k: raw[k] for k in raw if k in _TOP_KEYS and k not in ("gp", "pbp")}
    kwargs["gp"] = GpSettings(**gp_raw)
    kwargs["pbp"] = PbpSettings(**pbp_raw)
    spec = ExperimentSpec(**kwargs)
    _require(spec.repetitions >= 1, "repetitions", "must be positive")
    _require(spec.sense in ("maximize", "minimize"), "sense", "must be maximize or minimize")
    for m in spec.methods:
        try:
            spec.campaign_config(m, 0).validate()
        except ValueError as exc:
            raise SpecValidationError("methods", str(exc)) from None
    return spec


def load_spec(path: str) -> ExperimentSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecValidationError("spec", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecValidationError("spec", f"invalid JSON in {path}: {exc}") from None
    return parse_spec(raw)


def spec_sha256(spec: ExperimentSpec) -> str:
    canonical = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def fresh_pool(spec: ExperimentSpec):
    """A new, unrevealed pool per campaign (pools are consumed by reveals)."""
    if spec.library is not None:
        return load_library(spec.library, sense=spec.sense)
    return pool_for_objective(
        spec.objective, seed=spec.objective_seed,
        grid_resolution=spec.grid_resolution, n_points=spec.n_points,
    )


def _make_backend(spec: ExperimentSpec, pool):
    if isinstance(spec.backend, dict):
        key = next(iter(spec.backend))
        if key == "threaded":
            return ThreadedBackend(spec.backend["threaded"])
        addrs = [parse_listen_address(a) for a in spec.backend["socket"]]
        return SocketBackend(addrs, pool)
    return SerialBackend()


def write_manifest(out_dir: str, spec_hash: str, seed: int, files: list[str]) -> None:
    manifest = {
        "spec_sha256": spec_hash,
        "seed": seed,
        "code_version": __version__,
        "files": sorted(files),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def metric_rows(method: str, seed: int, trace: CampaignTrace) -> list[dict]:
    rows = []
    evals = 0
    for rec in trace.records:
        evals += len(rec.ids)
        rows.append({
            "method": method, "seed": seed, "iteration": rec.t, "evals": evals,
            "metric_name": rec.metric_name, "value": rec.metric_value,
        })
    return rows


def execute_spec(spec: ExperimentSpec, out_dir: str | None = None) -> tuple[int, list[list]]:
    """Run every (method, repetition) campaign; returns (exit code, metric rows)."""
    out = out_dir or spec.out
    os.makedirs(out, exist_ok=True)
    spec_hash = spec_sha256(spec)
    rows: list[list] = []
    files: list[str] = []
    socket_addrs = (
        [parse_listen_address(a) for a in spec.backend["socket"]]
        if isinstance(spec.backend, dict) and "socket" in spec.backend else None
    )
    exit_code = 0
    try:
        for rep in range(spec.repetitions):
            rep_seed = derive_seed(spec.seed, rep)
            for method in spec.methods:
                pool = fresh_pool(spec)
                config = spec.campaign_config(method, rep_seed)
                backend = _make_backend(spec, pool)
                trace = None
                try:
                    trace = run_campaign(config, pool, backend)
                except CampaignAborted as exc:
                    trace = exc.trace
                    exit_code = 1
                finally:
                    if isinstance(backend, SocketBackend):
                        backend.close(shutdown=False)
                    else:
                        backend.close()
                if trace is not None and trace.records:
                    fname = f"trace_{method}_rep{rep}.jsonl"
                    trace.write_jsonl(os.path.join(out, fname))
                    files.append(fname)
                    rows.extend(metric_rows(method, rep_seed, trace))
                if exit_code == 1:
                    raise CampaignAborted(f"campaign {method} rep {rep} aborted")
    except CampaignAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        exit_code = 1
    finally:
        if socket_addrs:
            shutdown_workers(socket_addrs)
        if rows:
            write_metrics_csv(os.path.join(out, "metrics.csv"), rows)
            files.append("metrics.csv")
        write_manifest(out, spec_hash, spec.seed, files)
    return exit_code, rows


def cmd_run(spec_path: str, out_dir: str | None = None) -> int:
    try:
        spec = load_spec(spec_path)
    except SpecValidationError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    code, _ = execute_spec(spec, out_dir)
    return code


# ---------------------------------------------------------------------------
# Benchmark suites (desk-scale analogs of the published experiments)
# ---------------------------------------------------------------------------


def _suite_campaigns(configs_pools, out: str, spec_hash: str, master_seed: int):
    """Run (label, config, pool factory) triples and collect metric rows."""
    rows: list[list] = []
    files: list[str] = []
    os.makedirs(out, exist_ok=True)
    for label, rep, config, make_pool in configs_pools:
        trace = run_campaign(config, make_pool())
        fname = f"trace_{label}_rep{rep}.jsonl"
        trace.write_jsonl(os.path.join(out, fname))
        files.append(fname)
        rows.extend(metric_rows(label, config.seed, trace))
    write_metrics_csv(os.path.join(out, "metrics.csv"), rows)
    files.append("metrics.csv")
    write_manifest(out, spec_hash, master_seed, files)
    return rows


def _bench_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def bench_gp_figure3(
    out: str,
    seed: int = 0,
    reps: int = 20,
    objectives: tuple[str, ...] = ("branin", "bohachevsky", "gp-prior", "hartmann6"),
    batch_size: int = 10,
    total_evals: int = 200,
    grid_resolution: int = 100,
    n_points: int = 50_000,
    n_features: int = 500,
) -> list[list]:
    """Global-optimization comparison on synthetic objectives.

    Sequential methods (ts, ei) spend the evaluation budget one point at a
    time; batch methods propose ``batch_size`` per round. Every method sees
    the same pool and the same repetition seed. The gp-prior objective draws
    a fresh random surface per repetition.
    """
    methods = ("ts", "ei", "pdts", "parallel-ei", "random")
    gp = GpSettings(n_features=n_features)
    jobs = []
    for objective in objectives:
        sub = os.path.join(out, objective)
        obj_jobs = []
        for rep in range(reps):
            rep_seed = derive_seed(seed, rep)
            surface_seed = derive_seed(seed, "surface", rep) if objective == "gp-prior" else 0
            for method in methods:
                sequential = method in ("ts", "ei")
                config = CampaignConfig(
                    method=method,
                    surrogate="rfgp",
                    batch_size=1 if sequential else batch_size,
                    n_iterations=total_evals if sequential else total_evals // batch_size,
                    seed=rep_seed,
                    metric="ir",
                    gp=gp,
                )
                make_pool = (lambda o=objective, s=surface_seed: pool_for_objective(
                    o, seed=s, grid_resolution=grid_resolution, n_points=n_points))
                obj_jobs.append((method, rep, config, make_pool))
        jobs.append((sub, obj_jobs))

    params = {"suite": "gp-figure3", "seed": seed, "reps": reps, "objectives": list(objectives),
              "batch_size": batch_size, "total_evals": total_evals,
              "grid_resolution": grid_resolution, "n_points": n_points}
    all_rows = []
    for sub, obj_jobs in jobs:
        all_rows.extend(_suite_campaigns(obj_jobs, sub, _bench_hash(params), seed))
    return all_rows


def bench_screening_figure4(
    out: str,
    seed: int = 0,
    reps: int = 10,
    n_candidates: int = 20_000,
    dim: int = 16,
    batch_size: int = 200,
    n_iterations: int = 20,
    hidden: tuple[int, ...] = (100,),
    epochs: int = 20,
    recall_fraction: float = 0.01,
    structure: str = "sparse-linear",
) -> list[list]:
    """Virtual-screening recall comparison on a synthetic library.

    pdts / greedy / random select batches from a large library with a
    Bayesian-net surrogate; the score is the recovered fraction of the
    library's top percentile.
    """
    methods = ("pdts", "greedy", "random")
    pbp = PbpSettings(hidden=tuple(hidden), epochs=epochs)
    jobs = []
    for rep in range(reps):
        rep_seed = derive_seed(seed, rep)
        lib_seed = derive_seed(seed, "library", rep)
        for method in methods:
            config = CampaignConfig(
                method=method,
                surrogate="pbp",
                batch_size=batch_size,
                n_iterations=n_iterations,
                seed=rep_seed,
                metric="recall-top",
                recall_fraction=recall_fraction,
                pbp=pbp,
            )
            make_pool = (lambda s=lib_seed: synthetic_library_pool(s, n_candidates, dim, structure))
            jobs.append((method, rep, config, make_pool))
    params = {"suite": "screening-figure4", "seed": seed, "reps": reps,
              "n_candidates": n_candidates, "dim": dim, "batch_size": batch_size,
              "n_iterations": n_iterations, "hidden": list(hidden), "epochs": epochs,
              "recall_fraction": recall_fraction, "structure": structure}
    return _suite_campaigns(jobs, out, _bench_hash(params), seed)


EPS_TABLE_EPSILONS = (0.01, 0.025, 0.05, 0.075)


def bench_eps_table1(
    out: str,
    seed: int = 0,
    reps: int = 50,
    n_candidates: int = 4_000,
    dim: int = 16,
    batch_size: int = 50,
    n_iterations: int = 10,
    hidden: tuple[int, ...] = (50,),
    epochs: int = 15,
    recall_fraction: float = 0.01,
    structure: str = "sparse-linear",
) -> dict:
    """Rank comparison of pdts against epsilon-greedy exploration levels.

    Each repetition draws a fresh library; all five methods run on it with
    the same seed. Methods are ranked per repetition by final top-fraction
    recall (rank 1 = best recall); the table reports mean rank with its
    standard error. Returns ``{"labels", "mean_rank", "se", "rows"}``.

    The default horizon stops well short of exhausting the library's top
    fraction: once every method can recover essentially all of it, final
    recalls tie and the ranks degenerate into noise.
    """
    labels = [f"eps-{e:g}" for e in EPS_TABLE_EPSILONS] + ["pdts"]
    pbp = PbpSettings(hidden=tuple(hidden), epochs=epochs)
    jobs = []
    for rep in range(reps):
        rep_seed = derive_seed(seed, rep)
        lib_seed = derive_seed(seed, "library", rep)
        make_pool = (lambda s=lib_seed: synthetic_library_pool(s, n_candidates, dim, structure))
        for label in labels:
            config = CampaignConfig(
                method="pdts" if label == "pdts" else "eps-greedy",
                surrogate="pbp",
                batch_size=batch_size,
                n_iterations=n_iterations,
                seed=rep_seed,
                epsilon=0.0 if label == "pdts" else float(label.split("-")[1]),
                metric="recall-top",
                recall_fraction=recall_fraction,
                pbp=pbp,
            )
            jobs.append((label, rep, config, make_pool))
    params = {"suite": "eps-table1", "seed": seed, "reps": reps,
              "n_candidates": n_candidates, "dim": dim, "batch_size": batch_size,
              "n_iterations": n_iterations, "hidden": list(hidden), "epochs": epochs,
              "recall_fraction": recall_fraction, "structure": structure}
    rows = _suite_campaigns(jobs, out, _bench_hash(params), seed)

    finals = np.zeros((reps, len(labels)))
    by_key: dict[str, list] = {}
    for row in rows:
        by_key.setdefault(row["method"], []).append((row["seed"], row["iteration"], row["value"]))
    rep_seeds = [derive_seed(seed, rep) for rep in range(reps)]
    for j, label in enumerate(labels):
        per_seed: dict[int, tuple] = {}
        for mseed, t, value in by_key[label]:
            if mseed not in per_seed or t > per_seed[mseed][0]:
                per_seed[mseed] = (t, value)
        for i, rs in enumerate(rep_seeds):
            finals[i, j] = per_seed[rs][1]
    mean_rank, se = average_rank(finals, higher_better=True)

    table_lines = [f"{'method':<12}{'mean rank':>12}{'se':>10}"]
    for j, label in enumerate(labels):
        table_lines.append(f"{label:<12}{mean_rank[j]:>12.3f}{se[j]:>10.3f}")
    table = "\n".join(table_lines)
    with open(os.path.join(out, "rank_table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(table)
    return {"labels": labels, "mean_rank": mean_rank, "se": se, "rows": rows}


def cmd_bench(suite: str, out: str | None, seed: int, overrides: dict) -> int:
    if suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return 2
    out = out or f"bench-{suite}"
    try:
        if suite == "gp-figure3":
            bench_gp_figure3(out, seed=seed, **overrides)
        elif suite == "screening-figure4":
            bench_screening_figure4(out, seed=seed, **overrides)
        else:
            bench_eps_table1(out, seed=seed, **overrides)
    except BatchScreenError as exc:
        print(f"suite failed: {exc}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def _rows_from_traces(out_dir: str) -> list[dict]:
    import glob as _glob
    from .engine import read_trace_records

    rows: list[dict] = []
    for path in sorted(_glob.glob(os.path.join(out_dir, "trace_*_rep*.jsonl"))):
        base = os.path.basename(path)[len("trace_"):-len(".jsonl")]
        method, _, rep = base.rpartition("_rep")
        evals = 0
        for rec in read_trace_records(path):
            evals += len(rec["ids"])
            rows.append({
                "method": method, "seed": int(rep), "iteration": rec["t"], "evals": evals,
                "metric_name": rec["metric_name"], "value": rec["metric_value"],
            })
    return rows


def cmd_report(out_dir: str) -> int:
    metrics_path = os.path.join(out_dir, "metrics.csv")
    if os.path.exists(metrics_path):
        rows = read_metrics_csv(metrics_path)
    elif os.path.isdir(out_dir):
        rows = _rows_from_traces(out_dir)
    else:
        rows = []
    if not rows:
        print(f"no traces or metrics found in {out_dir!r}", file=sys.stderr)
        return 2

    grouped: dict[tuple, list] = {}
    for row in rows:
        key = (row["method"], row["iteration"], row["metric_name"])
        grouped.setdefault(key, []).append((row["value"], row["evals"]))

    summary = []
    for (method, t, mname), pairs in sorted(grouped.items()):
        arr = np.asarray([p[0] for p in pairs], dtype=float)
        evals = max(p[1] for p in pairs)
        se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
        summary.append([method, t, evals, mname, float(arr.mean()), se, len(arr)])

    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("method,iteration,evals,metric_name,mean,se,n\n")
        for row in summary:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    finals: dict[str, tuple] = {}
    for method, t, evals, mname, mean, se, n in summary:
        if method not in finals or t > finals[method][0]:
            finals[method] = (t, evals, mname, mean, se, n)
    lines = [f"{'method':<14}{'iter':>6}{'evals':>8}  {'metric':<20}{'mean':>14}{'se':>12}{'n':>5}"]
    for method in sorted(finals):
        t, evals, mname, mean, se, n = finals[method]
        lines.append(f"{method:<14}{t:>6}{evals:>8}  {mname:<20}{mean:>14.6g}{se:>12.3g}{n:>5}")
    text = "\n".join(lines)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchscreen",
                                     description="batched Bayesian screening campaigns")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the campaigns described by a spec file")
    p_run.add_argument("spec", help="path to a JSON experiment spec")
    p_run.add_argument("--out", default=None, help="override the spec's output directory")

    p_bench = sub.add_parser("bench", help="run a benchmark suite at desk scale")
    p_bench.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--reps", type=int, default=None, help="override repetition count")
    p_bench.add_argument("--pool-size", type=int, default=None,
                         help="override library size / point count")
    p_bench.add_argument("--batch-size", type=int, default=None)
    p_bench.add_argument("--iterations", type=int, default=None)
    p_bench.add_argument("--epochs", type=int, default=None,
                         help="surrogate training epochs (pbp suites)")
    p_bench.add_argument("--grid-resolution", type=int, default=None,
                         help="grid side for 2-d objectives (gp-figure3)")
    p_bench.add_argument("--total-evals", type=int, default=None,
                         help="evaluation budget per campaign (gp-figure3)")
    p_bench.add_argument("--objectives", default=None,
                         help="comma-separated objective subset (gp-figure3)")

    p_report = sub.add_parser("report", help="aggregate traces in a directory")
    p_report.add_argument("dir")

    p_worker = sub.add_parser("worker", help="serve as a proposal worker")
    p_worker.add_argument("--listen", default="127.0.0.1:0",
                          help="host:port to bind (port 0 = ephemeral)")
    return parser


def _bench_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.epochs is not None and args.suite != "gp-figure3":
        overrides["epochs"] = args.epochs
    if args.suite == "gp-figure3":
        if args.grid_resolution is not None:
            overrides["grid_resolution"] = args.grid_resolution
        if args.total_evals is not None:
            overrides["total_evals"] = args.total_evals
        if args.pool_size is not None:
            overrides["n_points"] = args.pool_size
        if args.objectives is not None:
            overrides["objectives"] = tuple(args.objectives.split(","))
    else:
        if args.pool_size is not None:
            overrides["n_candidates"] = args.pool_size
        if args.iterations is not None:
            overrides["n_iterations"] = args.iterations
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.spec, args.out)
    if args.command == "bench":
        return cmd_bench(args.suite, args.out, args.seed, _bench_overrides(args))
    if args.command == "report":
        return cmd_report(args.dir)
    host, port = parse_listen_address(args.listen)
    serve_worker(host, port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
