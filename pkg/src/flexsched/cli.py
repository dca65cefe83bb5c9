"""Command-line front door: workload generation, simulation sweeps, reports.

Configuration is a single JSON file (schema documented in the README);
command-line flags override file values.  Exit codes: 0 on success, 2 for
configuration errors, 3 for simulation failures.  Re-running a command with
an identical configuration overwrites its outputs with identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .domain import ClusterSpec, ResourceVector, SimulationError, ValidationError
from .engine import SimResult, run
from .metrics import (
    allocation_stats,
    app_metrics,
    group_by_label,
    queue_stats,
    summarize,
)
from .policy import parse_policy
from .schedulers import SCHEDULER_NAMES
from .workload import (
    ClassTables,
    EmpiricalDistribution,
    WorkloadSpec,
    default_spec,
    generate,
    read_trace,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3

DEFAULT_CLUSTER = ClusterSpec(10, ResourceVector(32.0, 131072.0))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    cluster: ClusterSpec = DEFAULT_CLUSTER
    workload: WorkloadSpec | None = None  # None means: trace-driven
    trace: str | None = None
    schedulers: list[str] = field(default_factory=lambda: ["flexible"])
    policies: list[str] = field(default_factory=lambda: ["fifo"])
    preemption: list[bool] = field(default_factory=lambda: [False])
    seeds: list[int] = field(default_factory=lambda: [1])
    out: str = "results"
    jobs: int | None = None

    def validate(self) -> "ExperimentConfig":
        if not self.schedulers or not self.policies or not self.seeds:
            raise ConfigError("need at least one scheduler, one policy and one seed")
        for name in self.schedulers:
            if name not in SCHEDULER_NAMES:
                raise ConfigError(f"unknown scheduler {name!r}")
        for p in self.policies:
            try:
                parse_policy(p)
            except ValidationError as exc:
                raise ConfigError(str(exc)) from exc
        if any(self.preemption) and any(s != "flexible" for s in self.schedulers):
            raise ConfigError("preemption is only valid with the flexible scheduler")
        if self.trace is not None and not os.path.exists(self.trace):
            raise ConfigError(f"trace file not found: {self.trace}")
        if self.workload is None and self.trace is None:
            raise ConfigError("either a workload spec or a trace path is required")
        return self


def _dist_from_json(obj) -> EmpiricalDistribution:
    return EmpiricalDistribution.from_weights([(float(v), float(w)) for v, w in obj])


def _tables_from_json(obj: dict) -> ClassTables:
    return ClassTables(
        runtime=_dist_from_json(obj["runtime"]),
        n_core=_dist_from_json(obj["n_core"]),
        n_elastic=_dist_from_json(obj["n_elastic"]) if obj.get("n_elastic") else None,
        cpu=_dist_from_json(obj["cpu"]),
        ram_mb=_dist_from_json(obj["ram_mb"]),
        correlate_demand=bool(obj.get("correlate_demand", False)),
    )


def workload_from_json(obj: dict) -> WorkloadSpec:
    base = default_spec(
        n_apps=int(obj.get("n_apps", 1000)),
        seed=int(obj.get("seed", 1)),
        interactive_fraction=float(obj.get("interactive_fraction", 0.2)),
    )
    tables = dict(base.tables)
    for cls, t in obj.get("classes", {}).items():
        tables[cls] = _tables_from_json(t)
    interarrival = base.interarrival
    gaussian = None
    arrival = obj.get("arrival")
    if arrival:
        if "gaussian" in arrival:
            mu, sigma = arrival["gaussian"]
            interarrival, gaussian = None, (float(mu), float(sigma))
        elif "ecdf" in arrival:
            interarrival = _dist_from_json(arrival["ecdf"])
        else:
            raise ConfigError("arrival must contain 'ecdf' or 'gaussian'")
    return WorkloadSpec(
        n_apps=base.n_apps,
        seed=base.seed,
        interactive_fraction=base.interactive_fraction,
        rigid_fraction=float(obj.get("rigid_fraction", base.rigid_fraction)),
        interarrival=interarrival,
        gaussian_arrivals=gaussian,
        tables=tables,
        fit_mode=obj.get("fit_mode", base.fit_mode),
    )


def load_config(path: str | None, args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    data: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if "cluster" in data:
        c = data["cluster"]
        cfg.cluster = ClusterSpec(
            int(c.get("n_machines", 10)),
            ResourceVector(float(c.get("cpu", 32.0)), float(c.get("ram_mb", 131072.0))),
        )
    wl = data.get("workload", {})
    if "trace" in wl:
        cfg.trace = wl["trace"]
    elif wl:
        try:
            cfg.workload = workload_from_json(wl)
        except (ValidationError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad workload spec: {exc}") from exc
    cfg.schedulers = list(data.get("schedulers", cfg.schedulers))
    cfg.policies = list(data.get("policies", cfg.policies))
    pre = data.get("preemption", cfg.preemption)
    cfg.preemption = [bool(p) for p in (pre if isinstance(pre, list) else [pre])]
    cfg.seeds = [int(s) for s in data.get("seeds", cfg.seeds)]
    cfg.out = data.get("out", cfg.out)
    # flags override file values
    if getattr(args, "trace", None):
        cfg.trace, cfg.workload = args.trace, None
    if getattr(args, "scheduler", None):
        cfg.schedulers = args.scheduler
    if getattr(args, "policy", None):
        cfg.policies = args.policy
    if getattr(args, "preemption", None):
        cfg.preemption = [args.preemption == "on"]
    if getattr(args, "seed", None):
        cfg.seeds = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    if cfg.workload is None and cfg.trace is None:
        n = getattr(args, "apps", None) or 1000
        cfg.workload = default_spec(n_apps=int(n), seed=cfg.seeds[0])
    elif getattr(args, "apps", None) and cfg.workload is not None:
        cfg.workload = workload_from_json({"n_apps": args.apps, "seed": cfg.workload.seed})
    return cfg


# -- genload ---------------------------------------------------------------


def cmd_genload(cfg: ExperimentConfig, out_path: str) -> int:
    if cfg.workload is None:
        raise ConfigError("genload needs an inline workload spec, not a trace")
    requests = generate(cfg.workload, cfg.cluster)
    write_trace(out_path, requests)
    counts: dict[str, int] = {}
    for r in requests:
        counts[r.app_class] = counts.get(r.app_class, 0) + 1
    print(f"wrote {len(requests)} requests to {out_path}")
    for cls in sorted(counts):
        print(f"  {cls}: {counts[cls]}")
    if requests:
        cpu = [r.per_component.cpu for r in requests]
        ram = [r.per_component.ram for r in requests]
        comps = [r.total_components for r in requests]
        print(f"  per-component cpu {min(cpu)}..{max(cpu)}, ram {min(ram)}..{max(ram)} MB")
        print(f"  components per request {min(comps)}..{max(comps)}")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def _cell_name(scheduler: str, policy: str, preemption: bool, seed: int) -> str:
    tag = "-preempt" if preemption else ""
    return f"{scheduler}-{parse_policy(policy).name}{tag}-s{seed}"


def _workload_for_seed(cfg: ExperimentConfig, seed: int):
    if cfg.trace is not None:
        requests = read_trace(cfg.trace)
        with open(cfg.trace, "rb") as fh:
            checksum = hashlib.sha256(fh.read()).hexdigest()
        return requests, checksum
    spec = cfg.workload
    spec = WorkloadSpec(
        n_apps=spec.n_apps,
        seed=seed,
        interactive_fraction=spec.interactive_fraction,
        rigid_fraction=spec.rigid_fraction,
        interarrival=spec.interarrival,
        gaussian_arrivals=spec.gaussian_arrivals,
        tables=spec.tables,
        fit_mode=spec.fit_mode,
    )
    requests = generate(spec, cfg.cluster)
    blob = "\n".join(
        f"{r.id},{r.submit_time!r},{r.app_class},{r.n_core},{r.n_elastic},"
        f"{r.per_component.cpu!r},{r.per_component.ram!r},{r.nominal_runtime!r}"
        for r in requests
    )
    return requests, hashlib.sha256(blob.encode()).hexdigest()


def write_apps_csv(path: str, result: SimResult) -> None:
    metrics = app_metrics(result)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "class", "submit_time_s", "start_time_s", "finish_time_s",
             "turnaround_s", "queuing_s", "slowdown"]
        )
        for m in metrics:
            writer.writerow(
                [m.id, m.app_class, repr(m.submit), repr(m.start), repr(m.finish),
                 repr(m.turnaround), repr(m.queuing), repr(m.slowdown)]
            )


def write_timeseries_csv(path: str, result: SimResult) -> None:
    s = result.series
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "cpu_alloc_frac", "ram_alloc_frac", "pending", "running"])
        for i, t in enumerate(s.times):
            writer.writerow(
                [repr(t), repr(s.cpu_frac[i]), repr(s.ram_frac[i]), s.pending[i], s.running[i]]
            )


def summary_payload(result: SimResult, checksum: str) -> dict:
    metrics = app_metrics(result)
    by_label = group_by_label(metrics)
    by_label["all"] = metrics
    payload: dict = {
        "meta": {
            "scheduler": result.scheduler,
            "policy": result.policy,
            "preemption": result.preemption,
            "seed": result.seed,
            "cluster": {
                "n_machines": result.cluster.n_machines,
                "cpu": result.cluster.per_machine.cpu,
                "ram_mb": result.cluster.per_machine.ram,
            },
            "workload_checksum": checksum,
            "apps": len(result.records),
            "rejected": len(result.rejected),
            "makespan": result.makespan,
        },
        "metrics": {},
        "allocation": {k: s.as_dict() for k, s in allocation_stats(result).items()},
        "queues": {k: s.as_dict() for k, s in queue_stats(result).items()},
    }
    for metric in ("turnaround", "queuing", "slowdown"):
        payload["metrics"][metric] = {}
        for label, ms in sorted(by_label.items()):
            if ms:
                s = summarize([getattr(m, metric) for m in ms])
                payload["metrics"][metric][label] = s.as_dict()
    return payload


def _run_cell(cfg: ExperimentConfig, scheduler: str, policy: str,
              preemption: bool, seed: int) -> tuple[str, str | None]:
    name = _cell_name(scheduler, policy, preemption, seed)
    try:
        requests, checksum = _workload_for_seed(cfg, seed)
        result = run(
            requests,
            cfg.cluster,
            scheduler=scheduler,
            policy=policy,
            preemption=preemption,
            seed=seed,
        )
        cell_dir = os.path.join(cfg.out, name)
        os.makedirs(cell_dir, exist_ok=True)
        write_apps_csv(os.path.join(cell_dir, "apps.csv"), result)
        write_timeseries_csv(os.path.join(cell_dir, "timeseries.csv"), result)
        with open(os.path.join(cell_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary_payload(result, checksum), fh, sort_keys=True, indent=1)
            fh.write("\n")
        return name, None
    except (ValidationError, SimulationError) as exc:
        return name, str(exc)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    cells = [
        (scheduler, policy, preemption, seed)
        for scheduler in cfg.schedulers
        for policy in cfg.policies
        for preemption in cfg.preemption
        for seed in cfg.seeds
    ]
    os.makedirs(cfg.out, exist_ok=True)
    jobs = cfg.jobs or os.cpu_count() or 1
    failures = []
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, cfg, *cell) for cell in cells]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_cell(cfg, *cell) for cell in cells]
    for name, err in outcomes:
        if err is None:
            print(f"cell {name}: ok")
        else:
            print(f"cell {name}: FAILED: {err}", file=sys.stderr)
            failures.append(name)
    return EXIT_SIMULATION if failures else EXIT_OK


# -- report ------------------------------------------------------------------


def cmd_report(cell_dirs: list[str], out_dir: str) -> int:
    if not cell_dirs:
        raise ConfigError("report needs at least one result cell directory")
    summaries = []
    for d in cell_dirs:
        path = os.path.join(d, "summary.json")
        try:
            with open(path, encoding="utf-8") as fh:
                summaries.append((os.path.basename(os.path.normpath(d)), json.load(fh)))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    checksums = {s["meta"]["workload_checksum"] for _, s in summaries}
    mismatched = len(checksums) > 1
    if mismatched:
        print("warning: compared cells ran different workloads", file=sys.stderr)
    os.makedirs(out_dir, exist_ok=True)
    long_path = os.path.join(out_dir, "report.csv")
    with open(long_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cell", "scheduler", "policy", "preemption", "seed",
             "metric", "class", "stat", "value", "workload_mismatch"]
        )
        for name, s in summaries:
            meta = s["meta"]
            rows = [("allocation", dim, stats) for dim, stats in s["allocation"].items()]
            rows += [("queue_size", q, stats) for q, stats in s["queues"].items()]
            for metric, groups in s["metrics"].items():
                rows += [(metric, label, stats) for label, stats in groups.items()]
            for metric, label, stats in rows:
                for stat, value in sorted(stats.items()):
                    writer.writerow(
                        [name, meta["scheduler"], meta["policy"], meta["preemption"],
                         meta["seed"], metric, label, stat, repr(float(value)), mismatched]
                    )
    ratio_path = os.path.join(out_dir, "ratios.csv")
    base_name, base = summaries[0]
    with open(ratio_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["baseline", "cell", "metric", "class", "stat", "ratio", "workload_mismatch"]
        )
        for name, s in summaries[1:]:
            for metric, groups in s["metrics"].items():
                for label, stats in groups.items():
                    ref = base["metrics"].get(metric, {}).get(label)
                    if ref is None:
                        continue
                    for stat, value in sorted(stats.items()):
                        if stat == "count" or ref[stat] == 0:
                            continue
                        writer.writerow(
                            [base_name, name, metric, label, stat,
                             repr(float(value) / float(ref[stat])), mismatched]
                        )
    print(f"wrote {long_path} and {ratio_path}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexsched",
        description="Trace-driven simulator for scheduling applications "
        "with core and elastic components.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="output directory (or trace path for genload)")
    common.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
    common.add_argument("--scheduler", action="append", choices=SCHEDULER_NAMES,
                        help="scheduler to run (repeatable)")
    common.add_argument("--policy", action="append", help="sorting policy (repeatable)")
    common.add_argument("--preemption", choices=["on", "off"], help="preemption flag")
    common.add_argument("--trace", help="request trace CSV to simulate")
    common.add_argument("--apps", type=int, help="number of requests to generate")
    common.add_argument("--jobs", type=int, help="parallel simulation processes")

    gen = sub.add_parser("genload", parents=[common], help="generate a workload trace")
    gen.add_argument("path", nargs="?", default="workload.csv", help="output trace path")
    sub.add_parser("simulate", parents=[common], help="run the configured sweep")
    rep = sub.add_parser("report", parents=[common], help="compare result cells")
    rep.add_argument("cells", nargs="*", help="result cell directories")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "genload":
            cfg = load_config(args.config, args).validate()
            return cmd_genload(cfg, args.path)
        if args.command == "simulate":
            cfg = load_config(args.config, args).validate()
            return cmd_simulate(cfg)
        cells = args.cells
        if not cells and args.config:
            cfg = load_config(args.config, args).validate()
            cells = sorted(
                os.path.join(cfg.out, d)
                for d in os.listdir(cfg.out)
                if os.path.isdir(os.path.join(cfg.out, d))
            )
        return cmd_report(cells, args.out or "report")
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
